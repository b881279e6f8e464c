#pragma once

#include <array>

#include "ouentry/model.hpp"
#include "ouentry/special.hpp"

namespace ouentry {

/// Exact OU transition over a fixed time step.
struct OUTransition {
    double dt = 0.0;
    double mean_coeff = 0.0;  // e^{-theta dt}
    double step_sd = 0.0;     // sqrt(sigma^2 (1 - e^{-2 theta dt}) / (2 theta))

    static OUTransition make(const ModelParams& p, double dt);
    double step_var() const { return step_sd * step_sd; }
};

/// X_{t+dt} = mu + (x - mu) mean_coeff + step_sd * z; exact in distribution.
inline double exact_step(double x, double mu, const OUTransition& t, double z) {
    return mu + (x - mu) * t.mean_coeff + t.step_sd * z;
}

/// Central-difference approximation of the generator
/// (L f)(x) = sigma^2/2 f''(x) + theta (mu - x) f'(x)
/// from samples {f(x-h), f(x), f(x+h)}.
double generator_apply(const ModelParams& p, const std::array<double, 3>& f_vals, double x,
                       double h);

/// E[e^{-rate tau_y}] = phi_rate(x)/phi_rate(y) for x >= y, psi ratio otherwise.
double hitting_laplace(const special::FundamentalPair& fp, double x, double y);
double hitting_laplace(const ModelParams& p, double x, double y, double rate);

}  // namespace ouentry
