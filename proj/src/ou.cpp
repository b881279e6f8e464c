#include "ouentry/ou.hpp"

#include <cmath>
#include <stdexcept>

namespace ouentry {

OUTransition OUTransition::make(const ModelParams& p, double dt) {
    if (!(dt > 0.0)) throw std::invalid_argument("OUTransition: dt must be > 0");
    OUTransition t;
    t.dt = dt;
    t.mean_coeff = std::exp(-p.theta * dt);
    t.step_sd = std::sqrt(p.sigma * p.sigma * (1.0 - std::exp(-2.0 * p.theta * dt)) /
                          (2.0 * p.theta));
    return t;
}

double generator_apply(const ModelParams& p, const std::array<double, 3>& f, double x, double h) {
    const double d2 = (f[2] - 2.0 * f[1] + f[0]) / (h * h);
    const double d1 = (f[2] - f[0]) / (2.0 * h);
    return 0.5 * p.sigma * p.sigma * d2 + p.theta * (p.mu - x) * d1;
}

double hitting_laplace(const special::FundamentalPair& fp, double x, double y) {
    if (x == y) return 1.0;
    if (x > y) return std::exp(fp.log_phi(x) - fp.log_phi(y));
    return std::exp(fp.log_psi(x) - fp.log_psi(y));
}

double hitting_laplace(const ModelParams& p, double x, double y, double rate) {
    const special::FundamentalPair fp(p, rate);
    return hitting_laplace(fp, x, y);
}

}  // namespace ouentry
