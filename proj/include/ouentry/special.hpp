#pragma once

#include "ouentry/model.hpp"

namespace ouentry::special {

/// Euler Gamma for z > 0 (Lanczos rational approximation).
double gamma_fn(double z);

/// Log of Gamma for z > 0.
double log_gamma(double z);

struct CylinderEval {
    double log_value;   // log D_alpha(x); D_alpha > 0 for alpha < 0
    double dlog_dx;     // d/dx log D_alpha(x)
    double err_est;     // relative agreement of the last two refinement levels
    int nodes;          // quadrature nodes at convergence
};

/// Parabolic cylinder function D_alpha(x) for alpha < 0, via adaptive trapezoid
/// quadrature of the integral representation after the substitution t = e^v.
/// The log-integrand maximum is extracted before quadrature, so arbitrarily
/// large |x| stays in range.
CylinderEval cylinder_d_eval(double alpha, double x);

/// Convenience: D_alpha(x) itself. Throws on alpha >= 0; may overflow for very
/// negative x (use cylinder_d_eval for log-scale work).
double cylinder_d(double alpha, double x);

/// Fundamental solutions phi (decreasing) and psi (increasing) of
/// (sigma^2/2) f'' + theta (mu - x) f' = rate * f, built from D_{-rate/theta}.
class FundamentalPair {
  public:
    FundamentalPair(const ModelParams& p, double rate);

    double log_phi(double x) const;
    double log_psi(double x) const;
    double dlog_phi(double x) const;  // phi'/phi
    double dlog_psi(double x) const;  // psi'/psi

    double phi(double x) const;
    double psi(double x) const;
    double dphi(double x) const;
    double dpsi(double x) const;

    struct LogEval {
        double log_value;
        double dlog;
    };
    /// log value and logarithmic derivative from a single quadrature pass.
    LogEval log_phi_eval(double x) const;
    LogEval log_psi_eval(double x) const;

    double rate() const { return rate_; }

  private:
    double mu_, theta_, sigma_, rate_;
    double alpha_;  // -rate/theta
    double scale_;  // sqrt(2 theta)/sigma
};

/// F(x) = psi(x)/phi(x), strictly increasing.
double f_ratio(const FundamentalPair& fp, double x);

/// F1(xi, zeta) = psi(xi) phi(zeta) - psi(zeta) phi(xi).
double f1(const FundamentalPair& fp, double xi, double zeta);

/// F2(xi, zeta) = psi'(xi) phi(zeta) - psi(zeta) phi'(xi).
double f2(const FundamentalPair& fp, double xi, double zeta);

}  // namespace ouentry::special
