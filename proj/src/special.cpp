#include "ouentry/special.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>
#include <vector>

#include "ouentry/numerics.hpp"

namespace ouentry::special {

namespace {

// Lanczos g=7, n=9 coefficients (Godfrey's tabulation).
constexpr double kLanczosG = 7.0;
constexpr double kLanczos[9] = {
    0.99999999999980993,     676.5203681218851,     -1259.1392167224028,
    771.32342877765313,      -176.61502916214059,   12.507343278686905,
    -0.13857109526572012,    9.9843695780195716e-6, 1.5056327351493116e-7};

}  // namespace

double log_gamma(double z) {
    if (!(z > 0.0)) {
        std::ostringstream os;
        os << "gamma_fn: argument must be > 0, got " << z;
        throw std::invalid_argument(os.str());
    }
    if (z < 0.5) {
        // Reflection keeps the series argument away from small z.
        return std::log(M_PI / std::sin(M_PI * z)) - log_gamma(1.0 - z);
    }
    const double zz = z - 1.0;
    double acc = kLanczos[0];
    for (int i = 1; i < 9; ++i) acc += kLanczos[i] / (zz + i);
    const double t = zz + kLanczosG + 0.5;
    return 0.5 * std::log(2.0 * M_PI) + (zz + 0.5) * std::log(t) - t + std::log(acc);
}

double gamma_fn(double z) { return std::exp(log_gamma(z)); }

CylinderEval cylinder_d_eval(double alpha, double x) {
    if (!(alpha < 0.0)) {
        std::ostringstream os;
        os << "cylinder_d: order must be < 0, got " << alpha;
        throw std::invalid_argument(os.str());
    }
    // I(alpha,x) = int_0^inf t^{-alpha-1} e^{-t^2/2 - x t} dt, substituted t = e^v:
    //   I = int_R e^{g(v)} dv,  g(v) = -alpha v - e^{2v}/2 - x e^v.
    // J/I with J = int t e^{g} gives the derivative through
    //   d/dx log D = -x/2 - J/I.
    const auto g = [&](double v) {
        const double w = std::exp(v);
        return -alpha * v - 0.5 * w * w - x * w;
    };
    // Peak of g: w* solves w^2 + x w + alpha = 0 (positive root exists, alpha<0).
    const double wstar = 0.5 * (-x + std::sqrt(x * x - 4.0 * alpha));
    const double vstar = std::log(wstar);
    const double gstar = g(vstar);

    // Truncate where the integrand has decayed by e^{-120}.
    constexpr double kDrop = 120.0;
    double lo = vstar - 1.0;
    while (g(lo) - gstar > -kDrop) lo -= 1.0;
    double hi = vstar + 1.0;
    while (g(hi) - gstar > -kDrop) hi += 0.5;

    constexpr double kTol = 1e-12;
    double prev_i = 0.0, prev_j = 0.0, cur_i = 0.0, cur_j = 0.0, err = 1.0;
    int n = 128;
    const int n_max = 1 << 22;
    for (; n <= n_max; n *= 2) {
        const double h = (hi - lo) / n;
        num::KahanSum si, sj;
        for (int i = 0; i <= n; ++i) {
            const double v = lo + h * i;
            const double e = std::exp(g(v) - gstar);
            const double w = (i == 0 || i == n) ? 0.5 : 1.0;
            si.add(w * e);
            sj.add(w * e * std::exp(v));
        }
        cur_i = si.value() * h;
        cur_j = sj.value() * h;
        if (prev_i != 0.0) {
            const double ei = std::abs(cur_i - prev_i) / std::abs(cur_i);
            const double ej = std::abs(cur_j - prev_j) / std::abs(cur_j);
            err = std::max(ei, ej);
            if (err <= kTol) break;
        }
        prev_i = cur_i;
        prev_j = cur_j;
    }
    if (err > 1e-9) {
        std::ostringstream os;
        os << "cylinder_d: quadrature did not converge (alpha=" << alpha << ", x=" << x
           << "), achieved relative error " << err;
        throw num::ConvergenceError(os.str());
    }

    CylinderEval out;
    out.log_value = -0.25 * x * x - log_gamma(-alpha) + gstar + std::log(cur_i);
    out.dlog_dx = -0.5 * x - cur_j / cur_i;
    out.err_est = err;
    out.nodes = n;
    return out;
}

double cylinder_d(double alpha, double x) { return std::exp(cylinder_d_eval(alpha, x).log_value); }

FundamentalPair::FundamentalPair(const ModelParams& p, double rate)
    : mu_(p.mu), theta_(p.theta), sigma_(p.sigma), rate_(rate) {
    if (!(rate > 0.0)) throw std::invalid_argument("FundamentalPair: rate must be > 0");
    alpha_ = -rate_ / theta_;
    scale_ = std::sqrt(2.0 * theta_) / sigma_;
}

double FundamentalPair::log_phi(double x) const {
    const double d = x - mu_;
    return theta_ * d * d / (2.0 * sigma_ * sigma_) + cylinder_d_eval(alpha_, d * scale_).log_value;
}

double FundamentalPair::log_psi(double x) const {
    const double d = x - mu_;
    return theta_ * d * d / (2.0 * sigma_ * sigma_) +
           cylinder_d_eval(alpha_, -d * scale_).log_value;
}

double FundamentalPair::dlog_phi(double x) const {
    const double d = x - mu_;
    return theta_ * d / (sigma_ * sigma_) + scale_ * cylinder_d_eval(alpha_, d * scale_).dlog_dx;
}

double FundamentalPair::dlog_psi(double x) const {
    const double d = x - mu_;
    return theta_ * d / (sigma_ * sigma_) - scale_ * cylinder_d_eval(alpha_, -d * scale_).dlog_dx;
}

FundamentalPair::LogEval FundamentalPair::log_phi_eval(double x) const {
    const double d = x - mu_;
    const auto e = cylinder_d_eval(alpha_, d * scale_);
    return {theta_ * d * d / (2.0 * sigma_ * sigma_) + e.log_value,
            theta_ * d / (sigma_ * sigma_) + scale_ * e.dlog_dx};
}

FundamentalPair::LogEval FundamentalPair::log_psi_eval(double x) const {
    const double d = x - mu_;
    const auto e = cylinder_d_eval(alpha_, -d * scale_);
    return {theta_ * d * d / (2.0 * sigma_ * sigma_) + e.log_value,
            theta_ * d / (sigma_ * sigma_) - scale_ * e.dlog_dx};
}

double FundamentalPair::phi(double x) const { return std::exp(log_phi(x)); }
double FundamentalPair::psi(double x) const { return std::exp(log_psi(x)); }
double FundamentalPair::dphi(double x) const { return dlog_phi(x) * phi(x); }
double FundamentalPair::dpsi(double x) const { return dlog_psi(x) * psi(x); }

double f_ratio(const FundamentalPair& fp, double x) {
    return std::exp(fp.log_psi(x) - fp.log_phi(x));
}

double f1(const FundamentalPair& fp, double xi, double zeta) {
    return fp.psi(xi) * fp.phi(zeta) - fp.psi(zeta) * fp.phi(xi);
}

double f2(const FundamentalPair& fp, double xi, double zeta) {
    return fp.dpsi(xi) * fp.phi(zeta) - fp.psi(zeta) * fp.dphi(xi);
}

}  // namespace ouentry::special
