#include "ouentry/investment.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace ouentry {

namespace {

double g_aux(const ModelParams& p, double x, double c) {
    const double kc = k_of(p, c);
    return p.mu * (kc - p.theta) / p.lambda + kc * (x - p.mu) / (p.lambda + p.theta);
}

/// Scan [lo, ub] for the sign change of f; on failure push lo down (or hi up)
/// geometrically within the widest admissible window.
template <class F>
double bracketed_root(F&& f, double lo, double ub, double widest_lo, double tol, int scan_n,
                      const char* what) {
    double cur_lo = lo;
    for (int attempt = 0; attempt < 8; ++attempt) {
        if (auto br = num::scan_bracket(f, cur_lo, ub, scan_n)) {
            return num::brent(f, br->first, br->second, tol);
        }
        const double span = ub - cur_lo;
        cur_lo = ub - 2.0 * span;
        if (cur_lo < widest_lo) {
            if (ub - widest_lo <= span) break;
            cur_lo = widest_lo;
        }
    }
    std::ostringstream os;
    os << what << ": no sign change in (" << cur_lo << ", " << ub << ")";
    throw num::BracketError(os.str());
}

}  // namespace

double solve_beta_star(const ModelParams& p, const special::FundamentalPair& fp, double c,
                       const SolveOptions& opt) {
    const double kc = k_of(p, c);
    if (!(kc > 0.0)) throw std::invalid_argument("solve_beta_star: requires the reflecting regime");
    const double x0 = -p.theta * p.mu * p.penalty.deriv(c) / kc;
    const double xhat0 = p.theta * p.mu / kc;
    const double ub = std::min(x0, xhat0) - 1e-12;
    const double gx = kc / (p.lambda + p.theta);
    const auto f = [&](double x) { return gx - g_aux(p, x, c) * fp.dlog_phi(x); };
    const double sd = p.stationary_sd();
    return bracketed_root(f, ub - 4.0 * sd, ub, p.mu - opt.x_window_sds * sd, opt.root_tol,
                          opt.scan_points, "solve_beta_star");
}

double solve_gamma_star(const ModelParams& p, const special::FundamentalPair& fp, double c,
                        const SolveOptions& opt) {
    const double k1 = k_of(p, 1.0);
    if (!(k1 < 0.0)) throw std::invalid_argument("solve_gamma_star: requires the repelling regime");
    // Pasting condition divided by (1-c): finite at c = 1 as well.
    const double phi_gap = p.penalty.value_div_gap(c);
    const double sum = p.lambda + p.theta;
    const auto f = [&](double g) {
        const double a_gap = g - p.lambda * phi_gap * ((g - p.mu) / sum + p.mu / p.lambda);
        return a_gap * fp.dlog_psi(g) + p.lambda * phi_gap / sum - 1.0;
    };
    // Lower bound from Prop 2.2-ii when zeta(c) != 0; fall back to the window edge.
    const double sd = p.stationary_sd();
    double lb = p.mu - opt.x_window_sds * sd;
    const double zc = zeta_of(p, c);
    if (zc != 0.0) {
        const double xtilde = p.theta * p.mu * (1.0 - c) / zc;
        const double xbar0 = p.theta * p.mu * p.penalty.value(c) / zc;
        lb = std::max(xtilde, xbar0);
    }
    const double hi_max = p.mu + opt.x_window_sds * sd;
    double hi = std::min(p.mu + 6.0 * sd, hi_max);
    for (int attempt = 0; attempt < 8; ++attempt) {
        if (auto br = num::scan_bracket(f, lb + 1e-11, hi, opt.scan_points)) {
            return num::brent(f, br->first, br->second, opt.root_tol);
        }
        if (hi >= hi_max) break;
        hi = std::min(lb + 2.0 * (hi - lb), hi_max);
    }
    std::ostringstream os;
    os << "solve_gamma_star: no sign change in (" << lb << ", " << hi << ") at c=" << c;
    throw num::BracketError(os.str());
}

ControlBoundary::ControlBoundary(const ModelParams& p, Regime regime, const SolveOptions& opt)
    : params_(p), regime_(regime), opt_(opt), pair_lambda_(p, p.lambda) {}

ControlBoundary ControlBoundary::tabulate(const ModelParams& p, const RegimeInfo& info,
                                          const SolveOptions& opt) {
    if (info.regime == Regime::Unsupported) {
        throw std::invalid_argument(
            "ControlBoundary: regime Unsupported (k changes sign on [0,1]; the open case)");
    }
    ControlBoundary cb(p, info.regime, opt);
    const int n = opt.c_grid_n;
    cb.c_.resize(n);
    cb.b_.resize(n);
    std::vector<std::string> errors(n);

#ifdef _OPENMP
#pragma omp parallel for schedule(dynamic) if (opt.parallel)
#endif
    for (int i = 0; i < n; ++i) {
        const double c = static_cast<double>(i) / (n - 1);
        cb.c_[i] = c;
        try {
            cb.b_[i] = (info.regime == Regime::Reflecting)
                           ? solve_beta_star(p, cb.pair_lambda_, c, opt)
                           : solve_gamma_star(p, cb.pair_lambda_, c, opt);
        } catch (const std::exception& e) {
            errors[i] = e.what();
        }
    }
    for (int i = 0; i < n; ++i) {
        if (!errors[i].empty()) {
            throw num::ConvergenceError("ControlBoundary: node c=" + std::to_string(cb.c_[i]) +
                                        " failed: " + errors[i]);
        }
    }
    cb.interp_ = num::Pchip(cb.c_, cb.b_);
    return cb;
}

double ControlBoundary::solve_exact(double c) const {
    return (regime_ == Regime::Reflecting) ? solve_beta_star(params_, pair_lambda_, c, opt_)
                                           : solve_gamma_star(params_, pair_lambda_, c, opt_);
}

double ControlBoundary::g_star(double x) const {
    if (regime_ != Regime::Reflecting) {
        throw std::logic_error("g_star: defined for the reflecting boundary only");
    }
    const double b0 = b_.front();  // beta*(0)
    const double b1 = b_.back();   // beta*(1)
    if (x >= b0) return 0.0;
    if (x <= b1) return 1.0;
    return num::brent([&](double c) { return interp_(c) - x; }, 0.0, 1.0, 1e-14);
}

RepellingSlice::RepellingSlice(const ModelParams& p, const special::FundamentalPair& fp, double c,
                               double gamma_star)
    : fp_(&fp),
      mu_(p.mu),
      theta_(p.theta),
      lambda_(p.lambda),
      c_(c),
      gamma_(gamma_star),
      phi_c_(p.penalty.value(c)) {
    const double sum = lambda_ + theta_;
    coef_a_ = gamma_ * (1.0 - c_) - lambda_ * phi_c_ * ((gamma_ - mu_) / sum + mu_ / lambda_);
    log_psi_gamma_ = fp_->log_psi(gamma_);
}

double RepellingSlice::U(double x) const {
    if (x >= gamma_) return x * (1.0 - c_);
    const double sum = lambda_ + theta_;
    const double ratio = std::exp(fp_->log_psi(x) - log_psi_gamma_);
    return ratio * coef_a_ + lambda_ * phi_c_ * ((x - mu_) / sum + mu_ / lambda_);
}

double RepellingSlice::Ux(double x) const {
    if (x >= gamma_) return 1.0 - c_;
    const double ratio = std::exp(fp_->log_psi(x) - log_psi_gamma_);
    return ratio * fp_->dlog_psi(x) * coef_a_ + lambda_ * phi_c_ / (lambda_ + theta_);
}

double RepellingSlice::L(double x) const {
    if (x > gamma_) return (1.0 - c_) * (theta_ * (mu_ - x) - lambda_ * x);
    return -lambda_ * x * phi_c_;
}

std::pair<double, double> RepellingSlice::L_limits_at_gamma() const {
    return {-lambda_ * gamma_ * phi_c_,
            (1.0 - c_) * (theta_ * (mu_ - gamma_) - lambda_ * gamma_)};
}

double RepellingSlice::jump() const {
    return (1.0 - c_) * (theta_ * mu_ - (lambda_ + theta_) * gamma_) +
           lambda_ * gamma_ * phi_c_;
}

GainFunction::GainFunction(const ModelParams& p, const ControlBoundary& boundary)
    : params_(p), boundary_(&boundary) {
    if (boundary.regime() == Regime::Reflecting) {
        // Sigma on the boundary grid: per-interval adaptive quadrature of the
        // interpolated boundary, accumulated from c = 1 downward.
        const auto& cs = boundary.grid_c();
        const auto& fp = boundary.pair_lambda();
        const auto integrand = [&](double y) {
            const double by = boundary.at(y);
            return -g_aux(params_, by, y) * std::exp(-fp.log_phi(by));
        };
        const std::size_t n = cs.size();
        std::vector<double> sig(n, 0.0);
        for (std::size_t i = n - 1; i-- > 0;) {
            sig[i] = sig[i + 1] +
                     num::adaptive_simpson(integrand, cs[i], cs[i + 1], 1e-13);
        }
        sigma_ = num::Pchip(cs, sig);
    }
}

double GainFunction::g_of(double x, double c) const { return g_aux(params_, x, c); }

double GainFunction::u_value(double x, double c) const {
    if (regime() != Regime::Reflecting) {
        throw std::logic_error("u_value: reflecting regime only");
    }
    const double b = boundary_->solve_exact(c);
    if (x <= b) return 0.0;
    const auto& fp = boundary_->pair_lambda();
    return g_aux(params_, x, c) -
           g_aux(params_, b, c) * std::exp(fp.log_phi(x) - fp.log_phi(b));
}

double GainFunction::sigma_integral(double c) const {
    if (regime() != Regime::Reflecting) {
        throw std::logic_error("sigma_integral: reflecting regime only");
    }
    if (c >= 1.0) return 0.0;
    return sigma_(c);
}

std::pair<double, double> GainFunction::U_and_Ux(double x, double c) const {
    if (c >= 1.0) return {0.0, 0.0};
    if (regime() == Regime::Repelling) {
        const RepellingSlice s = slice_repelling(c);
        return {s.U(x), s.Ux(x)};
    }
    const double a = std::max(boundary_->g_star(x), c);
    const double sum = params_.lambda + params_.theta;
    const double phia = params_.penalty.value(a);
    const double sg = sigma_integral(a);
    double u = x * (a - c) + params_.lambda / sum * phia * (x + params_.mu * params_.theta / params_.lambda);
    double ux = (a - c) + params_.lambda / sum * phia;
    if (sg != 0.0) {
        const auto& fp = boundary_->pair_lambda();
        const double phix = fp.phi(x);
        u -= phix * sg;
        ux -= fp.dlog_phi(x) * phix * sg;
    }
    return {u, ux};
}

double GainFunction::reflecting_L(double x, double c) const {
    const double a = std::max(boundary_->g_star(x), c);
    return (params_.theta * params_.mu - (params_.lambda + params_.theta) * x) * (a - c) -
           params_.lambda * params_.penalty.value(a) * x;
}

double GainFunction::generator_image_L(double x, double c) const {
    if (regime() == Regime::Repelling) {
        return slice_repelling(c).L(x);
    }
    return reflecting_L(x, c);
}

std::pair<double, double> GainFunction::generator_limits_at_gamma(double c) const {
    if (regime() != Regime::Repelling) {
        throw std::logic_error("generator_limits_at_gamma: repelling regime only");
    }
    return slice_repelling(c).L_limits_at_gamma();
}

double GainFunction::jump_delta_L(double c) const {
    if (regime() != Regime::Repelling) {
        throw std::logic_error("jump_delta_L: repelling regime only");
    }
    const double j = slice_repelling(c).jump();
    if (!(j > 0.0)) {
        std::ostringstream os;
        os << "jump_delta_L: nonpositive jump " << j << " at c=" << c
           << " (boundary or regime inconsistent)";
        throw num::ConvergenceError(os.str());
    }
    return j;
}

double GainFunction::x0_of_c(double c) const {
    if (regime() != Regime::Reflecting) {
        throw std::logic_error("x0_of_c: reflecting regime only");
    }
    const double lp0 = params_.lambda * params_.p0;
    const auto f = [&](double x) { return reflecting_L(x, c) + lp0; };
    const double sd = params_.stationary_sd();
    const double w = boundary_->options().x_window_sds * sd;
    // L is strictly decreasing: +inf at -inf, -inf at +inf.
    const auto br = num::scan_bracket(f, params_.mu - w, params_.mu + w,
                                      boundary_->options().scan_points);
    if (!br) throw num::BracketError("x0_of_c: no sign change of L + lambda P0 in window");
    return num::brent(f, br->first, br->second, boundary_->options().root_tol);
}

RepellingSlice GainFunction::slice_repelling(double c) const {
    if (regime() != Regime::Repelling) {
        throw std::logic_error("slice_repelling: repelling regime only");
    }
    const double g = boundary_->solve_exact(c);
    return RepellingSlice(params_, boundary_->pair_lambda(), c, g);
}

}  // namespace ouentry
