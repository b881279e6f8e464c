#include "ouentry/entry.hpp"

#include <array>
#include <cmath>
#include <functional>
#include <limits>
#include <sstream>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace ouentry {

std::string to_string(EntryTopology t) {
    switch (t) {
        case EntryTopology::SingleThreshold: return "SingleThreshold";
        case EntryTopology::TripleBoundary: return "TripleBoundary";
        case EntryTopology::StopNowTrivial: return "StopNowTrivial";
    }
    return "?";
}

std::string to_string(RepellingCase k) {
    switch (k) {
        case RepellingCase::I: return "I";
        case RepellingCase::II: return "II";
        case RepellingCase::IIIa: return "IIIa";
        case RepellingCase::IIIb: return "IIIb";
        case RepellingCase::NA: return "";
    }
    return "?";
}

std::string to_string(ReflectingBranch b) {
    switch (b) {
        case ReflectingBranch::BelowCStar: return "c<c*";
        case ReflectingBranch::AtOrAboveCStar: return "c>=c*";
        case ReflectingBranch::NA: return "";
    }
    return "?";
}

EntrySolver::EntrySolver(const GainFunction& gain, const SolveOptions& opt)
    : gain_(&gain), opt_(opt) {}

double EntrySolver::solve_alpha_star(double c) const {
    const auto& p = gain_->params();
    if (gain_->regime() != Regime::Reflecting) {
        throw std::logic_error("solve_alpha_star: reflecting regime only");
    }
    if (!(c < 1.0)) throw std::invalid_argument("solve_alpha_star: needs c < 1");
    const double phic = p.penalty.value(c);
    const double sum = p.lambda + p.theta;
    const auto& fp = gain_->pair_lambda();
    const auto ghat = [&](double x) { return p.mu * phic + (x - p.mu) * p.lambda * phic / sum; };
    const auto f = [&](double x) {
        return -p.lambda * phic / sum + (ghat(x) - p.p0) * fp.dlog_phi(x);
    };
    const double xdag = p.mu + (p.p0 - p.mu * phic) * sum / (p.lambda * phic);
    const double ub = std::min(xdag, p.p0 / phic) - 1e-12;
    const double sd = p.stationary_sd();
    double lo = ub - 4.0 * sd;
    const double widest = std::min(p.mu, ub) - opt_.x_window_sds * sd;
    for (int attempt = 0; attempt < 40; ++attempt) {
        if (auto br = num::scan_bracket(f, lo, ub, opt_.scan_points)) {
            return num::brent(f, br->first, br->second, opt_.root_tol);
        }
        const double span = ub - lo;
        lo = ub - 2.0 * span;
        if (lo < widest) {
            if (ub - widest <= span) break;
            lo = widest;
        }
    }
    std::ostringstream os;
    os << "solve_alpha_star: no sign change below " << ub << " at c=" << c;
    throw num::BracketError(os.str());
}

double EntrySolver::gamma_small(double x, double c) const {
    const auto& p = gain_->params();
    const double a = solve_alpha_star(c);
    if (x <= a) return 0.0;
    const double phic = p.penalty.value(c);
    const double sum = p.lambda + p.theta;
    const auto ghat = [&](double v) { return p.mu * phic + (v - p.mu) * p.lambda * phic / sum; };
    const auto& fp = gain_->pair_lambda();
    return (p.p0 - ghat(x)) -
           (p.p0 - ghat(a)) * std::exp(fp.log_phi(x) - fp.log_phi(a));
}

std::optional<double> EntrySolver::c_star() const {
    if (c_star_cache_) return *c_star_cache_;
    if (gain_->regime() != Regime::Reflecting) {
        throw std::logic_error("c_star: reflecting regime only");
    }
    const auto d = [&](double c) {
        return gain_->boundary().solve_exact(c) - solve_alpha_star(c);
    };
    std::optional<double> result;
    // alpha* is strictly increasing with alpha*(c) -> +inf while beta* decreases,
    // so d has at most one sign change and d < 0 from some c upward. Walk the
    // upper endpoint toward 1 only until the sign flips; alpha* explodes as
    // c -> 1 and need not be evaluated there.
    if (d(0.0) > 0.0) {
        double c_hi = 0.0;
        for (double cand : {0.5, 0.75, 0.9, 0.97, 0.99, 0.997, 0.999, 0.9999}) {
            if (d(cand) < 0.0) {
                c_hi = cand;
                break;
            }
        }
        if (c_hi == 0.0) {
            throw num::ConvergenceError(
                "c_star: beta* - alpha* has no sign change up to c = 0.9999");
        }
        result = num::brent(d, 0.0, c_hi, 1e-12);
    }
    c_star_cache_ = result;
    return result;
}

double EntrySolver::hhat_residual(double x, double c) const {
    const auto [u, ux] = gain_->U_and_Ux(x, c);
    const auto& fp = gain_->pair_lambda();
    const double scaled = (u - gain_->params().p0) * fp.dlog_phi(x) - ux;
    const double lp = std::min(fp.log_phi(x), 600.0);
    return scaled * std::exp(lp);
}

EntryRecord EntrySolver::solve_entry_reflecting(double c) const {
    const auto& p = gain_->params();
    EntryRecord rec;
    rec.c = c;
    rec.topology = EntryTopology::SingleThreshold;

    const auto cs = c_star();
    if (!cs.has_value() || c >= *cs) {
        rec.rbranch = ReflectingBranch::AtOrAboveCStar;
        rec.l1 = solve_alpha_star(c);
        return rec;
    }
    rec.rbranch = ReflectingBranch::BelowCStar;

    const auto& fp = gain_->pair_lambda();
    const auto f = [&](double x) {
        const auto [u, ux] = gain_->U_and_Ux(x, c);
        return (u - p.p0) * fp.dlog_phi(x) - ux;
    };
    const double x0c = gain_->x0_of_c(c);
    const double sd = p.stationary_sd();
    const double lo = p.mu - opt_.x_window_sds * sd;
    const auto brackets = num::scan_all_brackets(f, lo, x0c - 1e-10, 400);
    if (brackets.empty()) {
        std::ostringstream os;
        os << "solve_entry_reflecting: no root of the smooth-fit equation below x0(c)=" << x0c
           << " at c=" << c;
        throw num::BracketError(os.str());
    }
    if (brackets.size() > 1) {
        std::ostringstream os;
        os << "solve_entry_reflecting: multiple smooth-fit roots at c=" << c << ":";
        for (const auto& [a, b] : brackets) os << " " << num::brent(f, a, b, opt_.root_tol);
        os << " (uniqueness violated; numerical trouble)";
        throw num::ConvergenceError(os.str());
    }
    rec.l1 = num::brent(f, brackets[0].first, brackets[0].second, opt_.root_tol);
    return rec;
}

double EntrySolver::script_f(const RepellingSlice& s, double x) const {
    const auto& fp = gain_->pair_lambda();
    return (s.U(x) - gain_->params().p0) * std::exp(-fp.log_phi(x));
}

double EntrySolver::fit_residual(const RepellingSlice& s, double x) const {
    const auto& fp = gain_->pair_lambda();
    return (s.U(x) - gain_->params().p0) * fp.dlog_phi(x) - s.Ux(x);
}

EntrySolver::FMin EntrySolver::minimize_script_f(const RepellingSlice& s, double lo,
                                                 double hi) const {
    constexpr int kScan = 64;  // 65-point coarse scan
    std::array<double, kScan + 1> xs, vs;
    for (int i = 0; i <= kScan; ++i) {
        xs[i] = lo + (hi - lo) * i / kScan;
        vs[i] = script_f(s, xs[i]);
    }
    int imin = 0;
    for (int i = 1; i <= kScan; ++i) {
        if (vs[i] < vs[imin]) imin = i;
    }
    if (imin == 0 || imin == kScan) {
        return {xs[imin], vs[imin], false};
    }
    const double xm = num::golden_min([&](double x) { return script_f(s, x); }, xs[imin - 1],
                                      xs[imin + 1], 1e-12 * std::max(1.0, std::abs(xs[imin])));
    return {xm, script_f(s, xm), true};
}

RepellingCase EntrySolver::classify_repelling_case(double c, double* m1_out,
                                                   double* m2_out) const {
    if (gain_->regime() != Regime::Repelling) {
        throw std::logic_error("classify_repelling_case: repelling regime only");
    }
    const auto& p = gain_->params();
    const RepellingSlice s = gain_->slice_repelling(c);
    const auto ref = reference_points(p, c);
    const double x10 = *ref.x1_0, x20 = *ref.x2_0;
    if (s.gamma() >= x20) return RepellingCase::I;
    if (s.gamma() <= x10) return RepellingCase::II;

    const double sd = p.stationary_sd();
    const FMin m1 = minimize_script_f(s, p.mu - opt_.x_window_sds * sd, x10);
    const FMin m2 = minimize_script_f(s, s.gamma(), x20);
    if (m1_out) *m1_out = m1.value;
    if (m2_out) *m2_out = m2.value;

    const double tie_tol = 1e-10 * std::max(1.0, std::abs(m1.value));
    if (std::abs(m1.value - m2.value) > tie_tol) {
        return (m1.value < m2.value) ? RepellingCase::IIIa : RepellingCase::IIIb;
    }
    // Near-tie: check the single-boundary condition of Lemma 5.5 pointwise,
    // with the candidate l* at the location of m1.
    const double fl = m1.value;
    constexpr int kGrid = 2000;
    const double hi = x20 + 4.0 * sd;
    for (int i = 0; i <= kGrid; ++i) {
        const double x = s.gamma() + (hi - s.gamma()) * i / kGrid;
        if (!(script_f(s, x) > fl)) return RepellingCase::IIIb;
    }
    return RepellingCase::IIIa;
}

double EntrySolver::unique_root(const std::function<double(double)>& f, double lo, double hi,
                                const char* what) const {
    const auto brackets = num::scan_all_brackets(f, lo, hi, 400);
    if (brackets.empty()) {
        std::ostringstream os;
        os << what << ": no sign change in (" << lo << ", " << hi << ")";
        throw num::BracketError(os.str());
    }
    if (brackets.size() > 1) {
        std::ostringstream os;
        os << what << ": multiple roots where a unique one is expected:";
        for (const auto& [a, b] : brackets) os << " " << num::brent(f, a, b, opt_.root_tol);
        throw num::ConvergenceError(os.str());
    }
    return num::brent(f, brackets[0].first, brackets[0].second, opt_.root_tol);
}

void EntrySolver::solve_triple(const RepellingSlice& s, double x10, double x20,
                               EntryRecord& rec) const {
    const auto& p = gain_->params();
    const auto& fp = gain_->pair_lambda();
    const double sd = p.stationary_sd();
    const double gamma = s.gamma();

    // l3 decouples: the smooth-fit equation restricted to (gamma, x20).
    const double z = unique_root([&](double x) { return fit_residual(s, x); }, gamma + 1e-9,
                                 x20 - 1e-10, "solve_entry_repelling[l3]");

    // 2x2 system for (x, y) = (l1, l2), multiplied through by F1(x,y) which is
    // nonzero for x < y. The box x < x10 < gamma < y keeps iterates off the
    // spurious diagonal x = y.
    struct Vals {
        double phi, dphi, psi, dpsi, u, ux;
    };
    const auto eval = [&](double x) -> Vals {
        const double lp = fp.log_phi(x), ls = fp.log_psi(x);
        const double ph = std::exp(lp), ps = std::exp(ls);
        return {ph, fp.dlog_phi(x) * ph, ps, fp.dlog_psi(x) * ps, s.U(x), s.Ux(x)};
    };
    const double p0 = p.p0;
    const auto residuals = [&](double x, double y, double* r1, double* r2) {
        const Vals a = eval(x), b = eval(y);
        const double f1v = a.psi * b.phi - b.psi * a.phi;
        const double f2_xy = a.dpsi * b.phi - b.psi * a.dphi;
        const double f2_xx = a.dpsi * a.phi - a.psi * a.dphi;
        const double f2_yy = b.dpsi * b.phi - b.psi * b.dphi;
        const double f2_yx = b.dpsi * a.phi - a.psi * b.dphi;
        *r1 = (a.u - p0) * f2_xy - (b.u - p0) * f2_xx - a.ux * f1v;
        *r2 = (a.u - p0) * f2_yy - (b.u - p0) * f2_yx - b.ux * f1v;
    };

    const double x_lo = p.mu - opt_.x_window_sds * sd, x_hi = x10 - 1e-9;
    const double y_lo = gamma + 1e-9, y_hi = z;

    // Seed: interior stationary point of F below x10 when present, else just
    // inside the right edge; y at the midpoint of (gamma, z).
    double x_seed = x10 - 0.05 * sd;
    if (auto br = num::scan_bracket([&](double x) { return fit_residual(s, x); }, x_lo, x_hi,
                                    opt_.scan_points)) {
        x_seed = num::brent([&](double x) { return fit_residual(s, x); }, br->first, br->second,
                            opt_.root_tol);
    }
    double x = x_seed, y = 0.5 * (gamma + z);

    const auto clamp = [](double v, double lo, double hi) { return std::min(std::max(v, lo), hi); };
    bool converged = false;
    double r1 = 0.0, r2 = 0.0;
    residuals(x, y, &r1, &r2);
    for (int iter = 0; iter < 60 && !converged; ++iter) {
        const double hx = 1e-7 * std::max(1.0, std::abs(x));
        const double hy = 1e-7 * std::max(1.0, std::abs(y));
        double r1x, r2x, r1y, r2y;
        residuals(x + hx, y, &r1x, &r2x);
        residuals(x, y + hy, &r1y, &r2y);
        const double j11 = (r1x - r1) / hx, j12 = (r1y - r1) / hy;
        const double j21 = (r2x - r2) / hx, j22 = (r2y - r2) / hy;
        const double det = j11 * j22 - j12 * j21;
        if (det == 0.0 || !std::isfinite(det)) break;
        double dx = -(r1 * j22 - r2 * j12) / det;
        double dy = -(j11 * r2 - j21 * r1) / det;
        const double norm0 = std::max(std::abs(r1), std::abs(r2));
        double step = 1.0;
        bool improved = false;
        for (int halving = 0; halving < 30; ++halving, step *= 0.5) {
            const double xn = clamp(x + step * dx, x_lo, x_hi);
            const double yn = clamp(y + step * dy, y_lo, y_hi);
            double n1, n2;
            residuals(xn, yn, &n1, &n2);
            if (std::max(std::abs(n1), std::abs(n2)) < norm0) {
                x = xn; y = yn; r1 = n1; r2 = n2;
                improved = true;
                break;
            }
        }
        if (!improved) break;
        const double scale = std::max({1.0, std::abs((s.U(x) - p0) * fp.dpsi(x) * fp.phi(y)),
                                       std::abs(s.Ux(x) * special::f1(fp, x, y))});
        if (std::max(std::abs(r1), std::abs(r2)) <= 1e-12 * scale) converged = true;
    }

    if (!converged) {
        // Nested-bisection fallback: for each candidate x solve the y-tangency
        // (second residual), then drive the first residual to zero in x.
        const auto y_of_x = [&](double xc) -> std::optional<double> {
            const auto g = [&](double yv) {
                double a, b;
                residuals(xc, yv, &a, &b);
                return b;
            };
            if (auto br = num::scan_bracket(g, y_lo, y_hi, 128)) {
                return num::brent(g, br->first, br->second, opt_.root_tol);
            }
            return std::nullopt;
        };
        const auto outer = [&](double xc) -> std::optional<double> {
            const auto yv = y_of_x(xc);
            if (!yv) return std::nullopt;
            double a, b;
            residuals(xc, *yv, &a, &b);
            return a;
        };
        const int n_scan = 256;
        double prev_x = 0.0;
        std::optional<double> prev_val;
        bool found = false;
        for (int i = 0; i <= n_scan && !found; ++i) {
            const double xc = x_lo + (x_hi - x_lo) * i / n_scan;
            const auto val = outer(xc);
            if (val && prev_val && *prev_val * *val <= 0.0) {
                x = num::brent([&](double v) { return outer(v).value_or(
                                   std::numeric_limits<double>::quiet_NaN()); },
                               prev_x, xc, opt_.root_tol);
                const auto yv = y_of_x(x);
                if (yv) {
                    y = *yv;
                    residuals(x, y, &r1, &r2);
                    found = true;
                }
            }
            prev_x = xc;
            prev_val = val;
        }
        if (!found) {
            std::ostringstream os;
            os << "solve_entry_repelling: triple system did not converge at c=" << s.c()
               << " (residuals " << r1 << ", " << r2 << " at x=" << x << ", y=" << y << ")";
            throw num::ConvergenceError(os.str());
        }
    }

    rec.topology = EntryTopology::TripleBoundary;
    rec.l1 = x;
    rec.l2 = y;
    rec.l3 = z;
    if (!(rec.l1 < x10 && gamma < rec.l2 && rec.l2 <= rec.l3 && rec.l3 <= x20)) {
        std::ostringstream os;
        os << "solve_entry_repelling: triple violates its box constraints at c=" << s.c() << ": l1="
           << rec.l1 << " l2=" << rec.l2 << " l3=" << rec.l3 << " (x10=" << x10 << ", gamma="
           << gamma << ", x20=" << x20 << ")";
        throw num::ConvergenceError(os.str());
    }
}

EntryRecord EntrySolver::solve_entry_repelling(double c) const {
    const auto& p = gain_->params();
    EntryRecord rec;
    rec.c = c;
    const RepellingSlice s = gain_->slice_repelling(c);
    rec.gamma_star = s.gamma();
    const auto ref = reference_points(p, c);
    const double x10 = *ref.x1_0, x20 = *ref.x2_0;
    double m1 = 0.0, m2 = 0.0;
    rec.rcase = classify_repelling_case(c, &m1, &m2);
    if (rec.rcase == RepellingCase::IIIa || rec.rcase == RepellingCase::IIIb) {
        rec.m1 = m1;
        rec.m2 = m2;
    }

    const double sd = p.stationary_sd();
    const double lo = p.mu - opt_.x_window_sds * sd;
    switch (rec.rcase) {
        case RepellingCase::I:
        case RepellingCase::IIIa:
            rec.topology = EntryTopology::SingleThreshold;
            rec.l1 = unique_root([&](double x) { return fit_residual(s, x); }, lo, x10 - 1e-10,
                                 "solve_entry_repelling[single]");
            break;
        case RepellingCase::II:
            rec.topology = EntryTopology::SingleThreshold;
            rec.l1 = unique_root([&](double x) { return fit_residual(s, x); }, lo, x20 - 1e-10,
                                 "solve_entry_repelling[single]");
            break;
        case RepellingCase::IIIb:
            solve_triple(s, x10, x20, rec);
            break;
        case RepellingCase::NA:
            break;
    }
    return rec;
}

EntryRecord EntrySolver::solve_entry(double c) const {
    if (c >= 1.0) {
        EntryRecord rec;
        rec.c = c;
        rec.topology = EntryTopology::StopNowTrivial;
        return rec;
    }
    return (gain_->regime() == Regime::Repelling) ? solve_entry_repelling(c)
                                                  : solve_entry_reflecting(c);
}

std::vector<EntryRecord> EntrySolver::solve_grid(const std::vector<double>& cs,
                                                 bool parallel) const {
    std::vector<EntryRecord> out(cs.size());
    if (gain_->regime() == Regime::Reflecting) {
        c_star();  // fill the cache before the parallel region
    }
#ifdef _OPENMP
#pragma omp parallel for schedule(dynamic) if (parallel)
#endif
    for (std::size_t i = 0; i < cs.size(); ++i) {
        try {
            out[i] = solve_entry(cs[i]);
        } catch (const std::exception& e) {
            out[i].c = cs[i];
            out[i].error = e.what();
        }
    }
    return out;
}

double EntryValue::u_at(double x) const {
    if (slice_) return slice_->U(x);
    return gain_->U(x, rec_.c);
}

double EntryValue::operator()(double x) const {
    if (rec_.topology == EntryTopology::StopNowTrivial) return -p0_;
    const auto& fp = gain_->pair_lambda();
    if (rec_.topology == EntryTopology::SingleThreshold) {
        if (x <= rec_.l1) return u_at(x) - p0_;
        return (u_l1_ - p0_) * std::exp(fp.log_phi(x) - log_phi_l_);
    }
    // Triple boundary, Eq.-(5.14)-style four branches.
    if (x > rec_.l3) return (u_l3_ - p0_) * std::exp(fp.log_phi(x) - log_phi_l3_);
    if (x >= rec_.l2) return u_at(x) - p0_;
    if (x > rec_.l1) {
        const double f1_x_l2 = special::f1(fp, x, rec_.l2);
        const double f1_l1_x = special::f1(fp, rec_.l1, x);
        return ((u_l1_ - p0_) * f1_x_l2 + (u_l2_ - p0_) * f1_l1_x) / f1_l1l2_;
    }
    return u_at(x) - p0_;
}

EntryValue EntrySolver::make_value(const EntryRecord& rec) const {
    if (!rec.error.empty()) {
        throw std::invalid_argument("make_value: record carries a solver error: " + rec.error);
    }
    EntryValue v;
    v.rec_ = rec;
    v.gain_ = gain_;
    v.p0_ = gain_->params().p0;
    if (gain_->regime() == Regime::Repelling && rec.topology != EntryTopology::StopNowTrivial) {
        v.slice_.emplace(gain_->params(), gain_->pair_lambda(),
                         rec.c, rec.gamma_star ? *rec.gamma_star
                                               : gain_->boundary().solve_exact(rec.c));
    }
    const auto& fp = gain_->pair_lambda();
    if (rec.topology == EntryTopology::SingleThreshold) {
        v.u_l1_ = v.u_at(rec.l1);
        v.log_phi_l_ = fp.log_phi(rec.l1);
    } else if (rec.topology == EntryTopology::TripleBoundary) {
        v.u_l1_ = v.u_at(rec.l1);
        v.u_l2_ = v.u_at(rec.l2);
        v.u_l3_ = v.u_at(rec.l3);
        v.log_phi_l3_ = fp.log_phi(rec.l3);
        v.f1_l1l2_ = special::f1(fp, rec.l1, rec.l2);
    }
    return v;
}

}  // namespace ouentry
