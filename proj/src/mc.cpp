#include "ouentry/mc.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <limits>
#include <random>
#include <sstream>
#include <stdexcept>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "ouentry/numerics.hpp"

namespace ouentry::mc {

PolicySpec PolicySpec::threshold(double c, double l) {
    PolicySpec p;
    p.kind = Kind::Threshold;
    p.c = c;
    p.l1 = l;
    return p;
}

PolicySpec PolicySpec::threshold_plus_interval(double c, double l1, double l2, double l3) {
    if (!(l1 < l2 && l2 <= l3)) {
        std::ostringstream os;
        os << "PolicySpec: need l1 < l2 <= l3, got " << l1 << ", " << l2 << ", " << l3;
        throw std::invalid_argument(os.str());
    }
    PolicySpec p;
    p.kind = Kind::ThresholdPlusInterval;
    p.c = c;
    p.l1 = l1;
    p.l2 = l2;
    p.l3 = l3;
    return p;
}

PolicySpec PolicySpec::from_record(const EntryRecord& rec) {
    switch (rec.topology) {
        case EntryTopology::SingleThreshold:
            return threshold(rec.c, rec.l1);
        case EntryTopology::TripleBoundary:
            return threshold_plus_interval(rec.c, rec.l1, rec.l2, rec.l3);
        case EntryTopology::StopNowTrivial: {
            // Stop immediately everywhere.
            PolicySpec p;
            p.kind = Kind::Threshold;
            p.c = rec.c;
            p.l1 = std::numeric_limits<double>::infinity();
            return p;
        }
    }
    throw std::logic_error("PolicySpec::from_record: bad topology");
}

int effective_threads() {
#ifdef _OPENMP
    int n = omp_get_max_threads();
    if (const char* env = std::getenv("OU_ENTRY_THREADS")) {
        const int cap = std::atoi(env);
        if (cap > 0) n = std::min(n, cap);
    }
    return n;
#else
    return 1;
#endif
}

namespace detail {

std::uint64_t path_seed(std::uint64_t seed, std::uint64_t path) {
    std::uint64_t s = seed + 0x632BE59BD9B4E019ULL * (path + 1);
    num::splitmix64(s);
    return num::splitmix64(s);
}

void run_paths_serial(std::size_t n, const std::function<double(std::size_t)>& fn,
                      std::vector<double>& out) {
    out.resize(n);
    for (std::size_t i = 0; i < n; ++i) out[i] = fn(i);
}

void run_paths_omp(std::size_t n, const std::function<double(std::size_t)>& fn,
                   std::vector<double>& out) {
    out.resize(n);
#ifdef _OPENMP
    const int threads = effective_threads();
#pragma omp parallel for schedule(dynamic, 512) num_threads(threads)
#endif
    for (std::size_t i = 0; i < n; ++i) out[i] = fn(i);
}

McResult reduce(const std::vector<double>& payoffs, double dt) {
    McResult r;
    r.n_paths = payoffs.size();
    r.dt = dt;
    num::KahanSum sum;
    for (double v : payoffs) sum.add(v);
    r.estimate = sum.value() / static_cast<double>(payoffs.size());
    num::KahanSum sq;
    for (double v : payoffs) {
        const double d = v - r.estimate;
        sq.add(d * d);
    }
    if (payoffs.size() > 1) {
        r.std_error = std::sqrt(sq.value() / (static_cast<double>(payoffs.size()) *
                                              static_cast<double>(payoffs.size() - 1)));
    }
    return r;
}

void dispatch(std::size_t n, bool parallel, const std::function<double(std::size_t)>& fn,
              std::vector<double>& out) {
    if (parallel) {
        run_paths_omp(n, fn, out);
    } else {
        run_paths_serial(n, fn, out);
    }
}

}  // namespace detail

UEvaluator UEvaluator::build(const GainFunction& gain, double c) {
    UEvaluator u;
    u.c_ = c;
    const auto& p = gain.params();
    const auto& fp = gain.pair_lambda();
    const double sd = p.stationary_sd();
    const double x_lo = p.mu - 45.0 * sd;
    const double x_hi = p.mu + 20.0 * sd;

    if (c >= 1.0) {
        u.eval_ = [](double) { return 0.0; };
        u.growth_coeff_ = 1.0;
        return u;
    }

    if (gain.regime() == Regime::Repelling) {
        const RepellingSlice s = gain.slice_repelling(c);
        const double gamma = s.gamma();
        const double one_minus_c = 1.0 - c;
        const double sum = p.lambda + p.theta;
        const double lin_a = p.lambda * p.penalty.value(c) / sum;
        const double lin_b = p.lambda * p.penalty.value(c) * (p.mu / p.lambda - p.mu / sum);
        const double coef = gamma * one_minus_c -
                            p.lambda * p.penalty.value(c) * ((gamma - p.mu) / sum + p.mu / p.lambda);
        // log psi is smooth everywhere; tabulate it once below gamma with
        // exact node slopes (Hermite keeps full accuracy up to the boundary).
        const int n = 1400;
        std::vector<double> xs(n), ys(n), ds(n);
        for (int i = 0; i < n; ++i) {
            xs[i] = x_lo + (gamma - x_lo) * i / (n - 1);
            const auto e = fp.log_psi_eval(xs[i]);
            ys[i] = e.log_value;
            ds[i] = e.dlog;
        }
        const double log_psi_gamma = ys.back();
        num::CubicHermite spl(std::move(xs), std::move(ys), std::move(ds));
        u.eval_ = [=](double x) {
            if (x >= gamma) return x * one_minus_c;
            const double lx = (x <= x_lo) ? spl(x_lo) : spl(x);
            return std::exp(lx - log_psi_gamma) * coef + lin_a * x + lin_b;
        };
    } else {
        const auto& cb = gain.boundary();
        const double b1 = cb.grid_value().back();  // beta*(1)
        const double bc = cb.at(c);
        const double one_minus_c = 1.0 - c;
        const double sum = p.lambda + p.theta;
        const double phic = p.penalty.value(c);
        const double sig_c = gain.sigma_integral(c);
        const double cst = p.lambda / sum * phic;
        const double mu_term = p.mu * p.theta / p.lambda;

        // Above beta*(c) the inventory max is just c: tabulate log phi there.
        const int n_phi = 900;
        std::vector<double> xs(n_phi), ys(n_phi), ds(n_phi);
        for (int i = 0; i < n_phi; ++i) {
            xs[i] = bc + (x_hi - bc) * i / (n_phi - 1);
            const auto e = fp.log_phi_eval(xs[i]);
            ys[i] = e.log_value;
            ds[i] = e.dlog;
        }
        num::CubicHermite phi_spl(std::move(xs), std::move(ys), std::move(ds));

        // Between beta*(1) and beta*(c) tabulate exact U with its exact slope
        // (the inventory max runs along g*); U is linear below beta*(1).
        num::CubicHermite mid_spl;
        bool have_mid = false;
        if (bc > b1 + 1e-12) {
            const int n_mid = 900;
            std::vector<double> mx(n_mid), my(n_mid), md(n_mid);
            for (int i = 0; i < n_mid; ++i) {
                mx[i] = b1 + (bc - b1) * i / (n_mid - 1);
                const auto [u, ux] = gain.U_and_Ux(mx[i], c);
                my[i] = u;
                md[i] = ux;
            }
            mid_spl = num::CubicHermite(std::move(mx), std::move(my), std::move(md));
            have_mid = true;
        }
        u.eval_ = [=](double x) {
            if (x <= b1) return x * one_minus_c;
            if (x < bc && have_mid) return mid_spl(x);
            const double lp = (x > x_hi) ? phi_spl(x_hi) : phi_spl(std::max(x, bc));
            return cst * (x + mu_term) - std::exp(lp) * sig_c;
        };
    }

    // Fit |U| <= C (1 + |x|) over the window for the truncation bound.
    double cmax = 1.0;
    for (int i = 0; i <= 200; ++i) {
        const double x = x_lo + (x_hi - x_lo) * i / 200.0;
        cmax = std::max(cmax, std::abs(u.eval_(x)) / (1.0 + std::abs(x)));
    }
    u.growth_coeff_ = cmax;
    return u;
}

double UEvaluator::operator()(double x) const { return eval_(x); }

McResult simulate_entry_payoff(const ModelParams& p, const UEvaluator& u_at, double x,
                               const PolicySpec& policy, const McOptions& opt) {
    const double horizon = opt.horizon_or_default(p.lambda);
    const OUTransition tr = OUTransition::make(p, opt.dt);
    const std::size_t n_steps = static_cast<std::size_t>(std::ceil(horizon / opt.dt));
    const double p0 = p.p0;
    const double mu = p.mu, lambda = p.lambda, dt = opt.dt;

    std::vector<double> max_abs_unstopped(opt.n_paths, 0.0);

    const auto one_path = [&](std::uint64_t seed_p, int sign) -> std::pair<double, double> {
        std::mt19937_64 gen(seed_p);
        std::normal_distribution<double> normal(0.0, 1.0);
        double X = x;
        if (policy.stops(X)) return {u_at(X) - p0, 0.0};
        for (std::size_t k = 1; k <= n_steps; ++k) {
            X = exact_step(X, mu, tr, sign * normal(gen));
            if (policy.stops(X)) {
                return {std::exp(-lambda * static_cast<double>(k) * dt) * (u_at(X) - p0), 0.0};
            }
        }
        return {0.0, std::abs(X)};
    };

    const auto path_fn = [&](std::size_t i) -> double {
        const std::uint64_t s = detail::path_seed(opt.seed, i);
        if (!opt.antithetic) {
            const auto [v, m] = one_path(s, +1);
            max_abs_unstopped[i] = m;
            return v;
        }
        const auto [v1, m1] = one_path(s, +1);
        const auto [v2, m2] = one_path(s, -1);
        max_abs_unstopped[i] = std::max(m1, m2);
        return 0.5 * (v1 + v2);
    };

    std::vector<double> payoffs;
    detail::dispatch(opt.n_paths, opt.parallel, path_fn, payoffs);
    McResult r = detail::reduce(payoffs, opt.dt);

    double max_abs = 0.0;
    std::size_t unstopped = 0;
    for (double m : max_abs_unstopped) {
        if (m > 0.0) {
            ++unstopped;
            max_abs = std::max(max_abs, m);
        }
    }
    r.truncation_bound = static_cast<double>(unstopped) / static_cast<double>(opt.n_paths) *
                         std::exp(-lambda * horizon) * u_at.growth_coeff() * (1.0 + max_abs);
    std::ostringstream note;
    note << "grid-time stopping, O(sqrt(dt)) boundary bias; horizon=" << horizon << ", unstopped="
         << unstopped << ", truncation bound " << r.truncation_bound;
    if (opt.antithetic) note << "; antithetic pairs (n_paths counts pairs)";
    r.bias_note = note.str();
    return r;
}

McResult simulate_full_functional(const ModelParams& p, const PolicySpec& policy,
                                  double gamma_star, double x, const McOptions& opt) {
    const double horizon = opt.horizon_or_default(p.lambda);
    const OUTransition tr = OUTransition::make(p, opt.dt);
    const std::size_t n_steps = static_cast<std::size_t>(std::ceil(horizon / opt.dt));
    const double p0 = p.p0;
    const double mu = p.mu, lambda = p.lambda, dt = opt.dt;
    const double phi_c = p.penalty.value(policy.c);
    const double one_minus_c = 1.0 - policy.c;

    const auto path_fn = [&](std::size_t i) -> double {
        std::mt19937_64 gen(detail::path_seed(opt.seed, i));
        std::normal_distribution<double> normal(0.0, 1.0);
        double X = x;
        double cost = 0.0;
        bool entered = false, bought = false;
        std::size_t k = 0;
        if (policy.stops(X)) {
            entered = true;
            cost -= p0;
        }
        while (k < n_steps) {
            if (entered) {
                if (!bought && X >= gamma_star) {
                    cost += std::exp(-lambda * static_cast<double>(k) * dt) * X * one_minus_c;
                    bought = true;
                }
                if (bought) break;
                // penalty flow over [t_k, t_{k+1}) with exact time discounting
                const double t0 = static_cast<double>(k) * dt;
                cost += (std::exp(-lambda * t0) - std::exp(-lambda * (t0 + dt))) * X * phi_c;
            }
            X = exact_step(X, mu, tr, normal(gen));
            ++k;
            if (!entered && policy.stops(X)) {
                entered = true;
                cost -= std::exp(-lambda * static_cast<double>(k) * dt) * p0;
            }
        }
        if (entered && !bought && k >= n_steps && X >= gamma_star) {
            cost += std::exp(-lambda * horizon) * X * one_minus_c;
        }
        return cost;
    };

    std::vector<double> payoffs;
    detail::dispatch(opt.n_paths, opt.parallel, path_fn, payoffs);
    McResult r = detail::reduce(payoffs, opt.dt);
    r.bias_note = "bang-bang purchase at grid crossings of gamma*; penalty flow left-point in X, "
                  "exact in t; truncated at horizon " + std::to_string(horizon);
    return r;
}

McResult simulate_invest_cost_reflecting(const ModelParams& p, const GainFunction& gain, double x,
                                         double c, const McOptions& opt) {
    const double horizon = opt.horizon_or_default(p.lambda);
    const OUTransition tr = OUTransition::make(p, opt.dt);
    const std::size_t n_steps = static_cast<std::size_t>(std::ceil(horizon / opt.dt));
    const double mu = p.mu, lambda = p.lambda, dt = opt.dt;
    const auto& cb = gain.boundary();

    const auto path_fn = [&](std::size_t i) -> double {
        std::mt19937_64 gen(detail::path_seed(opt.seed, i));
        std::normal_distribution<double> normal(0.0, 1.0);
        double X = x;
        double run_min = x;
        double inv = std::max(c, cb.g_star(run_min));  // purchase at t=0 if already below
        double cost = (inv - c) * x;
        for (std::size_t k = 0; k < n_steps; ++k) {
            const double t0 = static_cast<double>(k) * dt;
            cost += (std::exp(-lambda * t0) - std::exp(-lambda * (t0 + dt))) * X *
                    p.penalty.value(inv);
            X = exact_step(X, mu, tr, normal(gen));
            if (X < run_min) {
                run_min = X;
                const double g = cb.g_star(run_min);
                if (g > inv) {
                    cost += std::exp(-lambda * (t0 + dt)) * X * (g - inv);
                    inv = g;
                }
            }
        }
        return cost;
    };

    std::vector<double> payoffs;
    detail::dispatch(opt.n_paths, opt.parallel, path_fn, payoffs);
    McResult r = detail::reduce(payoffs, opt.dt);
    r.bias_note = "running-minimum control tracked at grid times; estimates U(x,c); horizon " +
                  std::to_string(horizon);
    return r;
}

McResult hitting_laplace_mc(const ModelParams& p, double x, double y, double rate,
                            const McOptions& opt) {
    const double horizon = opt.horizon_or_default(rate);
    const OUTransition tr = OUTransition::make(p, opt.dt);
    const std::size_t n_steps = static_cast<std::size_t>(std::ceil(horizon / opt.dt));
    const double mu = p.mu, dt = opt.dt;
    const bool from_above = x >= y;

    const auto path_fn = [&](std::size_t i) -> double {
        std::mt19937_64 gen(detail::path_seed(opt.seed, i));
        std::normal_distribution<double> normal(0.0, 1.0);
        double X = x;
        if (from_above ? (X <= y) : (X >= y)) return 1.0;
        for (std::size_t k = 1; k <= n_steps; ++k) {
            X = exact_step(X, mu, tr, normal(gen));
            if (from_above ? (X <= y) : (X >= y)) {
                return std::exp(-rate * static_cast<double>(k) * dt);
            }
        }
        return 0.0;
    };

    std::vector<double> payoffs;
    detail::dispatch(opt.n_paths, opt.parallel, path_fn, payoffs);
    McResult r = detail::reduce(payoffs, opt.dt);
    r.bias_note = "first grid time beyond the level; O(sqrt(dt)) crossing bias";
    return r;
}

PerturbationReport perturbation_test(const ModelParams& p, const UEvaluator& u_at, double x,
                                     const PolicySpec& computed, double shift,
                                     const McOptions& opt) {
    const auto payoff_vector = [&](const PolicySpec& pol) {
        const double horizon = opt.horizon_or_default(p.lambda);
        const OUTransition tr = OUTransition::make(p, opt.dt);
        const std::size_t n_steps = static_cast<std::size_t>(std::ceil(horizon / opt.dt));
        const double p0 = p.p0, mu = p.mu, lambda = p.lambda, dt = opt.dt;
        const auto path_fn = [&](std::size_t i) -> double {
            std::mt19937_64 gen(detail::path_seed(opt.seed, i));
            std::normal_distribution<double> normal(0.0, 1.0);
            double X = x;
            if (pol.stops(X)) return u_at(X) - p0;
            for (std::size_t k = 1; k <= n_steps; ++k) {
                X = exact_step(X, mu, tr, normal(gen));
                if (pol.stops(X)) {
                    return std::exp(-lambda * static_cast<double>(k) * dt) * (u_at(X) - p0);
                }
            }
            return 0.0;
        };
        std::vector<double> out;
        detail::dispatch(opt.n_paths, opt.parallel, path_fn, out);
        return out;
    };

    PerturbationReport report;
    const std::vector<double> base = payoff_vector(computed);
    report.base = detail::reduce(base, opt.dt);
    report.base.bias_note = "common random numbers across variants";

    struct Variant {
        PolicySpec pol;
        std::string label;
        bool clamped;
    };
    std::vector<Variant> variants;
    const auto add_shift = [&](int which, double d) {
        PolicySpec v = computed;
        bool clamped = false;
        std::string label;
        if (which == 1) {
            v.l1 += d;
            label = "l1";
            if (v.kind == PolicySpec::Kind::ThresholdPlusInterval && !(v.l1 < v.l2)) {
                v.l1 = v.l2 - 1e-9;
                clamped = true;
            }
        } else if (which == 2) {
            v.l2 += d;
            label = "l2";
            if (!(v.l1 < v.l2)) { v.l2 = v.l1 + 1e-9; clamped = true; }
            if (!(v.l2 <= v.l3)) { v.l2 = v.l3; clamped = true; }
        } else {
            v.l3 += d;
            label = "l3";
            if (!(v.l2 <= v.l3)) { v.l3 = v.l2; clamped = true; }
        }
        label += (d > 0 ? "+" : "-") + std::to_string(std::abs(d));
        variants.push_back({v, label, clamped});
    };
    add_shift(1, +shift);
    add_shift(1, -shift);
    if (computed.kind == PolicySpec::Kind::ThresholdPlusInterval) {
        add_shift(2, +shift);
        add_shift(2, -shift);
        add_shift(3, +shift);
        add_shift(3, -shift);
    }

    for (const auto& var : variants) {
        const std::vector<double> pv = payoff_vector(var.pol);
        std::vector<double> diff(pv.size());
        for (std::size_t i = 0; i < pv.size(); ++i) diff[i] = base[i] - pv[i];
        const McResult dr = detail::reduce(diff, opt.dt);
        PerturbationRow row;
        row.policy = var.pol;
        row.label = var.label;
        row.estimate = detail::reduce(pv, opt.dt).estimate;
        row.diff = dr.estimate;
        row.pooled_se = dr.std_error;
        row.clamped = var.clamped;
        report.rows.push_back(row);
    }
    return report;
}

}  // namespace ouentry::mc
