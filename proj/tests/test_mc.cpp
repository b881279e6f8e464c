#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "ouentry/entry.hpp"
#include "ouentry/investment.hpp"
#include "ouentry/mc.hpp"
#include "ouentry/model.hpp"
#include "ouentry/ou.hpp"

using namespace ouentry;

namespace {

ModelParams fig1_params() {
    ModelParams p;
    p.mu = 1.0;
    p.theta = 1.0;
    p.sigma = 3.0;
    p.lambda = 1.0;
    p.p0 = 4.0;
    p.penalty = Penalty({2.2, 8.0});
    return p;
}

ModelParams reflecting_params() {
    ModelParams p;
    p.mu = 1.0;
    p.theta = 1.0;
    p.sigma = 1.0;
    p.lambda = 1.0;
    p.p0 = 0.05;
    p.penalty = Penalty({0.1, 0.1});
    return p;
}

struct Setup {
    ModelParams params;
    RegimeInfo info;
    ControlBoundary boundary;
    GainFunction gain;
    EntrySolver solver;
    Setup(ModelParams p, int grid_n)
        : params(p),
          info(classify_regime(p)),
          boundary(ControlBoundary::tabulate(p, info, make_opt(grid_n))),
          gain(params, boundary),
          solver(gain, make_opt(grid_n)) {}
    static SolveOptions make_opt(int n) {
        SolveOptions o;
        o.c_grid_n = n;
        return o;
    }
};

const Setup& repel() {
    static const Setup s(fig1_params(), 101);
    return s;
}

const Setup& refl() {
    static const Setup s(reflecting_params(), 101);
    return s;
}

}  // namespace

TEST_CASE("policy invariants") {
    CHECK_THROWS_AS(mc::PolicySpec::threshold_plus_interval(0.1, 1.0, 0.5, 2.0),
                    std::invalid_argument);
    CHECK_THROWS_AS(mc::PolicySpec::threshold_plus_interval(0.1, 0.0, 1.0, 0.5),
                    std::invalid_argument);
    const auto pol = mc::PolicySpec::threshold_plus_interval(0.1, 0.0, 1.0, 2.0);
    CHECK(pol.stops(-0.5));
    CHECK(pol.stops(1.5));
    CHECK_FALSE(pol.stops(0.5));
    CHECK_FALSE(pol.stops(2.5));
}

TEST_CASE("UEvaluator reproduces the exact gain function") {
    const auto& s = repel();
    for (double c : {0.0, 0.25}) {
        const auto ueval = mc::UEvaluator::build(s.gain, c);
        for (double x : {-8.0, -2.0, 0.3, 1.2, 2.5, 7.0}) {
            CHECK(ueval(x) == doctest::Approx(s.gain.U(x, c)).epsilon(1e-7));
        }
    }
    const auto& sr = refl();
    for (double c : {0.0, 0.5}) {
        const auto ueval = mc::UEvaluator::build(sr.gain, c);
        for (double x : {-4.0, -0.5, 0.2, 1.0, 3.0}) {
            CHECK(ueval(x) == doctest::Approx(sr.gain.U(x, c)).epsilon(1e-7));
        }
    }
}

TEST_CASE("stop-now policy pays U - P0 exactly with zero standard error") {
    const auto& s = repel();
    const double c = 0.25, x = 1.0;
    const auto ueval = mc::UEvaluator::build(s.gain, c);
    mc::McOptions opt;
    opt.n_paths = 500;
    auto policy = mc::PolicySpec::threshold(c, 1e30);
    const auto r = mc::simulate_entry_payoff(s.params, ueval, x, policy, opt);
    CHECK(r.estimate == doctest::Approx(ueval(x) - s.params.p0).epsilon(1e-14));
    CHECK(r.std_error == 0.0);
    CHECK(r.truncation_bound == 0.0);
}

TEST_CASE("full inventory: any immediate stop pays -P0") {
    const auto& s = repel();
    const auto ueval = mc::UEvaluator::build(s.gain, 1.0);
    mc::McOptions opt;
    opt.n_paths = 200;
    const auto r = mc::simulate_entry_payoff(s.params, ueval, 0.0,
                                             mc::PolicySpec::threshold(1.0, 1e30), opt);
    CHECK(r.estimate == doctest::Approx(-s.params.p0));
    CHECK(r.std_error == 0.0);
}

TEST_CASE("same seed gives bit-identical results; serial matches omp") {
    const auto& s = repel();
    const double c = 0.25;
    const auto rec = s.solver.solve_entry(c);
    const auto ueval = mc::UEvaluator::build(s.gain, c);
    const auto policy = mc::PolicySpec::from_record(rec);
    mc::McOptions opt;
    opt.n_paths = 4000;
    opt.seed = 31337;

    const auto r1 = mc::simulate_entry_payoff(s.params, ueval, 1.0, policy, opt);
    const auto r2 = mc::simulate_entry_payoff(s.params, ueval, 1.0, policy, opt);
    CHECK(r1.estimate == r2.estimate);
    CHECK(r1.std_error == r2.std_error);

    opt.parallel = false;
    const auto r3 = mc::simulate_entry_payoff(s.params, ueval, 1.0, policy, opt);
    CHECK(r1.estimate == r3.estimate);
    CHECK(r1.std_error == r3.std_error);

    opt.parallel = true;
    opt.seed = 31338;  // different stream should move the estimate
    const auto r4 = mc::simulate_entry_payoff(s.params, ueval, 1.0, policy, opt);
    CHECK(r4.estimate != r1.estimate);
}

TEST_CASE("entry payoff agrees with the analytic value function") {
    const auto& s = repel();
    for (double c : {0.0, 0.25}) {
        const auto rec = s.solver.solve_entry(c);
        const auto V = s.solver.make_value(rec);
        const auto ueval = mc::UEvaluator::build(s.gain, c);
        mc::McOptions opt;
        opt.n_paths = 30000;
        opt.seed = 7;
        const auto r = mc::simulate_entry_payoff(s.params, ueval, 1.0,
                                                 mc::PolicySpec::from_record(rec), opt);
        CHECK(std::abs(r.estimate - V(1.0)) < 3.0 * r.std_error);
    }
}

TEST_CASE("horizon truncation bound is tiny at the defaults") {
    const auto& s = repel();
    const double c = 0.0;
    const auto rec = s.solver.solve_entry(c);
    const auto ueval = mc::UEvaluator::build(s.gain, c);
    mc::McOptions opt;
    opt.n_paths = 20000;
    const auto r = mc::simulate_entry_payoff(s.params, ueval, 1.0,
                                             mc::PolicySpec::from_record(rec), opt);
    CHECK(r.truncation_bound < 0.1 * r.std_error);
    CHECK(r.bias_note.find("truncation bound") != std::string::npos);
}

TEST_CASE("antithetic variates do not increase the error at matched budgets") {
    const auto& s = repel();
    // three standard configurations: two inventory levels and a shifted start
    const std::vector<std::pair<double, double>> cases = {{1.0, 0.0}, {1.0, 0.25}, {0.0, 0.25}};
    for (const auto& [x, c] : cases) {
        const auto rec = s.solver.solve_entry(c);
        const auto ueval = mc::UEvaluator::build(s.gain, c);
        const auto policy = mc::PolicySpec::from_record(rec);
        mc::McOptions plain;
        plain.n_paths = 20000;
        plain.seed = 1234;
        mc::McOptions anti = plain;
        anti.antithetic = true;
        anti.n_paths = plain.n_paths / 2;  // matched draw budget
        const auto rp = mc::simulate_entry_payoff(s.params, ueval, x, policy, plain);
        const auto ra = mc::simulate_entry_payoff(s.params, ueval, x, policy, anti);
        CHECK(ra.std_error <= rp.std_error * 1.05);
    }
}

TEST_CASE("hitting-time MC at coincident levels is exactly one") {
    const auto& s = repel();
    mc::McOptions opt;
    opt.n_paths = 100;
    const auto r = mc::hitting_laplace_mc(s.params, 0.4, 0.4, 1.0, opt);
    CHECK(r.estimate == 1.0);
    CHECK(r.std_error == 0.0);
}

TEST_CASE("full functional at c = 1 prices the premium alone") {
    const auto& s = repel();
    // at c = 1 there is nothing to buy and no penalty: cost is -P0 e^{-lambda tau}
    const double x = 2.0, level = 1.0;
    auto policy = mc::PolicySpec::threshold(1.0, level);
    mc::McOptions opt;
    opt.n_paths = 30000;
    const auto r = mc::simulate_full_functional(s.params, policy, /*gamma_star=*/1e300, x, opt);
    const double analytic = -s.params.p0 * hitting_laplace(s.params, x, level, s.params.lambda);
    CHECK(std::abs(r.estimate - analytic) < 3.0 * r.std_error + 0.02 * std::abs(analytic));
}

TEST_CASE("full functional matches V at the figure parameters (decoupling)") {
    const auto& s = repel();
    const double c = 0.0, x = 1.0;
    const auto rec = s.solver.solve_entry(c);
    const auto V = s.solver.make_value(rec);
    mc::McOptions opt;
    opt.n_paths = 40000;
    opt.seed = 11;
    const auto r = mc::simulate_full_functional(s.params, mc::PolicySpec::from_record(rec),
                                                *rec.gamma_star, x, opt);
    CHECK(std::abs(r.estimate - V(x)) < 3.0 * r.std_error);
}

TEST_CASE("forced immediate entry with zero premium recovers U") {
    // tau = 0 and P0 = 0 reduce the full functional to the investment cost U
    ModelParams p = fig1_params();
    p.p0 = 0.0;
    const Setup s(p, 101);
    const double c = 0.25, x = 1.0;
    const double gamma = s.boundary.solve_exact(c);
    auto policy = mc::PolicySpec::threshold(c, 1e30);  // stop at once
    mc::McOptions opt;
    opt.n_paths = 40000;
    opt.seed = 13;
    const auto r = mc::simulate_full_functional(p, policy, gamma, x, opt);
    CHECK(std::abs(r.estimate - s.gain.U(x, c)) < 3.0 * r.std_error);
}

TEST_CASE("reflecting running-minimum control recovers U") {
    const auto& s = refl();
    const double c = 0.3, x = 1.0;
    mc::McOptions opt;
    opt.n_paths = 30000;
    opt.seed = 17;
    const auto r = mc::simulate_invest_cost_reflecting(s.params, s.gain, x, c, opt);
    CHECK(std::abs(r.estimate - s.gain.U(x, c)) < 3.0 * r.std_error + 0.01);
}

TEST_CASE("perturbation with zero shift is exactly neutral") {
    const auto& s = repel();
    const double c = 0.0;
    const auto rec = s.solver.solve_entry(c);
    const auto ueval = mc::UEvaluator::build(s.gain, c);
    mc::McOptions opt;
    opt.n_paths = 2000;
    const auto rep = mc::perturbation_test(s.params, ueval, 1.0,
                                           mc::PolicySpec::from_record(rec), 0.0, opt);
    for (const auto& row : rep.rows) {
        CHECK(row.diff == 0.0);
        CHECK(row.pooled_se == 0.0);
    }
}

TEST_CASE("large boundary shifts are strictly worse for the minimizer") {
    const auto& s = repel();
    const double c = 0.0;
    const auto rec = s.solver.solve_entry(c);
    const auto ueval = mc::UEvaluator::build(s.gain, c);
    mc::McOptions opt;
    opt.n_paths = 30000;
    opt.seed = 23;
    const double sd = s.params.stationary_sd();
    const auto rep = mc::perturbation_test(s.params, ueval, 1.0,
                                           mc::PolicySpec::from_record(rec), 5.0 * sd, opt);
    for (const auto& row : rep.rows) {
        // minimization: the computed policy's payoff is below the variants'
        CHECK(row.diff < -3.0 * row.pooled_se);
    }
}

TEST_CASE("small shifts around the computed boundary are not better (2 SE)") {
    const auto& s = repel();
    for (double c : {0.0, 0.25}) {
        const auto rec = s.solver.solve_entry(c);
        const auto ueval = mc::UEvaluator::build(s.gain, c);
        mc::McOptions opt;
        opt.n_paths = 30000;
        opt.seed = 29;
        const double sd = s.params.stationary_sd();
        const auto rep = mc::perturbation_test(s.params, ueval, 1.0,
                                               mc::PolicySpec::from_record(rec), 0.1 * sd, opt);
        for (const auto& row : rep.rows) {
            CHECK(row.diff <= 2.0 * row.pooled_se);
        }
    }
}
