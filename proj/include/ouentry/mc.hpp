#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "ouentry/entry.hpp"
#include "ouentry/investment.hpp"
#include "ouentry/model.hpp"
#include "ouentry/ou.hpp"

namespace ouentry::mc {

/// Entry rule simulated by the verifier: stop when X <= l1, or (interval form)
/// when X <= l1 or X in [l2, l3].
struct PolicySpec {
    enum class Kind { Threshold, ThresholdPlusInterval };
    Kind kind = Kind::Threshold;
    double c = 0.0;
    double l1 = 0.0, l2 = 0.0, l3 = 0.0;

    static PolicySpec threshold(double c, double l);
    static PolicySpec threshold_plus_interval(double c, double l1, double l2, double l3);
    static PolicySpec from_record(const EntryRecord& rec);

    bool stops(double x) const {
        if (x <= l1) return true;
        return kind == Kind::ThresholdPlusInterval && x >= l2 && x <= l3;
    }
};

struct McResult {
    double estimate = 0.0;
    double std_error = 0.0;
    std::size_t n_paths = 0;
    double dt = 0.0;
    double truncation_bound = 0.0;  // horizon-truncation error bound
    std::string bias_note;
};

struct McOptions {
    std::size_t n_paths = 200000;
    double dt = 1e-3;
    double horizon = 0.0;  // <= 0 selects the default 30/lambda
    std::uint64_t seed = 0x00C0FFEEULL;
    bool antithetic = false;
    bool parallel = true;

    double horizon_or_default(double lambda) const {
        return horizon > 0.0 ? horizon : 30.0 / lambda;
    }
};

/// How many OpenMP threads the kernels will use (honours OU_ENTRY_THREADS).
int effective_threads();

/// Fast U(.,c) evaluator for the payoff at the stopped state: exact closed
/// forms outside the boundary band, log-scale splines of the fundamental
/// solutions (split at the kinks) inside.
class UEvaluator {
  public:
    static UEvaluator build(const GainFunction& gain, double c);
    double operator()(double x) const;
    double c() const { return c_; }
    /// Fitted C with |U| <= C (1 + |x|) over the tabulation window.
    double growth_coeff() const { return growth_coeff_; }

  private:
    double c_ = 0.0;
    double growth_coeff_ = 1.0;
    std::function<double(double)> eval_;
};

/// E[e^{-lambda tau} (U(X_tau, c) - P0)] under the policy; unstopped paths
/// contribute zero (the problem's own convention).
McResult simulate_entry_payoff(const ModelParams& p, const UEvaluator& u_at, double x,
                               const PolicySpec& policy, const McOptions& opt);

/// Repelling full cost functional: enter at the policy time, then buy the
/// remaining (1-c) units at the first time X >= gamma* afterwards, accruing
/// the penalty flow in between and paying the premium at entry.
McResult simulate_full_functional(const ModelParams& p, const PolicySpec& policy,
                                  double gamma_star, double x, const McOptions& opt);

/// Reflecting investment cost from time zero under the optimal reflecting
/// control (running minimum mapped through g*); estimates U(x, c).
McResult simulate_invest_cost_reflecting(const ModelParams& p, const GainFunction& gain, double x,
                                         double c, const McOptions& opt);

/// MC estimate of E[e^{-rate tau_y}] for the closed-form cross-check.
McResult hitting_laplace_mc(const ModelParams& p, double x, double y, double rate,
                            const McOptions& opt);

struct PerturbationRow {
    PolicySpec policy;
    std::string label;
    double estimate = 0.0;
    double diff = 0.0;       // base estimate minus this variant's estimate
    double pooled_se = 0.0;  // SE of the per-path payoff differences (common random numbers)
    bool clamped = false;    // shift violated the boundary ordering and was clamped
};

struct PerturbationReport {
    McResult base;
    std::vector<PerturbationRow> rows;
};

/// Payoff of the computed policy against every boundary shifted by +/- shift,
/// with common random numbers.
PerturbationReport perturbation_test(const ModelParams& p, const UEvaluator& u_at, double x,
                                     const PolicySpec& computed, double shift,
                                     const McOptions& opt);

namespace detail {

/// Runs fn(path_index) for every path into out; OpenMP version.
void run_paths_omp(std::size_t n, const std::function<double(std::size_t)>& fn,
                   std::vector<double>& out);
/// Serial reference implementation with identical per-path results.
void run_paths_serial(std::size_t n, const std::function<double(std::size_t)>& fn,
                      std::vector<double>& out);

/// Per-path seed stream derivation (splitmix64 of seed and path index).
std::uint64_t path_seed(std::uint64_t seed, std::uint64_t path);

McResult reduce(const std::vector<double>& payoffs, double dt);

}  // namespace detail

}  // namespace ouentry::mc
