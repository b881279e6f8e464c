#pragma once

#include <optional>
#include <string>
#include <vector>

#include "ouentry/investment.hpp"

namespace ouentry {

enum class EntryTopology { SingleThreshold, TripleBoundary, StopNowTrivial };

/// Repelling sub-case of the stopping region (Prop. 5.4 cases i / ii / iii(a) / iii(b)).
enum class RepellingCase { I, II, IIIa, IIIb, NA };

/// Reflecting branch: below the crossing c* the boundary comes from the direct
/// smooth-fit equation, at or above it from the auxiliary problem (l* = alpha*).
enum class ReflectingBranch { BelowCStar, AtOrAboveCStar, NA };

std::string to_string(EntryTopology t);
std::string to_string(RepellingCase k);
std::string to_string(ReflectingBranch b);

struct EntryRecord {
    double c = 0.0;
    EntryTopology topology = EntryTopology::SingleThreshold;
    RepellingCase rcase = RepellingCase::NA;
    ReflectingBranch rbranch = ReflectingBranch::NA;
    // SingleThreshold uses l1; TripleBoundary uses l1 < l2 <= l3.
    double l1 = 0.0, l2 = 0.0, l3 = 0.0;
    std::optional<double> m1, m2;       // repelling case-iii diagnostics
    std::optional<double> gamma_star;   // repelling
    std::string error;                  // nonempty if the per-c solve failed
};

/// V(x,c) evaluator assembled from one entry record.
class EntryValue {
  public:
    double operator()(double x) const;
    const EntryRecord& record() const { return rec_; }

  private:
    friend class EntrySolver;
    EntryRecord rec_;
    const GainFunction* gain_ = nullptr;
    double p0_ = 0.0;
    std::optional<RepellingSlice> slice_;
    // cached logs/values at the boundaries
    double log_phi_l_ = 0.0, u_l1_ = 0.0, u_l2_ = 0.0, u_l3_ = 0.0;
    double log_phi_l3_ = 0.0, f1_l1l2_ = 0.0;

    double u_at(double x) const;
};

class EntrySolver {
  public:
    EntrySolver(const GainFunction& gain, const SolveOptions& opt = {});

    const GainFunction& gain() const { return *gain_; }

    // ---- reflecting-case operations ----
    /// Smooth-fit root of the auxiliary problem at inventory c (strictly increasing in c).
    double solve_alpha_star(double c) const;
    /// Auxiliary value Gamma(x,c) <= 0, zero at and below alpha*(c).
    double gamma_small(double x, double c) const;
    /// Crossing of the increasing alpha* with the decreasing beta*; absent when
    /// alpha* > beta* everywhere (then l* = alpha* for all c).
    std::optional<double> c_star() const;
    /// Hhat(x,c) = (U - P0) phi' - U_x phi. The phi factor is soft-clamped at
    /// exp(600) so the far-left tail stays finite; signs and zeros are exact.
    double hhat_residual(double x, double c) const;
    EntryRecord solve_entry_reflecting(double c) const;

    // ---- repelling-case operations ----
    RepellingCase classify_repelling_case(double c, double* m1_out = nullptr,
                                          double* m2_out = nullptr) const;
    EntryRecord solve_entry_repelling(double c) const;

    /// Regime dispatch; c = 1 yields the trivial stop-now record.
    EntryRecord solve_entry(double c) const;

    /// Per-c solves over a grid; failures are captured in the record's error field.
    std::vector<EntryRecord> solve_grid(const std::vector<double>& cs, bool parallel) const;

    EntryValue make_value(const EntryRecord& rec) const;
    double entry_value_V(double x, const EntryRecord& rec) const { return make_value(rec)(x); }

  private:
    struct FMin {
        double location;
        double value;
        bool interior;
    };
    /// Minimum of F(x) = (U(x,c) - P0)/phi(x) over [lo, hi] (coarse scan + golden section).
    FMin minimize_script_f(const RepellingSlice& s, double lo, double hi) const;
    double script_f(const RepellingSlice& s, double x) const;
    /// Scaled smooth-fit residual (U - P0) phi'/phi - U_x for the repelling slice.
    double fit_residual(const RepellingSlice& s, double x) const;
    double unique_root(const std::function<double(double)>& f, double lo, double hi,
                       const char* what) const;
    void solve_triple(const RepellingSlice& s, double x10, double x20, EntryRecord& rec) const;

    const GainFunction* gain_;
    SolveOptions opt_;
    mutable std::optional<std::optional<double>> c_star_cache_;
};

}  // namespace ouentry
