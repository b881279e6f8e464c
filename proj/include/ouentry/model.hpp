#pragma once

#include <optional>
#include <string>
#include <vector>

namespace ouentry {

/// Polynomial penalty in powers of (1-c): Phi(c) = sum_j a_j (1-c)^j, j = 1..degree.
/// The missing constant term enforces Phi(1) = 0 exactly.
class Penalty {
  public:
    Penalty() = default;
    /// coeffs[j-1] multiplies (1-c)^j; degree must be >= 2.
    explicit Penalty(std::vector<double> coeffs);

    double value(double c) const;
    double deriv(double c) const;
    double second_deriv(double c) const;
    /// Phi(c)/(1-c) = sum_j a_j (1-c)^{j-1}, finite also at c = 1.
    double value_div_gap(double c) const;

    const std::vector<double>& coeffs() const { return coeffs_; }
    int degree() const { return static_cast<int>(coeffs_.size()); }

    /// Checks Phi > 0, Phi' < 0, Phi'' > 0 on a 1001-point grid over [0,1).
    /// Throws std::invalid_argument with the first offending point otherwise.
    void validate() const;

  private:
    std::vector<double> coeffs_;
};

struct ModelParams {
    double mu = 1.0;      // equilibrium price level
    double theta = 1.0;   // mean-reversion rate, > 0
    double sigma = 1.0;   // volatility, > 0
    double lambda = 1.0;  // demand-arrival intensity, > 0
    double p0 = 1.0;      // initial premium
    Penalty penalty;

    /// Throws std::invalid_argument on theta/sigma/lambda <= 0 or an invalid penalty.
    void validate() const;

    /// sigma / sqrt(2 theta), the stationary standard deviation of the price.
    double stationary_sd() const;
};

enum class Regime { Reflecting, Repelling, Unsupported };

std::string to_string(Regime r);

struct RegimeInfo {
    Regime regime = Regime::Unsupported;
    /// Root of k(c) = 0 over the reals when a sign change exists (diagnostic only).
    std::optional<double> chat;
};

/// k(c) = lambda + theta + lambda Phi'(c).
double k_of(const ModelParams& p, double c);

/// zeta(c) = (lambda + theta)(1-c) - lambda Phi(c) = integral of k over [c,1].
double zeta_of(const ModelParams& p, double c);

/// Endpoint-sign classification; k is monotone in c because Phi'' > 0, so the
/// endpoint signs decide the sign on all of [0,1].
RegimeInfo classify_regime(const ModelParams& p);

/// Reference abscissae; a field is absent when its denominator vanishes.
struct ReferencePoints {
    std::optional<double> x0;      // -theta mu Phi'(c) / k(c)
    std::optional<double> xhat0;   // theta mu / k(c)
    std::optional<double> xbar0;   // theta mu Phi(c) / zeta(c)
    std::optional<double> xtilde;  // theta mu (1-c) / zeta(c)
    std::optional<double> x1_0;    // P0 / Phi(c)
    std::optional<double> x2_0;    // (theta mu (1-c) + lambda P0) / ((lambda+theta)(1-c))
    std::optional<double> xdag0;   // mu + (P0 - mu Phi(c)) (lambda+theta) / (lambda Phi(c))
};

ReferencePoints reference_points(const ModelParams& p, double c);

}  // namespace ouentry
