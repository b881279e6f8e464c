#include "ouentry/model.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

#include "ouentry/numerics.hpp"

namespace ouentry {

Penalty::Penalty(std::vector<double> coeffs) : coeffs_(std::move(coeffs)) {
    if (coeffs_.size() < 2) {
        throw std::invalid_argument("Penalty: polynomial degree in (1-c) must be >= 2");
    }
}

double Penalty::value(double c) const {
    const double u = 1.0 - c;
    double acc = 0.0;
    for (std::size_t j = coeffs_.size(); j-- > 0;) {
        acc = acc * u + coeffs_[j];
    }
    return acc * u;
}

double Penalty::deriv(double c) const {
    const double u = 1.0 - c;
    double acc = 0.0;
    for (std::size_t j = coeffs_.size(); j-- > 0;) {
        acc = acc * u + static_cast<double>(j + 1) * coeffs_[j];
    }
    return -acc;
}

double Penalty::value_div_gap(double c) const {
    const double u = 1.0 - c;
    double acc = 0.0;
    for (std::size_t j = coeffs_.size(); j-- > 0;) {
        acc = acc * u + coeffs_[j];
    }
    return acc;
}

double Penalty::second_deriv(double c) const {
    const double u = 1.0 - c;
    double acc = 0.0;
    for (std::size_t j = coeffs_.size(); j-- > 1;) {
        acc = acc * u + static_cast<double>((j + 1) * j) * coeffs_[j];
    }
    return acc;
}

void Penalty::validate() const {
    if (coeffs_.size() < 2) {
        throw std::invalid_argument("Penalty: polynomial degree in (1-c) must be >= 2");
    }
    constexpr int kGridN = 1000;  // 1001 points on [0,1]
    for (int i = 0; i <= kGridN; ++i) {
        const double c = static_cast<double>(i) / kGridN;
        if (c < 1.0) {
            if (!(value(c) > 0.0)) {
                std::ostringstream os;
                os << "Penalty: Phi(c) must be > 0 on [0,1); violated at c=" << c;
                throw std::invalid_argument(os.str());
            }
            if (!(deriv(c) < 0.0)) {
                std::ostringstream os;
                os << "Penalty: Phi'(c) must be < 0 on [0,1); violated at c=" << c;
                throw std::invalid_argument(os.str());
            }
            if (!(second_deriv(c) > 0.0)) {
                std::ostringstream os;
                os << "Penalty: Phi''(c) must be > 0 on [0,1); violated at c=" << c;
                throw std::invalid_argument(os.str());
            }
        }
    }
}

void ModelParams::validate() const {
    if (!(theta > 0.0)) throw std::invalid_argument("ModelParams: theta must be > 0");
    if (!(sigma > 0.0)) throw std::invalid_argument("ModelParams: sigma must be > 0");
    if (!(lambda > 0.0)) throw std::invalid_argument("ModelParams: lambda must be > 0");
    if (!std::isfinite(mu)) throw std::invalid_argument("ModelParams: mu must be finite");
    if (!std::isfinite(p0)) throw std::invalid_argument("ModelParams: p0 must be finite");
    penalty.validate();
}

double ModelParams::stationary_sd() const { return sigma / std::sqrt(2.0 * theta); }

std::string to_string(Regime r) {
    switch (r) {
        case Regime::Reflecting: return "Reflecting";
        case Regime::Repelling: return "Repelling";
        case Regime::Unsupported: return "Unsupported";
    }
    return "?";
}

double k_of(const ModelParams& p, double c) {
    return p.lambda + p.theta + p.lambda * p.penalty.deriv(c);
}

double zeta_of(const ModelParams& p, double c) {
    return (p.lambda + p.theta) * (1.0 - c) - p.lambda * p.penalty.value(c);
}

RegimeInfo classify_regime(const ModelParams& p) {
    RegimeInfo info;
    const double k0 = k_of(p, 0.0);
    const double k1 = k_of(p, 1.0);

    if (k0 > 0.0 && k1 > 0.0) {
        info.regime = Regime::Reflecting;
    } else if (k0 < 0.0 && k1 < 0.0) {
        info.regime = Regime::Repelling;
    } else {
        info.regime = Regime::Unsupported;
    }

    // chat by bisection over a wide interval, diagnostics only. k inherits the
    // monotonicity of Phi' (strict convexity), so a sign change pins the root.
    const double lo = -50.0, hi = 51.0;
    const double klo = k_of(p, lo), khi = k_of(p, hi);
    if (klo * khi < 0.0) {
        info.chat = num::brent([&](double c) { return k_of(p, c); }, lo, hi, 1e-13);
    }
    return info;
}

ReferencePoints reference_points(const ModelParams& p, double c) {
    ReferencePoints r;
    const double kc = k_of(p, c);
    const double zc = zeta_of(p, c);
    const double phic = p.penalty.value(c);
    const double one_minus_c = 1.0 - c;
    const double tm = p.theta * p.mu;

    if (kc != 0.0) {
        r.x0 = -tm * p.penalty.deriv(c) / kc;
        r.xhat0 = tm / kc;
    }
    if (zc != 0.0) {
        r.xbar0 = tm * phic / zc;
        r.xtilde = tm * one_minus_c / zc;
    }
    if (phic != 0.0) {
        r.x1_0 = p.p0 / phic;
        r.xdag0 = p.mu + (p.p0 - p.mu * phic) * (p.lambda + p.theta) / (p.lambda * phic);
    }
    if (one_minus_c != 0.0) {
        r.x2_0 = (tm * one_minus_c + p.lambda * p.p0) / ((p.lambda + p.theta) * one_minus_c);
    }
    return r;
}

}  // namespace ouentry
