#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace ouentry::num {

struct BracketError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct ConvergenceError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Brent root finder on a bracketing interval [a,b] with f(a)*f(b) <= 0.
template <class F>
double brent(F&& f, double a, double b, double tol_x = 1e-12, int max_iter = 200) {
    double fa = f(a), fb = f(b);
    if (fa == 0.0) return a;
    if (fb == 0.0) return b;
    if (fa * fb > 0.0) {
        throw BracketError("brent: root not bracketed in [" + std::to_string(a) + ", " +
                           std::to_string(b) + "], f=(" + std::to_string(fa) + ", " +
                           std::to_string(fb) + ")");
    }
    double c = a, fc = fa, d = b - a, e = d;
    for (int iter = 0; iter < max_iter; ++iter) {
        if (fb * fc > 0.0) {
            c = a; fc = fa; e = d = b - a;
        }
        if (std::abs(fc) < std::abs(fb)) {
            a = b; b = c; c = a;
            fa = fb; fb = fc; fc = fa;
        }
        const double tol1 = 2.0 * std::numeric_limits<double>::epsilon() * std::abs(b) + 0.5 * tol_x;
        const double xm = 0.5 * (c - b);
        if (std::abs(xm) <= tol1 || fb == 0.0) return b;
        if (std::abs(e) >= tol1 && std::abs(fa) > std::abs(fb)) {
            double p, q, r;
            const double s = fb / fa;
            if (a == c) {
                p = 2.0 * xm * s;
                q = 1.0 - s;
            } else {
                q = fa / fc;
                r = fb / fc;
                p = s * (2.0 * xm * q * (q - r) - (b - a) * (r - 1.0));
                q = (q - 1.0) * (r - 1.0) * (s - 1.0);
            }
            if (p > 0.0) q = -q;
            p = std::abs(p);
            const double min1 = 3.0 * xm * q - std::abs(tol1 * q);
            const double min2 = std::abs(e * q);
            if (2.0 * p < std::min(min1, min2)) {
                e = d; d = p / q;
            } else {
                d = xm; e = d;
            }
        } else {
            d = xm; e = d;
        }
        a = b; fa = fb;
        b += (std::abs(d) > tol1) ? d : (xm > 0.0 ? tol1 : -tol1);
        fb = f(b);
    }
    throw ConvergenceError("brent: max iterations reached");
}

/// Scan [a,b] at n+1 equispaced points; return the first subinterval with a sign change.
template <class F>
std::optional<std::pair<double, double>> scan_bracket(F&& f, double a, double b, int n) {
    double x_prev = a, f_prev = f(a);
    for (int i = 1; i <= n; ++i) {
        const double x = a + (b - a) * static_cast<double>(i) / n;
        const double fx = f(x);
        if (std::isfinite(f_prev) && std::isfinite(fx) && f_prev * fx <= 0.0) {
            return std::make_pair(x_prev, x);
        }
        x_prev = x; f_prev = fx;
    }
    return std::nullopt;
}

/// Scan [a,b] and collect every sign-change subinterval (used to detect spurious
/// multiple roots where theory promises uniqueness).
template <class F>
std::vector<std::pair<double, double>> scan_all_brackets(F&& f, double a, double b, int n) {
    std::vector<std::pair<double, double>> out;
    double x_prev = a, f_prev = f(a);
    for (int i = 1; i <= n; ++i) {
        const double x = a + (b - a) * static_cast<double>(i) / n;
        const double fx = f(x);
        if (std::isfinite(f_prev) && std::isfinite(fx) && f_prev * fx < 0.0) {
            out.emplace_back(x_prev, x);
        }
        x_prev = x; f_prev = fx;
    }
    return out;
}

/// Golden-section minimizer on [a,b]; assumes a single interior minimum.
template <class F>
double golden_min(F&& f, double a, double b, double tol_x = 1e-10, int max_iter = 200) {
    constexpr double invphi = 0.6180339887498949;
    double x1 = b - invphi * (b - a);
    double x2 = a + invphi * (b - a);
    double f1 = f(x1), f2 = f(x2);
    for (int i = 0; i < max_iter && (b - a) > tol_x; ++i) {
        if (f1 < f2) {
            b = x2; x2 = x1; f2 = f1;
            x1 = b - invphi * (b - a); f1 = f(x1);
        } else {
            a = x1; x1 = x2; f1 = f2;
            x2 = a + invphi * (b - a); f2 = f(x2);
        }
    }
    return 0.5 * (a + b);
}

namespace detail {
template <class F>
double simpson_rec(F& f, double a, double b, double fa, double fm, double fb, double whole,
                   double tol, int depth) {
    const double m = 0.5 * (a + b);
    const double lm = 0.5 * (a + m), rm = 0.5 * (m + b);
    const double flm = f(lm), frm = f(rm);
    const double left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    const double right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    const double delta = left + right - whole;
    if (depth <= 0 || std::abs(delta) <= 15.0 * tol) {
        return left + right + delta / 15.0;
    }
    return simpson_rec(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1) +
           simpson_rec(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1);
}
}  // namespace detail

/// Adaptive Simpson quadrature on [a,b].
template <class F>
double adaptive_simpson(F&& f, double a, double b, double tol = 1e-11, int max_depth = 48) {
    if (a == b) return 0.0;
    const double fa = f(a), fb = f(b), fm = f(0.5 * (a + b));
    const double whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    return detail::simpson_rec(f, a, b, fa, fm, fb, whole, tol, max_depth);
}

/// Kahan compensated accumulator.
class KahanSum {
  public:
    void add(double v) {
        const double y = v - comp_;
        const double t = sum_ + y;
        comp_ = (t - sum_) - y;
        sum_ = t;
    }
    double value() const { return sum_; }

  private:
    double sum_ = 0.0;
    double comp_ = 0.0;
};

/// splitmix64 step; used to derive independent per-path RNG seeds.
inline std::uint64_t splitmix64(std::uint64_t& state) {
    std::uint64_t z = (state += 0x9E3779B97F4A7C15ULL);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

/// Shape-preserving monotone cubic interpolant (Fritsch-Carlson).
class Pchip {
  public:
    Pchip() = default;
    Pchip(std::vector<double> x, std::vector<double> y) : x_(std::move(x)), y_(std::move(y)) {
        const std::size_t n = x_.size();
        if (n < 2 || y_.size() != n) throw std::invalid_argument("Pchip: need >= 2 nodes");
        for (std::size_t i = 1; i < n; ++i) {
            if (!(x_[i] > x_[i - 1])) throw std::invalid_argument("Pchip: x not increasing");
        }
        d_.resize(n);
        std::vector<double> h(n - 1), delta(n - 1);
        for (std::size_t i = 0; i + 1 < n; ++i) {
            h[i] = x_[i + 1] - x_[i];
            delta[i] = (y_[i + 1] - y_[i]) / h[i];
        }
        if (n == 2) {
            d_[0] = d_[1] = delta[0];
        } else {
            for (std::size_t i = 1; i + 1 < n; ++i) {
                if (delta[i - 1] * delta[i] <= 0.0) {
                    d_[i] = 0.0;
                } else {
                    const double w1 = 2.0 * h[i] + h[i - 1];
                    const double w2 = h[i] + 2.0 * h[i - 1];
                    d_[i] = (w1 + w2) / (w1 / delta[i - 1] + w2 / delta[i]);
                }
            }
            d_[0] = edge_slope(h[0], h[1], delta[0], delta[1]);
            d_[n - 1] = edge_slope(h[n - 2], h[n - 3], delta[n - 2], delta[n - 3]);
        }
    }

    double operator()(double x) const {
        const std::size_t i = interval(x);
        const double h = x_[i + 1] - x_[i];
        const double t = (x - x_[i]) / h;
        const double t2 = t * t, t3 = t2 * t;
        const double h00 = 2 * t3 - 3 * t2 + 1, h10 = t3 - 2 * t2 + t;
        const double h01 = -2 * t3 + 3 * t2, h11 = t3 - t2;
        return h00 * y_[i] + h * h10 * d_[i] + h01 * y_[i + 1] + h * h11 * d_[i + 1];
    }

    double x_front() const { return x_.front(); }
    double x_back() const { return x_.back(); }
    const std::vector<double>& nodes_x() const { return x_; }
    const std::vector<double>& nodes_y() const { return y_; }

  private:
    static double edge_slope(double h0, double h1, double d0, double d1) {
        double d = ((2.0 * h0 + h1) * d0 - h0 * d1) / (h0 + h1);
        if (d * d0 <= 0.0) return 0.0;
        if (d0 * d1 <= 0.0 && std::abs(d) > 3.0 * std::abs(d0)) return 3.0 * d0;
        return d;
    }

    std::size_t interval(double x) const {
        const auto it = std::upper_bound(x_.begin(), x_.end(), x);
        std::size_t i = static_cast<std::size_t>(std::distance(x_.begin(), it));
        if (i == 0) return 0;
        if (i >= x_.size()) return x_.size() - 2;
        return i - 1;
    }

    std::vector<double> x_, y_, d_;
};


/// Piecewise-cubic Hermite interpolant with caller-supplied node slopes.
class CubicHermite {
  public:
    CubicHermite() = default;
    CubicHermite(std::vector<double> x, std::vector<double> y, std::vector<double> d)
        : x_(std::move(x)), y_(std::move(y)), d_(std::move(d)) {
        if (x_.size() < 2 || y_.size() != x_.size() || d_.size() != x_.size()) {
            throw std::invalid_argument("CubicHermite: need matching arrays of >= 2 nodes");
        }
    }

    double operator()(double x) const {
        const std::size_t i = interval(x);
        const double h = x_[i + 1] - x_[i];
        const double t = (x - x_[i]) / h;
        const double t2 = t * t, t3 = t2 * t;
        return (2 * t3 - 3 * t2 + 1) * y_[i] + h * (t3 - 2 * t2 + t) * d_[i] +
               (-2 * t3 + 3 * t2) * y_[i + 1] + h * (t3 - t2) * d_[i + 1];
    }

    double x_front() const { return x_.front(); }
    double x_back() const { return x_.back(); }

  private:
    std::size_t interval(double x) const {
        const auto it = std::upper_bound(x_.begin(), x_.end(), x);
        std::size_t i = static_cast<std::size_t>(std::distance(x_.begin(), it));
        if (i == 0) return 0;
        if (i >= x_.size()) return x_.size() - 2;
        return i - 1;
    }

    std::vector<double> x_, y_, d_;
};

/// Natural cubic spline (used for fast smooth-function tabulation).
class CubicSpline {
  public:
    CubicSpline() = default;
    CubicSpline(std::vector<double> x, std::vector<double> y) : x_(std::move(x)), y_(std::move(y)) {
        const std::size_t n = x_.size();
        if (n < 3 || y_.size() != n) throw std::invalid_argument("CubicSpline: need >= 3 nodes");
        m_.assign(n, 0.0);
        std::vector<double> a(n, 0.0), b(n, 0.0), c(n, 0.0), r(n, 0.0);
        b[0] = 1.0; b[n - 1] = 1.0;
        for (std::size_t i = 1; i + 1 < n; ++i) {
            const double hl = x_[i] - x_[i - 1], hr = x_[i + 1] - x_[i];
            a[i] = hl / 6.0;
            b[i] = (hl + hr) / 3.0;
            c[i] = hr / 6.0;
            r[i] = (y_[i + 1] - y_[i]) / hr - (y_[i] - y_[i - 1]) / hl;
        }
        for (std::size_t i = 1; i < n; ++i) {
            const double w = a[i] / b[i - 1];
            b[i] -= w * c[i - 1];
            r[i] -= w * r[i - 1];
        }
        m_[n - 1] = r[n - 1] / b[n - 1];
        for (std::size_t i = n - 1; i-- > 0;) {
            m_[i] = (r[i] - c[i] * m_[i + 1]) / b[i];
        }
    }

    double operator()(double x) const {
        const std::size_t i = interval(x);
        const double h = x_[i + 1] - x_[i];
        const double A = (x_[i + 1] - x) / h, B = (x - x_[i]) / h;
        return A * y_[i] + B * y_[i + 1] +
               ((A * A * A - A) * m_[i] + (B * B * B - B) * m_[i + 1]) * h * h / 6.0;
    }

    double x_front() const { return x_.front(); }
    double x_back() const { return x_.back(); }

  private:
    std::size_t interval(double x) const {
        const auto it = std::upper_bound(x_.begin(), x_.end(), x);
        std::size_t i = static_cast<std::size_t>(std::distance(x_.begin(), it));
        if (i == 0) return 0;
        if (i >= x_.size()) return x_.size() - 2;
        return i - 1;
    }

    std::vector<double> x_, y_, m_;
};

}  // namespace ouentry::num
