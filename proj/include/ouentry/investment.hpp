#pragma once

#include <utility>
#include <vector>

#include "ouentry/model.hpp"
#include "ouentry/numerics.hpp"
#include "ouentry/special.hpp"

namespace ouentry {

struct SolveOptions {
    int c_grid_n = 201;          // boundary tabulation nodes on [0,1]
    double x_window_sds = 40.0;  // root brackets reach mu +/- this many stationary sds
    double root_tol = 1e-13;
    double quad_tol = 1e-11;
    int scan_points = 240;
    bool parallel = true;
};

/// Smooth-fit root for the reflecting control boundary at inventory c:
/// G_x(c) - G(x,c) phi'/phi(x) = 0 on (-inf, min(x0, xhat0)).
double solve_beta_star(const ModelParams& p, const special::FundamentalPair& pair_lambda,
                       double c, const SolveOptions& opt = {});

/// C1-pasting root for the repelling control boundary at inventory c, using the
/// (1-c)-normalized form so c -> 1 stays well conditioned.
double solve_gamma_star(const ModelParams& p, const special::FundamentalPair& pair_lambda,
                        double c, const SolveOptions& opt = {});

/// Tabulated control boundary (beta* decreasing, or gamma* decreasing) with a
/// monotone interpolant and, in the reflecting case, the inverse map g*.
class ControlBoundary {
  public:
    static ControlBoundary tabulate(const ModelParams& p, const RegimeInfo& info,
                                    const SolveOptions& opt = {});

    Regime regime() const { return regime_; }
    /// Interpolated boundary value at c.
    double at(double c) const { return interp_(c); }
    /// Fresh root solve at c (no interpolation error).
    double solve_exact(double c) const;

    /// Inverse of beta* with the constant extensions: 0 above beta*(0), 1 below beta*(1).
    double g_star(double x) const;

    const std::vector<double>& grid_c() const { return c_; }
    const std::vector<double>& grid_value() const { return b_; }
    const ModelParams& params() const { return params_; }
    const special::FundamentalPair& pair_lambda() const { return pair_lambda_; }
    const SolveOptions& options() const { return opt_; }

  private:
    ControlBoundary(const ModelParams& p, Regime regime, const SolveOptions& opt);

    ModelParams params_;
    Regime regime_;
    SolveOptions opt_;
    special::FundamentalPair pair_lambda_;
    std::vector<double> c_, b_;
    num::Pchip interp_;
};

/// Per-c evaluator for the repelling gain function, holding the exact gamma*(c).
class RepellingSlice {
  public:
    RepellingSlice(const ModelParams& p, const special::FundamentalPair& pair_lambda, double c,
                   double gamma_star);

    double U(double x) const;
    double Ux(double x) const;
    /// Generator image L(x,c) = (L_X - lambda) U; at x = gamma* returns the left limit.
    double L(double x) const;
    std::pair<double, double> L_limits_at_gamma() const;  // (left, right)
    double jump() const;                                  // Delta^L at gamma*

    double c() const { return c_; }
    double gamma() const { return gamma_; }

  private:
    const special::FundamentalPair* fp_;
    double mu_, theta_, lambda_;
    double c_, gamma_, phi_c_;
    double coef_a_;          // gamma(1-c) - lambda Phi(c) ((gamma-mu)/(lambda+theta) + mu/lambda)
    double log_psi_gamma_;
};

/// Gain function U(x,c) for the solved regime, plus its derivative, generator
/// image, and the reflecting-case auxiliaries (u, Sigma, x^0).
class GainFunction {
  public:
    GainFunction(const ModelParams& p, const ControlBoundary& boundary);

    Regime regime() const { return boundary_->regime(); }
    const ModelParams& params() const { return params_; }
    const ControlBoundary& boundary() const { return *boundary_; }
    const special::FundamentalPair& pair_lambda() const { return boundary_->pair_lambda(); }

    /// Value of the auxiliary stopping problem u (reflecting; zero at and below beta*).
    double u_value(double x, double c) const;

    /// Sigma(c) = -int_c^1 G(beta*(y), y)/phi(beta*(y)) dy (reflecting; tabulated).
    double sigma_integral(double c) const;

    std::pair<double, double> U_and_Ux(double x, double c) const;
    double U(double x, double c) const { return U_and_Ux(x, c).first; }

    /// Generator image L(x,c) = (L_X - lambda) U(x,c).
    double generator_image_L(double x, double c) const;

    /// Repelling: both one-sided limits of L at gamma*(c), and the jump (asserted > 0).
    std::pair<double, double> generator_limits_at_gamma(double c) const;
    double jump_delta_L(double c) const;

    /// Reflecting: unique root of L(x,c) + lambda P0 = 0.
    double x0_of_c(double c) const;

    /// Per-c repelling evaluator with an exact gamma*(c) root solve.
    RepellingSlice slice_repelling(double c) const;

    double g_of(double x, double c) const;  // G(x,c), reflecting auxiliary

  private:
    double reflecting_L(double x, double c) const;

    ModelParams params_;
    const ControlBoundary* boundary_;
    num::Pchip sigma_;  // reflecting only
};

}  // namespace ouentry
