#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "segkit/design.hpp"

namespace segkit {

enum class VcovKind { kClassical, kRobustHc1 };

struct FitResult {
  Eigen::VectorXd beta;
  Eigen::MatrixXd vcov;
  Eigen::VectorXd se;
  Eigen::VectorXd residuals;
  Eigen::VectorXd fitted;
  std::size_t n = 0;
  std::size_t k = 0;
  std::optional<double> loglik;  // probit only
  std::vector<double> loglik_path;  // probit: log-likelihood at each accepted iterate
  std::vector<std::string> column_names;
  int iterations = 0;
};

/// Least squares by column-pivoted Householder QR.
///
/// Throws TooFewRows when n <= k and RankDeficient (naming the dependent
/// columns) when the design is not of full column rank. HC1 covariance is
/// n/(n-k) (X'X)^-1 X' diag(e^2) X (X'X)^-1.
FitResult ols(const Eigen::VectorXd& y, const DesignMatrix& X, VcovKind vcov = VcovKind::kRobustHc1);
FitResult ols(const Eigen::VectorXd& y, const Eigen::MatrixXd& X,
              const std::vector<std::string>& names, VcovKind vcov = VcovKind::kRobustHc1);

struct ProbitOptions {
  int max_iterations = 100;
  double score_tolerance = 1e-8;
  double relative_loglik_tolerance = 1e-12;
  double step_tolerance = 1e-10;  // Newton step on the RMS-scaled coefficients
  double separation_bound = 30.0;  // |x'b| beyond this while diverging
};

/// Probit maximum likelihood by Newton-Raphson with step halving. The
/// covariance is the inverse observed information at the optimum.
FitResult probit(const Eigen::VectorXd& y, const DesignMatrix& X, const ProbitOptions& options = {});
FitResult probit(const Eigen::VectorXd& y, const Eigen::MatrixXd& X,
                 const std::vector<std::string>& names, const ProbitOptions& options = {});

double probit_loglik(const Eigen::VectorXd& y, const Eigen::MatrixXd& X, const Eigen::VectorXd& beta);
Eigen::VectorXd probit_score(const Eigen::VectorXd& y, const Eigen::MatrixXd& X,
                             const Eigen::VectorXd& beta);
// Hessian of the log-likelihood (negative definite at an interior optimum).
Eigen::MatrixXd probit_hessian(const Eigen::VectorXd& y, const Eigen::MatrixXd& X,
                               const Eigen::VectorXd& beta);

struct ProbitMarginals {
  Eigen::VectorXd ame;
  Eigen::VectorXd se;  // delta method
  std::vector<std::string> column_names;
};

/// Average marginal effects. Dummy columns use the discrete change in the
/// predicted probability; every other column uses mean phi(x'b) * b_j.
ProbitMarginals probit_ame(const FitResult& fit, const DesignMatrix& X);

struct LassoOptions {
  std::size_t grid_size = 100;
  double lambda_min_ratio = 1e-4;
  bool append_zero = false;  // extra unpenalised grid point at lambda = 0
  double tolerance = 1e-13;  // max coordinate change, standardised scale
  std::size_t max_sweeps = 1'000'000;
};

struct LassoPath {
  std::vector<double> lambda_grid;
  Eigen::MatrixXd coef;       // grid x k, original scale, intercept included
  Eigen::MatrixXd coef_std;   // grid x k, standardised scale, intercept slot = 0
  std::vector<double> bic;
  std::vector<double> rss;
  std::vector<std::size_t> df;
  std::size_t selected_index = 0;
  std::vector<std::string> selected_columns;
  FitResult post_ols;
  std::vector<std::string> column_names;
  std::vector<std::string> warnings;
  // Standardisation used internally; sd = 0 marks an excluded column.
  Eigen::VectorXd center;
  Eigen::VectorXd scale;
};

/// Lasso path by cyclic coordinate descent with warm starts, selected by BIC
/// and refitted by OLS on the selected support. Requires an intercept column.
LassoPath lasso_bic(const Eigen::VectorXd& y, const DesignMatrix& X, const LassoOptions& options = {});

}  // namespace segkit
