#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "segkit/design.hpp"
#include "segkit/estimators.hpp"
#include "segkit/frame.hpp"

namespace segkit {

struct KboCovariate {
  std::string name;
  double endowment = 0.0;
  double coefficient = 0.0;
  double interaction = 0.0;
  double se_endowment = 0.0;
  double se_coefficient = 0.0;
  double se_interaction = 0.0;
};

struct KboResult {
  std::string label;  // period id in by-period runs
  double overall_gap = 0.0;
  double endowment = 0.0;
  double coefficient = 0.0;
  double interaction = 0.0;
  double se_overall = 0.0;
  double se_endowment = 0.0;
  double se_coefficient = 0.0;
  double se_interaction = 0.0;
  std::vector<KboCovariate> per_covariate;  // one row per design column, intercept included
  std::size_t n_a = 0;
  std::size_t n_b = 0;
  Eigen::VectorXd mean_a;  // covariate means
  Eigen::VectorXd mean_b;
  FitResult fit_a;
  FitResult fit_b;
  std::vector<std::string> warnings;
};

/// Three-fold decomposition of mean(y_a) - mean(y_b):
///   endowment   (xa - xb)' b_b
///   coefficient  xb' (b_a - b_b)
///   interaction (xa - xb)' (b_a - b_b)
/// with OLS (HC1) fits per group. Both designs need the same columns and an
/// intercept. Standard errors are delta-method with independent group fits and
/// covariate means carrying their sampling covariance S / n.
KboResult kbo_threefold(const Eigen::VectorXd& y_a, const DesignMatrix& X_a, const Eigen::VectorXd& y_b,
                        const DesignMatrix& X_b);

struct KboPeriodOptions {
  std::string period_column;
  std::string group_column;
  std::string group_a;  // cell text of the a group, e.g. "0" for female == false
  std::optional<std::string> stratum_column;
  std::optional<std::string> stratum_level;
};

struct KboSeries {
  std::vector<KboResult> periods;
  std::vector<std::string> warnings;  // StratumTooSmall skips
};

/// One decomposition per period. A period where either group has no more rows
/// than design columns is skipped with a StratumTooSmall warning.
KboSeries kbo_by_period(const Frame& frame, const Formula& formula, const KboPeriodOptions& options);

std::string format_kbo_csv(const std::vector<KboResult>& results);  // period,component,covariate,estimate,se

}  // namespace segkit
