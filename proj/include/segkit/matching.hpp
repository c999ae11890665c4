#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "segkit/design.hpp"
#include "segkit/estimators.hpp"
#include "segkit/frame.hpp"

namespace segkit {

inline constexpr double kScoreClamp = 1e-12;

struct PScoreModel {
  std::optional<FitResult> fit;  // absent when scores were supplied directly
  DesignMatrix design;           // empty when scores were supplied directly
  Eigen::VectorXd scores;        // clamped to [1e-12, 1 - 1e-12]
  Eigen::VectorXd treatment;     // 0/1
  std::vector<std::size_t> row_index;  // frame rows behind each entry
  std::size_t n_treated() const;
};

/// Probit propensity score of `treatment` on the right-hand side of `spec`.
/// Rows missing any of `also_complete` (typically the outcome) are dropped
/// together with rows missing model variables, so outcomes align with scores.
PScoreModel estimate_pscore(const Frame& frame, std::string_view treatment, const Formula& spec,
                            std::span<const std::string> also_complete = {});

// Known scores, e.g. the true propensity of a simulation.
PScoreModel pscore_from_scores(const Eigen::VectorXd& scores, const Eigen::VectorXd& treatment);

// Outcome column values at the model's rows.
Eigen::VectorXd aligned_outcome(const PScoreModel& ps, const Column& outcome);

struct MatchOptions {
  std::size_t k = 5;
  bool common_support = true;
  std::optional<double> caliper;  // treated units with no control this close are dropped
};

struct MatchResult {
  double att = 0.0;
  double se_naive = 0.0;
  double t_stat = 0.0;
  double mean_treated = 0.0;
  double mean_control_matched = 0.0;
  std::size_t n_treated = 0;
  std::size_t n_treated_on_support = 0;
  std::size_t n_treated_off_support = 0;
  std::size_t n_untreated = 0;
  std::size_t n_untreated_on_support = 0;
  std::vector<std::size_t> treated;                // on-support treated, model positions
  std::vector<std::vector<std::size_t>> matches;   // per entry of `treated`, control positions
  Eigen::VectorXd control_weight;  // per model position; sums to 1 over controls
};

/// k-nearest-neighbour matching on the score with replacement. Ties at the
/// k-th distance go to the lowest control position. With common support,
/// treated units outside [min, max] of the control scores are dropped.
/// se_naive treats the matches as fixed. NoControls, EmptySupport.
MatchResult match_att(const PScoreModel& ps, const Eigen::VectorXd& outcome, const MatchOptions& options = {});

struct IpwResult {
  double ate = 0.0;
  double se = 0.0;
  double max_abs_weight = 0.0;
  std::vector<std::string> warnings;
};

/// mean of (D - p) / (p (1 - p)) * y with SE sd(summand) / sqrt(n).
/// Warns ExtremeWeights when some |weight| exceeds 100.
IpwResult ipw_ate(const PScoreModel& ps, const Eigen::VectorXd& outcome);

struct BalanceRow {
  std::string covariate;
  double bias_before = 0.0;  // percent
  double bias_after = 0.0;   // percent
  bool pass = true;          // |bias_after| <= 5
};

struct BalanceTable {
  std::vector<BalanceRow> rows;
  bool all_pass() const;
};

/// Standardised bias 100 (mean_T - mean_C) / sqrt((var_T + var_C) / 2) per
/// covariate, before matching over all units and after matching over
/// on-support treated against weighted matched controls. A zero denominator
/// gives 0. The intercept column is skipped.
BalanceTable balance(const PScoreModel& ps, const DesignMatrix& covariates, const MatchResult& matches);

}  // namespace segkit
