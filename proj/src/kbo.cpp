#include "segkit/kbo.hpp"

#include <fmt/format.h>

#include <cmath>

#include "segkit/error.hpp"

namespace segkit {

namespace {

Eigen::MatrixXd mean_covariance(const Eigen::MatrixXd& X) {
  const double n = static_cast<double>(X.rows());
  const Eigen::RowVectorXd mean = X.colwise().mean();
  const Eigen::MatrixXd centered = X.rowwise() - mean;
  return (centered.transpose() * centered) / (n - 1.0) / n;
}

double sample_variance(const Eigen::VectorXd& y) {
  if (y.size() < 2) return 0.0;
  return (y.array() - y.mean()).square().sum() / static_cast<double>(y.size() - 1);
}

double quad(const Eigen::VectorXd& v, const Eigen::MatrixXd& m) { return v.dot(m * v); }

}  // namespace

KboResult kbo_threefold(const Eigen::VectorXd& y_a, const DesignMatrix& X_a, const Eigen::VectorXd& y_b,
                        const DesignMatrix& X_b) {
  if (X_a.column_names != X_b.column_names)
    throw Error(ErrorCode::kColumnMismatch, "the two groups' designs have different columns");
  if (!X_a.has_intercept || X_a.roles.empty() || X_a.roles.front() != ColumnRole::kIntercept)
    throw Error(ErrorCode::kInvalidArgument, "the decomposition needs an intercept in the first column");

  KboResult r;
  for (const auto& name : X_a.zero_columns) r.warnings.push_back(fmt::format("column '{}' is all zero in group a", name));
  for (const auto& name : X_b.zero_columns) r.warnings.push_back(fmt::format("column '{}' is all zero in group b", name));
  r.fit_a = ols(y_a, X_a);
  r.fit_b = ols(y_b, X_b);
  r.n_a = r.fit_a.n;
  r.n_b = r.fit_b.n;
  r.mean_a = X_a.X.colwise().mean().transpose();
  r.mean_b = X_b.X.colwise().mean().transpose();
  const Eigen::MatrixXd Sa = mean_covariance(X_a.X);
  const Eigen::MatrixXd Sb = mean_covariance(X_b.X);
  const Eigen::MatrixXd& Va = r.fit_a.vcov;
  const Eigen::MatrixXd& Vb = r.fit_b.vcov;
  const Eigen::VectorXd& ba = r.fit_a.beta;
  const Eigen::VectorXd& bb = r.fit_b.beta;
  const Eigen::VectorXd d = r.mean_a - r.mean_b;
  const Eigen::VectorXd db = ba - bb;

  r.overall_gap = y_a.mean() - y_b.mean();
  r.se_overall = std::sqrt(sample_variance(y_a) / static_cast<double>(y_a.size()) +
                           sample_variance(y_b) / static_cast<double>(y_b.size()));

  for (Eigen::Index j = 0; j < d.size(); ++j) {
    KboCovariate c;
    c.name = X_a.column_names[static_cast<std::size_t>(j)];
    c.endowment = d(j) * bb(j);
    c.coefficient = r.mean_b(j) * db(j);
    c.interaction = d(j) * db(j);
    const double s_mean = Sa(j, j) + Sb(j, j);
    c.se_endowment = std::sqrt(d(j) * d(j) * Vb(j, j) + bb(j) * bb(j) * s_mean);
    c.se_coefficient = std::sqrt(r.mean_b(j) * r.mean_b(j) * (Va(j, j) + Vb(j, j)) + db(j) * db(j) * Sb(j, j));
    c.se_interaction = std::sqrt(d(j) * d(j) * (Va(j, j) + Vb(j, j)) + db(j) * db(j) * s_mean);
    r.endowment += c.endowment;
    r.coefficient += c.coefficient;
    r.interaction += c.interaction;
    r.per_covariate.push_back(std::move(c));
  }
  r.se_endowment = std::sqrt(quad(d, Vb) + quad(bb, Sa + Sb));
  r.se_coefficient = std::sqrt(quad(r.mean_b, Va + Vb) + quad(db, Sb));
  r.se_interaction = std::sqrt(quad(d, Va + Vb) + quad(db, Sa + Sb));
  return r;
}

KboSeries kbo_by_period(const Frame& frame, const Formula& formula, const KboPeriodOptions& options) {
  const Column& period = frame.column(options.period_column);
  const Column& group = frame.column(options.group_column);
  const Column* stratum = options.stratum_column ? &frame.column(*options.stratum_column) : nullptr;
  if (stratum && !options.stratum_level)
    throw Error(ErrorCode::kInvalidArgument, "a stratum column needs a stratum level");

  std::vector<std::string> ids;
  for (std::size_t i = 0; i < frame.n_rows(); ++i) {
    if (period.is_missing(i)) continue;
    auto id = cell_text(period, i);
    if (std::find(ids.begin(), ids.end(), id) == ids.end()) ids.push_back(std::move(id));
  }
  sort_ids(ids);

  KboSeries out;
  for (const auto& id : ids) {
    std::vector<std::size_t> rows_a, rows_b;
    for (std::size_t i = 0; i < frame.n_rows(); ++i) {
      if (period.is_missing(i) || group.is_missing(i) || cell_text(period, i) != id) continue;
      if (stratum && (stratum->is_missing(i) || cell_text(*stratum, i) != *options.stratum_level)) continue;
      (cell_text(group, i) == options.group_a ? rows_a : rows_b).push_back(i);
    }
    try {
      if (rows_a.empty() || rows_b.empty()) throw Error(ErrorCode::kEmptyAfterDeletion, "a group is empty");
      const Design a = build_design(frame, formula, rows_a);
      const Design b = build_design(frame, formula, rows_b);
      const auto k = a.X.cols();
      if (a.X.rows() <= k || b.X.rows() <= k)
        throw Error(ErrorCode::kStratumTooSmall,
                    fmt::format("{} and {} rows for {} columns", a.X.rows(), b.X.rows(), k));
      KboResult r = kbo_threefold(a.y, a.X, b.y, b.X);
      r.label = id;
      out.periods.push_back(std::move(r));
    } catch (const Error& e) {
      if (e.code() != ErrorCode::kStratumTooSmall && e.code() != ErrorCode::kEmptyAfterDeletion) throw;
      out.warnings.push_back(fmt::format("StratumTooSmall: period {} skipped ({})", id, e.what()));
    }
  }
  return out;
}

std::string format_kbo_csv(const std::vector<KboResult>& results) {
  std::vector<std::optional<std::string>> period, component, covariate;
  std::vector<double> estimate, se;
  auto add = [&](const KboResult& r, const char* comp, const std::string& cov, double est, double s) {
    period.emplace_back(r.label);
    component.emplace_back(std::string(comp));
    covariate.emplace_back(cov);
    estimate.push_back(est);
    se.push_back(s);
  };
  for (const auto& r : results) {
    add(r, "overall", "total", r.overall_gap, r.se_overall);
    add(r, "endowment", "total", r.endowment, r.se_endowment);
    add(r, "coefficient", "total", r.coefficient, r.se_coefficient);
    add(r, "interaction", "total", r.interaction, r.se_interaction);
    for (const auto& c : r.per_covariate) {
      add(r, "endowment", c.name, c.endowment, c.se_endowment);
      add(r, "coefficient", c.name, c.coefficient, c.se_coefficient);
      add(r, "interaction", c.name, c.interaction, c.se_interaction);
    }
  }
  return format_csv(Frame({Column::categorical("period", period), Column::categorical("component", component),
                           Column::categorical("covariate", covariate), Column::numeric("estimate", std::move(estimate)),
                           Column::numeric("se", std::move(se))}));
}

}  // namespace segkit
