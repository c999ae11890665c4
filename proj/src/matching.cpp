#include "segkit/matching.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "segkit/error.hpp"
#include "segkit/normal.hpp"

namespace segkit {

namespace {

double clamp_score(double p) { return std::clamp(p, kScoreClamp, 1.0 - kScoreClamp); }

double sample_variance(std::span<const double> v) {
  if (v.size() < 2) return 0.0;
  const double mean = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
  double ss = 0.0;
  for (double x : v) ss += (x - mean) * (x - mean);
  return ss / static_cast<double>(v.size() - 1);
}

struct Moments {
  double mean = 0.0;
  double var = 0.0;
};

// Weighted mean and variance with the small-sample correction for normalised
// weights, which reduces to the usual n - 1 form for equal weights.
Moments weighted_moments(const std::vector<double>& x, const std::vector<double>& w) {
  double sw = 0.0, sw2 = 0.0;
  for (double wi : w) {
    sw += wi;
    sw2 += wi * wi;
  }
  Moments m;
  if (sw <= 0.0) return m;
  for (std::size_t i = 0; i < x.size(); ++i) m.mean += w[i] * x[i];
  m.mean /= sw;
  double ss = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) ss += w[i] * (x[i] - m.mean) * (x[i] - m.mean);
  const double denom = sw - sw2 / sw;
  m.var = denom > 0.0 ? ss / denom : 0.0;
  return m;
}

double standardized_bias(double mean_t, double mean_c, double var_t, double var_c) {
  const double denom = std::sqrt(0.5 * (var_t + var_c));
  if (!(denom > 0.0)) return 0.0;
  return 100.0 * (mean_t - mean_c) / denom;
}

}  // namespace

std::size_t PScoreModel::n_treated() const {
  return static_cast<std::size_t>((treatment.array() == 1.0).count());
}

PScoreModel estimate_pscore(const Frame& frame, std::string_view treatment, const Formula& spec,
                            std::span<const std::string> also_complete) {
  std::vector<const Column*> extra;
  for (const auto& name : also_complete) extra.push_back(&frame.column(name));
  std::vector<std::size_t> rows;
  for (std::size_t i = 0; i < frame.n_rows(); ++i) {
    bool ok = true;
    for (const auto* c : extra) ok = ok && !c->is_missing(i);
    if (ok) rows.push_back(i);
  }
  Formula f = spec;
  f.response = std::string(treatment);
  Design d = build_design(frame, f, rows);

  PScoreModel ps;
  ps.fit = probit(d.y, d.X);
  ps.treatment = d.y;
  ps.scores = (d.X.X * ps.fit->beta).unaryExpr([](double eta) { return clamp_score(normal::cdf(eta)); });
  ps.row_index = d.X.row_index;
  ps.design = std::move(d.X);
  return ps;
}

PScoreModel pscore_from_scores(const Eigen::VectorXd& scores, const Eigen::VectorXd& treatment) {
  if (scores.size() != treatment.size())
    throw Error(ErrorCode::kInvalidArgument, "scores and treatment differ in length");
  PScoreModel ps;
  ps.scores = scores.unaryExpr([](double p) { return clamp_score(p); });
  ps.treatment = treatment;
  ps.row_index.resize(static_cast<std::size_t>(scores.size()));
  std::iota(ps.row_index.begin(), ps.row_index.end(), std::size_t{0});
  for (Eigen::Index i = 0; i < treatment.size(); ++i)
    if (treatment(i) != 0.0 && treatment(i) != 1.0)
      throw Error(ErrorCode::kInvalidArgument, "treatment must be 0/1");
  return ps;
}

Eigen::VectorXd aligned_outcome(const PScoreModel& ps, const Column& outcome) {
  Eigen::VectorXd y(static_cast<Eigen::Index>(ps.row_index.size()));
  for (std::size_t i = 0; i < ps.row_index.size(); ++i) {
    const auto r = ps.row_index[i];
    if (outcome.is_missing(r))
      throw Error(ErrorCode::kInvalidArgument,
                  fmt::format("outcome '{}' is missing at row {}; list it in also_complete", outcome.name(), r));
    y(static_cast<Eigen::Index>(i)) = outcome.number(r);
  }
  return y;
}

MatchResult match_att(const PScoreModel& ps, const Eigen::VectorXd& outcome, const MatchOptions& options) {
  const Eigen::Index n = ps.scores.size();
  if (outcome.size() != n) throw Error(ErrorCode::kInvalidArgument, "outcome is not aligned with the scores");
  if (options.k == 0) throw Error(ErrorCode::kInvalidArgument, "k must be at least 1");

  std::vector<std::size_t> controls, treated_all;
  for (Eigen::Index i = 0; i < n; ++i) (ps.treatment(i) == 1.0 ? treated_all : controls).push_back(static_cast<std::size_t>(i));
  if (controls.empty()) throw Error(ErrorCode::kNoControls, "no untreated units to match against");

  auto score = [&](std::size_t i) { return ps.scores(static_cast<Eigen::Index>(i)); };
  std::stable_sort(controls.begin(), controls.end(), [&](auto a, auto b) { return score(a) < score(b); });
  const double cmin = score(controls.front());
  const double cmax = score(controls.back());

  MatchResult r;
  r.n_treated = treated_all.size();
  r.n_untreated = controls.size();
  r.control_weight = Eigen::VectorXd::Zero(n);
  const std::size_t k = std::min(options.k, controls.size());

  std::vector<std::pair<double, std::size_t>> cand;
  for (std::size_t t : treated_all) {
    const double p = score(t);
    if (options.common_support && (p < cmin || p > cmax)) continue;
    // Walk outwards from the insertion point, then keep taking candidates tied
    // with the k-th distance so the index rule decides among them.
    auto pos = std::lower_bound(controls.begin(), controls.end(), p, [&](std::size_t c, double v) { return score(c) < v; });
    std::ptrdiff_t lo = (pos - controls.begin()) - 1;
    std::ptrdiff_t hi = pos - controls.begin();
    const auto nc = static_cast<std::ptrdiff_t>(controls.size());
    cand.clear();
    double kth = 0.0;
    while (lo >= 0 || hi < nc) {
      const double dl = lo >= 0 ? p - score(controls[static_cast<std::size_t>(lo)]) : INFINITY;
      const double dh = hi < nc ? score(controls[static_cast<std::size_t>(hi)]) - p : INFINITY;
      const double d = std::min(dl, dh);
      if (cand.size() >= k && d > kth) break;
      if (dl <= dh) {
        cand.emplace_back(dl, controls[static_cast<std::size_t>(lo--)]);
      } else {
        cand.emplace_back(dh, controls[static_cast<std::size_t>(hi++)]);
      }
      if (cand.size() == k) kth = d;
    }
    std::sort(cand.begin(), cand.end());
    cand.resize(k);
    if (options.caliper && cand.front().first > *options.caliper) continue;
    std::vector<std::size_t> m;
    for (const auto& [d, c] : cand)
      if (!options.caliper || d <= *options.caliper) m.push_back(c);
    r.treated.push_back(t);
    r.matches.push_back(std::move(m));
  }
  r.n_treated_on_support = r.treated.size();
  r.n_treated_off_support = r.n_treated - r.n_treated_on_support;
  if (r.treated.empty()) throw Error(ErrorCode::kEmptySupport, "no treated unit lies on the common support");

  const double n_on = static_cast<double>(r.treated.size());
  std::vector<double> y_t, y_m;
  double smin = INFINITY, smax = -INFINITY;
  for (std::size_t i = 0; i < r.treated.size(); ++i) {
    const auto t = r.treated[i];
    y_t.push_back(outcome(static_cast<Eigen::Index>(t)));
    double mean = 0.0;
    for (auto c : r.matches[i]) {
      mean += outcome(static_cast<Eigen::Index>(c));
      r.control_weight(static_cast<Eigen::Index>(c)) += 1.0 / (static_cast<double>(r.matches[i].size()) * n_on);
    }
    y_m.push_back(mean / static_cast<double>(r.matches[i].size()));
    smin = std::min(smin, score(t));
    smax = std::max(smax, score(t));
  }
  for (auto c : controls)
    if (score(c) >= smin && score(c) <= smax) ++r.n_untreated_on_support;

  r.mean_treated = std::accumulate(y_t.begin(), y_t.end(), 0.0) / n_on;
  r.mean_control_matched = std::accumulate(y_m.begin(), y_m.end(), 0.0) / n_on;
  r.att = r.mean_treated - r.mean_control_matched;
  r.se_naive = std::sqrt(sample_variance(y_t) / n_on + sample_variance(y_m) / n_on);
  r.t_stat = r.se_naive > 0.0 ? r.att / r.se_naive : 0.0;
  return r;
}

IpwResult ipw_ate(const PScoreModel& ps, const Eigen::VectorXd& outcome) {
  const Eigen::Index n = ps.scores.size();
  if (outcome.size() != n) throw Error(ErrorCode::kInvalidArgument, "outcome is not aligned with the scores");
  if (n < 2) throw Error(ErrorCode::kTooFewRows, "ipw_ate needs at least two units");
  IpwResult r;
  std::vector<double> summand(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i) {
    const double p = ps.scores(i);
    const double w = (ps.treatment(i) - p) / (p * (1.0 - p));
    r.max_abs_weight = std::max(r.max_abs_weight, std::abs(w));
    summand[static_cast<std::size_t>(i)] = w * outcome(i);
  }
  r.ate = std::accumulate(summand.begin(), summand.end(), 0.0) / static_cast<double>(n);
  r.se = std::sqrt(sample_variance(summand) / static_cast<double>(n));
  if (r.max_abs_weight > 100.0)
    r.warnings.push_back(fmt::format("ExtremeWeights: largest |weight| is {:.4g}", r.max_abs_weight));
  return r;
}

bool BalanceTable::all_pass() const {
  return std::all_of(rows.begin(), rows.end(), [](const BalanceRow& r) { return r.pass; });
}

BalanceTable balance(const PScoreModel& ps, const DesignMatrix& covariates, const MatchResult& matches) {
  const Eigen::Index n = ps.scores.size();
  if (covariates.rows() != n) throw Error(ErrorCode::kInvalidArgument, "covariates are not aligned with the scores");
  BalanceTable table;
  for (Eigen::Index j = 0; j < covariates.cols(); ++j) {
    if (covariates.roles[static_cast<std::size_t>(j)] == ColumnRole::kIntercept) continue;
    std::vector<double> xt, xc, wc, xt_on;
    for (Eigen::Index i = 0; i < n; ++i) {
      const double x = covariates.X(i, j);
      if (ps.treatment(i) == 1.0) {
        xt.push_back(x);
      } else {
        xc.push_back(x);
        wc.push_back(matches.control_weight(i));
      }
    }
    for (auto t : matches.treated) xt_on.push_back(covariates.X(static_cast<Eigen::Index>(t), j));
    const std::vector<double> ones_t(xt.size(), 1.0), ones_c(xc.size(), 1.0), ones_on(xt_on.size(), 1.0);
    const auto mt = weighted_moments(xt, ones_t);
    const auto mc = weighted_moments(xc, ones_c);
    const auto mt_on = weighted_moments(xt_on, ones_on);
    const auto mc_w = weighted_moments(xc, wc);
    BalanceRow row;
    row.covariate = covariates.column_names[static_cast<std::size_t>(j)];
    row.bias_before = standardized_bias(mt.mean, mc.mean, mt.var, mc.var);
    row.bias_after = standardized_bias(mt_on.mean, mc_w.mean, mt_on.var, mc_w.var);
    row.pass = std::abs(row.bias_after) <= 5.0;
    table.rows.push_back(row);
  }
  return table;
}

}  // namespace segkit
