#include "segkit/counterfactual.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <numbers>

#include "segkit/error.hpp"

namespace segkit {

std::string to_string(const SubgroupId& id) {
  const char* g = id.gender == Gender::kFemale ? "fml" : "ml";
  const char* d = id.dominance == Dominance::kFemale ? "fml-dom" : "ml-dom";
  return fmt::format("{},{}", g, d);
}

std::vector<WageDecomp> decompose_wages(std::span<const SubgroupModel> subgroups, SubgroupId reference) {
  const SubgroupModel* ref = nullptr;
  for (const auto& s : subgroups)
    if (s.id == reference) ref = &s;
  if (!ref) throw Error(ErrorCode::kInvalidArgument, fmt::format("reference subgroup {} not supplied", to_string(reference)));

  std::vector<WageDecomp> out;
  for (const auto& s : subgroups) {
    if (s.X.column_names != ref->X.column_names)
      throw Error(ErrorCode::kColumnMismatch,
                  fmt::format("subgroup {} has different design columns from the reference", to_string(s.id)));
    if (s.y.size() != s.X.rows() || s.fit.beta.size() != s.X.cols())
      throw Error(ErrorCode::kInvalidArgument, fmt::format("subgroup {} is not aligned with its fit", to_string(s.id)));
    WageDecomp d;
    d.id = s.id;
    d.y = s.y;
    d.predicted = s.X.X * s.fit.beta;
    d.residual = s.y - d.predicted;
    d.cf_predicted = s.X.X * ref->fit.beta;
    d.cf_residual = s.y - d.cf_predicted;
    out.push_back(std::move(d));
  }
  return out;
}

std::string format_wage_decomp_csv(std::span<const WageDecomp> decomps) {
  std::vector<std::optional<std::string>> subgroup, kind;
  std::vector<double> value;
  for (const auto& d : decomps) {
    const auto id = to_string(d.id);
    auto add = [&](const char* k, const Eigen::VectorXd& v) {
      for (Eigen::Index i = 0; i < v.size(); ++i) {
        subgroup.emplace_back(id);
        kind.emplace_back(std::string(k));
        value.push_back(v(i));
      }
    };
    add("predicted", d.predicted);
    add("residual", d.residual);
    add("cf_predicted", d.cf_predicted);
    add("cf_residual", d.cf_residual);
  }
  return format_csv(Frame({Column::categorical("subgroup", subgroup), Column::categorical("kind", kind),
                           Column::numeric("value", std::move(value))}));
}

double CdfSeries::operator()(double x) const {
  auto it = std::upper_bound(support.begin(), support.end(), x);
  if (it == support.begin()) return 0.0;
  return prob[static_cast<std::size_t>(it - support.begin() - 1)];
}

CdfSeries ecdf(std::span<const double> values) {
  if (values.empty()) throw Error(ErrorCode::kEmptyInput, "ecdf of an empty sample");
  std::vector<double> v(values.begin(), values.end());
  std::sort(v.begin(), v.end());
  const double n = static_cast<double>(v.size());
  CdfSeries c;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i + 1 < v.size() && v[i + 1] == v[i]) continue;
    c.support.push_back(v[i]);
    c.prob.push_back(static_cast<double>(i + 1) / n);
  }
  return c;
}

double kolmogorov_tail(double lambda) {
  if (lambda <= 0.0) return 1.0;
  if (lambda < 1.0) {
    // Jacobi theta form converges fast for small arguments.
    const double pi = std::numbers::pi;
    double s = 0.0;
    for (int k = 1; k <= 20; ++k) {
      const double m = 2.0 * k - 1.0;
      s += std::exp(-m * m * pi * pi / (8.0 * lambda * lambda));
    }
    return std::clamp(1.0 - std::sqrt(2.0 * pi) / lambda * s, 0.0, 1.0);
  }
  double s = 0.0;
  for (int k = 1; k <= 100; ++k) {
    const double term = std::exp(-2.0 * k * k * lambda * lambda);
    s += (k % 2 ? 1.0 : -1.0) * term;
    if (term < 1e-300) break;
  }
  return std::clamp(2.0 * s, 0.0, 1.0);
}

KsResult ks_test(std::span<const double> a, std::span<const double> b) {
  if (a.empty() || b.empty()) throw Error(ErrorCode::kEmptyInput, "ks_test needs two nonempty samples");
  std::vector<double> x(a.begin(), a.end()), y(b.begin(), b.end());
  std::sort(x.begin(), x.end());
  std::sort(y.begin(), y.end());
  const double n1 = static_cast<double>(x.size());
  const double n2 = static_cast<double>(y.size());
  std::size_t i = 0, j = 0;
  double d = 0.0;
  while (i < x.size() || j < y.size()) {
    double point;
    if (i == x.size()) point = y[j];
    else if (j == y.size()) point = x[i];
    else point = std::min(x[i], y[j]);
    while (i < x.size() && x[i] <= point) ++i;
    while (j < y.size() && y[j] <= point) ++j;
    d = std::max(d, std::abs(static_cast<double>(i) / n1 - static_cast<double>(j) / n2));
  }
  KsResult r;
  r.statistic = d;
  r.n1 = x.size();
  r.n2 = y.size();
  r.p_value = kolmogorov_tail(std::sqrt(n1 * n2 / (n1 + n2)) * d);
  return r;
}

std::string_view to_string(CdfOrder order) {
  switch (order) {
    case CdfOrder::kDominates: return "dominates";
    case CdfOrder::kDominated: return "dominated";
    case CdfOrder::kCrosses: return "crosses";
  }
  return "?";
}

CdfOrder cdf_order(const CdfSeries& a, const CdfSeries& b, double tolerance) {
  bool a_above = true, b_above = true;
  auto visit = [&](double x) {
    const double fa = a(x), fb = b(x);
    if (fa < fb - tolerance) a_above = false;
    if (fb < fa - tolerance) b_above = false;
  };
  for (double x : a.support) visit(x);
  for (double x : b.support) visit(x);
  if (a_above) return CdfOrder::kDominates;
  if (b_above) return CdfOrder::kDominated;
  return CdfOrder::kCrosses;
}

}  // namespace segkit
