#include "segkit/serialize.hpp"

#include <fmt/format.h>

#include <cstdio>
#include <fstream>

#include "segkit/error.hpp"

namespace segkit {

namespace {

Json vec(const Eigen::VectorXd& v) {
  Json a = Json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v(i));
  return a;
}

}  // namespace

Json to_json(const FitResult& fit) {
  Json coef = Json::array();
  for (Eigen::Index j = 0; j < fit.beta.size(); ++j) {
    const auto& name = static_cast<std::size_t>(j) < fit.column_names.size() ? fit.column_names[static_cast<std::size_t>(j)]
                                                                             : fmt::format("x{}", j);
    coef.push_back({{"term", name}, {"estimate", fit.beta(j)}, {"se", j < fit.se.size() ? fit.se(j) : 0.0}});
  }
  Json j{{"n", fit.n}, {"k", fit.k}, {"coefficients", coef}};
  if (fit.loglik) {
    j["loglik"] = *fit.loglik;
    j["iterations"] = fit.iterations;
  }
  return j;
}

Json to_json(const ProbitMarginals& ame) {
  Json a = Json::array();
  for (Eigen::Index j = 0; j < ame.ame.size(); ++j)
    a.push_back({{"term", ame.column_names[static_cast<std::size_t>(j)]}, {"ame", ame.ame(j)}, {"se", ame.se(j)}});
  return a;
}

Json to_json(const MatchResult& m) {
  return {{"att", m.att},
          {"se_naive", m.se_naive},
          {"t_stat", m.t_stat},
          {"mean_treated", m.mean_treated},
          {"mean_control_matched", m.mean_control_matched},
          {"n_treated", m.n_treated},
          {"n_treated_on_support", m.n_treated_on_support},
          {"n_treated_off_support", m.n_treated_off_support},
          {"n_untreated", m.n_untreated},
          {"n_untreated_on_support", m.n_untreated_on_support}};
}

Json to_json(const IpwResult& ipw) {
  return {{"ate", ipw.ate}, {"se", ipw.se}, {"max_abs_weight", ipw.max_abs_weight}, {"warnings", ipw.warnings}};
}

Json to_json(const BalanceTable& table) {
  Json rows = Json::array();
  for (const auto& r : table.rows)
    rows.push_back(
        {{"covariate", r.covariate}, {"bias_before", r.bias_before}, {"bias_after", r.bias_after}, {"pass", r.pass}});
  return {{"all_pass", table.all_pass()}, {"rows", rows}};
}

Json to_json(const KboResult& r) {
  Json cov = Json::array();
  for (const auto& c : r.per_covariate)
    cov.push_back({{"covariate", c.name},
                   {"endowment", c.endowment},
                   {"coefficient", c.coefficient},
                   {"interaction", c.interaction},
                   {"se_endowment", c.se_endowment},
                   {"se_coefficient", c.se_coefficient},
                   {"se_interaction", c.se_interaction}});
  return {{"label", r.label},
          {"n_a", r.n_a},
          {"n_b", r.n_b},
          {"overall", {{"estimate", r.overall_gap}, {"se", r.se_overall}}},
          {"endowment", {{"estimate", r.endowment}, {"se", r.se_endowment}}},
          {"coefficient", {{"estimate", r.coefficient}, {"se", r.se_coefficient}}},
          {"interaction", {{"estimate", r.interaction}, {"se", r.se_interaction}}},
          {"per_covariate", cov},
          {"warnings", r.warnings}};
}

Json to_json(const SsiSeries& s) {
  Json periods = Json::array();
  for (std::size_t t = 0; t < s.times.size(); ++t) periods.push_back({{"time", s.times[t]}, {"fd", s.fd(t)}, {"md", s.md(t)}});
  Json groups = Json::object();
  for (std::size_t j = 0; j < s.sectors.size(); ++j) groups[s.sectors[j]] = std::string(to_string(s.pooled_group[j]));
  return {{"periods", periods}, {"pooled_group", groups}};
}

Json to_json(const ShiftShareResult& r) {
  Json rows = Json::array();
  for (const auto& row : r.rows)
    rows.push_back({{"time", row.time},
                    {"group", std::string(to_string(row.group))},
                    {"overall", row.overall},
                    {"between", row.between},
                    {"within", row.within},
                    {"residual", row.residual}});
  return {{"gender", std::string(to_string(r.gender))}, {"base_time", r.base_time}, {"rows", rows}, {"warnings", r.warnings}};
}

Json to_json(const LassoPath& p) {
  Json sel = to_json(p.post_ols);
  return {{"grid_size", p.lambda_grid.size()},
          {"selected_index", p.selected_index},
          {"selected_lambda", p.lambda_grid.empty() ? 0.0 : p.lambda_grid[p.selected_index]},
          {"selected_columns", p.selected_columns},
          {"post_ols", sel},
          {"warnings", p.warnings}};
}

Json to_json(const KsResult& ks) {
  return {{"statistic", ks.statistic}, {"p_value", ks.p_value}, {"n1", ks.n1}, {"n2", ks.n2}};
}

Json to_json(const GroundTruth& t, const std::vector<std::string>& sectors) {
  Json beta = Json::object();
  for (int g = 0; g < 2; ++g) {
    Json b = Json::object();
    for (std::size_t k = 0; k < t.names.size(); ++k) b[t.names[k]] = t.beta[g](static_cast<Eigen::Index>(k));
    beta[g == 0 ? "female" : "male"] = b;
  }
  Json dom = Json::object(), degree = Json::object();
  for (std::size_t j = 0; j < sectors.size(); ++j) {
    dom[sectors[j]] = std::string(to_string(t.dominance[j]));
    degree[sectors[j]] = std::string(to_string(t.degree[j]));
  }
  Json ssi = Json::array();
  for (const auto& s : t.ssi) ssi.push_back({{"fd", s[0]}, {"md", s[1]}});
  return {{"beta", beta},
          {"mean_x", {{"female", vec(t.mean_x[0])}, {"male", vec(t.mean_x[1])}}},
          {"att", t.att},
          {"ate", t.ate},
          {"dominance", dom},
          {"degree", degree},
          {"ssi", ssi},
          {"kbo",
           {{"overall", t.kbo.overall},
            {"endowment", t.kbo.endowment},
            {"coefficient", t.kbo.coefficient},
            {"interaction", t.kbo.interaction}}},
          {"overall_female_share", t.overall_female_share}};
}

std::string dump(const Json& j) { return j.dump(2) + "\n"; }

void write_file_atomic(const std::filesystem::path& path, std::string_view content) {
  std::error_code ec;
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path(), ec);
  if (ec) throw Error(ErrorCode::kIoFailure, fmt::format("cannot create {}: {}", path.parent_path().string(), ec.message()));
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorCode::kIoFailure, fmt::format("cannot write {}", tmp.string()));
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    if (!out) throw Error(ErrorCode::kIoFailure, fmt::format("short write to {}", tmp.string()));
  }
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw Error(ErrorCode::kIoFailure, fmt::format("cannot rename {} to {}: {}", tmp.string(), path.string(), ec.message()));
}

}  // namespace segkit
