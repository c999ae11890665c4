#include "segkit/pipeline.hpp"

#include <fmt/chrono.h>
#include <fmt/format.h>

#include <algorithm>
#include <chrono>
#include <charconv>
#include <future>
#include <map>
#include <set>

#include "segkit/counterfactual.hpp"
#include "segkit/design.hpp"
#include "segkit/estimators.hpp"
#include "segkit/kbo.hpp"
#include "segkit/matching.hpp"
#include "segkit/rng.hpp"
#include "segkit/segregation.hpp"
#include "segkit/serialize.hpp"
#include "segkit/shiftshare.hpp"
#include "segkit/svg.hpp"
#include "segkit/synthgen.hpp"

namespace segkit {

namespace {

struct StageOutput {
  std::vector<std::pair<std::string, std::string>> files;
  std::vector<std::string> warnings;
  void add(std::string name, std::string content) { files.emplace_back(std::move(name), std::move(content)); }
};

struct Context {
  const Frame& frame;
  const PipelineConfig& config;
  std::string timestamp;
};

const AnalysisConfig& analysis_named(const PipelineConfig& config, const std::string& name) {
  for (const auto& a : config.analyses)
    if (a.name == name) return a;
  throw Error(ErrorCode::kConfigInvalid, fmt::format("no analysis named '{}'", name));
}

Formula formula_of(const AnalysisConfig& a, const std::string& text) {
  Formula f = parse_formula(text);
  if (a.options.contains("reference_levels")) {
    const Json& refs = a.options["reference_levels"];
    if (!refs.is_object())
      throw Error(ErrorCode::kConfigInvalid, fmt::format("analysis '{}': reference_levels must be a mapping", a.name));
    for (const auto& [col, level] : refs.items())
      f.reference_levels[col] = level.is_string() ? level.get<std::string>() : level.dump();
  }
  return f;
}

// Drops terms touching any of `columns`; they are constant within the strata.
Formula without(Formula f, const std::vector<std::string>& columns, std::vector<std::string>& dropped) {
  std::vector<Term> kept;
  for (auto& t : f.terms) {
    const bool hit = std::any_of(t.factors.begin(), t.factors.end(), [&](const std::string& c) {
      return std::find(columns.begin(), columns.end(), c) != columns.end();
    });
    if (hit) dropped.push_back(t.label());
    else kept.push_back(std::move(t));
  }
  f.terms = std::move(kept);
  return f;
}

std::vector<std::size_t> where_rows(const Frame& frame, const Json& where) {
  std::vector<std::pair<const Column*, std::string>> tests;
  if (where.is_object())
    for (const auto& [col, v] : where.items()) {
      std::string text;
      if (v.is_boolean()) text = v.get<bool>() ? "1" : "0";
      else if (v.is_string()) text = v.get<std::string>();
      else if (v.is_number_integer()) text = std::to_string(v.get<std::int64_t>());
      else if (v.is_number()) text = format_double(v.get<double>());
      else throw Error(ErrorCode::kConfigInvalid, fmt::format("where: bad value for '{}'", col));
      tests.emplace_back(&frame.column(col), text);
    }
  std::vector<std::size_t> rows;
  for (std::size_t i = 0; i < frame.n_rows(); ++i) {
    bool ok = true;
    for (const auto& [c, text] : tests) ok = ok && !c->is_missing(i) && cell_text(*c, i) == text;
    if (ok) rows.push_back(i);
  }
  return rows;
}

Frame filtered(const Frame& frame, const AnalysisConfig& a) {
  if (!a.options.contains("where")) return frame;
  const auto rows = where_rows(frame, a.options["where"]);
  return frame.take(rows);
}

std::vector<double> time_axis(const std::vector<std::string>& times) {
  std::vector<double> x;
  bool numeric = true;
  for (const auto& t : times) {
    double v = 0;
    auto [p, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
    numeric = numeric && ec == std::errc() && p == t.data() + t.size();
    x.push_back(v);
  }
  if (!numeric)
    for (std::size_t i = 0; i < x.size(); ++i) x[i] = static_cast<double>(i);
  return x;
}

std::string str(std::string_view s) { return std::string(s); }

StageOutput run_segregation(const Context& ctx, const AnalysisConfig& a) {
  const Frame sub = filtered(ctx.frame, a);
  const auto time = option_string(a, "time", "year");
  const auto panel = panel_from_frame(sub, time, option_string(a, "sector", "sector"), option_string(a, "female", "female"));
  const auto pooling = option_string(a, "pooling", "pooled") == "pooled" ? Pooling::kPooled : Pooling::kPerTime;
  const auto dom = classify_dominance(panel, pooling);
  const auto series = ssi(panel, dom);
  std::optional<std::vector<std::string>> high;
  if (a.options.contains("high_segregation")) high = option_list(a, "high_segregation");
  const auto degree = rank_segregation(series, high);

  StageOutput out;
  out.add("panel.csv", format_panel_csv(panel));
  out.add("ssi.csv", format_ssi_csv(series));
  out.add("contributions.csv", format_contributions_csv(series));
  out.add("degree.csv", format_degree_csv(degree));

  std::vector<std::optional<std::string>> t_col, s_col, g_col;
  for (std::size_t t = 0; t < panel.n_times(); ++t)
    for (std::size_t j = 0; j < panel.n_sectors(); ++j) {
      t_col.emplace_back(panel.times()[t]);
      s_col.emplace_back(panel.sectors()[j]);
      g_col.emplace_back(str(to_string(dom.label(t, j))));
    }
  out.add("dominance.csv", format_csv(Frame({Column::categorical("time", t_col), Column::categorical("sector", s_col),
                                             Column::categorical("group", g_col)})));

  Json j = to_json(series);
  Json duncan = Json::array();
  for (std::size_t t = 0; t < panel.n_times(); ++t) duncan.push_back({{"time", panel.times()[t]}, {"duncan", duncan_index(panel, t)}});
  j["duncan"] = duncan;
  j["pooling"] = str(to_string(pooling));
  Json deg = Json::object();
  for (std::size_t k = 0; k < degree.sectors.size(); ++k) deg[degree.sectors[k]] = str(to_string(degree.degree[k]));
  j["degree"] = deg;
  out.add("ssi.json", dump(j));

  std::vector<double> c_fd, c_md;
  for (std::size_t t = 0; t < panel.n_times(); ++t)
    for (std::size_t j2 = 0; j2 < panel.n_sectors(); ++j2)
      (series.group[t][j2] == Dominance::kFemale ? c_fd : c_md).push_back(series.contribution[t][j2]);
  const int bins = static_cast<int>(option_number(a, "bins", 20));
  Plot dist{"Sector contributions to the SSI", "contribution", "density", {}, {}, {}, {}};
  dist.series.push_back(histogram_polygon(c_fd, bins, "female-dominated"));
  dist.series.push_back(histogram_polygon(c_md, bins, "male-dominated"));
  out.add("ssi_distribution.svg", render_svg(dist, ctx.timestamp));

  Plot lines{"Sectoral segregation index", time, "SSI", {}, {}, {}, {}};
  PlotSeries fd{"female-dominated", time_axis(panel.times()), {}, {}, {}, SeriesStyle::kLine};
  PlotSeries md{"male-dominated", fd.x, {}, {}, {}, SeriesStyle::kLine};
  for (std::size_t t = 0; t < panel.n_times(); ++t) {
    fd.y.push_back(series.fd(t));
    md.y.push_back(series.md(t));
  }
  lines.series = {fd, md};
  out.add("ssi_series.svg", render_svg(lines, ctx.timestamp));
  return out;
}

StageOutput run_shiftshare(const Context& ctx, const AnalysisConfig& a) {
  const Frame sub = filtered(ctx.frame, a);
  const auto time = option_string(a, "time", "year");
  const auto panel = panel_from_frame(sub, time, option_string(a, "sector", "sector"), option_string(a, "female", "female"));
  const auto pooling = option_string(a, "pooling", "pooled") == "pooled" ? Pooling::kPooled : Pooling::kPerTime;
  const auto dom = classify_dominance(panel, pooling);
  auto genders = option_list(a, "genders");
  if (genders.empty()) genders = {"F", "M"};
  StageOutput out;
  Json j = Json::array();
  for (const auto& g : genders) {
    const Gender gender = g == "F" ? Gender::kFemale : Gender::kMale;
    const auto r = shift_share(panel, gender, dom, option_string(a, "base_time"));
    for (const auto& w : r.warnings) out.warnings.push_back(w);
    out.add(fmt::format("shiftshare_{}.csv", g), format_shift_share_csv(r));
    j.push_back(to_json(r));
    Plot p{fmt::format("Shift-share decomposition, {} employment share", g == "F" ? "female" : "male"), time,
           "change since base period", {}, {}, {0.0}, {}};
    const auto x = time_axis(panel.times());
    for (ShareGroup grp : {ShareGroup::kFd, ShareGroup::kMd}) {
      PlotSeries overall{fmt::format("{} overall", to_string(grp)), {}, {}, {}, {}, SeriesStyle::kLine};
      PlotSeries between{fmt::format("{} between", to_string(grp)), {}, {}, {}, {}, SeriesStyle::kLine};
      PlotSeries within{fmt::format("{} within", to_string(grp)), {}, {}, {}, {}, SeriesStyle::kLine};
      for (std::size_t t = 0; t < panel.n_times(); ++t)
        for (const auto& row : r.rows)
          if (row.time == panel.times()[t] && row.group == grp) {
            overall.x.push_back(x[t]);
            overall.y.push_back(row.overall);
            between.x.push_back(x[t]);
            between.y.push_back(row.between);
            within.x.push_back(x[t]);
            within.y.push_back(row.within);
          }
      p.series.push_back(overall);
      p.series.push_back(between);
      p.series.push_back(within);
    }
    out.add(fmt::format("shiftshare_{}.svg", g), render_svg(p, ctx.timestamp));
  }
  out.add("shiftshare.json", dump(j));
  return out;
}

std::string coefficient_csv(const std::vector<std::pair<std::string, const FitResult*>>& fits) {
  std::vector<std::optional<std::string>> group, term;
  std::vector<double> est, se;
  for (const auto& [label, fit] : fits)
    for (Eigen::Index k = 0; k < fit->beta.size(); ++k) {
      group.emplace_back(label);
      term.emplace_back(fit->column_names[static_cast<std::size_t>(k)]);
      est.push_back(fit->beta(k));
      se.push_back(fit->se(k));
    }
  return format_csv(Frame({Column::categorical("group", group), Column::categorical("term", term),
                           Column::numeric("estimate", std::move(est)), Column::numeric("se", std::move(se))}));
}

StageOutput run_participation(const Context& ctx, const AnalysisConfig& a) {
  const Frame sub = filtered(ctx.frame, a);
  const auto d = build_design(sub, formula_of(a, *option_string(a, "formula")));
  const auto fit = probit(d.y, d.X);
  const auto ame = probit_ame(fit, d.X);
  StageOutput out;
  std::vector<std::optional<std::string>> term;
  std::vector<double> est, se, me, me_se;
  for (Eigen::Index k = 0; k < fit.beta.size(); ++k) {
    term.emplace_back(fit.column_names[static_cast<std::size_t>(k)]);
    est.push_back(fit.beta(k));
    se.push_back(fit.se(k));
    me.push_back(ame.ame(k));
    me_se.push_back(ame.se(k));
  }
  out.add("probit.csv", format_csv(Frame({Column::categorical("term", term), Column::numeric("estimate", std::move(est)),
                                           Column::numeric("se", std::move(se)), Column::numeric("ame", std::move(me)),
                                           Column::numeric("ame_se", std::move(me_se))})));
  out.add("probit.json", dump({{"fit", to_json(fit)}, {"ame", to_json(ame)}, {"n_dropped", d.X.n_dropped}}));
  return out;
}

StageOutput run_psm(const Context& ctx, const AnalysisConfig& a) {
  const Frame sub = filtered(ctx.frame, a);
  const Formula f = formula_of(a, *option_string(a, "formula"));
  const std::string outcome = *option_string(a, "outcome");
  const std::vector<std::string> extra{outcome};
  const auto ps = estimate_pscore(sub, f.response, f, extra);
  const auto y = aligned_outcome(ps, sub.column(outcome));
  MatchOptions mo;
  mo.k = static_cast<std::size_t>(option_number(a, "k", 5));
  mo.common_support = option_bool(a, "common_support", true);
  if (a.options.contains("caliper")) mo.caliper = option_number(a, "caliper", 0.0);
  const auto m = match_att(ps, y, mo);
  const auto bal = balance(ps, ps.design, m);

  StageOutput out;
  Json j{{"treatment", f.response}, {"outcome", outcome}, {"k", mo.k}, {"att", to_json(m)}, {"balance", to_json(bal)},
         {"pscore", to_json(*ps.fit)}};
  std::vector<std::optional<std::string>> estimator{std::string("nn_att")};
  std::vector<double> est{m.att}, se{m.se_naive};
  if (option_bool(a, "ipw", true)) {
    const auto ipw = ipw_ate(ps, y);
    for (const auto& w : ipw.warnings) out.warnings.push_back(w);
    j["ipw"] = to_json(ipw);
    estimator.emplace_back(std::string("ipw_ate"));
    est.push_back(ipw.ate);
    se.push_back(ipw.se);
  }
  out.add("psm.json", dump(j));
  out.add("psm.csv", format_csv(Frame({Column::categorical("estimator", estimator), Column::numeric("estimate", est),
                                       Column::numeric("se", se)})));

  std::vector<std::optional<std::string>> cov;
  std::vector<double> before, after;
  std::vector<std::optional<bool>> pass;
  Plot p{"Standardised bias before and after matching", "standardised bias (%)", "", {}, {-5.0, 5.0}, {}, {}};
  PlotSeries sb{"before", {}, {}, {}, {}, SeriesStyle::kPoints};
  PlotSeries sa{"after", {}, {}, {}, {}, SeriesStyle::kPoints};
  for (std::size_t i = 0; i < bal.rows.size(); ++i) {
    const auto& r = bal.rows[i];
    cov.emplace_back(r.covariate);
    before.push_back(r.bias_before);
    after.push_back(r.bias_after);
    pass.emplace_back(r.pass);
    p.y_categories.push_back(r.covariate);
    sb.x.push_back(r.bias_before);
    sb.y.push_back(static_cast<double>(i));
    sa.x.push_back(r.bias_after);
    sa.y.push_back(static_cast<double>(i));
  }
  p.series = {sb, sa};
  p.height = std::max(300, 60 + 22 * static_cast<int>(bal.rows.size()));
  out.add("balance.csv", format_csv(Frame({Column::categorical("covariate", cov), Column::numeric("bias_before", before),
                                           Column::numeric("bias_after", after), Column::boolean("pass", pass)})));
  out.add("balance.svg", render_svg(p, ctx.timestamp));
  return out;
}

// Rows of `frame` grouped by the joined cell text of `by`, in sorted label order.
std::map<std::string, std::vector<std::size_t>> group_rows(const Frame& frame, const std::vector<std::string>& by) {
  std::map<std::string, std::vector<std::size_t>> groups;
  std::vector<const Column*> cols;
  for (const auto& b : by) cols.push_back(&frame.column(b));
  for (std::size_t i = 0; i < frame.n_rows(); ++i) {
    std::string label;
    bool ok = true;
    for (std::size_t c = 0; c < cols.size(); ++c) {
      if (cols[c]->is_missing(i)) {
        ok = false;
        break;
      }
      label += fmt::format("{}{}={}", c ? "," : "", by[c], cell_text(*cols[c], i));
    }
    if (ok) groups[cols.empty() ? "all" : label].push_back(i);
  }
  return groups;
}

StageOutput run_mincer(const Context& ctx, const AnalysisConfig& a) {
  const Frame sub = filtered(ctx.frame, a);
  const auto by = option_list(a, "by");
  std::vector<std::string> dropped;
  const Formula f = without(formula_of(a, *option_string(a, "formula")), by, dropped);
  StageOutput out;
  if (!dropped.empty())
    out.warnings.push_back(fmt::format("terms constant within groups dropped: {}", fmt::join(dropped, ", ")));
  std::vector<std::pair<std::string, FitResult>> fits;
  for (const auto& [label, rows] : group_rows(sub, by)) {
    const auto d = build_design(sub, f, rows);
    fits.emplace_back(label, ols(d.y, d.X));
  }
  std::vector<std::pair<std::string, const FitResult*>> refs;
  Json j = Json::object();
  for (const auto& [label, fit] : fits) {
    refs.emplace_back(label, &fit);
    j[label] = to_json(fit);
  }
  out.add("mincer.csv", coefficient_csv(refs));
  out.add("mincer.json", dump({{"formula", to_string(f)}, {"groups", j}}));
  return out;
}

std::string file_safe(std::string s) {
  for (char& c : s)
    if (!std::isalnum(static_cast<unsigned char>(c)) && c != '-' && c != '_') c = '_';
  return s;
}

StageOutput run_kbo(const Context& ctx, const AnalysisConfig& a) {
  const AnalysisConfig& mincer = analysis_named(ctx.config, *option_string(a, "mincer"));
  const AnalysisConfig& source = a.options.contains("formula") ? a : mincer;
  const std::string period = option_string(a, "period", "year");
  const std::string group = option_string(a, "group", "female");
  const std::string group_a = option_string(a, "group_a", "0");
  const auto stratum = option_string(a, "stratum");
  const Formula base = formula_of(source, *option_string(source, "formula"));
  std::vector<std::string> dropped_all, dropped_strata;
  const Formula f_all = without(base, {group}, dropped_all);
  const Formula f_strata = stratum ? without(base, {group, *stratum}, dropped_strata) : f_all;
  const Frame sub = filtered(ctx.frame, a.options.contains("where") ? a : mincer);

  StageOutput out;
  if (!dropped_all.empty())
    out.warnings.push_back(fmt::format("terms constant within groups dropped: {}", fmt::join(dropped_all, ", ")));
  if (stratum && dropped_strata.size() > dropped_all.size())
    out.warnings.push_back(fmt::format("terms constant within strata dropped: {}", fmt::join(dropped_strata, ", ")));
  std::vector<std::optional<std::string>> levels{std::nullopt};
  if (stratum) {
    std::vector<std::string> ids;
    const Column& c = sub.column(*stratum);
    for (std::size_t i = 0; i < sub.n_rows(); ++i)
      if (!c.is_missing(i)) {
        auto t = cell_text(c, i);
        if (std::find(ids.begin(), ids.end(), t) == ids.end()) ids.push_back(t);
      }
    sort_ids(ids);
    for (auto& id : ids) levels.emplace_back(id);
  }

  Json strata = Json::array();
  const Column& gcol = sub.column(group);
  for (const auto& level : levels) {
    const std::string label = level ? fmt::format("{}_{}", *stratum, *level) : "all";
    const Formula& f = level ? f_strata : f_all;
    KboPeriodOptions po{period, group, group_a, level ? stratum : std::nullopt, level};
    const auto series = kbo_by_period(sub, f, po);
    for (const auto& w : series.warnings) out.warnings.push_back(fmt::format("{}: {}", label, w));

    std::vector<std::size_t> ra, rb;
    const Column* scol = level ? &sub.column(*stratum) : nullptr;
    for (std::size_t i = 0; i < sub.n_rows(); ++i) {
      if (gcol.is_missing(i)) continue;
      if (scol && (scol->is_missing(i) || cell_text(*scol, i) != *level)) continue;
      (cell_text(gcol, i) == group_a ? ra : rb).push_back(i);
    }
    const auto da = build_design(sub, f, ra);
    const auto db = build_design(sub, f, rb);
    KboResult pooled = kbo_threefold(da.y, da.X, db.y, db.X);
    pooled.label = "pooled";

    std::vector<KboResult> rows = series.periods;
    rows.push_back(pooled);
    out.add(fmt::format("kbo_{}.csv", file_safe(label)), format_kbo_csv(rows));
    Json periods = Json::array();
    for (const auto& r : series.periods) periods.push_back(to_json(r));
    strata.push_back({{"stratum", label}, {"formula", to_string(f)}, {"pooled", to_json(pooled)}, {"periods", periods}, {"warnings", series.warnings}});

    Plot p{fmt::format("Threefold decomposition ({})", label), period, "log points", {}, {}, {0.0}, {}};
    std::vector<std::string> times;
    for (const auto& r : series.periods) times.push_back(r.label);
    const auto x = time_axis(times);
    auto band = [&](const char* name, auto est, auto se) {
      PlotSeries s{name, x, {}, {}, {}, SeriesStyle::kLine};
      for (const auto& r : series.periods) {
        s.y.push_back(est(r));
        s.lower.push_back(est(r) - 1.96 * se(r));
        s.upper.push_back(est(r) + 1.96 * se(r));
      }
      p.series.push_back(s);
    };
    band("endowment", [](const KboResult& r) { return r.endowment; }, [](const KboResult& r) { return r.se_endowment; });
    band("coefficient", [](const KboResult& r) { return r.coefficient; }, [](const KboResult& r) { return r.se_coefficient; });
    band("interaction", [](const KboResult& r) { return r.interaction; }, [](const KboResult& r) { return r.se_interaction; });
    out.add(fmt::format("kbo_{}.svg", file_safe(label)), render_svg(p, ctx.timestamp));
  }
  out.add("kbo.json", dump({{"group", group}, {"group_a", group_a}, {"strata", strata}}));
  return out;
}

bool is_female_text(const std::string& t) { return t == "1" || t == "F" || t == "true"; }

PlotSeries cdf_series(const std::vector<double>& v, std::string label) {
  const auto c = ecdf(v);
  PlotSeries s{std::move(label), {}, {}, {}, {}, SeriesStyle::kStep};
  const std::size_t n = c.support.size();
  const std::size_t step = std::max<std::size_t>(1, n / 300);
  for (std::size_t i = 0; i < n; i += step) {
    s.x.push_back(c.support[i]);
    s.y.push_back(c.prob[i]);
  }
  if (s.x.back() != c.support.back()) {
    s.x.push_back(c.support.back());
    s.y.push_back(1.0);
  }
  return s;
}

StageOutput run_counterfactual(const Context& ctx, const AnalysisConfig& a) {
  const AnalysisConfig& mincer = analysis_named(ctx.config, *option_string(a, "mincer"));
  const AnalysisConfig& source = a.options.contains("formula") ? a : mincer;
  const std::string gender = option_string(a, "gender", "female");
  const std::string dominance = option_string(a, "dominance", "fd");
  std::vector<std::string> dropped;
  const Formula f = without(formula_of(source, *option_string(source, "formula")), {gender, dominance}, dropped);
  const Frame sub = filtered(ctx.frame, a.options.contains("where") ? a : mincer);
  StageOutput out;
  if (!dropped.empty())
    out.warnings.push_back(fmt::format("terms constant within groups dropped: {}", fmt::join(dropped, ", ")));

  const Column& gc = sub.column(gender);
  const Column& dc = sub.column(dominance);
  const SubgroupId ids[4] = {{Gender::kMale, Dominance::kMale},
                             {Gender::kMale, Dominance::kFemale},
                             {Gender::kFemale, Dominance::kMale},
                             {Gender::kFemale, Dominance::kFemale}};
  std::vector<std::size_t> rows[4];
  for (std::size_t i = 0; i < sub.n_rows(); ++i) {
    if (gc.is_missing(i) || dc.is_missing(i)) continue;
    const bool fem = is_female_text(cell_text(gc, i));
    const bool fdom = is_female_text(cell_text(dc, i));
    rows[(fem ? 2 : 0) + (fdom ? 1 : 0)].push_back(i);
  }
  std::vector<SubgroupModel> models;
  for (int k = 0; k < 4; ++k) {
    auto d = build_design(sub, f, rows[k]);
    SubgroupModel m{ids[k], d.y, d.X, {}};
    m.fit = ols(m.y, m.X);
    models.push_back(std::move(m));
  }
  const auto decomps = decompose_wages(models);
  out.add("wage_decomp.csv", format_wage_decomp_csv(decomps));

  auto as_vec = [](const Eigen::VectorXd& v) { return std::vector<double>(v.data(), v.data() + v.size()); };
  Json ks = Json::object();
  const std::pair<const char*, Eigen::VectorXd WageDecomp::*> kinds[] = {{"predicted", &WageDecomp::predicted},
                                                                         {"residual", &WageDecomp::residual},
                                                                         {"cf_predicted", &WageDecomp::cf_predicted},
                                                                         {"cf_residual", &WageDecomp::cf_residual}};
  for (const auto& [kind, member] : kinds) {
    Json table = Json::array();
    for (const auto& r : decomps) {
      Json row{{"subgroup", to_string(r.id)}};
      Json cells = Json::array();
      for (const auto& c : decomps) {
        auto res = ks_test(as_vec(r.*member), as_vec(c.*member));
        Json cell = to_json(res);
        cell["against"] = to_string(c.id);
        cell["order"] = str(to_string(cdf_order(ecdf(as_vec(r.*member)), ecdf(as_vec(c.*member)))));
        cells.push_back(cell);
      }
      row["tests"] = cells;
      table.push_back(row);
    }
    ks[kind] = table;
  }
  Json fits = Json::object();
  for (const auto& m : models) fits[to_string(m.id)] = to_json(m.fit);
  out.add("counterfactual.json", dump({{"formula", to_string(f)}, {"reference", to_string(ids[0])}, {"fits", fits}, {"ks", ks}}));

  for (const auto& [kind, member] : kinds) {
    if (std::string(kind) != "cf_predicted" && std::string(kind) != "cf_residual") continue;
    Plot p{fmt::format("Empirical CDF of {} wages", kind), "log wage", "cumulative probability", {}, {}, {}, {}};
    for (const auto& d : decomps) p.series.push_back(cdf_series(as_vec(d.*member), to_string(d.id)));
    out.add(fmt::format("cdf_{}.svg", kind), render_svg(p, ctx.timestamp));
  }
  return out;
}

StageOutput run_lasso(const Context& ctx, const AnalysisConfig& a) {
  const Frame sub = filtered(ctx.frame, a);
  const auto d = build_design(sub, formula_of(a, *option_string(a, "formula")));
  LassoOptions lo;
  lo.grid_size = static_cast<std::size_t>(option_number(a, "grid_size", 100));
  lo.lambda_min_ratio = option_number(a, "lambda_min_ratio", 1e-4);
  const auto path = lasso_bic(d.y, d.X, lo);
  StageOutput out;
  for (const auto& w : path.warnings) out.warnings.push_back(w);
  std::vector<double> lambda = path.lambda_grid, bic = path.bic, rss = path.rss, df;
  for (auto v : path.df) df.push_back(static_cast<double>(v));
  out.add("lasso_path.csv", format_csv(Frame({Column::numeric("lambda", std::move(lambda)), Column::numeric("df", std::move(df)),
                                               Column::numeric("rss", std::move(rss)), Column::numeric("bic", std::move(bic))})));
  out.add("lasso.json", dump(to_json(path)));
  return out;
}

StageOutput run_stage(const Context& ctx, const AnalysisConfig& a) {
  if (a.type == "segregation") return run_segregation(ctx, a);
  if (a.type == "shiftshare") return run_shiftshare(ctx, a);
  if (a.type == "participation_probit") return run_participation(ctx, a);
  if (a.type == "psm") return run_psm(ctx, a);
  if (a.type == "mincer") return run_mincer(ctx, a);
  if (a.type == "kbo") return run_kbo(ctx, a);
  if (a.type == "counterfactual") return run_counterfactual(ctx, a);
  if (a.type == "lasso_select") return run_lasso(ctx, a);
  throw Error(ErrorCode::kConfigInvalid, fmt::format("unknown analysis type '{}'", a.type));
}

}  // namespace

std::uint64_t input_seed(const PipelineConfig& config, const RunOptions& options) {
  if (!config.input.synth) return 0;
  if (options.seed) return mix64(*options.seed ^ stream_id("input"));
  if (config.input.synth_seed_given) return config.input.synth->seed;
  return mix64(config.seed ^ stream_id("input"));
}

Frame load_input(const PipelineConfig& config, const RunOptions& options) {
  if (config.input.csv) return read_csv(config.input.csv->string(), config.input.schema);
  DgpSpec spec = *config.input.synth;
  spec.seed = input_seed(config, options);
  return generate(spec).frame;
}

RunReport run_pipeline(const PipelineConfig& config, const RunOptions& options) {
  RunReport report;
  report.out_dir = options.out ? *options.out : std::filesystem::path(config.output);
  Frame frame;
  try {
    frame = load_input(config, options);
  } catch (const Error& e) {
    throw StageError("input", e.code(), fmt::format("input failed: {}", e.what()));
  }
  std::string timestamp;
  if (!options.deterministic)
    timestamp = fmt::format("{:%Y-%m-%dT%H:%M:%SZ}", fmt::gmtime(std::chrono::system_clock::to_time_t(std::chrono::system_clock::now())));
  const Context ctx{frame, config, timestamp};

  for (const auto& level : execution_levels(config)) {
    std::vector<std::future<StageOutput>> futures;
    for (auto i : level)
      futures.push_back(std::async(std::launch::async, [&ctx, &a = config.analyses[i]] { return run_stage(ctx, a); }));
    for (std::size_t k = 0; k < level.size(); ++k) {
      const auto& a = config.analyses[level[k]];
      StageOutput out;
      try {
        out = futures[k].get();
      } catch (const Error& e) {
        for (std::size_t r = k + 1; r < futures.size(); ++r) futures[r].wait();
        throw StageError(a.name, e.code(), fmt::format("analysis '{}' failed: {}", a.name, e.what()));
      } catch (const std::exception& e) {
        for (std::size_t r = k + 1; r < futures.size(); ++r) futures[r].wait();
        throw StageError(a.name, ErrorCode::kAnalysisFailed, fmt::format("analysis '{}' failed: {}", a.name, e.what()));
      }
      for (const auto& [name, content] : out.files) {
        const std::string rel = a.name + "/" + name;
        write_file_atomic(report.out_dir / rel, content);
        report.files.push_back(rel);
      }
      for (const auto& w : out.warnings) report.warnings.push_back(fmt::format("{}: {}", a.name, w));
    }
  }
  std::sort(report.files.begin(), report.files.end());
  Json manifest{{"seed", options.seed.value_or(config.seed)}, {"files", report.files}, {"warnings", report.warnings}};
  if (config.input.synth) manifest["input_seed"] = input_seed(config, options);
  write_file_atomic(report.out_dir / "manifest.json", dump(manifest));
  return report;
}

}  // namespace segkit
