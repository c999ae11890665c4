#include "segkit/config.hpp"

#include <fmt/format.h>
#include <yaml-cpp/yaml.h>

#include <algorithm>
#include <charconv>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "segkit/design.hpp"
#include "segkit/error.hpp"

namespace segkit {

namespace {

[[noreturn]] void invalid(const std::string& message) { throw Error(ErrorCode::kConfigInvalid, message); }

Json convert(const YAML::Node& node) {
  switch (node.Type()) {
    case YAML::NodeType::Null:
    case YAML::NodeType::Undefined:
      return nullptr;
    case YAML::NodeType::Scalar: {
      const std::string& s = node.Scalar();
      if (node.Tag() == "!") return s;
      if (s == "true" || s == "True") return true;
      if (s == "false" || s == "False") return false;
      if (s == "null" || s == "~") return nullptr;
      std::int64_t i = 0;
      auto [pi, ei] = std::from_chars(s.data(), s.data() + s.size(), i);
      if (ei == std::errc() && pi == s.data() + s.size() && !s.empty()) return i;
      double d = 0;
      auto [pd, ed] = std::from_chars(s.data(), s.data() + s.size(), d);
      if (ed == std::errc() && pd == s.data() + s.size() && !s.empty()) return d;
      return s;
    }
    case YAML::NodeType::Sequence: {
      Json a = Json::array();
      for (const auto& item : node) a.push_back(convert(item));
      return a;
    }
    case YAML::NodeType::Map: {
      Json o = Json::object();
      for (const auto& kv : node) {
        const auto key = kv.first.as<std::string>();
        if (o.contains(key)) invalid(fmt::format("duplicate key '{}'", key));
        o[key] = convert(kv.second);
      }
      return o;
    }
  }
  return nullptr;
}

std::string text_of(const Json& v) {
  if (v.is_string()) return v.get<std::string>();
  if (v.is_boolean()) return v.get<bool>() ? "1" : "0";
  if (v.is_number_integer()) return std::to_string(v.get<std::int64_t>());
  if (v.is_number()) return format_double(v.get<double>());
  invalid(fmt::format("expected a scalar, got {}", v.dump()));
}

struct TypeRule {
  std::vector<std::string> required;
  std::vector<std::string> optional;
};

const std::map<std::string, TypeRule>& rules() {
  static const std::map<std::string, TypeRule> r{
      {"segregation", {{}, {"time", "sector", "female", "pooling", "high_segregation", "bins", "where"}}},
      {"shiftshare", {{}, {"time", "sector", "female", "pooling", "base_time", "genders", "where"}}},
      {"participation_probit", {{"formula"}, {"where", "reference_levels"}}},
      {"psm", {{"formula", "outcome"}, {"k", "caliper", "common_support", "ipw", "where", "reference_levels"}}},
      {"mincer", {{"formula"}, {"by", "where", "reference_levels"}}},
      {"kbo", {{"mincer"}, {"formula", "period", "group", "group_a", "stratum", "where", "reference_levels"}}},
      {"counterfactual", {{"mincer"}, {"formula", "gender", "dominance", "where", "reference_levels"}}},
      {"lasso_select", {{"formula"}, {"grid_size", "lambda_min_ratio", "where", "reference_levels"}}},
  };
  return r;
}

// Columns an analysis names outside its formulas, with their defaults.
std::vector<std::string> option_columns(const AnalysisConfig& a) {
  std::vector<std::string> cols;
  auto add = [&](std::string_view key, std::string_view fallback) {
    if (auto v = option_string(a, key)) cols.push_back(*v);
    else if (!fallback.empty()) cols.emplace_back(fallback);
  };
  if (a.type == "segregation" || a.type == "shiftshare") {
    add("time", "year");
    add("sector", "sector");
    add("female", "female");
  } else if (a.type == "psm") {
    add("outcome", "");
  } else if (a.type == "mincer") {
    for (auto& b : option_list(a, "by")) cols.push_back(b);
  } else if (a.type == "kbo") {
    add("period", "year");
    add("group", "female");
    add("stratum", "");
  } else if (a.type == "counterfactual") {
    add("gender", "female");
    add("dominance", "fd");
  }
  if (a.options.contains("where")) {
    if (!a.options["where"].is_object()) invalid(fmt::format("analysis '{}': 'where' must be a mapping", a.name));
    for (const auto& [k, v] : a.options["where"].items()) cols.push_back(k);
  }
  return cols;
}

void check_analysis(const AnalysisConfig& a, const Schema& schema, const PipelineConfig& config) {
  const auto& rule = rules().at(a.type);
  for (const auto& key : rule.required)
    if (!a.options.contains(key)) invalid(fmt::format("analysis '{}' ({}) needs option '{}'", a.name, a.type, key));
  for (const auto& [key, value] : a.options.items()) {
    if (std::find(rule.required.begin(), rule.required.end(), key) == rule.required.end() &&
        std::find(rule.optional.begin(), rule.optional.end(), key) == rule.optional.end())
      invalid(fmt::format("analysis '{}' ({}) has unknown option '{}'", a.name, a.type, key));
  }
  auto has = [&](const std::string& c) {
    return std::any_of(schema.begin(), schema.end(), [&](const auto& s) { return s.first == c; });
  };
  auto need = [&](const std::string& c, const std::string& where) {
    if (!has(c)) invalid(fmt::format("analysis '{}': column '{}' ({}) is not in the input schema", a.name, c, where));
  };
  for (const auto& c : option_columns(a)) need(c, "option");
  if (auto f = option_string(a, "formula")) {
    Formula formula;
    try {
      formula = parse_formula(*f);
    } catch (const Error& e) {
      invalid(fmt::format("analysis '{}': bad formula: {}", a.name, e.what()));
    }
    for (const auto& c : formula.referenced_columns()) need(c, "formula");
  }
  if (a.type == "kbo" || a.type == "counterfactual") {
    const auto ref = option_string(a, "mincer").value_or("");
    auto it = std::find_if(config.analyses.begin(), config.analyses.end(),
                           [&](const AnalysisConfig& o) { return o.name == ref; });
    if (it == config.analyses.end()) invalid(fmt::format("analysis '{}' uses unknown mincer model '{}'", a.name, ref));
    if (it->type != "mincer") invalid(fmt::format("analysis '{}' uses '{}', which is not a mincer analysis", a.name, ref));
  }
  if (a.type == "segregation" || a.type == "shiftshare") {
    const auto pooling = option_string(a, "pooling", "pooled");
    if (pooling != "pooled" && pooling != "per_time")
      invalid(fmt::format("analysis '{}': pooling must be pooled or per_time", a.name));
  }
  if (a.type == "shiftshare")
    for (const auto& g : option_list(a, "genders"))
      if (g != "F" && g != "M") invalid(fmt::format("analysis '{}': genders must be F or M", a.name));
  if (a.type == "psm" && option_number(a, "k", 5) < 1) invalid(fmt::format("analysis '{}': k must be >= 1", a.name));
}

ColumnKind kind_of(const std::string& text, const std::string& column) {
  try {
    return column_kind_from_string(text);
  } catch (const Error&) {
    invalid(fmt::format("schema: column '{}' has unknown kind '{}'", column, text));
  }
}

Json read_yaml_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) invalid(fmt::format("cannot read config {}", path.string()));
  std::stringstream ss;
  ss << in.rdbuf();
  return yaml_to_json(ss.str());
}

void apply_gender(GenderSpec& g, const Json& node, const char* who) {
  if (!node.is_object()) invalid(fmt::format("synth.{} must be a mapping", who));
  for (const auto& [key, v] : node.items()) {
    if (!v.is_number()) invalid(fmt::format("synth.{}.{} must be a number", who, key));
    const double x = v.get<double>();
    if (key == "mean_log_wage") g.mean_log_wage = x;
    else if (key == "sigma") g.sigma = x;
    else if (key == "part_time_share") g.part_time_share = x;
    else if (key == "participation") g.participation = x;
    else if (key == "part_time_hours") g.part_time_hours = x;
    else if (key == "full_time_hours") g.full_time_hours = x;
    else if (key == "p_kids") g.p_kids = x;
    else if (key == "p_public") g.p_public = x;
    else invalid(fmt::format("synth.{}: unknown key '{}'", who, key));
  }
}

}  // namespace

const std::vector<std::string>& analysis_types() {
  static const std::vector<std::string> types = [] {
    std::vector<std::string> t;
    for (const auto& [name, rule] : rules()) t.push_back(name);
    return t;
  }();
  return types;
}

Json yaml_to_json(std::string_view text) {
  try {
    return convert(YAML::Load(std::string(text)));
  } catch (const YAML::Exception& e) {
    invalid(fmt::format("YAML error: {}", e.what()));
  }
}

DgpSpec parse_dgp(const Json& node) {
  DgpSpec spec = calibrate_to_paper();
  if (node.is_null()) return spec;
  if (!node.is_object()) invalid("synth must be a mapping");
  for (const auto& [key, v] : node.items()) {
    auto number = [&]() {
      if (!v.is_number()) invalid(fmt::format("synth.{} must be a number", key));
      return v.get<double>();
    };
    if (key == "preset") {
      if (text_of(v) != "paper") invalid(fmt::format("synth.preset: unknown preset '{}' (valid: paper)", text_of(v)));
    } else if (key == "seed") {
      if (!v.is_number_integer() || v.get<std::int64_t>() < 0) invalid("synth.seed must be a non-negative integer");
      spec.seed = static_cast<std::uint64_t>(v.get<std::int64_t>());
    } else if (key == "n_workers") {
      if (!v.is_number_integer() || v.get<std::int64_t>() <= 0) invalid("synth.n_workers must be a positive integer");
      spec.n_workers = static_cast<std::size_t>(v.get<std::int64_t>());
    } else if (key == "tau") {
      spec.tau = number();
    } else if (key == "sector_mix") {
      spec.sector_mix = number();
    } else if (key == "heteroskedastic") {
      if (!v.is_boolean()) invalid("synth.heteroskedastic must be true or false");
      spec.heteroskedastic = v.get<bool>();
    } else if (key == "female") {
      apply_gender(spec.gender[0], v, "female");
    } else if (key == "male") {
      apply_gender(spec.gender[1], v, "male");
    } else {
      invalid(fmt::format("synth: unknown key '{}'", key));
    }
  }
  try {
    validate_spec(spec);
  } catch (const Error& e) {
    invalid(fmt::format("synth: {}", e.what()));
  }
  return spec;
}

DgpSpec load_dgp(const std::filesystem::path& path) {
  const Json root = read_yaml_file(path);
  return parse_dgp(root.is_object() && root.contains("synth") ? root["synth"] : root);
}

Schema synth_schema() {
  using K = ColumnKind;
  return {{"id", K::kNumeric},        {"year", K::kNumeric},       {"female", K::kBoolean},
          {"age", K::kNumeric},       {"yrseduc", K::kNumeric},    {"experience", K::kNumeric},
          {"incouple", K::kBoolean},  {"kids", K::kBoolean},       {"training", K::kBoolean},
          {"public", K::kBoolean},    {"benefit", K::kBoolean},    {"nationality", K::kCategorical},
          {"ethnicity", K::kCategorical}, {"inlf", K::kBoolean},   {"sector", K::kCategorical},
          {"occupation", K::kCategorical}, {"fd", K::kBoolean},    {"lowseg", K::kBoolean},
          {"parttime", K::kBoolean},  {"hours", K::kNumeric},      {"cpi", K::kNumeric},
          {"hourpay", K::kNumeric},   {"ln_wage", K::kNumeric}};
}

Schema input_schema(const PipelineConfig& config) { return config.input.synth ? synth_schema() : config.input.schema; }

PipelineConfig parse_config(std::string_view yaml_text, const std::filesystem::path& base_dir) {
  const Json root = yaml_to_json(yaml_text);
  if (!root.is_object()) invalid("config must be a mapping");
  PipelineConfig config;
  for (const auto& [key, v] : root.items()) {
    if (key == "seed") {
      if (!v.is_number_integer() || v.get<std::int64_t>() < 0) invalid("seed must be a non-negative integer");
      config.seed = static_cast<std::uint64_t>(v.get<std::int64_t>());
    } else if (key == "output") {
      config.output = text_of(v);
    } else if (key != "input" && key != "analyses") {
      invalid(fmt::format("unknown top-level key '{}' (valid: seed, output, input, analyses)", key));
    }
  }

  if (!root.contains("input") || !root["input"].is_object()) invalid("config needs an 'input' mapping");
  const Json& input = root["input"];
  if (input.contains("csv") == input.contains("synth")) invalid("input needs exactly one of 'csv' or 'synth'");
  for (const auto& [key, v] : input.items())
    if (key != "csv" && key != "synth") invalid(fmt::format("input: unknown key '{}'", key));
  if (input.contains("synth")) {
    config.input.synth = parse_dgp(input["synth"]);
    config.input.synth_seed_given = input["synth"].is_object() && input["synth"].contains("seed");
  } else {
    const Json& csv = input["csv"];
    if (!csv.is_object() || !csv.contains("path") || !csv.contains("schema") || !csv["schema"].is_object())
      invalid("input.csv needs 'path' and a 'schema' mapping of column: kind");
    std::filesystem::path p = text_of(csv["path"]);
    config.input.csv = p.is_absolute() || base_dir.empty() ? p : base_dir / p;
    for (const auto& [col, kind] : csv["schema"].items()) config.input.schema.emplace_back(col, kind_of(text_of(kind), col));
  }

  if (!root.contains("analyses") || !root["analyses"].is_array() || root["analyses"].empty())
    invalid("config needs a nonempty 'analyses' list");
  std::set<std::string> names;
  for (const auto& node : root["analyses"]) {
    if (!node.is_object()) invalid("each analysis must be a mapping");
    AnalysisConfig a;
    for (const auto& [key, v] : node.items())
      if (key != "name" && key != "type" && key != "after" && key != "options")
        invalid(fmt::format("analysis: unknown key '{}' (valid: name, type, after, options)", key));
    if (!node.contains("type")) invalid("analysis without a 'type'");
    a.type = text_of(node["type"]);
    a.name = node.contains("name") ? text_of(node["name"]) : a.type;
    if (a.name.empty()) invalid("analysis names must be nonempty");
    if (!rules().contains(a.type)) {
      std::string valid;
      for (const auto& t : analysis_types()) valid += (valid.empty() ? "" : ", ") + t;
      invalid(fmt::format("analysis '{}': unknown type '{}' (valid: {})", a.name, a.type, valid));
    }
    if (!names.insert(a.name).second) invalid(fmt::format("duplicate analysis name '{}'", a.name));
    if (node.contains("after")) {
      if (!node["after"].is_array()) invalid(fmt::format("analysis '{}': 'after' must be a list", a.name));
      for (const auto& dep : node["after"]) a.after.push_back(text_of(dep));
    }
    if (node.contains("options")) {
      if (!node["options"].is_object()) invalid(fmt::format("analysis '{}': 'options' must be a mapping", a.name));
      a.options = node["options"];
    }
    config.analyses.push_back(std::move(a));
  }
  const Schema schema = input_schema(config);
  for (const auto& a : config.analyses) check_analysis(a, schema, config);
  execution_levels(config);
  return config;
}

PipelineConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) invalid(fmt::format("cannot read config {}", path.string()));
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str(), path.parent_path());
}

std::vector<std::vector<std::size_t>> execution_levels(const PipelineConfig& config) {
  const std::size_t n = config.analyses.size();
  std::map<std::string, std::size_t> index;
  for (std::size_t i = 0; i < n; ++i) index[config.analyses[i].name] = i;
  std::vector<std::vector<std::size_t>> next(n);
  std::vector<std::size_t> indegree(n, 0);
  for (std::size_t i = 0; i < n; ++i) {
    const auto& a = config.analyses[i];
    std::set<std::size_t> deps;
    for (const auto& d : a.after) {
      auto it = index.find(d);
      if (it == index.end()) invalid(fmt::format("analysis '{}' runs after unknown analysis '{}'", a.name, d));
      deps.insert(it->second);
    }
    if (auto m = option_string(a, "mincer"); m && index.contains(*m)) deps.insert(index.at(*m));
    for (auto d : deps) {
      next[d].push_back(i);
      ++indegree[i];
    }
  }
  // Kahn's algorithm, one level at a time so a level can run concurrently
  std::vector<std::vector<std::size_t>> levels;
  std::vector<std::size_t> ready;
  for (std::size_t i = 0; i < n; ++i)
    if (indegree[i] == 0) ready.push_back(i);
  std::size_t placed = 0;
  while (!ready.empty()) {
    levels.push_back(ready);
    placed += ready.size();
    std::vector<std::size_t> upcoming;
    for (auto i : ready)
      for (auto j : next[i])
        if (--indegree[j] == 0) upcoming.push_back(j);
    std::sort(upcoming.begin(), upcoming.end());
    ready = std::move(upcoming);
  }
  if (placed != n) {
    std::string cyc;
    for (std::size_t i = 0; i < n; ++i)
      if (indegree[i] > 0) cyc += (cyc.empty() ? "" : ", ") + config.analyses[i].name;
    invalid(fmt::format("cyclic dependency among analyses: {}", cyc));
  }
  return levels;
}

std::optional<std::string> option_string(const AnalysisConfig& a, std::string_view key) {
  const std::string k(key);
  if (!a.options.contains(k) || a.options[k].is_null()) return std::nullopt;
  const Json& v = a.options[k];
  if (v.is_array() || v.is_object()) invalid(fmt::format("analysis '{}': option '{}' must be a scalar", a.name, key));
  return text_of(v);
}

std::string option_string(const AnalysisConfig& a, std::string_view key, std::string_view fallback) {
  return option_string(a, key).value_or(std::string(fallback));
}

double option_number(const AnalysisConfig& a, std::string_view key, double fallback) {
  const std::string k(key);
  if (!a.options.contains(k) || a.options[k].is_null()) return fallback;
  if (!a.options[k].is_number()) invalid(fmt::format("analysis '{}': option '{}' must be a number", a.name, key));
  return a.options[k].get<double>();
}

bool option_bool(const AnalysisConfig& a, std::string_view key, bool fallback) {
  const std::string k(key);
  if (!a.options.contains(k) || a.options[k].is_null()) return fallback;
  if (!a.options[k].is_boolean()) invalid(fmt::format("analysis '{}': option '{}' must be true or false", a.name, key));
  return a.options[k].get<bool>();
}

std::vector<std::string> option_list(const AnalysisConfig& a, std::string_view key) {
  const std::string k(key);
  std::vector<std::string> out;
  if (!a.options.contains(k) || a.options[k].is_null()) return out;
  const Json& v = a.options[k];
  if (!v.is_array()) invalid(fmt::format("analysis '{}': option '{}' must be a list", a.name, key));
  for (const auto& item : v) out.push_back(text_of(item));
  return out;
}

}  // namespace segkit
