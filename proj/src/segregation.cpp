#include "segkit/segregation.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>
#include <sstream>

#include "segkit/error.hpp"

namespace segkit {

namespace {

std::size_t position(const std::vector<std::string>& ids, const std::string& id) {
  return static_cast<std::size_t>(std::find(ids.begin(), ids.end(), id) - ids.begin());
}

SectorPanel assemble(std::map<std::pair<std::string, std::string>, std::array<double, 2>> cells) {
  std::vector<std::string> times, sectors;
  for (const auto& [key, _] : cells) {
    if (std::find(times.begin(), times.end(), key.first) == times.end()) times.push_back(key.first);
    if (std::find(sectors.begin(), sectors.end(), key.second) == sectors.end()) sectors.push_back(key.second);
  }
  sort_ids(times);
  sort_ids(sectors);
  std::vector<std::vector<std::array<double, 2>>> counts(times.size(),
                                                         std::vector<std::array<double, 2>>(sectors.size(), {0.0, 0.0}));
  for (const auto& [key, c] : cells) counts[position(times, key.first)][position(sectors, key.second)] = c;
  return SectorPanel(std::move(times), std::move(sectors), std::move(counts));
}

}  // namespace

std::string_view to_string(Gender g) { return g == Gender::kFemale ? "F" : "M"; }
std::string_view to_string(Dominance d) { return d == Dominance::kFemale ? "fd" : "md"; }
std::string_view to_string(Pooling p) { return p == Pooling::kPooled ? "pooled" : "per_time"; }
std::string_view to_string(Degree d) { return d == Degree::kHigh ? "High" : "Low"; }

SectorPanel::SectorPanel(std::vector<std::string> times, std::vector<std::string> sectors,
                         std::vector<std::vector<std::array<double, 2>>> counts)
    : times_(std::move(times)), sectors_(std::move(sectors)), counts_(std::move(counts)) {
  if (times_.empty() || sectors_.empty()) throw Error(ErrorCode::kEmptyInput, "panel has no periods or no sectors");
  if (counts_.size() != times_.size())
    throw Error(ErrorCode::kInvalidArgument, "panel counts do not match the number of periods");
  totals_.assign(times_.size(), {0.0, 0.0});
  for (std::size_t t = 0; t < times_.size(); ++t) {
    if (counts_[t].size() != sectors_.size())
      throw Error(ErrorCode::kInvalidArgument, "panel counts do not match the number of sectors");
    for (const auto& cell : counts_[t]) {
      for (std::size_t g = 0; g < 2; ++g) {
        if (!(cell[g] >= 0.0) || !std::isfinite(cell[g]))
          throw Error(ErrorCode::kInvalidArgument, fmt::format("negative or non-finite count at period {}", times_[t]));
        totals_[t][g] += cell[g];
      }
    }
    for (std::size_t g = 0; g < 2; ++g)
      if (totals_[t][g] <= 0.0)
        throw Error(ErrorCode::kZeroGenderTotal,
                    fmt::format("period {} has no {} employment", times_[t], g == 0 ? "female" : "male"));
  }
}

std::optional<std::size_t> SectorPanel::time_index(std::string_view time) const {
  for (std::size_t t = 0; t < times_.size(); ++t)
    if (times_[t] == time) return t;
  return std::nullopt;
}

std::optional<std::size_t> SectorPanel::sector_index(std::string_view sector) const {
  for (std::size_t j = 0; j < sectors_.size(); ++j)
    if (sectors_[j] == sector) return j;
  return std::nullopt;
}

SectorPanel parse_panel_csv(std::string_view text) {
  const Schema schema{{"time", ColumnKind::kCategorical},
                      {"sector", ColumnKind::kCategorical},
                      {"gender", ColumnKind::kCategorical},
                      {"count", ColumnKind::kNumeric}};
  const Frame f = parse_csv(text, schema);
  const auto& time = f.column("time");
  const auto& sector = f.column("sector");
  const auto& gender = f.column("gender");
  const auto& count = f.column("count");
  std::map<std::pair<std::string, std::string>, std::array<double, 2>> cells;
  for (std::size_t i = 0; i < f.n_rows(); ++i) {
    if (time.is_missing(i) || sector.is_missing(i) || gender.is_missing(i) || count.is_missing(i))
      throw Error(ErrorCode::kInvalidArgument, fmt::format("panel row {} has a missing field", i + 1));
    const auto& g = gender.label(i);
    if (g != "F" && g != "M")
      throw Error(ErrorCode::kInvalidArgument, fmt::format("panel row {}: gender must be F or M, got '{}'", i + 1, g));
    auto& cell = cells[{time.label(i), sector.label(i)}];
    cell[g == "F" ? 0 : 1] += count.number(i);
  }
  return assemble(std::move(cells));
}

SectorPanel read_panel_csv(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIoFailure, fmt::format("cannot open '{}'", path.string()));
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_panel_csv(ss.str());
}

std::string format_panel_csv(const SectorPanel& panel) {
  std::vector<std::optional<std::string>> time, sector, gender;
  std::vector<double> count;
  for (std::size_t t = 0; t < panel.n_times(); ++t)
    for (std::size_t j = 0; j < panel.n_sectors(); ++j)
      for (Gender g : {Gender::kFemale, Gender::kMale}) {
        time.emplace_back(panel.times()[t]);
        sector.emplace_back(panel.sectors()[j]);
        gender.emplace_back(std::string(to_string(g)));
        count.push_back(panel.count(t, j, g));
      }
  return format_csv(Frame({Column::categorical("time", time), Column::categorical("sector", sector),
                           Column::categorical("gender", gender), Column::numeric("count", std::move(count))}));
}

SectorPanel panel_from_frame(const Frame& frame, std::string_view time_col, std::string_view sector_col,
                             std::string_view female_col) {
  const auto& time = frame.column(time_col);
  const auto& sector = frame.column(sector_col);
  const auto& female = frame.column(female_col);
  std::map<std::pair<std::string, std::string>, std::array<double, 2>> cells;
  for (std::size_t i = 0; i < frame.n_rows(); ++i) {
    if (time.is_missing(i) || sector.is_missing(i) || female.is_missing(i)) continue;
    bool is_female = false;
    if (female.kind() == ColumnKind::kCategorical) {
      const auto& g = female.label(i);
      if (g != "F" && g != "M")
        throw Error(ErrorCode::kInvalidArgument, fmt::format("gender column '{}' must hold F or M", female_col));
      is_female = g == "F";
    } else {
      is_female = female.number(i) != 0.0;
    }
    cells[{cell_text(time, i), cell_text(sector, i)}][is_female ? 0 : 1] += 1.0;
  }
  if (cells.empty()) throw Error(ErrorCode::kEmptyInput, "no complete rows to build a sector panel");
  return assemble(std::move(cells));
}

DominanceMap classify_dominance(const SectorPanel& panel, Pooling pooling) {
  DominanceMap map;
  map.mode = pooling;
  map.per_time.resize(panel.n_times());
  for (std::size_t t = 0; t < panel.n_times(); ++t)
    for (std::size_t j = 0; j < panel.n_sectors(); ++j)
      map.per_time[t].push_back(panel.share(t, j, Gender::kFemale) > panel.share(t, j, Gender::kMale)
                                    ? Dominance::kFemale
                                    : Dominance::kMale);
  double wt = 0.0, mt = 0.0;
  for (std::size_t t = 0; t < panel.n_times(); ++t) {
    wt += panel.total(t, Gender::kFemale);
    mt += panel.total(t, Gender::kMale);
  }
  for (std::size_t j = 0; j < panel.n_sectors(); ++j) {
    double wj = 0.0, mj = 0.0;
    for (std::size_t t = 0; t < panel.n_times(); ++t) {
      wj += panel.count(t, j, Gender::kFemale);
      mj += panel.count(t, j, Gender::kMale);
    }
    map.pooled.push_back(wj / wt > mj / mt ? Dominance::kFemale : Dominance::kMale);
  }
  return map;
}

SsiSeries ssi(const SectorPanel& panel, const DominanceMap& dominance) {
  if (dominance.per_time.size() != panel.n_times() || dominance.pooled.size() != panel.n_sectors())
    throw Error(ErrorCode::kInvalidArgument, "dominance map does not match the panel");
  SsiSeries s;
  s.times = panel.times();
  s.sectors = panel.sectors();
  s.pooled_group = dominance.pooled;
  for (std::size_t t = 0; t < panel.n_times(); ++t) {
    std::array<double, 2> v{0.0, 0.0};
    std::vector<double> contrib;
    std::vector<Dominance> group;
    for (std::size_t j = 0; j < panel.n_sectors(); ++j) {
      const double c = 0.5 * std::abs(panel.share(t, j, Gender::kFemale) - panel.share(t, j, Gender::kMale));
      const Dominance d = dominance.label(t, j);
      v[d == Dominance::kFemale ? 0 : 1] += c;
      contrib.push_back(c);
      group.push_back(d);
    }
    s.value.push_back(v);
    s.contribution.push_back(std::move(contrib));
    s.group.push_back(std::move(group));
  }
  return s;
}

double duncan_index(const SectorPanel& panel, std::size_t t) {
  double sum = 0.0;
  for (std::size_t j = 0; j < panel.n_sectors(); ++j)
    sum += std::abs(panel.share(t, j, Gender::kFemale) - panel.share(t, j, Gender::kMale));
  return 0.5 * sum;
}

std::string format_ssi_csv(const SsiSeries& series) {
  std::vector<std::optional<std::string>> time, group;
  std::vector<double> value;
  for (std::size_t t = 0; t < series.times.size(); ++t)
    for (Dominance d : {Dominance::kFemale, Dominance::kMale}) {
      time.emplace_back(series.times[t]);
      group.emplace_back(std::string(to_string(d)));
      value.push_back(series.value[t][d == Dominance::kFemale ? 0 : 1]);
    }
  return format_csv(Frame({Column::categorical("time", time), Column::categorical("group", group),
                           Column::numeric("ssi", std::move(value))}));
}

std::string format_contributions_csv(const SsiSeries& series) {
  std::vector<std::optional<std::string>> time, sector, group;
  std::vector<double> value;
  for (std::size_t t = 0; t < series.times.size(); ++t)
    for (std::size_t j = 0; j < series.sectors.size(); ++j) {
      time.emplace_back(series.times[t]);
      sector.emplace_back(series.sectors[j]);
      group.emplace_back(std::string(to_string(series.group[t][j])));
      value.push_back(series.contribution[t][j]);
    }
  return format_csv(Frame({Column::categorical("time", time), Column::categorical("sector", sector),
                           Column::categorical("group", group), Column::numeric("contribution", std::move(value))}));
}

std::optional<std::size_t> SegregationDegree::index_of(std::string_view sector) const {
  for (std::size_t j = 0; j < sectors.size(); ++j)
    if (sectors[j] == sector) return j;
  return std::nullopt;
}

SegregationDegree rank_segregation(const SsiSeries& series, const std::optional<std::vector<std::string>>& explicit_high) {
  SegregationDegree out;
  out.sectors = series.sectors;
  out.group = series.pooled_group;
  const std::size_t J = series.sectors.size();
  const std::size_t T = series.times.size();
  if (T == 0) throw Error(ErrorCode::kEmptyInput, "SSI series has no periods");
  out.mean_contribution.assign(J, 0.0);
  for (std::size_t j = 0; j < J; ++j) {
    for (std::size_t t = 0; t < T; ++t) out.mean_contribution[j] += series.contribution[t][j];
    out.mean_contribution[j] /= static_cast<double>(T);
  }
  out.degree.assign(J, Degree::kLow);

  for (Dominance d : {Dominance::kFemale, Dominance::kMale}) {
    std::vector<double> values;
    for (std::size_t j = 0; j < J; ++j)
      if (out.group[j] == d) values.push_back(out.mean_contribution[j]);
    if (values.size() < 2)
      throw Error(ErrorCode::kGroupTooSmall,
                  fmt::format("{} group has {} sector(s); at least 2 are needed", to_string(d), values.size()));
    if (explicit_high) continue;
    std::sort(values.begin(), values.end());
    const std::size_t m = values.size();
    const double median = m % 2 ? values[m / 2] : 0.5 * (values[m / 2 - 1] + values[m / 2]);
    for (std::size_t j = 0; j < J; ++j)
      if (out.group[j] == d && out.mean_contribution[j] > median) out.degree[j] = Degree::kHigh;
  }

  if (explicit_high) {
    for (const auto& name : *explicit_high) {
      auto j = out.index_of(name);
      if (!j) throw Error(ErrorCode::kInvalidArgument, fmt::format("unknown sector '{}' in the High list", name));
      out.degree[*j] = Degree::kHigh;
    }
  }
  return out;
}

std::string format_degree_csv(const SegregationDegree& degree) {
  std::vector<std::optional<std::string>> sector, group, label;
  for (std::size_t j = 0; j < degree.sectors.size(); ++j) {
    sector.emplace_back(degree.sectors[j]);
    group.emplace_back(std::string(to_string(degree.group[j])));
    label.emplace_back(std::string(to_string(degree.degree[j])));
  }
  return format_csv(Frame({Column::categorical("sector", sector), Column::categorical("group", group),
                           Column::numeric("mean_contribution", degree.mean_contribution),
                           Column::categorical("degree", label)}));
}

}  // namespace segkit
