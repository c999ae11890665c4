#include "segkit/shiftshare.hpp"

#include <fmt/format.h>

#include "segkit/error.hpp"

namespace segkit {

std::string_view to_string(ShareGroup g) {
  switch (g) {
    case ShareGroup::kFd: return "fd";
    case ShareGroup::kMd: return "md";
    case ShareGroup::kAll: return "all";
  }
  return "?";
}

const ShiftShareRow& ShiftShareResult::row(std::string_view time, ShareGroup group) const {
  for (const auto& r : rows)
    if (r.time == time && r.group == group) return r;
  throw Error(ErrorCode::kInvalidArgument, fmt::format("no shift-share row for {} / {}", time, to_string(group)));
}

ShiftShareResult shift_share(const SectorPanel& panel, Gender gender, const DominanceMap& dominance,
                             std::optional<std::string> base_time) {
  if (dominance.pooled.size() != panel.n_sectors())
    throw Error(ErrorCode::kInvalidArgument, "dominance map does not match the panel");
  ShiftShareResult out;
  out.gender = gender;
  out.base_time = base_time.value_or(panel.times().front());
  const auto base = panel.time_index(out.base_time);
  if (!base) throw Error(ErrorCode::kUnknownBaseTime, fmt::format("base period '{}' is not in the panel", out.base_time));
  const std::size_t t0 = *base;
  const std::size_t J = panel.n_sectors();

  auto employment = [&](std::size_t t, std::size_t j) {
    return panel.count(t, j, Gender::kFemale) + panel.count(t, j, Gender::kMale);
  };
  auto in_group = [&](std::size_t j, ShareGroup g) {
    if (g == ShareGroup::kAll) return true;
    return (dominance.pooled[j] == Dominance::kFemale) == (g == ShareGroup::kFd);
  };

  for (std::size_t t = 0; t < panel.n_times(); ++t) {
    for (ShareGroup g : {ShareGroup::kFd, ShareGroup::kMd, ShareGroup::kAll}) {
      double total0 = 0.0, total1 = 0.0, gender0 = 0.0, gender1 = 0.0;
      std::size_t members = 0;
      for (std::size_t j = 0; j < J; ++j) {
        if (!in_group(j, g)) continue;
        ++members;
        total0 += employment(t0, j);
        total1 += employment(t, j);
        gender0 += panel.count(t0, j, gender);
        gender1 += panel.count(t, j, gender);
      }
      if (members == 0) continue;
      if (total0 <= 0.0 || total1 <= 0.0) {
        out.warnings.push_back(fmt::format("EmptyGroup: {} sectors have no employment in period {} or the base period",
                                           to_string(g), panel.times()[t]));
        continue;
      }
      ShiftShareRow row;
      row.time = panel.times()[t];
      row.group = g;
      row.overall = gender1 / total1 - gender0 / total0;
      for (std::size_t j = 0; j < J; ++j) {
        if (!in_group(j, g)) continue;
        const double e0 = employment(t0, j) / total0;
        const double e1 = employment(t, j) / total1;
        // The product e * e_gender is zero when the sector is empty, so any
        // stand-in share keeps the identity exact.
        double s0 = employment(t0, j) > 0.0 ? panel.count(t0, j, gender) / employment(t0, j) : -1.0;
        double s1 = employment(t, j) > 0.0 ? panel.count(t, j, gender) / employment(t, j) : -1.0;
        if (s0 < 0.0) s0 = s1 < 0.0 ? 0.0 : s1;
        if (s1 < 0.0) s1 = s0;
        ShiftShareWeights w;
        w.time = row.time;
        w.sector = panel.sectors()[j];
        w.group = dominance.pooled[j] == Dominance::kFemale ? ShareGroup::kFd : ShareGroup::kMd;
        w.alpha_gender = 0.5 * (s0 + s1);
        w.alpha = 0.5 * (e0 + e1);
        w.delta_e = e1 - e0;
        w.delta_e_gender = s1 - s0;
        row.between += w.alpha_gender * w.delta_e;
        row.within += w.alpha * w.delta_e_gender;
        if (g != ShareGroup::kAll) out.weights.push_back(w);
      }
      row.residual = row.overall - row.between - row.within;
      out.rows.push_back(row);
    }
  }
  return out;
}

std::string format_shift_share_csv(const ShiftShareResult& result) {
  std::vector<std::optional<std::string>> time, group;
  std::vector<double> overall, between, within, residual;
  for (const auto& r : result.rows) {
    time.emplace_back(r.time);
    group.emplace_back(std::string(to_string(r.group)));
    overall.push_back(r.overall);
    between.push_back(r.between);
    within.push_back(r.within);
    residual.push_back(r.residual);
  }
  return format_csv(Frame({Column::categorical("time", time), Column::categorical("group", group),
                           Column::numeric("overall", std::move(overall)), Column::numeric("between", std::move(between)),
                           Column::numeric("within", std::move(within)),
                           Column::numeric("residual", std::move(residual))}));
}

}  // namespace segkit
