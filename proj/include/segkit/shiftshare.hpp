#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "segkit/segregation.hpp"

namespace segkit {

// fd / md use the pooled dominance labels; all spans every sector.
enum class ShareGroup { kFd, kMd, kAll };
std::string_view to_string(ShareGroup g);

struct ShiftShareRow {
  std::string time;
  ShareGroup group;
  double overall = 0.0;   // change in the gender's share of group employment
  double between = 0.0;
  double within = 0.0;
  double residual = 0.0;  // overall - between - within
};

// Per period and sector, the pieces of the decomposition for audit.
struct ShiftShareWeights {
  std::string time;
  std::string sector;
  ShareGroup group;         // fd or md
  double alpha_gender = 0;  // mean of the gender's share of the sector at base and t
  double alpha = 0;         // mean of the sector's share of group employment
  double delta_e = 0;       // change in the sector's share of group employment
  double delta_e_gender = 0;  // change in the gender's share of the sector
};

struct ShiftShareResult {
  Gender gender = Gender::kFemale;
  std::string base_time;
  std::vector<ShiftShareRow> rows;        // time-major, groups fd, md, all
  std::vector<ShiftShareWeights> weights;  // fd/md membership only
  std::vector<std::string> warnings;       // groups skipped for lack of employment
  const ShiftShareRow& row(std::string_view time, ShareGroup group) const;
};

/// Between/within decomposition of the change in a gender's employment share
/// relative to base_time (default: the first period). Sector shares are taken
/// within each group, so between + within reproduces the overall change up to
/// rounding. A sector with no employment in one of the two periods borrows the
/// gender share of the other period. A group with no employment in either
/// period is skipped with a warning. UnknownBaseTime if base_time is absent.
ShiftShareResult shift_share(const SectorPanel& panel, Gender gender, const DominanceMap& dominance,
                             std::optional<std::string> base_time = std::nullopt);

std::string format_shift_share_csv(const ShiftShareResult& result);  // time,group,overall,between,within,residual

}  // namespace segkit
