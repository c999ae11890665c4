#pragma once

#include <array>
#include <cstddef>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "segkit/frame.hpp"

namespace segkit {

enum class Gender { kFemale = 0, kMale = 1 };
enum class Dominance { kFemale, kMale };
enum class Pooling { kPerTime, kPooled };

std::string_view to_string(Gender g);
std::string_view to_string(Dominance d);  // "fd" / "md"
std::string_view to_string(Pooling p);

// Employment counts by period, sector and gender.
class SectorPanel {
 public:
  SectorPanel() = default;
  // counts[t][j] = {female, male}. Validates non-negativity and that both
  // gender totals are positive in every period (ZeroGenderTotal).
  SectorPanel(std::vector<std::string> times, std::vector<std::string> sectors,
              std::vector<std::vector<std::array<double, 2>>> counts);

  const std::vector<std::string>& times() const { return times_; }
  const std::vector<std::string>& sectors() const { return sectors_; }
  std::size_t n_times() const { return times_.size(); }
  std::size_t n_sectors() const { return sectors_.size(); }
  double count(std::size_t t, std::size_t j, Gender g) const {
    return counts_[t][j][static_cast<std::size_t>(g)];
  }
  double total(std::size_t t, Gender g) const { return totals_[t][static_cast<std::size_t>(g)]; }
  // W_jt / W_t or M_jt / M_t
  double share(std::size_t t, std::size_t j, Gender g) const { return count(t, j, g) / total(t, g); }
  std::optional<std::size_t> time_index(std::string_view time) const;
  std::optional<std::size_t> sector_index(std::string_view sector) const;
  const std::vector<std::vector<std::array<double, 2>>>& counts() const { return counts_; }

 private:
  std::vector<std::string> times_;
  std::vector<std::string> sectors_;
  std::vector<std::vector<std::array<double, 2>>> counts_;
  std::vector<std::array<double, 2>> totals_;
};

// Long format: time,sector,gender,count with gender F or M. Times are ordered
// numerically when every id parses as a number, lexically otherwise; sectors
// lexically. Absent cells are zero.
SectorPanel parse_panel_csv(std::string_view text);
SectorPanel read_panel_csv(const std::filesystem::path& path);
std::string format_panel_csv(const SectorPanel& panel);

// Counts rows of a person-level frame. The gender column is boolean (true =
// female) or categorical with levels F/M; rows with any field missing are
// skipped.
SectorPanel panel_from_frame(const Frame& frame, std::string_view time_col, std::string_view sector_col,
                             std::string_view female_col);

struct DominanceMap {
  Pooling mode = Pooling::kPerTime;
  std::vector<std::vector<Dominance>> per_time;  // [t][j]
  std::vector<Dominance> pooled;                 // [j], from counts summed over time
  Dominance label(std::size_t t, std::size_t j) const { return mode == Pooling::kPooled ? pooled[j] : per_time[t][j]; }
};

// Female iff W_jt/W_t > M_jt/M_t; ties go Male.
DominanceMap classify_dominance(const SectorPanel& panel, Pooling pooling = Pooling::kPerTime);

struct SsiSeries {
  std::vector<std::string> times;
  std::vector<std::string> sectors;
  std::vector<std::array<double, 2>> value;         // [t][fd, md]
  std::vector<std::vector<double>> contribution;    // [t][j] = 0.5 |w - m|
  std::vector<std::vector<Dominance>> group;        // [t][j], label used at t
  std::vector<Dominance> pooled_group;              // [j]
  double fd(std::size_t t) const { return value[t][0]; }
  double md(std::size_t t) const { return value[t][1]; }
};

SsiSeries ssi(const SectorPanel& panel, const DominanceMap& dominance);

// Half the sum over all sectors of |W_jt/W_t - M_jt/M_t|.
double duncan_index(const SectorPanel& panel, std::size_t t);

std::string format_ssi_csv(const SsiSeries& series);  // time,group,ssi
std::string format_contributions_csv(const SsiSeries& series);  // time,sector,group,contribution

enum class Degree { kLow, kHigh };
std::string_view to_string(Degree d);

struct SegregationDegree {
  std::vector<std::string> sectors;
  std::vector<double> mean_contribution;
  std::vector<Dominance> group;
  std::vector<Degree> degree;
  std::optional<std::size_t> index_of(std::string_view sector) const;
};

// Median split of the mean contribution within each pooled dominance group
// (strictly above the median is High). With explicit_high supplied, exactly
// those sectors are High. GroupTooSmall when a group has fewer than 2 sectors.
SegregationDegree rank_segregation(const SsiSeries& series,
                                   const std::optional<std::vector<std::string>>& explicit_high = std::nullopt);

std::string format_degree_csv(const SegregationDegree& degree);  // sector,group,mean_contribution,degree

}  // namespace segkit
