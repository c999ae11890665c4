#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

namespace segkit {

enum class ColumnKind { kNumeric, kCategorical, kBoolean };

std::string_view to_string(ColumnKind kind) noexcept;
ColumnKind column_kind_from_string(std::string_view text);

/// One typed column with a per-cell missing marker.
///
/// Numeric and boolean cells live in `values` (booleans as 0/1); categorical
/// cells are integer codes into `levels`, ordered by first appearance.
class Column {
 public:
  static Column numeric(std::string name, std::vector<double> values);
  static Column numeric(std::string name, const std::vector<std::optional<double>>& cells);
  static Column boolean(std::string name, const std::vector<std::optional<bool>>& cells);
  static Column categorical(std::string name,
                            const std::vector<std::optional<std::string>>& labels);
  static Column categorical_codes(std::string name, std::vector<std::int32_t> codes,
                                  std::vector<std::string> levels);

  const std::string& name() const noexcept { return name_; }
  ColumnKind kind() const noexcept { return kind_; }
  std::size_t size() const noexcept { return missing_.size(); }

  bool is_missing(std::size_t row) const { return missing_[row] != 0; }
  std::size_t missing_count() const noexcept;

  // Numeric or boolean value; undefined for missing cells.
  double number(std::size_t row) const { return values_[row]; }
  std::int32_t code(std::size_t row) const { return codes_[row]; }
  const std::string& label(std::size_t row) const { return levels_[codes_[row]]; }

  const std::vector<double>& values() const noexcept { return values_; }
  const std::vector<std::int32_t>& codes() const noexcept { return codes_; }
  const std::vector<std::string>& levels() const noexcept { return levels_; }

  std::optional<std::int32_t> level_code(std::string_view label) const;

  Column take(std::span<const std::size_t> rows) const;
  Column renamed(std::string name) const;

 private:
  Column(std::string name, ColumnKind kind) : name_(std::move(name)), kind_(kind) {}
  void check_invariants() const;

  std::string name_;
  ColumnKind kind_;
  std::vector<double> values_;
  std::vector<std::int32_t> codes_;
  std::vector<std::string> levels_;
  std::vector<std::uint8_t> missing_;
};

/// Immutable, ordered collection of equally long, uniquely named columns.
class Frame {
 public:
  Frame() = default;
  explicit Frame(std::vector<Column> columns);

  std::size_t n_rows() const noexcept { return n_rows_; }
  std::size_t n_cols() const noexcept { return columns_.size(); }
  const std::vector<Column>& columns() const noexcept { return columns_; }

  bool has_column(std::string_view name) const;
  // Throws MissingColumn.
  const Column& column(std::string_view name) const;

  Frame take(std::span<const std::size_t> rows) const;
  Frame with_column(Column column) const;

 private:
  std::vector<Column> columns_;
  std::unordered_map<std::string, std::size_t> index_;
  std::size_t n_rows_ = 0;
};

using Schema = std::vector<std::pair<std::string, ColumnKind>>;

/// RFC-4180 CSV reader. Columns not named in the schema are ignored; cells that
/// do not parse as the declared kind become missing.
Frame read_csv(const std::string& path, const Schema& schema);
Frame parse_csv(std::string_view text, const Schema& schema);

void write_csv(const std::string& path, const Frame& frame);
std::string format_csv(const Frame& frame);

// Label of a categorical cell or the shortest text of a numeric one.
std::string cell_text(const Column& column, std::size_t row);

// Numeric order when every id parses as a number, lexical otherwise.
void sort_ids(std::vector<std::string>& ids);

// Shortest decimal text that parses back to the same double.
std::string format_double(double value);

/// Deflates a nominal hourly pay column by a CPI index with base 100.
Column real_wage(const Column& nominal, const Column& cpi_2015_base, std::string name = "real_wage");

}  // namespace segkit
