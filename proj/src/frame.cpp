#include "segkit/frame.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cerrno>
#include <charconv>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <unordered_set>

#include "segkit/error.hpp"

namespace segkit {

std::string_view to_string(ColumnKind kind) noexcept {
  switch (kind) {
    case ColumnKind::kNumeric: return "numeric";
    case ColumnKind::kCategorical: return "categorical";
    case ColumnKind::kBoolean: return "boolean";
  }
  return "numeric";
}

ColumnKind column_kind_from_string(std::string_view text) {
  if (text == "numeric") return ColumnKind::kNumeric;
  if (text == "categorical") return ColumnKind::kCategorical;
  if (text == "boolean") return ColumnKind::kBoolean;
  throw Error(ErrorCode::kInvalidArgument, fmt::format("unknown column kind '{}'", text));
}

// ---------------------------------------------------------------- Column

Column Column::numeric(std::string name, std::vector<double> values) {
  Column col(std::move(name), ColumnKind::kNumeric);
  col.missing_.assign(values.size(), 0);
  col.values_ = std::move(values);
  return col;
}

Column Column::numeric(std::string name, const std::vector<std::optional<double>>& cells) {
  Column col(std::move(name), ColumnKind::kNumeric);
  col.values_.reserve(cells.size());
  col.missing_.reserve(cells.size());
  for (const auto& cell : cells) {
    col.values_.push_back(cell.value_or(0.0));
    col.missing_.push_back(cell ? 0 : 1);
  }
  return col;
}

Column Column::boolean(std::string name, const std::vector<std::optional<bool>>& cells) {
  Column col(std::move(name), ColumnKind::kBoolean);
  col.values_.reserve(cells.size());
  col.missing_.reserve(cells.size());
  for (const auto& cell : cells) {
    col.values_.push_back(cell.value_or(false) ? 1.0 : 0.0);
    col.missing_.push_back(cell ? 0 : 1);
  }
  return col;
}

Column Column::categorical(std::string name,
                           const std::vector<std::optional<std::string>>& labels) {
  Column col(std::move(name), ColumnKind::kCategorical);
  std::unordered_map<std::string, std::int32_t> seen;
  col.codes_.reserve(labels.size());
  col.missing_.reserve(labels.size());
  for (const auto& label : labels) {
    if (!label) {
      col.codes_.push_back(-1);
      col.missing_.push_back(1);
      continue;
    }
    auto [it, inserted] = seen.try_emplace(*label, static_cast<std::int32_t>(col.levels_.size()));
    if (inserted) col.levels_.push_back(*label);
    col.codes_.push_back(it->second);
    col.missing_.push_back(0);
  }
  return col;
}

Column Column::categorical_codes(std::string name, std::vector<std::int32_t> codes,
                                 std::vector<std::string> levels) {
  Column col(std::move(name), ColumnKind::kCategorical);
  col.missing_.reserve(codes.size());
  for (auto c : codes) col.missing_.push_back(c < 0 ? 1 : 0);
  col.codes_ = std::move(codes);
  col.levels_ = std::move(levels);
  col.check_invariants();
  return col;
}

void Column::check_invariants() const {
  if (kind_ != ColumnKind::kCategorical) return;
  std::unordered_set<std::string> unique(levels_.begin(), levels_.end());
  if (unique.size() != levels_.size())
    throw Error(ErrorCode::kInvalidArgument, fmt::format("column '{}': duplicate level labels", name_));
  const auto n_levels = static_cast<std::int32_t>(levels_.size());
  for (std::size_t i = 0; i < codes_.size(); ++i) {
    if (!missing_[i] && (codes_[i] < 0 || codes_[i] >= n_levels))
      throw Error(ErrorCode::kInvalidArgument,
                  fmt::format("column '{}': code {} out of range", name_, codes_[i]));
  }
}

std::size_t Column::missing_count() const noexcept {
  return static_cast<std::size_t>(std::count(missing_.begin(), missing_.end(), 1));
}

std::optional<std::int32_t> Column::level_code(std::string_view label) const {
  for (std::size_t i = 0; i < levels_.size(); ++i)
    if (levels_[i] == label) return static_cast<std::int32_t>(i);
  return std::nullopt;
}

Column Column::take(std::span<const std::size_t> rows) const {
  Column out(name_, kind_);
  out.levels_ = levels_;
  out.missing_.reserve(rows.size());
  if (kind_ == ColumnKind::kCategorical) {
    out.codes_.reserve(rows.size());
    for (auto r : rows) out.codes_.push_back(codes_.at(r));
  } else {
    out.values_.reserve(rows.size());
    for (auto r : rows) out.values_.push_back(values_.at(r));
  }
  for (auto r : rows) out.missing_.push_back(missing_[r]);
  return out;
}

Column Column::renamed(std::string name) const {
  Column out = *this;
  out.name_ = std::move(name);
  return out;
}

// ---------------------------------------------------------------- Frame

Frame::Frame(std::vector<Column> columns) : columns_(std::move(columns)) {
  n_rows_ = columns_.empty() ? 0 : columns_.front().size();
  for (std::size_t i = 0; i < columns_.size(); ++i) {
    const auto& col = columns_[i];
    if (col.size() != n_rows_)
      throw Error(ErrorCode::kInvalidArgument,
                  fmt::format("column '{}' has {} rows, expected {}", col.name(), col.size(), n_rows_));
    if (!index_.emplace(col.name(), i).second)
      throw Error(ErrorCode::kInvalidArgument, fmt::format("duplicate column name '{}'", col.name()));
  }
}

bool Frame::has_column(std::string_view name) const {
  return index_.find(std::string(name)) != index_.end();
}

const Column& Frame::column(std::string_view name) const {
  auto it = index_.find(std::string(name));
  if (it == index_.end())
    throw Error(ErrorCode::kMissingColumn, fmt::format("no column named '{}'", name));
  return columns_[it->second];
}

Frame Frame::take(std::span<const std::size_t> rows) const {
  std::vector<Column> cols;
  cols.reserve(columns_.size());
  for (const auto& c : columns_) cols.push_back(c.take(rows));
  return Frame(std::move(cols));
}

Frame Frame::with_column(Column column) const {
  std::vector<Column> cols = columns_;
  auto it = index_.find(column.name());
  if (it != index_.end())
    cols[it->second] = std::move(column);
  else
    cols.push_back(std::move(column));
  return Frame(std::move(cols));
}

// ---------------------------------------------------------------- CSV

namespace {

// Splits RFC-4180 text into records of fields. Quoted fields may contain
// separators, doubled quotes and line breaks.
std::vector<std::vector<std::string>> split_records(std::string_view text) {
  if (text.size() >= 3 && text.substr(0, 3) == "\xEF\xBB\xBF") text.remove_prefix(3);
  std::vector<std::vector<std::string>> records;
  std::vector<std::string> record;
  std::string field;
  bool in_quotes = false;
  bool field_started = false;
  for (std::size_t i = 0; i < text.size(); ++i) {
    const char ch = text[i];
    if (in_quotes) {
      if (ch == '"') {
        if (i + 1 < text.size() && text[i + 1] == '"') {
          field.push_back('"');
          ++i;
        } else {
          in_quotes = false;
        }
      } else {
        field.push_back(ch);
      }
      continue;
    }
    switch (ch) {
      case '"':
        in_quotes = true;
        field_started = true;
        break;
      case ',':
        record.push_back(std::move(field));
        field.clear();
        field_started = true;
        break;
      case '\r':
        break;
      case '\n':
        record.push_back(std::move(field));
        field.clear();
        records.push_back(std::move(record));
        record.clear();
        field_started = false;
        break;
      default:
        field.push_back(ch);
        field_started = true;
    }
  }
  if (in_quotes) throw Error(ErrorCode::kIoFailure, "unterminated quoted field");
  if (field_started || !field.empty() || !record.empty()) {
    record.push_back(std::move(field));
    records.push_back(std::move(record));
  }
  return records;
}

std::optional<double> parse_number(const std::string& cell, std::size_t row, const std::string& name) {
  if (cell.empty()) return std::nullopt;
  double value = 0.0;
  const char* begin = cell.data();
  const char* end = cell.data() + cell.size();
  auto [ptr, ec] = std::from_chars(begin, end, value);
  if (ec == std::errc::result_out_of_range) {
    errno = 0;
    const double v = std::strtod(cell.c_str(), nullptr);
    if (std::isinf(v))
      throw Error(ErrorCode::kTypeOverflow,
                  fmt::format("column '{}' row {}: '{}' overflows float64", name, row + 1, cell));
    return v;  // underflow to a subnormal or zero is representable
  }
  if (ec != std::errc() || ptr != end || !std::isfinite(value)) return std::nullopt;
  return value;
}

std::optional<bool> parse_bool(const std::string& cell) {
  if (cell == "1" || cell == "true" || cell == "TRUE" || cell == "True") return true;
  if (cell == "0" || cell == "false" || cell == "FALSE" || cell == "False") return false;
  return std::nullopt;
}

std::string quote_if_needed(const std::string& s) {
  if (s.find_first_of(",\"\r\n") == std::string::npos && !s.empty()) return s;
  if (s.empty()) return "\"\"";
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out.push_back('"');
    out.push_back(c);
  }
  out.push_back('"');
  return out;
}

}  // namespace

std::string cell_text(const Column& column, std::size_t row) {
  return column.kind() == ColumnKind::kCategorical ? column.label(row) : format_double(column.number(row));
}

void sort_ids(std::vector<std::string>& ids) {
  auto as_number = [](const std::string& s) -> std::optional<double> {
    double v = 0.0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc{} || ptr != s.data() + s.size()) return std::nullopt;
    return v;
  };
  const bool numeric = std::all_of(ids.begin(), ids.end(), [&](const auto& s) { return as_number(s).has_value(); });
  if (numeric)
    std::stable_sort(ids.begin(), ids.end(), [&](const auto& a, const auto& b) { return *as_number(a) < *as_number(b); });
  else
    std::sort(ids.begin(), ids.end());
}

std::string format_double(double value) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), value);
  (void)ec;
  return std::string(buf, ptr);
}

Frame parse_csv(std::string_view text, const Schema& schema) {
  auto records = split_records(text);
  if (records.empty()) throw Error(ErrorCode::kIoFailure, "CSV input has no header row");
  const auto& header = records.front();

  std::unordered_map<std::string, std::size_t> position;
  for (std::size_t i = 0; i < header.size(); ++i) position.emplace(header[i], i);
  for (const auto& [name, kind] : schema) {
    if (!position.count(name))
      throw Error(ErrorCode::kMissingColumn, fmt::format("CSV header lacks declared column '{}'", name));
  }

  // Keep header order among declared columns.
  std::vector<std::pair<std::size_t, const std::pair<std::string, ColumnKind>*>> order;
  for (const auto& entry : schema) order.emplace_back(position.at(entry.first), &entry);
  std::sort(order.begin(), order.end(), [](auto& a, auto& b) { return a.first < b.first; });

  const std::size_t n = records.size() - 1;
  std::vector<Column> columns;
  columns.reserve(order.size());
  for (const auto& [pos, entry] : order) {
    const auto& [name, kind] = *entry;
    auto cell_at = [&](std::size_t row) -> const std::string& {
      static const std::string empty;
      const auto& rec = records[row + 1];
      return pos < rec.size() ? rec[pos] : empty;
    };
    switch (kind) {
      case ColumnKind::kNumeric: {
        std::vector<std::optional<double>> cells(n);
        for (std::size_t r = 0; r < n; ++r) cells[r] = parse_number(cell_at(r), r, name);
        columns.push_back(Column::numeric(name, cells));
        break;
      }
      case ColumnKind::kBoolean: {
        std::vector<std::optional<bool>> cells(n);
        for (std::size_t r = 0; r < n; ++r) cells[r] = parse_bool(cell_at(r));
        columns.push_back(Column::boolean(name, cells));
        break;
      }
      case ColumnKind::kCategorical: {
        std::vector<std::optional<std::string>> cells(n);
        for (std::size_t r = 0; r < n; ++r) {
          const auto& c = cell_at(r);
          if (!c.empty()) cells[r] = c;
        }
        columns.push_back(Column::categorical(name, cells));
        break;
      }
    }
  }
  return Frame(std::move(columns));
}

Frame read_csv(const std::string& path, const Schema& schema) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIoFailure, fmt::format("cannot open '{}'", path));
  std::stringstream buffer;
  buffer << in.rdbuf();
  if (in.bad()) throw Error(ErrorCode::kIoFailure, fmt::format("read error on '{}'", path));
  return parse_csv(buffer.str(), schema);
}

std::string format_csv(const Frame& frame) {
  std::string out;
  const auto& cols = frame.columns();
  for (std::size_t c = 0; c < cols.size(); ++c) {
    if (c) out.push_back(',');
    out += quote_if_needed(cols[c].name());
  }
  out += "\r\n";
  for (std::size_t r = 0; r < frame.n_rows(); ++r) {
    for (std::size_t c = 0; c < cols.size(); ++c) {
      if (c) out.push_back(',');
      const auto& col = cols[c];
      if (col.is_missing(r)) continue;
      switch (col.kind()) {
        case ColumnKind::kNumeric: out += format_double(col.number(r)); break;
        case ColumnKind::kBoolean: out += col.number(r) != 0.0 ? "1" : "0"; break;
        case ColumnKind::kCategorical: out += quote_if_needed(col.label(r)); break;
      }
    }
    out += "\r\n";
  }
  return out;
}

void write_csv(const std::string& path, const Frame& frame) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::kIoFailure, fmt::format("cannot write '{}'", path));
  out << format_csv(frame);
  if (!out) throw Error(ErrorCode::kIoFailure, fmt::format("write error on '{}'", path));
}

Column real_wage(const Column& nominal, const Column& cpi_2015_base, std::string name) {
  if (nominal.kind() != ColumnKind::kNumeric || cpi_2015_base.kind() != ColumnKind::kNumeric)
    throw Error(ErrorCode::kInvalidArgument, "real_wage needs numeric columns");
  if (nominal.size() != cpi_2015_base.size())
    throw Error(ErrorCode::kInvalidArgument, "real_wage: column lengths differ");
  std::vector<std::optional<double>> out(nominal.size());
  for (std::size_t i = 0; i < nominal.size(); ++i) {
    if (cpi_2015_base.is_missing(i)) continue;
    const double cpi = cpi_2015_base.number(i);
    if (!(cpi > 0.0))
      throw Error(ErrorCode::kNonPositiveCpi, fmt::format("row {}: CPI {} is not positive", i + 1, cpi));
    if (nominal.is_missing(i)) continue;
    out[i] = nominal.number(i) / (cpi / 100.0);
  }
  return Column::numeric(std::move(name), out);
}

}  // namespace segkit
