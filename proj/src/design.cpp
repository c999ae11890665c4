#include "segkit/design.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "segkit/error.hpp"

namespace segkit {

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

std::vector<std::string_view> split(std::string_view s, char sep) {
  std::vector<std::string_view> parts;
  std::size_t start = 0;
  for (std::size_t i = 0; i <= s.size(); ++i) {
    if (i == s.size() || s[i] == sep) {
      parts.push_back(s.substr(start, i - start));
      start = i + 1;
    }
  }
  return parts;
}

struct Expanded {
  std::string name;
  std::vector<double> values;
  ColumnRole role;
};

}  // namespace

std::string Term::label() const {
  std::string out;
  for (std::size_t i = 0; i < factors.size(); ++i) {
    if (i) out += ':';
    out += factors[i];
  }
  if (power != 1) out += fmt::format("^{}", power);
  return out;
}

std::vector<std::string> Formula::referenced_columns() const {
  std::vector<std::string> cols;
  auto add = [&](const std::string& c) {
    if (std::find(cols.begin(), cols.end(), c) == cols.end()) cols.push_back(c);
  };
  if (!response.empty()) add(response);
  for (const auto& t : terms)
    for (const auto& f : t.factors) add(f);
  return cols;
}

Formula parse_formula(std::string_view text) {
  Formula f;
  std::string_view rhs = text;
  if (auto tilde = text.find('~'); tilde != std::string_view::npos) {
    f.response = std::string(trim(text.substr(0, tilde)));
    rhs = text.substr(tilde + 1);
  }
  // Normalise "a - 1" into "a + -1" so one split handles both operators.
  std::string normalised;
  for (char c : rhs) {
    if (c == '-') normalised += "+-";
    else normalised.push_back(c);
  }
  for (auto raw : split(normalised, '+')) {
    auto tok = trim(raw);
    if (tok.empty()) continue;
    std::string compact;
    for (char c : tok)
      if (!std::isspace(static_cast<unsigned char>(c))) compact.push_back(c);
    if (compact == "1") {
      f.intercept = true;
      continue;
    }
    if (compact == "0" || compact == "-1") {
      f.intercept = false;
      continue;
    }
    if (compact.front() == '-')
      throw Error(ErrorCode::kInvalidArgument, fmt::format("cannot remove term '{}'", compact));
    Term term;
    const auto factors = split(compact, ':');
    for (auto fac : factors) {
      if (fac.empty()) throw Error(ErrorCode::kInvalidArgument, fmt::format("bad term '{}'", compact));
      std::string name(fac);
      if (auto caret = name.find('^'); caret != std::string::npos) {
        int p = 0;
        try {
          p = std::stoi(name.substr(caret + 1));
        } catch (const std::exception&) {
          throw Error(ErrorCode::kInvalidArgument, fmt::format("bad power in '{}'", compact));
        }
        if (p < 1) throw Error(ErrorCode::kInvalidArgument, fmt::format("bad power in '{}'", compact));
        name.resize(caret);
        if (factors.size() > 1)
          throw Error(ErrorCode::kInvalidArgument,
                      fmt::format("powers inside interactions are not supported: '{}'", compact));
        term.power = p;
      }
      term.factors.push_back(std::move(name));
    }
    f.terms.push_back(std::move(term));
  }
  return f;
}

std::string to_string(const Formula& formula) {
  std::string out = formula.response.empty() ? "~ " : formula.response + " ~ ";
  std::vector<std::string> parts;
  for (const auto& t : formula.terms) parts.push_back(t.label());
  if (!formula.intercept) parts.push_back("-1");
  for (std::size_t i = 0; i < parts.size(); ++i) {
    if (i) out += " + ";
    out += parts[i];
  }
  return out;
}

Eigen::Index DesignMatrix::index_of(std::string_view name) const {
  for (std::size_t i = 0; i < column_names.size(); ++i)
    if (column_names[i] == name) return static_cast<Eigen::Index>(i);
  throw Error(ErrorCode::kColumnMismatch, fmt::format("design has no column '{}'", name));
}

Eigen::Index numerical_rank(const Eigen::MatrixXd& X, double threshold) {
  if (X.cols() == 0) return 0;
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(X);
  qr.setThreshold(threshold);
  return qr.rank();
}

Design build_design(const Frame& frame, const Formula& formula) {
  std::vector<std::size_t> rows(frame.n_rows());
  std::iota(rows.begin(), rows.end(), std::size_t{0});
  return build_design(frame, formula, rows);
}

Design build_design(const Frame& frame, const Formula& formula, std::span<const std::size_t> rows) {
  const auto referenced = formula.referenced_columns();
  std::vector<const Column*> cols;
  for (const auto& name : referenced) cols.push_back(&frame.column(name));

  std::vector<std::size_t> kept;
  kept.reserve(rows.size());
  for (auto r : rows) {
    if (r >= frame.n_rows()) throw Error(ErrorCode::kInvalidArgument, "row index out of range");
    bool complete = true;
    for (const auto* c : cols) {
      if (c->is_missing(r)) {
        complete = false;
        break;
      }
    }
    if (complete) kept.push_back(r);
  }
  if (kept.empty())
    throw Error(ErrorCode::kEmptyAfterDeletion, "no complete rows remain after listwise deletion");

  auto expand_factor = [&](const std::string& name) {
    const Column& col = frame.column(name);
    std::vector<Expanded> out;
    switch (col.kind()) {
      case ColumnKind::kNumeric:
      case ColumnKind::kBoolean: {
        Expanded e{name, {}, col.kind() == ColumnKind::kBoolean ? ColumnRole::kDummy : ColumnRole::kContinuous};
        e.values.reserve(kept.size());
        for (auto r : kept) e.values.push_back(col.number(r));
        out.push_back(std::move(e));
        break;
      }
      case ColumnKind::kCategorical: {
        std::int32_t ref = 0;
        if (auto it = formula.reference_levels.find(name); it != formula.reference_levels.end()) {
          auto code = col.level_code(it->second);
          if (!code)
            throw Error(ErrorCode::kInvalidArgument,
                        fmt::format("reference level '{}' not found in '{}'", it->second, name));
          ref = *code;
        }
        for (std::int32_t level = 0; level < static_cast<std::int32_t>(col.levels().size()); ++level) {
          if (level == ref) continue;
          Expanded e{fmt::format("{}[{}]", name, col.levels()[level]), {}, ColumnRole::kDummy};
          e.values.reserve(kept.size());
          for (auto r : kept) e.values.push_back(col.code(r) == level ? 1.0 : 0.0);
          out.push_back(std::move(e));
        }
        break;
      }
    }
    return out;
  };

  std::vector<Expanded> expanded;
  for (const auto& term : formula.terms) {
    if (term.factors.empty()) continue;
    if (term.power != 1) {
      const Column& col = frame.column(term.factors.front());
      if (col.kind() != ColumnKind::kNumeric)
        throw Error(ErrorCode::kInvalidArgument,
                    fmt::format("power term '{}' needs a numeric column", term.label()));
      Expanded e{term.label(), {}, ColumnRole::kPower};
      e.values.reserve(kept.size());
      for (auto r : kept) e.values.push_back(std::pow(col.number(r), term.power));
      expanded.push_back(std::move(e));
      continue;
    }
    std::vector<Expanded> acc = expand_factor(term.factors.front());
    for (std::size_t f = 1; f < term.factors.size(); ++f) {
      auto next = expand_factor(term.factors[f]);
      std::vector<Expanded> product;
      for (const auto& a : acc) {
        for (const auto& b : next) {
          Expanded e{a.name + ":" + b.name, std::vector<double>(kept.size()), ColumnRole::kInteraction};
          for (std::size_t i = 0; i < kept.size(); ++i) e.values[i] = a.values[i] * b.values[i];
          product.push_back(std::move(e));
        }
      }
      acc = std::move(product);
    }
    for (auto& e : acc) expanded.push_back(std::move(e));
  }

  const auto n = static_cast<Eigen::Index>(kept.size());
  const auto k = static_cast<Eigen::Index>(expanded.size() + (formula.intercept ? 1 : 0));
  Design design;
  DesignMatrix& dm = design.X;
  dm.X.resize(n, k);
  dm.has_intercept = formula.intercept;
  Eigen::Index c = 0;
  if (formula.intercept) {
    dm.X.col(c++).setOnes();
    dm.column_names.emplace_back("(Intercept)");
    dm.roles.push_back(ColumnRole::kIntercept);
  }
  for (auto& e : expanded) {
    if (std::find(dm.column_names.begin(), dm.column_names.end(), e.name) != dm.column_names.end())
      throw Error(ErrorCode::kInvalidArgument, fmt::format("duplicate design column '{}'", e.name));
    bool all_zero = true;
    for (Eigen::Index i = 0; i < n; ++i) {
      dm.X(i, c) = e.values[static_cast<std::size_t>(i)];
      if (e.values[static_cast<std::size_t>(i)] != 0.0) all_zero = false;
    }
    if (all_zero) dm.zero_columns.push_back(e.name);
    dm.column_names.push_back(std::move(e.name));
    dm.roles.push_back(e.role);
    ++c;
  }
  dm.row_index = std::move(kept);
  dm.n_dropped = rows.size() - dm.row_index.size();
  dm.rank_warning = k > 0 && numerical_rank(dm.X) < k;

  if (!formula.response.empty()) {
    const Column& ycol = frame.column(formula.response);
    if (ycol.kind() == ColumnKind::kCategorical)
      throw Error(ErrorCode::kInvalidArgument,
                  fmt::format("response '{}' must be numeric or boolean", formula.response));
    design.y.resize(n);
    for (Eigen::Index i = 0; i < n; ++i) design.y(i) = ycol.number(dm.row_index[static_cast<std::size_t>(i)]);
  }
  return design;
}

}  // namespace segkit
