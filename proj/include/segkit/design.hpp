#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "segkit/frame.hpp"

namespace segkit {

/// A model term: the element-wise product of its factors, raised to `power`.
/// "age^2" is {factors: [age], power: 2}; "female:incouple" is two factors.
struct Term {
  std::vector<std::string> factors;
  int power = 1;

  std::string label() const;
};

struct Formula {
  std::string response;  // empty for covariate-only designs
  std::vector<Term> terms;
  bool intercept = true;
  // categorical column -> reference level label; default is the first level
  std::map<std::string, std::string> reference_levels;

  // Columns the formula touches, response first when present.
  std::vector<std::string> referenced_columns() const;
};

/// Parses "y ~ a + a^2 + b:c + d - 1". A "0" or "-1" term drops the intercept.
Formula parse_formula(std::string_view text);
std::string to_string(const Formula& formula);

enum class ColumnRole { kIntercept, kContinuous, kDummy, kPower, kInteraction };

struct DesignMatrix {
  Eigen::MatrixXd X;
  std::vector<std::string> column_names;
  std::vector<ColumnRole> roles;
  bool has_intercept = false;
  std::vector<std::size_t> row_index;  // design row -> frame row
  std::size_t n_dropped = 0;
  bool rank_warning = false;
  std::vector<std::string> zero_columns;  // e.g. a level absent from this subset

  Eigen::Index rows() const { return X.rows(); }
  Eigen::Index cols() const { return X.cols(); }
  // Throws ColumnMismatch.
  Eigen::Index index_of(std::string_view name) const;
};

struct Design {
  Eigen::VectorXd y;  // empty when the formula has no response
  DesignMatrix X;
};

/// Expands `formula` against `frame`, dropping rows with a missing cell in any
/// referenced column. Categorical columns contribute one dummy per non-reference
/// level of the frame-wide level set, so designs built on different row subsets
/// of one frame share their column layout.
Design build_design(const Frame& frame, const Formula& formula);
Design build_design(const Frame& frame, const Formula& formula, std::span<const std::size_t> rows);

// Numerical rank by column-pivoted QR at a relative threshold.
Eigen::Index numerical_rank(const Eigen::MatrixXd& X, double threshold = 1e-10);

}  // namespace segkit
