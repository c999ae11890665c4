#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "segkit/design.hpp"
#include "segkit/estimators.hpp"
#include "segkit/segregation.hpp"

namespace segkit {

struct SubgroupId {
  Gender gender = Gender::kMale;
  Dominance dominance = Dominance::kMale;
  bool operator==(const SubgroupId&) const = default;
};

// "ml,ml-dom", "fml,fml-dom", ...
std::string to_string(const SubgroupId& id);

struct SubgroupModel {
  SubgroupId id;
  Eigen::VectorXd y;
  DesignMatrix X;
  FitResult fit;  // the subgroup's own Mincerian fit
};

struct WageDecomp {
  SubgroupId id;
  Eigen::VectorXd y;
  Eigen::VectorXd predicted;     // X b_own
  Eigen::VectorXd residual;      // y - predicted
  Eigen::VectorXd cf_predicted;  // X b_ref
  Eigen::VectorXd cf_residual;   // y - cf_predicted
};

/// Own and counterfactual predicted/residual wages for every subgroup, the
/// counterfactual using the reference subgroup's coefficients. All designs
/// must carry the reference's columns (ColumnMismatch otherwise).
std::vector<WageDecomp> decompose_wages(std::span<const SubgroupModel> subgroups,
                                        SubgroupId reference = {Gender::kMale, Dominance::kMale});

std::string format_wage_decomp_csv(std::span<const WageDecomp> decomps);  // subgroup,kind,value

// Right-continuous step function over the distinct sorted values.
struct CdfSeries {
  std::vector<double> support;
  std::vector<double> prob;
  double operator()(double x) const;
};

CdfSeries ecdf(std::span<const double> values);

struct KsResult {
  double statistic = 0.0;
  double p_value = 1.0;
  std::size_t n1 = 0;
  std::size_t n2 = 0;
};

/// Two-sample Kolmogorov-Smirnov test by a sweep over the merged samples. The
/// p-value is asymptotic: Kolmogorov tail at sqrt(n1 n2 / (n1 + n2)) D.
KsResult ks_test(std::span<const double> a, std::span<const double> b);

// P(K > lambda) for the Kolmogorov distribution.
double kolmogorov_tail(double lambda);

// dominates: F_a >= F_b at every merged jump point (a lies to the left);
// dominated: the reverse; crosses: neither. Tolerance 1e-12.
enum class CdfOrder { kDominates, kDominated, kCrosses };
std::string_view to_string(CdfOrder order);
CdfOrder cdf_order(const CdfSeries& a, const CdfSeries& b, double tolerance = 1e-12);

}  // namespace segkit
