#include <doctest.h>

#include <cmath>
#include <limits>
#include <random>

#include "segkit/counterfactual.hpp"
#include "segkit/error.hpp"

using namespace segkit;

namespace {

ErrorCode code_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected segkit::Error");
  return ErrorCode::kInvalidArgument;
}

DesignMatrix design_of(const Eigen::MatrixXd& X, std::vector<std::string> names) {
  DesignMatrix d;
  d.X = X;
  d.column_names = std::move(names);
  d.roles.assign(d.column_names.size(), ColumnRole::kContinuous);
  d.roles[0] = ColumnRole::kIntercept;
  d.has_intercept = true;
  return d;
}

SubgroupModel fitted(SubgroupId id, std::mt19937_64& rng, int n, double shift) {
  std::normal_distribution<double> z;
  Eigen::MatrixXd X(n, 3);
  Eigen::VectorXd y(n);
  for (int i = 0; i < n; ++i) {
    X(i, 0) = 1.0;
    X(i, 1) = 12 + 2 * z(rng);
    X(i, 2) = 20 + 10 * z(rng);
    y(i) = 1.0 + shift + 0.08 * X(i, 1) + 0.01 * X(i, 2) + 0.4 * z(rng);
  }
  SubgroupModel m{id, y, design_of(X, {"(Intercept)", "educ", "exper"}), {}};
  m.fit = ols(m.y, m.X);
  return m;
}

// O(n^2) oracle: evaluate both ECDFs by counting at every sample point.
double brute_force_d(const std::vector<double>& a, const std::vector<double>& b) {
  double d = 0.0;
  auto at = [&](double x) {
    std::size_t ca = 0, cb = 0;
    for (double v : a) ca += v <= x;
    for (double v : b) cb += v <= x;
    d = std::max(d, std::abs(static_cast<double>(ca) / static_cast<double>(a.size()) -
                             static_cast<double>(cb) / static_cast<double>(b.size())));
  };
  for (double x : a) at(x);
  for (double x : b) at(x);
  return d;
}

}  // namespace

TEST_CASE("counterfactual wages") {
  std::mt19937_64 rng(1);
  std::vector<SubgroupModel> groups;
  groups.push_back(fitted({Gender::kMale, Dominance::kMale}, rng, 200, 0.2));
  groups.push_back(fitted({Gender::kMale, Dominance::kFemale}, rng, 150, 0.1));
  groups.push_back(fitted({Gender::kFemale, Dominance::kMale}, rng, 120, 0.0));
  groups.push_back(fitted({Gender::kFemale, Dominance::kFemale}, rng, 220, -0.1));
  auto out = decompose_wages(groups);
  REQUIRE(out.size() == 4);
  // the reference's counterfactual is its own fit, bit for bit
  CHECK(out[0].cf_predicted == out[0].predicted);
  CHECK(out[0].cf_residual == out[0].residual);
  for (const auto& d : out) {
    const double scale = d.y.cwiseAbs().maxCoeff();
    CHECK(((d.cf_predicted + d.cf_residual) - d.y).cwiseAbs().maxCoeff() <= 4 * std::numeric_limits<double>::epsilon() * scale);
    CHECK(((d.predicted + d.residual) - d.y).cwiseAbs().maxCoeff() <= 4 * std::numeric_limits<double>::epsilon() * scale);
  }
  CHECK(to_string(out[3].id) == "fml,fml-dom");

  auto bad = groups;
  bad[2].X.column_names[2] = "tenure";
  CHECK(code_of([&] { decompose_wages(bad); }) == ErrorCode::kColumnMismatch);
}

TEST_CASE("three-row subgroup with hand coefficients") {
  Eigen::MatrixXd X(3, 2);
  X << 1, 10, 1, 12, 1, 16;
  SubgroupModel ref{{Gender::kMale, Dominance::kMale}, Eigen::Vector3d(2.0, 2.2, 2.6), design_of(X, {"(Intercept)", "educ"}), {}};
  ref.fit.beta = Eigen::Vector2d(1.0, 0.1);
  SubgroupModel other = ref;
  other.id = {Gender::kFemale, Dominance::kMale};
  other.fit.beta = Eigen::Vector2d(0.5, 0.12);
  auto out = decompose_wages(std::vector<SubgroupModel>{ref, other});
  const Eigen::Vector3d oracle(1.0 + 0.1 * 10, 1.0 + 0.1 * 12, 1.0 + 0.1 * 16);
  CHECK((out[1].cf_predicted - oracle).cwiseAbs().maxCoeff() < 1e-15);
}

TEST_CASE("ecdf") {
  const std::vector<double> v{3, 1, 2};
  auto c = ecdf(v);
  CHECK(c.support == std::vector<double>{1, 2, 3});
  CHECK(c.prob == std::vector<double>{1.0 / 3.0, 2.0 / 3.0, 1.0});
  auto t = ecdf(std::vector<double>{5, 5, 5});
  CHECK(t.support == std::vector<double>{5});
  CHECK(t.prob == std::vector<double>{1.0});
  CHECK(t(4.9) == 0.0);
  CHECK(code_of([] { ecdf(std::vector<double>{}); }) == ErrorCode::kEmptyInput);

  std::mt19937_64 rng(2);
  std::normal_distribution<double> z;
  std::vector<double> r;
  for (int i = 0; i < 100; ++i) r.push_back(z(rng));
  auto cr = ecdf(r);
  for (double x : r) {
    std::size_t rank = 0;
    for (double y : r) rank += y <= x;
    CHECK(cr(x) == static_cast<double>(rank) / 100.0);
  }
  for (std::size_t i = 1; i < cr.prob.size(); ++i) CHECK(cr.prob[i] > cr.prob[i - 1]);
}

TEST_CASE("ks statistic matches the brute-force oracle") {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> z;
  std::uniform_int_distribution<int> size(1, 100), coarse(0, 9);
  for (int rep = 0; rep < 200; ++rep) {
    std::vector<double> a, b;
    const int n1 = size(rng), n2 = size(rng);
    // every other pair uses coarse values so ties are common
    for (int i = 0; i < n1; ++i) a.push_back(rep % 2 ? z(rng) : coarse(rng));
    for (int i = 0; i < n2; ++i) b.push_back(rep % 2 ? z(rng) + 0.3 : coarse(rng));
    auto r = ks_test(a, b);
    CHECK(std::abs(r.statistic - brute_force_d(a, b)) <= 1e-15);
    CHECK(ks_test(b, a).statistic == r.statistic);
    // invariance under a strictly increasing transform
    std::vector<double> ea, eb;
    for (double x : a) ea.push_back(std::exp(x));
    for (double x : b) eb.push_back(std::exp(x));
    CHECK(ks_test(ea, eb).statistic == r.statistic);
  }
  const std::vector<double> a{0, 1}, b{2, 3};
  CHECK(ks_test(a, a).statistic == 0.0);
  CHECK(ks_test(a, a).p_value == 1.0);
  CHECK(ks_test(a, b).statistic == 1.0);
}

TEST_CASE("kolmogorov tail against reference values") {
  CHECK(std::abs(kolmogorov_tail(0.3) - 0.9999906941986655) < 1e-12);
  CHECK(std::abs(kolmogorov_tail(0.5) - 0.9639452436648751) < 1e-12);
  CHECK(std::abs(kolmogorov_tail(0.8) - 0.5441424115741981) < 1e-12);
  CHECK(std::abs(kolmogorov_tail(1.0) - 0.26999967167735456) < 1e-12);
  CHECK(std::abs(kolmogorov_tail(1.36) - 0.049485876755377876) < 1e-12);
  CHECK(std::abs(kolmogorov_tail(2.0) - 0.0006709252557796953) < 1e-12);
}

TEST_CASE("cdf order on location-shifted samples") {
  std::mt19937_64 rng(4);
  std::normal_distribution<double> z;
  std::vector<double> base, shifted, wide;
  for (int i = 0; i < 500; ++i) {
    const double e = z(rng);
    base.push_back(e);
    shifted.push_back(e + 0.5);
    wide.push_back(3.0 * e);
  }
  CHECK(cdf_order(ecdf(base), ecdf(shifted)) == CdfOrder::kDominates);
  CHECK(cdf_order(ecdf(shifted), ecdf(base)) == CdfOrder::kDominated);
  CHECK(cdf_order(ecdf(base), ecdf(wide)) == CdfOrder::kCrosses);
}
