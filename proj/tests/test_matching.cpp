#include <doctest.h>

#include <cmath>
#include <random>

#include "segkit/error.hpp"
#include "segkit/matching.hpp"
#include "segkit/normal.hpp"

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

Eigen::VectorXd vec(std::initializer_list<double> v) {
  Eigen::VectorXd out(static_cast<Eigen::Index>(v.size()));
  Eigen::Index i = 0;
  for (double x : v) out(i++) = x;
  return out;
}

DesignMatrix one_covariate(const Eigen::VectorXd& x) {
  DesignMatrix d;
  d.X = x;
  d.column_names = {"x"};
  d.roles = {ColumnRole::kContinuous};
  return d;
}

}  // namespace

TEST_CASE("intercept-only propensity equals the treated fraction") {
  std::vector<std::optional<bool>> d;
  for (int i = 0; i < 50; ++i) d.push_back(i % 5 == 0);
  Frame f({Column::boolean("treated", d)});
  auto ps = estimate_pscore(f, "treated", parse_formula("~ 1"));
  for (Eigen::Index i = 0; i < ps.scores.size(); ++i) CHECK(std::abs(ps.scores(i) - 0.2) < 1e-10);
}

TEST_CASE("separated treatment propagates the probit error") {
  Frame f({Column::boolean("treated", {false, false, false, true, true, true}),
           Column::numeric("x", std::vector<double>{-3, -2, -1, 1, 2, 3})});
  CHECK(code_of([&] { estimate_pscore(f, "treated", parse_formula("~ x")); }) == ErrorCode::kPerfectSeparation);
}

TEST_CASE("treatment independent of X gives flat scores") {
  std::mt19937_64 rng(12);
  std::normal_distribution<double> z;
  std::bernoulli_distribution coin(0.3);
  std::vector<double> x1, x2;
  std::vector<std::optional<bool>> d;
  for (int i = 0; i < 8000; ++i) {
    x1.push_back(z(rng));
    x2.push_back(z(rng));
    d.push_back(coin(rng));
  }
  Frame f({Column::boolean("treated", d), Column::numeric("x1", x1), Column::numeric("x2", x2)});
  auto ps = estimate_pscore(f, "treated", parse_formula("~ x1 + x2"));
  auto ame = probit_ame(*ps.fit, ps.design);
  for (int j = 1; j < 3; ++j) CHECK(std::abs(ame.ame(j)) < 4 * ame.se(j));
  const double frac = ps.treatment.mean();
  CHECK((ps.scores.array() - frac).abs().maxCoeff() < 0.05);
}

TEST_CASE("exact duplicates recover the planted difference exactly") {
  // four treated units, each with five controls at the same score
  std::vector<double> scores, treat, y;
  const double tscore[4] = {0.125, 0.25, 0.375, 0.5};
  for (int i = 0; i < 4; ++i) {
    scores.push_back(tscore[i]);
    treat.push_back(1);
    y.push_back(10 + 3 * i);
    for (int c = 0; c < 5; ++c) {
      scores.push_back(tscore[i]);
      treat.push_back(0);
      y.push_back(8 + 3 * i);
    }
  }
  auto ps = pscore_from_scores(Eigen::Map<Eigen::VectorXd>(scores.data(), 24), Eigen::Map<Eigen::VectorXd>(treat.data(), 24));
  const Eigen::VectorXd out = Eigen::Map<Eigen::VectorXd>(y.data(), 24);
  auto m = match_att(ps, out);
  CHECK(m.att == 2.0);
  CHECK(m.n_treated_on_support + m.n_treated_off_support == m.n_treated);
  CHECK(std::abs(m.control_weight.sum() - 1.0) < 1e-15);

  Eigen::VectorXd x(24);
  for (int i = 0; i < 24; ++i) x(i) = scores[static_cast<std::size_t>(i)] * 7.0 + 1.0;
  auto b = balance(ps, one_covariate(x), m);
  CHECK(std::abs(b.rows[0].bias_after) < 1e-10);
  CHECK(b.all_pass());
}

TEST_CASE("ties at the k-th distance go to the lowest control index") {
  auto ps = pscore_from_scores(vec({0.5, 0.75, 0.25, 0.75}), vec({1, 0, 0, 0}));
  MatchOptions opt;
  opt.k = 1;
  auto m = match_att(ps, vec({0, 1, 2, 3}), opt);
  REQUIRE(m.matches.size() == 1);
  CHECK(m.matches[0] == std::vector<std::size_t>{1});
  opt.k = 2;
  m = match_att(ps, vec({0, 1, 2, 3}), opt);
  CHECK(m.matches[0] == std::vector<std::size_t>{1, 2});
}

TEST_CASE("common support, caliper and error cases") {
  auto ps = pscore_from_scores(vec({0.9, 0.3, 0.2, 0.4, 0.5}), vec({1, 1, 0, 0, 0}));
  auto m = match_att(ps, vec({1, 1, 0, 0, 0}));
  CHECK(m.n_treated_off_support == 1);
  CHECK(m.n_treated_on_support == 1);
  CHECK(m.n_untreated_on_support == 0);  // no control has score exactly 0.3

  MatchOptions no_support;
  no_support.common_support = false;
  CHECK(match_att(ps, vec({1, 1, 0, 0, 0}), no_support).n_treated_on_support == 2);

  MatchOptions caliper;
  caliper.common_support = false;
  caliper.caliper = 0.2;
  caliper.k = 1;
  CHECK(match_att(ps, vec({1, 1, 0, 0, 0}), caliper).n_treated_on_support == 1);

  CHECK(code_of([] { match_att(pscore_from_scores(vec({0.5, 0.6}), vec({1, 1})), vec({1, 2})); }) ==
        ErrorCode::kNoControls);
  CHECK(code_of([] { match_att(pscore_from_scores(vec({0.9, 0.1}), vec({1, 0})), vec({1, 2})); }) ==
        ErrorCode::kEmptySupport);
}

TEST_CASE("adding controls never increases off-support treated") {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int rep = 0; rep < 50; ++rep) {
    std::vector<double> s, d;
    for (int i = 0; i < 40; ++i) {
      s.push_back(u(rng));
      d.push_back(i < 20 ? 1.0 : 0.0);
    }
    // a narrower control set first
    std::vector<double> s_small = s;
    for (int i = 20; i < 40; ++i) s_small[static_cast<std::size_t>(i)] = 0.3 + 0.4 * s[static_cast<std::size_t>(i)];
    const Eigen::VectorXd y = Eigen::VectorXd::Zero(40);
    auto a = pscore_from_scores(Eigen::Map<Eigen::VectorXd>(s_small.data(), 40), Eigen::Map<Eigen::VectorXd>(d.data(), 40));
    std::vector<double> s_big = s_small, d_big = d;
    s_big.push_back(u(rng));
    d_big.push_back(0.0);
    auto b = pscore_from_scores(Eigen::Map<Eigen::VectorXd>(s_big.data(), 41), Eigen::Map<Eigen::VectorXd>(d_big.data(), 41));
    std::size_t off_a = 0, off_b = 0;
    try {
      off_a = match_att(a, y).n_treated_off_support;
    } catch (const Error&) {
      off_a = 20;
    }
    const Eigen::VectorXd y41 = Eigen::VectorXd::Zero(41);
    try {
      off_b = match_att(b, y41).n_treated_off_support;
    } catch (const Error&) {
      off_b = 20;
    }
    CHECK(off_b <= off_a);
  }
}

TEST_CASE("null outcome gives an insignificant ATT") {
  std::mt19937_64 rng(77);
  std::normal_distribution<double> z;
  const int n = 20000;
  Eigen::VectorXd p(n), d(n), y(n);
  for (int i = 0; i < n; ++i) {
    const double x = z(rng);
    p(i) = normal::cdf(-0.5 + 0.6 * x);
    d(i) = std::uniform_real_distribution<double>(0, 1)(rng) < p(i) ? 1.0 : 0.0;
    y(i) = z(rng);
  }
  auto ps = pscore_from_scores(p, d);
  auto m = match_att(ps, y);
  CHECK(std::abs(m.att) < 4 * m.se_naive);
  auto ipw = ipw_ate(ps, y);
  CHECK(std::abs(ipw.ate) < 4 * ipw.se);
}

TEST_CASE("ipw special cases") {
  // p = 0.5 and equal groups: the estimator is the plain mean difference
  auto ps = pscore_from_scores(Eigen::VectorXd::Constant(6, 0.5), vec({1, 1, 1, 0, 0, 0}));
  auto r = ipw_ate(ps, vec({3, 5, 7, 1, 2, 3}));
  CHECK(std::abs(r.ate - (5.0 - 2.0)) < 1e-15);
  CHECK(ipw_ate(ps, Eigen::VectorXd::Zero(6)).ate == 0.0);
  CHECK(r.warnings.empty());

  auto extreme = pscore_from_scores(vec({0.001, 0.5, 0.5}), vec({1, 0, 1}));
  auto e = ipw_ate(extreme, vec({1, 1, 1}));
  REQUIRE(e.warnings.size() == 1);
  CHECK(e.warnings[0].find("ExtremeWeights") != std::string::npos);
}

TEST_CASE("standardized bias before matching on a six-row example") {
  auto ps = pscore_from_scores(vec({0.2, 0.4, 0.6, 0.2, 0.4, 0.6}), vec({1, 1, 1, 0, 0, 0}));
  auto m = match_att(ps, Eigen::VectorXd::Zero(6));
  auto b = balance(ps, one_covariate(vec({1, 2, 3, 2, 4, 6})), m);
  CHECK(std::abs(b.rows[0].bias_before - -126.49110640673517) < 1e-12);

  auto flat = balance(ps, one_covariate(Eigen::VectorXd::Constant(6, 4.0)), m);
  CHECK(flat.rows[0].bias_before == 0.0);
  CHECK(flat.rows[0].bias_after == 0.0);
  CHECK(flat.rows[0].pass);
}
