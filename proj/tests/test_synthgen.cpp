#include <doctest.h>

#include <cmath>
#include <map>

#include "segkit/error.hpp"
#include "segkit/estimators.hpp"
#include "segkit/kbo.hpp"
#include "segkit/rng.hpp"
#include "segkit/synthgen.hpp"

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

double mean_where(const Frame& f, const std::string& col, bool female) {
  const Column& c = f.column(col);
  const Column& g = f.column("female");
  double s = 0, n = 0;
  for (std::size_t i = 0; i < f.n_rows(); ++i) {
    if (c.is_missing(i) || (g.number(i) != 0.0) != female) continue;
    s += c.number(i);
    n += 1;
  }
  return s / n;
}

std::vector<std::size_t> rows_where(const Frame& f, bool female) {
  std::vector<std::size_t> rows;
  const Column& g = f.column("female");
  const Column& inlf = f.column("inlf");
  for (std::size_t i = 0; i < f.n_rows(); ++i)
    if ((g.number(i) != 0.0) == female && inlf.number(i) != 0.0) rows.push_back(i);
  return rows;
}

}  // namespace

TEST_CASE("counter rng against an independent reference") {
  CounterRng r(42, 7);
  CHECK(r.next() == 0x26dfada5d87fe2d5ULL);
  CHECK(r.next() == 0x104470f6956228cfULL);
  CHECK(r.next() == 0x5a40d651ecfa1fdaULL);
  CHECK(stream_id("") == 0xcbf29ce484222325ULL);
  CHECK(stream_id("synthgen/person") == 0x8aee0b7e64a8c62fULL);
  CounterRng u(1, stream_id("abc"));
  CHECK(u.uniform() == 0.8408155277393383);

  CounterRng a(5, 9);
  for (int i = 0; i < 1000; ++i) {
    const int v = a.uniform_int(16, 64);
    CHECK((v >= 16 && v <= 64));
  }
  const double w[3] = {0.0, 1.0, 0.0};
  for (int i = 0; i < 100; ++i) CHECK(a.categorical(w) == 1);

  CounterRng z(3, 3);
  double s = 0, ss = 0;
  const int n = 200000;
  for (int i = 0; i < n; ++i) {
    const double v = z.normal();
    s += v;
    ss += v * v;
  }
  CHECK(std::abs(s / n) < 4.0 / std::sqrt(n));
  CHECK(std::abs(ss / n - 1.0) < 4.0 * std::sqrt(2.0 / n));
}

TEST_CASE("generation is deterministic and honours the spec") {
  auto spec = calibrate_to_paper();
  spec.n_workers = 20000;
  const auto a = generate(spec);
  const auto b = generate(spec);
  CHECK(format_csv(a.frame) == format_csv(b.frame));
  spec.seed += 1;
  CHECK(format_csv(generate(spec).frame) != format_csv(a.frame));

  spec.tau = 0.0;
  CHECK(generate(spec).truth.att == 0.0);

  // the panel is the frame's worker counts
  const auto from_frame = panel_from_frame(a.frame, "year", "sector", "female");
  CHECK(from_frame.counts() == a.panel.counts());
  double total = 0;
  for (std::size_t t = 0; t < a.panel.n_times(); ++t)
    total += a.panel.total(t, Gender::kFemale) + a.panel.total(t, Gender::kMale);
  CHECK(total == 20000.0);
}

TEST_CASE("invalid specs are rejected") {
  auto spec = calibrate_to_paper();
  spec.gender[0].sigma = 0.0;
  CHECK(code_of([&] { generate(spec); }) == ErrorCode::kInvalidSpec);
  spec = calibrate_to_paper();
  spec.sectors[3].female_share[2] = 1.2;
  CHECK(code_of([&] { validate_spec(spec); }) == ErrorCode::kInvalidSpec);
  spec = calibrate_to_paper();
  spec.gender[1].wage_slopes.emplace_back("height", 0.1);
  CHECK(code_of([&] { validate_spec(spec); }) == ErrorCode::kInvalidSpec);
  spec = calibrate_to_paper();
  spec.sectors[0].female_share.pop_back();
  CHECK(code_of([&] { validate_spec(spec); }) == ErrorCode::kInvalidSpec);
  spec = calibrate_to_paper();
  spec.n_workers = 10;
  CHECK(code_of([&] { validate_spec(spec); }) == ErrorCode::kInvalidSpec);
}

TEST_CASE("calibrated data reproduce the target moments") {
  const auto spec = calibrate_to_paper();
  const auto data = generate(spec);
  const Frame& f = data.frame;

  CHECK(std::abs(mean_where(f, "ln_wage", true) - 2.41) < 0.01);
  CHECK(std::abs(mean_where(f, "ln_wage", false) - 2.59) < 0.01);
  CHECK(std::abs(mean_where(f, "parttime", true) - 0.43) < 0.01);
  CHECK(std::abs(mean_where(f, "parttime", false) - 0.12) < 0.01);
  CHECK(std::abs(mean_where(f, "hours", false) - 40.33) < 0.01);
  CHECK(std::abs(mean_where(f, "hours", true) - 30.89) < 0.01);
  CHECK(std::abs(mean_where(f, "inlf", true) - 0.70) < 0.01);
  CHECK(std::abs(mean_where(f, "inlf", false) - 0.79) < 0.01);
  CHECK(std::abs(mean_where(f, "yrseduc", true) - 13.21) < 0.05);

  const std::map<std::string, double> table1{
      {"A", 29.9}, {"B", 18.0}, {"C", 25.9}, {"D", 27.6}, {"E", 20.3}, {"F", 16.8}, {"G", 51.7},
      {"H", 24.5}, {"I", 57.5}, {"J", 30.4}, {"K", 50.9}, {"L", 57.8}, {"M", 48.0}, {"N", 44.6},
      {"P", 75.3}, {"Q", 80.4}, {"R", 50.3}, {"S", 62.4}, {"T", 74.8}};
  const auto& sectors = data.panel.sectors();
  for (std::size_t j = 0; j < sectors.size(); ++j) {
    double fem = 0, all = 0;
    for (std::size_t t = 0; t < data.panel.n_times(); ++t) {
      fem += data.panel.count(t, j, Gender::kFemale);
      all += data.panel.count(t, j, Gender::kFemale) + data.panel.count(t, j, Gender::kMale);
    }
    CHECK(std::abs(fem / all - table1.at(sectors[j]) / 100.0) < 0.01);
  }

  const auto dom = classify_dominance(data.panel, Pooling::kPooled);
  const std::string fd_sectors = "GILPQST";
  for (std::size_t j = 0; j < sectors.size(); ++j) {
    const bool fd = fd_sectors.find(sectors[j]) != std::string::npos;
    CHECK(dom.pooled[j] == (fd ? Dominance::kFemale : Dominance::kMale));
    CHECK(data.truth.dominance[j] == dom.pooled[j]);
  }

  // realised SSI against the closed form of the mix
  const auto s = ssi(data.panel, dom);
  for (std::size_t t = 0; t < data.panel.n_times(); ++t) {
    CHECK(std::abs(s.fd(t) - data.truth.ssi[t][0]) < 0.005);
    CHECK(std::abs(s.md(t) - data.truth.ssi[t][1]) < 0.005);
  }
}

TEST_CASE("OLS and KBO recover the planted truth") {
  auto spec = calibrate_to_paper();
  spec.n_workers = 50000;
  spec.heteroskedastic = true;
  const auto data = generate(spec);
  const auto formula = parse_formula(wage_formula(spec));
  const auto women = build_design(data.frame, formula, rows_where(data.frame, true));
  const auto men = build_design(data.frame, formula, rows_where(data.frame, false));
  REQUIRE(women.X.column_names == data.truth.names);

  for (auto [d, g] : {std::pair{&women, 0}, {&men, 1}}) {
    const auto fit = ols(d->y, d->X);
    for (Eigen::Index k = 0; k < fit.beta.size(); ++k) {
      INFO(data.truth.names[static_cast<std::size_t>(k)]);
      CHECK(std::abs(fit.beta(k) - data.truth.beta[g](k)) < 4.0 * fit.se(k));
    }
  }

  const auto r = kbo_threefold(men.y, men.X, women.y, women.X);
  CHECK(std::abs(r.endowment - data.truth.kbo.endowment) < 4.0 * r.se_endowment);
  CHECK(std::abs(r.coefficient - data.truth.kbo.coefficient) < 4.0 * r.se_coefficient);
  CHECK(std::abs(r.interaction - data.truth.kbo.interaction) < 4.0 * r.se_interaction);
  CHECK(data.truth.kbo.coefficient > 0.0);
  CHECK(std::abs(data.truth.kbo.endowment + data.truth.kbo.coefficient + data.truth.kbo.interaction -
                 data.truth.kbo.overall) < 1e-12);
}

TEST_CASE("simple simulators carry their closed forms") {
  KboSimSpec ks;
  ks.n_a = ks.n_b = 500;
  ks.mean_shift = 0.5;
  ks.intercept_shift = 0.2;
  const auto k = simulate_kbo(ks);
  CHECK(k.X_a.cols() == 5);
  CHECK(k.truth.endowment == doctest::Approx(0.5 * (0.5 - 0.3 + 0.2 + 0.1)));
  CHECK(k.truth.coefficient == 0.2);

  TreatmentSimSpec ts;
  ts.n = 1000;
  const auto t = simulate_treatment(ts);
  CHECK(t.frame.n_rows() == 1000);
  CHECK(t.pscore_formula == "d ~ x1 + x2 + x3");
  CHECK((t.true_score.minCoeff() > 0.0 && t.true_score.maxCoeff() < 1.0));
}
