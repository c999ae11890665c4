#include <doctest.h>

#include <cmath>
#include <random>

#include "segkit/error.hpp"
#include "segkit/estimators.hpp"
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

DesignMatrix make_design(const Eigen::MatrixXd& X, bool intercept_first = true) {
  DesignMatrix d;
  d.X = X;
  d.has_intercept = intercept_first;
  for (Eigen::Index j = 0; j < X.cols(); ++j) {
    d.column_names.push_back(j == 0 && intercept_first ? "(Intercept)" : "x" + std::to_string(j));
    d.roles.push_back(j == 0 && intercept_first ? ColumnRole::kIntercept : ColumnRole::kContinuous);
  }
  return d;
}

Eigen::MatrixXd random_design(std::mt19937_64& rng, Eigen::Index n, Eigen::Index k) {
  std::normal_distribution<double> z;
  Eigen::MatrixXd X(n, k);
  for (Eigen::Index i = 0; i < n; ++i) {
    X(i, 0) = 1.0;
    for (Eigen::Index j = 1; j < k; ++j) X(i, j) = z(rng);
  }
  return X;
}

// Oracle: Gauss-Jordan inverse of a small SPD matrix, no pivoting tricks.
Eigen::MatrixXd gauss_jordan_inverse(Eigen::MatrixXd a) {
  const Eigen::Index k = a.rows();
  Eigen::MatrixXd inv = Eigen::MatrixXd::Identity(k, k);
  for (Eigen::Index c = 0; c < k; ++c) {
    Eigen::Index piv = c;
    for (Eigen::Index r = c + 1; r < k; ++r)
      if (std::abs(a(r, c)) > std::abs(a(piv, c))) piv = r;
    a.row(c).swap(a.row(piv));
    inv.row(c).swap(inv.row(piv));
    const double d = a(c, c);
    a.row(c) /= d;
    inv.row(c) /= d;
    for (Eigen::Index r = 0; r < k; ++r) {
      if (r == c) continue;
      const double f = a(r, c);
      a.row(r) -= f * a.row(c);
      inv.row(r) -= f * inv.row(c);
    }
  }
  return inv;
}

}  // namespace

// ---------------------------------------------------------------- OLS

TEST_CASE("ols perfect fit") {
  Eigen::MatrixXd X(4, 2);
  X << 1, 1, 1, 2, 1, 3, 1, 4;
  Eigen::VectorXd y = 2.0 * X.col(1);
  auto fit = ols(y, make_design(X));
  CHECK(std::abs(fit.beta(0)) < 1e-12);
  CHECK(fit.beta(1) == doctest::Approx(2.0).epsilon(1e-14));
  CHECK(fit.residuals.cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("ols matches the normal-equations oracle on a 5-row system") {
  Eigen::MatrixXd X(5, 3);
  X << 1, 0.5, -1.2, 1, 1.5, 0.3, 1, -0.7, 2.2, 1, 2.0, 0.1, 1, 0.1, -0.4;
  Eigen::VectorXd y(5);
  y << 1.0, 2.5, -0.3, 3.1, 0.2;
  const Eigen::VectorXd oracle = gauss_jordan_inverse(X.transpose() * X) * (X.transpose() * y);
  auto fit = ols(y, make_design(X));
  for (int j = 0; j < 3; ++j) CHECK(std::abs(fit.beta(j) - oracle(j)) <= 1e-10 * std::max(1.0, std::abs(oracle(j))));
}

TEST_CASE("ols rejects rank deficiency and short designs") {
  Eigen::MatrixXd X(4, 3);
  X << 1, 1, 1, 1, 2, 2, 1, 3, 3, 1, 5, 5;
  Eigen::VectorXd y(4);
  y << 1, 2, 3, 4;
  auto d = make_design(X);
  try {
    ols(y, d);
    FAIL("expected RankDeficient");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kRankDeficient);
    CHECK(std::string(e.what()).find("x") != std::string::npos);
  }
  CHECK(code_of([&] { ols(y.head(2), make_design(X.topRows(2))); }) == ErrorCode::kTooFewRows);
}

TEST_CASE("ols invariants on random instances") {
  std::mt19937_64 rng(11);
  std::normal_distribution<double> z;
  for (int rep = 0; rep < 30; ++rep) {
    const Eigen::Index n = 20 + rep, k = 1 + rep % 5;
    auto X = random_design(rng, n, k);
    Eigen::VectorXd y(n);
    for (Eigen::Index i = 0; i < n; ++i) y(i) = 3.0 * z(rng);
    auto fit = ols(y, make_design(X), VcovKind::kClassical);
    const double scale = (X.cwiseAbs().transpose() * fit.residuals.cwiseAbs()).maxCoeff() + 1.0;
    CHECK((X.transpose() * fit.residuals).cwiseAbs().maxCoeff() < 1e-8 * scale);
    CHECK(((fit.fitted + fit.residuals) - y).cwiseAbs().maxCoeff() <= 1e-12 * y.cwiseAbs().maxCoeff());
    CHECK((fit.vcov - fit.vcov.transpose()).cwiseAbs().maxCoeff() < 1e-8);
    for (Eigen::Index j = 0; j < k; ++j) CHECK(fit.se(j) == std::sqrt(fit.vcov(j, j)));
  }
}

TEST_CASE("hc1 equals classical covariance when every |residual| is equal") {
  Eigen::MatrixXd X(4, 2);
  X << 1, -1, 1, -1, 1, 1, 1, 1;
  Eigen::VectorXd e(4);
  e << 0.3, -0.3, -0.3, 0.3;  // orthogonal to both columns
  Eigen::VectorXd y = X * Eigen::Vector2d(1.0, 2.0) + e;
  auto hc1 = ols(y, make_design(X), VcovKind::kRobustHc1);
  auto classical = ols(y, make_design(X), VcovKind::kClassical);
  CHECK((hc1.vcov - classical.vcov).cwiseAbs().maxCoeff() < 1e-14);
}

TEST_CASE("hc1 matches the explicit sandwich") {
  std::mt19937_64 rng(5);
  std::normal_distribution<double> z;
  auto X = random_design(rng, 40, 4);
  Eigen::VectorXd y(40);
  for (int i = 0; i < 40; ++i) y(i) = X(i, 1) + z(rng) * (1.0 + std::abs(X(i, 2)));
  auto fit = ols(y, make_design(X));
  const Eigen::MatrixXd bread = gauss_jordan_inverse(X.transpose() * X);
  Eigen::MatrixXd meat = Eigen::MatrixXd::Zero(4, 4);
  for (int i = 0; i < 40; ++i) meat += fit.residuals(i) * fit.residuals(i) * X.row(i).transpose() * X.row(i);
  const Eigen::MatrixXd oracle = 40.0 / 36.0 * bread * meat * bread;
  CHECK((fit.vcov - oracle).cwiseAbs().maxCoeff() <= 1e-12 * oracle.cwiseAbs().maxCoeff());
}

// ---------------------------------------------------------------- probit

TEST_CASE("probit score and hessian agree with finite differences") {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> z;
  auto X = random_design(rng, 200, 4);
  Eigen::VectorXd y(200);
  for (int i = 0; i < 200; ++i) y(i) = (0.3 * X(i, 1) - 0.5 * X(i, 2) + z(rng)) > 0 ? 1.0 : 0.0;
  for (int point = 0; point < 5; ++point) {
    Eigen::VectorXd beta(4);
    for (int j = 0; j < 4; ++j) beta(j) = 0.5 * z(rng);
    const auto g = probit_score(y, X, beta);
    const auto H = probit_hessian(y, X, beta);
    const double h = 1e-5;
    for (int j = 0; j < 4; ++j) {
      Eigen::VectorXd up = beta, dn = beta;
      up(j) += h;
      dn(j) -= h;
      const double fd = (probit_loglik(y, X, up) - probit_loglik(y, X, dn)) / (2 * h);
      CHECK(std::abs(fd - g(j)) <= 1e-6 * std::max(1.0, std::abs(g(j))));
      const Eigen::VectorXd fd_h = (probit_score(y, X, up) - probit_score(y, X, dn)) / (2 * h);
      CHECK((fd_h - H.col(j)).cwiseAbs().maxCoeff() <= 1e-5 * std::max(1.0, H.col(j).cwiseAbs().maxCoeff()));
    }
  }
}

TEST_CASE("probit converges with a monotone log-likelihood") {
  std::mt19937_64 rng(9);
  std::normal_distribution<double> z;
  auto X = random_design(rng, 2000, 3);
  X.col(2) = X.col(2).array() * 40.0 + 40.0;  // poorly scaled on purpose
  Eigen::VectorXd y(2000);
  for (int i = 0; i < 2000; ++i) y(i) = (-1.0 + 0.8 * X(i, 1) + 0.02 * X(i, 2) + z(rng)) > 0 ? 1.0 : 0.0;
  auto fit = probit(y, make_design(X));
  for (std::size_t t = 1; t < fit.loglik_path.size(); ++t) CHECK(fit.loglik_path[t] >= fit.loglik_path[t - 1]);
  CHECK(fit.loglik.has_value());
  const auto g = probit_score(y, X, fit.beta);
  CHECK(g.cwiseAbs().maxCoeff() < 1e-5);
  CHECK(std::abs(fit.beta(1) - 0.8) < 4 * fit.se(1));
  // symmetric PSD covariance
  CHECK((fit.vcov - fit.vcov.transpose()).cwiseAbs().maxCoeff() < 1e-8);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(fit.vcov);
  CHECK(eig.eigenvalues().minCoeff() > 0.0);
}

TEST_CASE("probit stops once the remaining ascent is below rounding") {
  std::mt19937_64 rng(6);
  std::normal_distribution<double> z;
  for (int rep = 0; rep < 40; ++rep) {
    const Eigen::Index n = 300, k = 2 + rep % 4;
    Eigen::MatrixXd X(n, k);
    for (Eigen::Index i = 0; i < n; ++i) {
      X(i, 0) = 1.0;
      for (Eigen::Index j = 1; j < k; ++j) X(i, j) = z(rng) * (1.0 + j);
    }
    Eigen::VectorXd y(n);
    for (Eigen::Index i = 0; i < n; ++i) y(i) = (0.2 + 0.4 * X(i, 1) + z(rng)) > 0 ? 1.0 : 0.0;
    auto fit = probit(y, make_design(X));
    CHECK(fit.iterations < 20);
    CHECK(probit_score(y, X, fit.beta).cwiseAbs().maxCoeff() < 1e-6);
  }
}

TEST_CASE("probit slopes vanish when y is independent of X") {
  std::mt19937_64 rng(21);
  std::normal_distribution<double> z;
  std::bernoulli_distribution coin(0.3);
  auto X = random_design(rng, 10000, 4);
  Eigen::VectorXd y(10000);
  for (int i = 0; i < 10000; ++i) y(i) = coin(rng) ? 1.0 : 0.0;
  auto fit = probit(y, make_design(X));
  for (int j = 1; j < 4; ++j) CHECK(std::abs(fit.beta(j)) < 4 * fit.se(j));
}

TEST_CASE("probit error paths") {
  Eigen::MatrixXd X(3, 2);
  X << 1, 0, 1, 1, 1, 2;
  Eigen::VectorXd ones = Eigen::VectorXd::Ones(3);
  CHECK(code_of([&] { probit(ones, make_design(X)); }) == ErrorCode::kNoVariationInY);

  Eigen::MatrixXd X2(2, 2);
  X2 << 1, 0, 1, 1;
  Eigen::VectorXd y2(2);
  y2 << 0, 1;
  // Too few rows would trip first with k = 2, so use a no-intercept single column.
  Eigen::MatrixXd X1(2, 1);
  X1 << -1, 1;
  DesignMatrix d1;
  d1.X = X1;
  d1.column_names = {"x"};
  d1.roles = {ColumnRole::kContinuous};
  CHECK(code_of([&] { probit(y2, d1); }) == ErrorCode::kPerfectSeparation);

  // Larger separated sample with an intercept.
  Eigen::MatrixXd X3(6, 2);
  X3 << 1, -3, 1, -2, 1, -1, 1, 1, 1, 2, 1, 3;
  Eigen::VectorXd y3(6);
  y3 << 0, 0, 0, 1, 1, 1;
  CHECK(code_of([&] { probit(y3, make_design(X3)); }) == ErrorCode::kPerfectSeparation);
}

TEST_CASE("probit_ame special cases") {
  // one row: the mean is the single term phi(x'b) b
  Eigen::MatrixXd X(1, 2);
  X << 1.0, 0.7;
  FitResult fit;
  fit.beta = Eigen::Vector2d(0.2, -0.9);
  fit.vcov = Eigen::Matrix2d::Identity() * 0.01;
  auto m = probit_ame(fit, make_design(X));
  const double eta = 0.2 - 0.9 * 0.7;
  CHECK(m.ame(1) == normal::pdf(eta) * -0.9);

  fit.beta = Eigen::Vector2d(0.2, 0.0);
  m = probit_ame(fit, make_design(X));
  CHECK(m.ame(1) == 0.0);
}

TEST_CASE("probit_ame matches finite differences of the mean predicted probability") {
  std::mt19937_64 rng(17);
  std::normal_distribution<double> z;
  std::bernoulli_distribution coin(0.4);
  const int n = 300;
  Eigen::MatrixXd X(n, 4);
  Eigen::VectorXd y(n);
  for (int i = 0; i < n; ++i) {
    X(i, 0) = 1.0;
    X(i, 1) = z(rng);
    X(i, 2) = coin(rng) ? 1.0 : 0.0;
    X(i, 3) = 2.0 * z(rng);
    y(i) = (0.2 + 0.5 * X(i, 1) - 0.7 * X(i, 2) + 0.1 * X(i, 3) + z(rng)) > 0 ? 1.0 : 0.0;
  }
  auto d = make_design(X);
  d.roles[2] = ColumnRole::kDummy;
  auto fit = probit(y, d);
  auto m = probit_ame(fit, d);

  auto mean_prob = [&](const Eigen::MatrixXd& Xm, const Eigen::VectorXd& b) {
    return (Xm * b).unaryExpr([](double e) { return normal::cdf(e); }).mean();
  };
  const double h = 1e-5;
  for (int j : {1, 3}) {
    Eigen::MatrixXd up = X, dn = X;
    up.col(j).array() += h;
    dn.col(j).array() -= h;
    const double fd = (mean_prob(up, fit.beta) - mean_prob(dn, fit.beta)) / (2 * h);
    CHECK(std::abs(fd - m.ame(j)) < 1e-6);
  }
  // discrete change for the dummy
  Eigen::MatrixXd on = X, off = X;
  on.col(2).setOnes();
  off.col(2).setZero();
  CHECK(std::abs((mean_prob(on, fit.beta) - mean_prob(off, fit.beta)) - m.ame(2)) < 1e-12);

  // delta-method SEs against a numerically differentiated gradient
  auto ame_of = [&](const Eigen::VectorXd& b, int j) {
    FitResult f = fit;
    f.beta = b;
    return probit_ame(f, d).ame(j);
  };
  for (int j = 1; j < 4; ++j) {
    Eigen::VectorXd grad(4);
    for (int l = 0; l < 4; ++l) {
      Eigen::VectorXd up = fit.beta, dn = fit.beta;
      up(l) += h;
      dn(l) -= h;
      grad(l) = (ame_of(up, j) - ame_of(dn, j)) / (2 * h);
    }
    const double se = std::sqrt(grad.dot(fit.vcov * grad));
    CHECK(std::abs(se - m.se(j)) < 1e-6 * std::max(1.0, se));
  }
}

// ---------------------------------------------------------------- lasso

namespace {

// KKT for the standardised problem (1/2n)|yc - Zb|^2 + lambda |b|_1.
double kkt_violation(const Eigen::VectorXd& y, const DesignMatrix& d, const LassoPath& path, Eigen::Index g) {
  const double n = static_cast<double>(d.rows());
  const double lambda = path.lambda_grid[static_cast<std::size_t>(g)];
  const Eigen::VectorXd resid = y - d.X * path.coef.row(g).transpose();
  double worst = 0.0;
  for (Eigen::Index j = 0; j < d.cols(); ++j) {
    if (path.scale(j) == 0.0) continue;
    const Eigen::VectorXd zj = (d.X.col(j).array() - path.center(j)) / path.scale(j);
    const double corr = zj.dot(resid) / n;
    const double b = path.coef_std(g, j);
    const double v = b != 0.0 ? std::abs(corr - lambda * (b > 0 ? 1.0 : -1.0)) : std::max(0.0, std::abs(corr) - lambda);
    worst = std::max(worst, v);
  }
  return worst;
}

// Oracle: projected gradient on the split b = u - v, u, v >= 0.
Eigen::VectorXd projected_gradient_lasso(const Eigen::MatrixXd& Z, const Eigen::VectorXd& yc, double lambda) {
  const double n = static_cast<double>(Z.rows());
  const Eigen::MatrixXd G = Z.transpose() * Z / n;
  const Eigen::VectorXd c = Z.transpose() * yc / n;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(G);
  const double step = 1.0 / (2.0 * eig.eigenvalues().maxCoeff());
  const Eigen::Index p = Z.cols();
  Eigen::VectorXd u = Eigen::VectorXd::Zero(p), v = Eigen::VectorXd::Zero(p);
  for (int it = 0; it < 400000; ++it) {
    const Eigen::VectorXd grad_b = G * (u - v) - c;
    u = (u - step * (grad_b.array() + lambda).matrix()).cwiseMax(0.0);
    v = (v - step * (-grad_b.array() + lambda).matrix()).cwiseMax(0.0);
  }
  return u - v;
}

}  // namespace

TEST_CASE("lasso: kill at lambda_max, OLS at lambda = 0, KKT everywhere") {
  std::mt19937_64 rng(23);
  std::normal_distribution<double> z;
  for (int rep = 0; rep < 10; ++rep) {
    const Eigen::Index n = 6 + rep * 5, k = 4;  // 6x3 slopes on the first instance
    auto X = random_design(rng, n, k);
    Eigen::VectorXd y(n);
    for (Eigen::Index i = 0; i < n; ++i) y(i) = 1.0 + 2.0 * X(i, 1) - X(i, 3) + 0.5 * z(rng);
    auto d = make_design(X);
    LassoOptions opt;
    opt.append_zero = true;
    auto path = lasso_bic(y, d, opt);
    CHECK(path.coef.row(0).tail(k - 1).isZero(0.0));
    for (Eigen::Index g = 0; g < path.coef.rows(); ++g) CHECK(kkt_violation(y, d, path, g) < 1e-8);
    auto full = ols(y, d);
    const Eigen::VectorXd last = path.coef.row(path.coef.rows() - 1).transpose();
    CHECK((last - full.beta).cwiseAbs().maxCoeff() < 1e-8);
    const auto best = std::min_element(path.bic.begin(), path.bic.end()) - path.bic.begin();
    CHECK(path.selected_index == static_cast<std::size_t>(best));
    CHECK(path.post_ols.k == path.selected_columns.size() + 1);
    for (std::size_t g = 1; g < path.lambda_grid.size() - 1; ++g) CHECK(path.lambda_grid[g] < path.lambda_grid[g - 1]);
  }
}

TEST_CASE("lasso agrees with a projected-gradient oracle") {
  std::mt19937_64 rng(31);
  std::normal_distribution<double> z;
  const Eigen::Index n = 40, k = 5;
  auto X = random_design(rng, n, k);
  Eigen::VectorXd y(n);
  for (Eigen::Index i = 0; i < n; ++i) y(i) = 0.5 + X(i, 1) - 0.5 * X(i, 2) + 0.2 * X(i, 4) + z(rng);
  auto d = make_design(X);
  LassoOptions opt;
  opt.grid_size = 12;
  auto path = lasso_bic(y, d, opt);
  Eigen::MatrixXd Z(n, k - 1);
  for (Eigen::Index j = 1; j < k; ++j) Z.col(j - 1) = (X.col(j).array() - path.center(j)) / path.scale(j);
  const Eigen::VectorXd yc = y.array() - y.mean();
  for (Eigen::Index g : {2, 5, 9, 11}) {
    const auto oracle = projected_gradient_lasso(Z, yc, path.lambda_grid[static_cast<std::size_t>(g)]);
    for (Eigen::Index j = 1; j < k; ++j) CHECK(std::abs(oracle(j - 1) - path.coef_std(g, j)) < 1e-6);
  }
}

TEST_CASE("lasso excludes constant columns with a warning") {
  std::mt19937_64 rng(2);
  auto X = random_design(rng, 30, 3);
  X.col(2).setConstant(4.0);
  Eigen::VectorXd y = X.col(1) * 2.0;
  y(0) += 0.1;
  auto path = lasso_bic(y, make_design(X));
  REQUIRE(path.warnings.size() == 1);
  CHECK(path.warnings[0].find("DegenerateColumn") != std::string::npos);
  CHECK(path.coef.col(2).isZero(0.0));
}
