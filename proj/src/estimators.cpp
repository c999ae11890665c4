#include "segkit/estimators.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <limits>

#include "segkit/error.hpp"
#include "segkit/normal.hpp"

namespace segkit {

namespace {

constexpr double kRankThreshold = 1e-10;

std::vector<std::string> default_names(Eigen::Index k) {
  std::vector<std::string> names;
  for (Eigen::Index j = 0; j < k; ++j) names.push_back(fmt::format("x{}", j));
  return names;
}

Eigen::MatrixXd symmetrize(const Eigen::MatrixXd& m) { return 0.5 * (m + m.transpose()); }

}  // namespace

// ---------------------------------------------------------------- OLS

FitResult ols(const Eigen::VectorXd& y, const DesignMatrix& X, VcovKind vcov) {
  return ols(y, X.X, X.column_names, vcov);
}

FitResult ols(const Eigen::VectorXd& y, const Eigen::MatrixXd& X,
              const std::vector<std::string>& names_in, VcovKind vcov) {
  const Eigen::Index n = X.rows();
  const Eigen::Index k = X.cols();
  if (y.size() != n) throw Error(ErrorCode::kInvalidArgument, "ols: y and X row counts differ");
  if (n <= k)
    throw Error(ErrorCode::kTooFewRows, fmt::format("ols: {} rows for {} columns", n, k));
  const auto names = names_in.empty() ? default_names(k) : names_in;

  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(X);
  qr.setThreshold(kRankThreshold);
  if (qr.rank() < k) {
    std::string dependent;
    const auto& perm = qr.colsPermutation().indices();
    for (Eigen::Index j = qr.rank(); j < k; ++j) {
      if (!dependent.empty()) dependent += ", ";
      dependent += names[static_cast<std::size_t>(perm(j))];
    }
    throw Error(ErrorCode::kRankDeficient,
                fmt::format("design has rank {} < {}; dependent columns: {}", qr.rank(), k, dependent));
  }

  FitResult fit;
  fit.n = static_cast<std::size_t>(n);
  fit.k = static_cast<std::size_t>(k);
  fit.column_names = names;
  fit.beta = qr.solve(y);
  fit.fitted = X * fit.beta;
  fit.residuals = y - fit.fitted;

  const Eigen::MatrixXd R = qr.matrixQR().topLeftCorner(k, k).triangularView<Eigen::Upper>();
  const Eigen::MatrixXd R_inv =
      R.triangularView<Eigen::Upper>().solve(Eigen::MatrixXd::Identity(k, k));
  const auto& P = qr.colsPermutation();
  const Eigen::MatrixXd bread = P * (R_inv * R_inv.transpose()) * P.transpose();

  if (vcov == VcovKind::kClassical) {
    const double s2 = fit.residuals.squaredNorm() / static_cast<double>(n - k);
    fit.vcov = s2 * bread;
  } else {
    const Eigen::MatrixXd Xe = X.array().colwise() * fit.residuals.array();
    const Eigen::MatrixXd meat = Xe.transpose() * Xe;
    const double dof = static_cast<double>(n) / static_cast<double>(n - k);
    fit.vcov = dof * (bread * meat * bread);
  }
  fit.vcov = symmetrize(fit.vcov);
  fit.se = fit.vcov.diagonal().cwiseMax(0.0).cwiseSqrt();
  return fit;
}

// ---------------------------------------------------------------- probit

double probit_loglik(const Eigen::VectorXd& y, const Eigen::MatrixXd& X, const Eigen::VectorXd& beta) {
  const Eigen::VectorXd eta = X * beta;
  double ll = 0.0;
  for (Eigen::Index i = 0; i < eta.size(); ++i) {
    const double q = 2.0 * y(i) - 1.0;
    ll += normal::log_cdf(q * eta(i));
  }
  return ll;
}

Eigen::VectorXd probit_score(const Eigen::VectorXd& y, const Eigen::MatrixXd& X,
                             const Eigen::VectorXd& beta) {
  const Eigen::VectorXd eta = X * beta;
  Eigen::VectorXd w(eta.size());
  for (Eigen::Index i = 0; i < eta.size(); ++i) {
    const double q = 2.0 * y(i) - 1.0;
    w(i) = q * normal::mills(q * eta(i));
  }
  return X.transpose() * w;
}

Eigen::MatrixXd probit_hessian(const Eigen::VectorXd& y, const Eigen::MatrixXd& X,
                               const Eigen::VectorXd& beta) {
  const Eigen::VectorXd eta = X * beta;
  Eigen::VectorXd w(eta.size());
  for (Eigen::Index i = 0; i < eta.size(); ++i) {
    const double q = 2.0 * y(i) - 1.0;
    const double lam = normal::mills(q * eta(i));
    w(i) = lam * (lam + q * eta(i));
  }
  const Eigen::MatrixXd Xw = X.array().colwise() * w.array().sqrt();
  return -(Xw.transpose() * Xw);
}

FitResult probit(const Eigen::VectorXd& y, const DesignMatrix& X, const ProbitOptions& options) {
  return probit(y, X.X, X.column_names, options);
}

FitResult probit(const Eigen::VectorXd& y, const Eigen::MatrixXd& X_in,
                 const std::vector<std::string>& names_in, const ProbitOptions& options) {
  const Eigen::Index n = X_in.rows();
  const Eigen::Index k = X_in.cols();
  if (y.size() != n) throw Error(ErrorCode::kInvalidArgument, "probit: y and X row counts differ");
  std::size_t ones = 0;
  for (Eigen::Index i = 0; i < n; ++i) {
    if (y(i) != 0.0 && y(i) != 1.0)
      throw Error(ErrorCode::kInvalidArgument, fmt::format("probit: y[{}] = {} is not 0/1", i, y(i)));
    ones += y(i) == 1.0 ? 1 : 0;
  }
  if (ones == 0 || ones == static_cast<std::size_t>(n))
    throw Error(ErrorCode::kNoVariationInY, "probit: outcome has a single class");
  if (n <= k) throw Error(ErrorCode::kTooFewRows, fmt::format("probit: {} rows for {} columns", n, k));
  if (numerical_rank(X_in) < k) throw Error(ErrorCode::kRankDeficient, "probit: design is rank deficient");
  const auto names = names_in.empty() ? default_names(k) : names_in;

  // Iterate on RMS-scaled columns so the score tolerance means the same thing
  // for age^2 as for a dummy.
  Eigen::VectorXd scale(k);
  for (Eigen::Index j = 0; j < k; ++j) {
    const double rms = std::sqrt(X_in.col(j).squaredNorm() / static_cast<double>(n));
    scale(j) = rms > 0.0 ? rms : 1.0;
  }
  const Eigen::MatrixXd X = X_in * scale.cwiseInverse().asDiagonal();
  Eigen::VectorXd q(n);
  for (Eigen::Index i = 0; i < n; ++i) q(i) = 2.0 * y(i) - 1.0;

  auto separated = [&](const Eigen::VectorXd& eta) {
    return ((q.array() * eta.array()) > 0.0).all();
  };

  Eigen::VectorXd beta = Eigen::VectorXd::Zero(k);
  double ll = probit_loglik(y, X, beta);
  double rel_change = std::numeric_limits<double>::infinity();
  double prev_max_eta = 0.0;
  bool converged = false;
  std::vector<double> trace{ll};
  int iter = 0;
  for (; iter < options.max_iterations; ++iter) {
    const Eigen::VectorXd g = probit_score(y, X, beta);
    const Eigen::MatrixXd H = probit_hessian(y, X, beta);
    Eigen::LDLT<Eigen::MatrixXd> ldlt(-H);
    if (ldlt.info() != Eigen::Success || !ldlt.isPositive())
      throw Error(ErrorCode::kRankDeficient, "probit: information matrix is not positive definite");
    const Eigen::VectorXd step = ldlt.solve(g);
    // On large samples the summed score bottoms out at a rounding floor above
    // any fixed tolerance; a negligible Newton step then ends the iteration.
    if ((g.cwiseAbs().maxCoeff() < options.score_tolerance || step.cwiseAbs().maxCoeff() < options.step_tolerance) &&
        rel_change < options.relative_loglik_tolerance) {
      converged = true;
      break;
    }
    // Predicted ascent below the resolution of the log-likelihood: a line
    // search can no longer tell the Newton step from noise, so take it whole.
    if (g.dot(step) <= 64.0 * std::numeric_limits<double>::epsilon() * std::max(1.0, std::abs(ll))) {
      beta += step;
      ll = probit_loglik(y, X, beta);
      ++iter;
      converged = true;
      break;
    }

    double t = 1.0;
    Eigen::VectorXd candidate = beta + step;
    double ll_candidate = probit_loglik(y, X, candidate);
    int halvings = 0;
    while (!(ll_candidate >= ll) && halvings < 60) {
      t *= 0.5;
      candidate = beta + t * step;
      ll_candidate = probit_loglik(y, X, candidate);
      ++halvings;
    }
    if (!(ll_candidate >= ll)) {
      // No ascent left along the Newton direction: we are at the optimum up to
      // rounding, provided the score agrees.
      if (g.cwiseAbs().maxCoeff() < options.score_tolerance) {
        converged = true;
        break;
      }
      throw Error(ErrorCode::kMaxIterations, "probit: line search failed to increase the log-likelihood");
    }
    // Once predictions saturate, plain Newton creeps (steps shrink like 1/|x'b|);
    // extend the step while it still pays so divergence shows up quickly.
    if (halvings == 0 && (X * candidate).cwiseAbs().maxCoeff() > 8.0) {
      for (int e = 0; e < 10; ++e) {
        const Eigen::VectorXd longer = beta + 2.0 * t * step;
        const double ll_longer = probit_loglik(y, X, longer);
        if (!(ll_longer > ll_candidate)) break;
        t *= 2.0;
        candidate = longer;
        ll_candidate = ll_longer;
      }
    }

    rel_change = std::abs(ll_candidate - ll) / std::max(std::abs(ll), std::numeric_limits<double>::min());
    beta = candidate;
    ll = ll_candidate;
    trace.push_back(ll);

    const Eigen::VectorXd eta = X * beta;
    if (separated(eta))
      throw Error(ErrorCode::kPerfectSeparation, "probit: a linear index classifies every observation");
    const double max_eta = eta.cwiseAbs().maxCoeff();
    if (max_eta > options.separation_bound && prev_max_eta > options.separation_bound &&
        max_eta > prev_max_eta)
      throw Error(ErrorCode::kPerfectSeparation,
                  fmt::format("probit: |x'b| = {:.1f} and still diverging", max_eta));
    prev_max_eta = max_eta;
  }
  if (!converged)
    throw Error(ErrorCode::kMaxIterations,
                fmt::format("probit: no convergence after {} iterations", options.max_iterations));

  const Eigen::MatrixXd info = -probit_hessian(y, X, beta);
  const Eigen::MatrixXd vcov_scaled = info.ldlt().solve(Eigen::MatrixXd::Identity(k, k));
  const Eigen::VectorXd inv_scale = scale.cwiseInverse();

  FitResult fit;
  fit.n = static_cast<std::size_t>(n);
  fit.k = static_cast<std::size_t>(k);
  fit.column_names = names;
  fit.beta = beta.cwiseProduct(inv_scale);
  fit.vcov = symmetrize(inv_scale.asDiagonal() * vcov_scaled * inv_scale.asDiagonal());
  fit.se = fit.vcov.diagonal().cwiseMax(0.0).cwiseSqrt();
  fit.fitted = X_in * fit.beta;
  fit.fitted = fit.fitted.unaryExpr([](double e) { return normal::cdf(e); });
  fit.residuals = y - fit.fitted;
  fit.loglik = probit_loglik(y, X_in, fit.beta);
  fit.iterations = iter;
  fit.loglik_path = std::move(trace);
  return fit;
}

ProbitMarginals probit_ame(const FitResult& fit, const DesignMatrix& X) {
  const Eigen::Index n = X.rows();
  const Eigen::Index k = X.cols();
  if (fit.beta.size() != k) throw Error(ErrorCode::kColumnMismatch, "probit_ame: fit and design differ");
  const Eigen::VectorXd eta = X.X * fit.beta;
  const double inv_n = 1.0 / static_cast<double>(n);

  ProbitMarginals out;
  out.column_names = X.column_names;
  out.ame.resize(k);
  out.se.resize(k);
  for (Eigen::Index j = 0; j < k; ++j) {
    const double bj = fit.beta(j);
    Eigen::VectorXd grad = Eigen::VectorXd::Zero(k);
    double ame = 0.0;
    if (X.roles[static_cast<std::size_t>(j)] == ColumnRole::kDummy) {
      for (Eigen::Index i = 0; i < n; ++i) {
        const double xij = X.X(i, j);
        const double eta1 = eta(i) + bj * (1.0 - xij);
        const double eta0 = eta(i) - bj * xij;
        ame += normal::cdf(eta1) - normal::cdf(eta0);
        const double p1 = normal::pdf(eta1);
        const double p0 = normal::pdf(eta0);
        grad += (p1 - p0) * X.X.row(i).transpose();
        // column j itself is 1 in the first scenario and 0 in the second
        grad(j) += p1 * (1.0 - xij) + p0 * xij;
      }
    } else {
      double mean_pdf = 0.0;
      for (Eigen::Index i = 0; i < n; ++i) {
        const double p = normal::pdf(eta(i));
        mean_pdf += p;
        grad -= p * eta(i) * bj * X.X.row(i).transpose();
      }
      ame = mean_pdf * bj;
      grad(j) += mean_pdf;
    }
    out.ame(j) = ame * inv_n;
    grad *= inv_n;
    out.se(j) = std::sqrt(std::max(0.0, grad.dot(fit.vcov * grad)));
  }
  return out;
}

// ---------------------------------------------------------------- lasso

LassoPath lasso_bic(const Eigen::VectorXd& y, const DesignMatrix& X, const LassoOptions& options) {
  const Eigen::Index n = X.rows();
  const Eigen::Index k = X.cols();
  if (n <= 2) throw Error(ErrorCode::kTooFewRows, "lasso: needs more than two rows");
  if (!X.has_intercept) throw Error(ErrorCode::kInvalidArgument, "lasso: design needs an intercept");
  if (options.grid_size < 1) throw Error(ErrorCode::kInvalidArgument, "lasso: empty grid");
  const double dn = static_cast<double>(n);

  LassoPath path;
  path.column_names = X.column_names;
  path.center = Eigen::VectorXd::Zero(k);
  path.scale = Eigen::VectorXd::Zero(k);

  std::vector<Eigen::Index> penalised;
  for (Eigen::Index j = 0; j < k; ++j) {
    if (X.roles[static_cast<std::size_t>(j)] == ColumnRole::kIntercept) continue;
    const double m = X.X.col(j).mean();
    const double sd = std::sqrt((X.X.col(j).array() - m).square().sum() / dn);
    path.center(j) = m;
    if (!(sd > 1e-12 * std::max(1.0, std::abs(m)))) {
      path.warnings.push_back(
          fmt::format("DegenerateColumn: '{}' has zero variance and is excluded", X.column_names[static_cast<std::size_t>(j)]));
      continue;
    }
    path.scale(j) = sd;
    penalised.push_back(j);
  }
  const auto p = static_cast<Eigen::Index>(penalised.size());
  const Eigen::Index intercept_col = [&] {
    for (Eigen::Index j = 0; j < k; ++j)
      if (X.roles[static_cast<std::size_t>(j)] == ColumnRole::kIntercept) return j;
    return Eigen::Index{0};
  }();

  Eigen::MatrixXd Z(n, p);
  for (Eigen::Index a = 0; a < p; ++a) {
    const auto j = penalised[static_cast<std::size_t>(a)];
    Z.col(a) = (X.X.col(j).array() - path.center(j)) / path.scale(j);
  }
  const double y_mean = y.mean();
  const Eigen::VectorXd yc = y.array() - y_mean;
  const Eigen::MatrixXd gram = (Z.transpose() * Z) / dn;
  const Eigen::VectorXd corr = (Z.transpose() * yc) / dn;
  const double lambda_max = p > 0 ? corr.cwiseAbs().maxCoeff() : 0.0;

  for (std::size_t g = 0; g < options.grid_size; ++g) {
    const double frac = options.grid_size == 1 ? 0.0
                                               : static_cast<double>(g) / static_cast<double>(options.grid_size - 1);
    path.lambda_grid.push_back(lambda_max * std::pow(options.lambda_min_ratio, frac));
  }
  if (options.append_zero) path.lambda_grid.push_back(0.0);

  const auto grid = static_cast<Eigen::Index>(path.lambda_grid.size());
  path.coef = Eigen::MatrixXd::Zero(grid, k);
  path.coef_std = Eigen::MatrixXd::Zero(grid, k);

  Eigen::VectorXd b = Eigen::VectorXd::Zero(p);
  Eigen::VectorXd grad = corr;  // Z'(yc - Z b)/n, maintained incrementally
  for (Eigen::Index g = 0; g < grid; ++g) {
    const double lambda = path.lambda_grid[static_cast<std::size_t>(g)];
    std::size_t sweep = 0;
    for (; sweep < options.max_sweeps; ++sweep) {
      double max_delta = 0.0;
      for (Eigen::Index a = 0; a < p; ++a) {
        const double old = b(a);
        const double rho = grad(a) + gram(a, a) * old;
        const double shrunk = std::copysign(std::max(std::abs(rho) - lambda, 0.0), rho) / gram(a, a);
        const double delta = shrunk - old;
        if (delta != 0.0) {
          grad -= gram.col(a) * delta;
          b(a) = shrunk;
          max_delta = std::max(max_delta, std::abs(delta));
        }
      }
      if (max_delta < options.tolerance) break;
    }
    if (sweep == options.max_sweeps)
      path.warnings.push_back(fmt::format("lasso: lambda index {} hit the sweep limit", g));
    // Refresh the running gradient so drift cannot accumulate along the path.
    grad = corr - gram * b;

    Eigen::VectorXd beta = Eigen::VectorXd::Zero(k);
    double offset = 0.0;
    std::size_t df = 0;
    for (Eigen::Index a = 0; a < p; ++a) {
      const auto j = penalised[static_cast<std::size_t>(a)];
      path.coef_std(g, j) = b(a);
      beta(j) = b(a) / path.scale(j);
      offset += beta(j) * path.center(j);
      if (b(a) != 0.0) ++df;
    }
    beta(intercept_col) = y_mean - offset;
    path.coef.row(g) = beta.transpose();
    const double rss = (y - X.X * beta).squaredNorm();
    path.rss.push_back(rss);
    path.df.push_back(df);
    path.bic.push_back(dn * std::log(rss / dn) + std::log(dn) * static_cast<double>(df));
  }

  path.selected_index = static_cast<std::size_t>(
      std::min_element(path.bic.begin(), path.bic.end()) - path.bic.begin());

  std::vector<Eigen::Index> support{intercept_col};
  for (Eigen::Index j = 0; j < k; ++j) {
    if (j == intercept_col) continue;
    if (path.coef(static_cast<Eigen::Index>(path.selected_index), j) != 0.0) {
      support.push_back(j);
      path.selected_columns.push_back(X.column_names[static_cast<std::size_t>(j)]);
    }
  }
  Eigen::MatrixXd Xs(n, static_cast<Eigen::Index>(support.size()));
  std::vector<std::string> names;
  for (std::size_t s = 0; s < support.size(); ++s) {
    Xs.col(static_cast<Eigen::Index>(s)) = X.X.col(support[s]);
    names.push_back(X.column_names[static_cast<std::size_t>(support[s])]);
  }
  path.post_ols = ols(y, Xs, names, VcovKind::kRobustHc1);
  return path;
}

}  // namespace segkit
