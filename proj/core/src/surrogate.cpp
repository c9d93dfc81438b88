#include "mmsurrogate/surrogate.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "mmsurrogate/errors.hpp"

namespace mmsurrogate {

namespace {

// In-place Cholesky of a symmetric n x n matrix, then solves A x = b.
std::vector<double> cholesky_solve(std::vector<double> a, std::vector<double> b, std::size_t n) {
  double max_diag = 0.0;
  for (std::size_t i = 0; i < n; ++i) max_diag = std::max(max_diag, std::abs(a[i * n + i]));
  const double tol = 1e-12 * std::max(max_diag, 1e-300);

  for (std::size_t j = 0; j < n; ++j) {
    double d = a[j * n + j];
    for (std::size_t k = 0; k < j; ++k) d -= a[j * n + k] * a[j * n + k];
    if (!(d > tol)) {
      throw SingularSystemError("normal equations are singular (column " + std::to_string(j) +
                                "); retry with ridge_lambda > 0");
    }
    const double l = std::sqrt(d);
    a[j * n + j] = l;
    for (std::size_t i = j + 1; i < n; ++i) {
      double s = a[i * n + j];
      for (std::size_t k = 0; k < j; ++k) s -= a[i * n + k] * a[j * n + k];
      a[i * n + j] = s / l;
    }
  }
  for (std::size_t i = 0; i < n; ++i) {
    double s = b[i];
    for (std::size_t k = 0; k < i; ++k) s -= a[i * n + k] * b[k];
    b[i] = s / a[i * n + i];
  }
  for (std::size_t i = n; i-- > 0;) {
    double s = b[i];
    for (std::size_t k = i + 1; k < n; ++k) s -= a[k * n + i] * b[k];
    b[i] = s / a[i * n + i];
  }
  return b;
}

}  // namespace

SurrogateFit fit_weighted_ridge(const Matrix& design, std::span<const double> targets,
                                std::span<const double> weights, double lambda,
                                bool fit_intercept) {
  const std::size_t s = design.rows();
  const std::size_t f = design.cols();
  if (s < 2) throw ArgumentError("fit_weighted_ridge: need at least 2 samples");
  if (f < 1) throw ArgumentError("fit_weighted_ridge: need at least 1 feature");
  if (targets.size() != s || weights.size() != s) {
    throw ArgumentError("fit_weighted_ridge: design, targets and weights disagree in length");
  }
  if (!(lambda >= 0.0) || !std::isfinite(lambda)) {
    throw ArgumentError("fit_weighted_ridge: lambda must be finite and >= 0");
  }
  for (std::size_t i = 0; i < s; ++i) {
    if (!std::isfinite(targets[i])) throw ArgumentError("fit_weighted_ridge: non-finite target");
    if (!(weights[i] > 0.0) || !std::isfinite(weights[i])) {
      throw ArgumentError("fit_weighted_ridge: weights must be positive and finite");
    }
  }
  for (double v : design.data()) {
    if (!std::isfinite(v)) throw ArgumentError("fit_weighted_ridge: non-finite design entry");
  }

  // Unknowns: [intercept, b_0 .. b_{F-1}] or just [b_0 ..] without intercept.
  const std::size_t off = fit_intercept ? 1 : 0;
  const std::size_t n = f + off;
  std::vector<double> a(n * n, 0.0);
  std::vector<double> rhs(n, 0.0);
  std::vector<double> z(n);
  for (std::size_t i = 0; i < s; ++i) {
    if (fit_intercept) z[0] = 1.0;
    const auto row = design.row(i);
    std::copy(row.begin(), row.end(), z.begin() + static_cast<std::ptrdiff_t>(off));
    const double w = weights[i];
    for (std::size_t r = 0; r < n; ++r) {
      const double wz = w * z[r];
      if (wz == 0.0) continue;
      rhs[r] += wz * targets[i];
      for (std::size_t c = 0; c <= r; ++c) a[r * n + c] += wz * z[c];
    }
  }
  for (std::size_t r = 0; r < n; ++r) {
    for (std::size_t c = r + 1; c < n; ++c) a[r * n + c] = a[c * n + r];
  }
  for (std::size_t j = off; j < n; ++j) a[j * n + j] += lambda;

  const std::vector<double> sol = cholesky_solve(std::move(a), std::move(rhs), n);

  SurrogateFit fit;
  fit.lambda = lambda;
  fit.intercept = fit_intercept ? sol[0] : 0.0;
  fit.coefficients.assign(sol.begin() + static_cast<std::ptrdiff_t>(off), sol.end());

  const double wsum = std::accumulate(weights.begin(), weights.end(), 0.0);
  double ymean = 0.0;
  for (std::size_t i = 0; i < s; ++i) ymean += weights[i] * targets[i];
  ymean /= wsum;
  double sse = 0.0;
  double sst = 0.0;
  for (std::size_t i = 0; i < s; ++i) {
    const auto row = design.row(i);
    double pred = fit.intercept;
    for (std::size_t j = 0; j < f; ++j) pred += row[j] * fit.coefficients[j];
    sse += weights[i] * (targets[i] - pred) * (targets[i] - pred);
    sst += weights[i] * (targets[i] - ymean) * (targets[i] - ymean);
  }
  fit.weighted_r2 = sst > 0.0 ? 1.0 - sse / sst : (sse == 0.0 ? 1.0 : 0.0);

  for (double c : fit.coefficients) {
    if (!std::isfinite(c)) throw SingularSystemError("fit_weighted_ridge: non-finite solution");
  }
  return fit;
}

std::vector<RankedFeature> rank_features(std::span<const double> coefficients, std::size_t k) {
  std::vector<std::size_t> order(coefficients.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  const std::size_t take = std::min(k, order.size());
  std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(take), order.end(),
                    [&](std::size_t l, std::size_t r) {
                      const double al = std::abs(coefficients[l]);
                      const double ar = std::abs(coefficients[r]);
                      return al != ar ? al > ar : l < r;
                    });
  std::vector<RankedFeature> out;
  out.reserve(take);
  for (std::size_t i = 0; i < take; ++i) out.push_back({order[i], coefficients[order[i]]});
  return out;
}

}  // namespace mmsurrogate
