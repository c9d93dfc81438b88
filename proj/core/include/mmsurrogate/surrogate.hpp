#pragma once
// Weighted ridge regression for the local linear surrogate.

#include <cstddef>
#include <span>
#include <vector>

#include "mmsurrogate/model.hpp"

namespace mmsurrogate {

struct SurrogateFit {
  std::vector<double> coefficients;
  double intercept = 0.0;
  double lambda = 0.0;
  // 1 - weighted SSE / weighted SST; 1.0 when the targets are constant and fit exactly.
  double weighted_r2 = 0.0;
};

// Minimizes  sum_i w_i (y_i - b0 - x_i.b)^2 + lambda |b|^2  with the intercept
// b0 unpenalized, by a Cholesky solve of the (F+1)-dimensional normal
// equations. With fit_intercept = false, b0 is fixed at 0.
//
// Throws ArgumentError on shape mismatch, S < 2, negative lambda, non-positive
// or non-finite weights, non-finite inputs; SingularSystemError when the
// normal matrix is not positive definite (possible only with lambda = 0).
SurrogateFit fit_weighted_ridge(const Matrix& design, std::span<const double> targets,
                                std::span<const double> weights, double lambda,
                                bool fit_intercept = true);

struct RankedFeature {
  std::size_t index = 0;
  double score = 0.0;

  bool operator==(const RankedFeature&) const = default;
};

// Top min(k, F) features by |coefficient| descending, ties by ascending index.
// score is the signed coefficient.
std::vector<RankedFeature> rank_features(std::span<const double> coefficients, std::size_t k);

inline std::vector<RankedFeature> rank_features(const SurrogateFit& fit, std::size_t k) {
  return rank_features(fit.coefficients, k);
}

}  // namespace mmsurrogate
