#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "protobasis/model.hpp"

namespace protobasis {

struct FitConfig {
  bool weight_by_noise = false;
  double nnls_tol = 1e-10;
  int max_active_set_iter = 0;  // 0 selects 3 * K
};

struct NnlsResult {
  Vector w;
  int iterations = 0;
};

/// Lawson-Hanson active-set NNLS: argmin ||A w - y||^2 subject to w >= 0.
/// `tol` is relative to ||A^T y||_inf and bounds the KKT residual of the
/// returned solution.
inline NnlsResult nnls(const Matrix& A, const Vector& y, double tol = 1e-10, int max_iter = 0) {
  const Index p = A.rows();
  const Index n = A.cols();
  if (p < 1 || n < 1) throw Error(ErrorCode::kDimensionMismatch, "nnls needs a nonempty matrix");
  if (y.size() != p) throw Error(ErrorCode::kDimensionMismatch, "nnls: y length differs from rows of A");
  if (max_iter <= 0) max_iter = static_cast<int>(3 * n);

  NnlsResult res;
  res.w = Vector::Zero(n);
  Vector& w = res.w;
  std::vector<bool> passive(static_cast<std::size_t>(n), false);
  std::vector<bool> excluded(static_cast<std::size_t>(n), false);

  const Vector aty = A.transpose() * y;
  const double thresh = tol * std::max(aty.cwiseAbs().maxCoeff(), std::numeric_limits<double>::min());

  std::vector<Index> cols;
  Vector z;
  auto solve_passive = [&] {
    cols.clear();
    for (Index j = 0; j < n; ++j)
      if (passive[static_cast<std::size_t>(j)]) cols.push_back(j);
    if (cols.empty()) return;
    Matrix sub(p, static_cast<Index>(cols.size()));
    for (std::size_t c = 0; c < cols.size(); ++c) sub.col(static_cast<Index>(c)) = A.col(cols[c]);
    z = sub.colPivHouseholderQr().solve(y);
  };

  while (true) {
    const Vector grad = A.transpose() * (y - A * w);  // negative gradient
    Index best = -1;
    double best_val = thresh;
    for (Index j = 0; j < n; ++j) {
      const auto ju = static_cast<std::size_t>(j);
      if (passive[ju] || excluded[ju]) continue;
      if (grad(j) > best_val) {
        best_val = grad(j);
        best = j;
      }
    }
    if (best < 0) break;
    passive[static_cast<std::size_t>(best)] = true;

    bool first = true;
    while (true) {
      if (++res.iterations > max_iter) {
        throw Error(ErrorCode::kIterationLimit,
                    "active-set loop exceeded " + std::to_string(max_iter) + " iterations");
      }
      solve_passive();
      if (cols.empty()) break;
      bool feasible = true;
      for (std::size_t c = 0; c < cols.size(); ++c) feasible = feasible && z(static_cast<Index>(c)) > 0.0;
      if (feasible) {
        for (std::size_t c = 0; c < cols.size(); ++c) w(cols[c]) = z(static_cast<Index>(c));
        std::fill(excluded.begin(), excluded.end(), false);
        break;
      }
      if (first) {
        // The entering column must rise above zero; if rounding says otherwise
        // it is parked until the iterate next changes.
        const auto it = std::find(cols.begin(), cols.end(), best);
        if (z(static_cast<Index>(it - cols.begin())) <= 0.0) {
          passive[static_cast<std::size_t>(best)] = false;
          excluded[static_cast<std::size_t>(best)] = true;
          break;
        }
      }
      first = false;
      // Move toward z until the first passive weight hits zero; every weight
      // whose ratio ties the step leaves the passive set.
      std::vector<double> ratio(cols.size(), std::numeric_limits<double>::infinity());
      double step = 1.0;
      for (std::size_t c = 0; c < cols.size(); ++c) {
        const double zc = z(static_cast<Index>(c));
        if (zc <= 0.0) {
          const double wc = w(cols[c]);
          ratio[c] = wc / (wc - zc);
          step = std::min(step, ratio[c]);
        }
      }
      for (std::size_t c = 0; c < cols.size(); ++c) {
        const Index j = cols[c];
        if (ratio[c] <= step * (1.0 + 1e-12) || w(j) + step * (z(static_cast<Index>(c)) - w(j)) <= 0.0) {
          w(j) = 0.0;
          passive[static_cast<std::size_t>(j)] = false;
        } else {
          w(j) += step * (z(static_cast<Index>(c)) - w(j));
        }
      }
    }
  }
  return res;
}

/// Fits y ~ scale * Psi * beta with beta on the simplex and scale >= 0 by
/// NNLS on the (optionally noise-weighted) prototypes, then factoring the
/// weight vector as w = scale * beta.
inline MixtureFit simplex_fit(const Matrix& prototypes, const Observation& obs, const FitConfig& cfg = {}) {
  const Index p = prototypes.rows();
  const Index k = prototypes.cols();
  if (obs.y.size() != p) {
    throw Error(ErrorCode::kDimensionMismatch,
                "observation length " + std::to_string(obs.y.size()) + " differs from basis length " +
                    std::to_string(p));
  }
  if (obs.noise_scale && obs.noise_scale->size() != p) {
    throw Error(ErrorCode::kDimensionMismatch, "noise_scale length differs from observation length");
  }

  const bool weighted = cfg.weight_by_noise && obs.noise_scale.has_value();
  NnlsResult sol;
  if (weighted) {
    const Vector inv = obs.noise_scale->cwiseInverse();
    sol = nnls(inv.asDiagonal() * prototypes, obs.y.cwiseProduct(inv), cfg.nnls_tol, cfg.max_active_set_iter);
  } else {
    sol = nnls(prototypes, obs.y, cfg.nnls_tol, cfg.max_active_set_iter);
  }

  MixtureFit fit;
  fit.iterations = sol.iterations;
  fit.scale = sol.w.sum();
  if (fit.scale > 0.0) {
    fit.beta = sol.w / fit.scale;
  } else {
    fit.scale = 0.0;
    fit.beta = Vector::Constant(k, 1.0 / static_cast<double>(k));
    fit.zero_fit = true;
  }
  const Vector model = prototypes * (fit.scale * fit.beta);
  fit.residual_ss = (obs.y - model).squaredNorm();
  if (obs.noise_scale) {
    fit.chi_square = (obs.y - model).cwiseQuotient(*obs.noise_scale).squaredNorm();
  }
  return fit;
}

inline MixtureFit simplex_fit(const PrototypeBasis& basis, const Observation& obs, const FitConfig& cfg = {}) {
  return simplex_fit(basis.prototypes(), obs, cfg);
}

/// Sum of squared standardized residuals against the observation's noise scale.
inline double chi_square(const Observation& obs, const Vector& model) {
  if (!obs.noise_scale) throw Error(ErrorCode::kMissingNoiseScale, "observation has no noise_scale");
  if (model.size() != obs.y.size() || obs.noise_scale->size() != obs.y.size()) {
    throw Error(ErrorCode::kDimensionMismatch, "model, observation and noise_scale lengths differ");
  }
  for (Index i = 0; i < obs.noise_scale->size(); ++i) {
    if (!((*obs.noise_scale)(i) > 0.0)) {
      throw Error(ErrorCode::kInvalidArgument, "noise_scale entries must be positive", static_cast<std::size_t>(i));
    }
  }
  return (obs.y - model).cwiseQuotient(*obs.noise_scale).squaredNorm();
}

}  // namespace protobasis
