#pragma once

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "protobasis/model.hpp"
#include "protobasis/rng.hpp"

namespace protobasis {

struct KMeansConfig {
  Index K = 10;
  int max_iter = 300;
  double tol = 1e-10;  // relative cost decrease below which a run stops
  int n_restarts = 10;
  std::uint64_t seed = 0;
};

/// Result of Lloyd's algorithm on the columns of a point matrix.
struct Clustering {
  std::vector<Index> labels;     // one per point, in [0, K)
  Matrix centers;                // dim x K, the means of the clusters
  double cost = 0.0;             // sum of squared distances to assigned centers
  std::vector<double> cost_history;  // cost after every assignment step
  int iterations = 0;
  int restart = 0;               // index of the winning restart
};

namespace detail {

inline void validate_kmeans(const KMeansConfig& cfg, Index n) {
  if (cfg.K < 1 || cfg.K > n) throw Error(ErrorCode::kInvalidArgument, "K must satisfy 1 <= K <= N");
  if (cfg.max_iter < 1) throw Error(ErrorCode::kInvalidArgument, "max_iter must be >= 1");
  if (cfg.n_restarts < 1) throw Error(ErrorCode::kInvalidArgument, "n_restarts must be >= 1");
  if (!(cfg.tol > 0.0)) throw Error(ErrorCode::kInvalidArgument, "tol must be positive");
}

inline std::vector<Index> assign(const Matrix& points, const Matrix& centers, double* cost) {
  const Index n = points.cols();
  std::vector<Index> labels(static_cast<std::size_t>(n));
  double total = 0.0;
  for (Index i = 0; i < n; ++i) {
    Index best = 0;
    double best_d = std::numeric_limits<double>::infinity();
    for (Index k = 0; k < centers.cols(); ++k) {
      const double d = (points.col(i) - centers.col(k)).squaredNorm();
      if (d < best_d) {
        best_d = d;
        best = k;
      }
    }
    labels[static_cast<std::size_t>(i)] = best;
    total += best_d;
  }
  *cost = total;
  return labels;
}

inline Matrix cluster_means(const Matrix& points, const std::vector<Index>& labels, Index K,
                            std::vector<Index>* counts) {
  Matrix centers = Matrix::Zero(points.rows(), K);
  counts->assign(static_cast<std::size_t>(K), 0);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    centers.col(labels[i]) += points.col(static_cast<Index>(i));
    ++(*counts)[static_cast<std::size_t>(labels[i])];
  }
  for (Index k = 0; k < K; ++k) {
    const Index c = (*counts)[static_cast<std::size_t>(k)];
    if (c > 0) centers.col(k) /= static_cast<double>(c);
  }
  return centers;
}

inline double cost_of(const Matrix& points, const std::vector<Index>& labels, const Matrix& centers) {
  double total = 0.0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    total += (points.col(static_cast<Index>(i)) - centers.col(labels[i])).squaredNorm();
  }
  return total;
}

/// Moves every empty cluster onto the point farthest from its own center,
/// skipping members of singleton clusters. Returns true if anything moved.
inline bool reseed_empty(const Matrix& points, std::vector<Index>& labels, Matrix& centers,
                         std::vector<Index>& counts) {
  bool moved = false;
  for (Index k = 0; k < centers.cols(); ++k) {
    if (counts[static_cast<std::size_t>(k)] > 0) continue;
    Index far = -1;
    double far_d = -1.0;
    for (Index i = 0; i < points.cols(); ++i) {
      const Index owner = labels[static_cast<std::size_t>(i)];
      if (counts[static_cast<std::size_t>(owner)] <= 1) continue;
      const double d = (points.col(i) - centers.col(owner)).squaredNorm();
      if (d > far_d) {
        far_d = d;
        far = i;
      }
    }
    if (far < 0) break;
    const Index owner = labels[static_cast<std::size_t>(far)];
    --counts[static_cast<std::size_t>(owner)];
    counts[static_cast<std::size_t>(k)] = 1;
    labels[static_cast<std::size_t>(far)] = k;
    centers.col(k) = points.col(far);
    // Keep the donor's center at the mean of its remaining members.
    Vector sum = Vector::Zero(points.rows());
    for (Index i = 0; i < points.cols(); ++i)
      if (labels[static_cast<std::size_t>(i)] == owner) sum += points.col(i);
    centers.col(owner) = sum / static_cast<double>(counts[static_cast<std::size_t>(owner)]);
    moved = true;
  }
  return moved;
}

/// k-means++ seeding: first center uniform, then proportional to squared
/// distance from the nearest chosen center.
inline Matrix kmeanspp_seed(const Matrix& points, Index K, Rng& rng) {
  const Index n = points.cols();
  Matrix centers(points.rows(), K);
  std::uniform_int_distribution<Index> first(0, n - 1);
  centers.col(0) = points.col(first(rng));
  Vector d2(n);
  for (Index i = 0; i < n; ++i) d2(i) = (points.col(i) - centers.col(0)).squaredNorm();
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (Index k = 1; k < K; ++k) {
    const double total = d2.sum();
    Index pick = 0;
    if (total > 0.0) {
      double r = unit(rng) * total;
      pick = n - 1;
      for (Index i = 0; i < n; ++i) {
        r -= d2(i);
        if (r < 0.0 && d2(i) > 0.0) {
          pick = i;
          break;
        }
      }
      while (d2(pick) <= 0.0 && pick > 0) --pick;
    }
    centers.col(k) = points.col(pick);
    for (Index i = 0; i < n; ++i) d2(i) = std::min(d2(i), (points.col(i) - centers.col(k)).squaredNorm());
  }
  return centers;
}

inline Clustering lloyd_run(const Matrix& points, Index K, int max_iter, double tol, Rng& rng) {
  Clustering out;
  Matrix centers = kmeanspp_seed(points, K, rng);
  double cost = 0.0;
  std::vector<Index> labels = assign(points, centers, &cost);
  out.cost_history.push_back(cost);

  std::vector<Index> counts;
  for (int it = 1; it <= max_iter; ++it) {
    out.iterations = it;
    centers = cluster_means(points, labels, K, &counts);
    reseed_empty(points, labels, centers, counts);
    double next_cost = 0.0;
    std::vector<Index> next = assign(points, centers, &next_cost);
    const bool changed = next != labels;
    labels = std::move(next);
    out.cost_history.push_back(next_cost);
    const bool small = cost - next_cost <= tol * cost;
    cost = next_cost;
    if (!changed || small) break;
  }

  centers = cluster_means(points, labels, K, &counts);
  while (reseed_empty(points, labels, centers, counts)) {
    centers = cluster_means(points, labels, K, &counts);
  }
  out.cost = cost_of(points, labels, centers);
  if (out.cost < out.cost_history.back()) out.cost_history.push_back(out.cost);
  out.labels = std::move(labels);
  out.centers = std::move(centers);
  return out;
}

/// Relabels clusters so they appear in order of their smallest member index.
inline void canonicalize(Clustering& c) {
  const Index K = c.centers.cols();
  std::vector<Index> first(static_cast<std::size_t>(K), std::numeric_limits<Index>::max());
  for (std::size_t i = 0; i < c.labels.size(); ++i) {
    auto& f = first[static_cast<std::size_t>(c.labels[i])];
    f = std::min(f, static_cast<Index>(i));
  }
  std::vector<Index> order(static_cast<std::size_t>(K));
  std::iota(order.begin(), order.end(), Index{0});
  std::sort(order.begin(), order.end(), [&](Index a, Index b) {
    return first[static_cast<std::size_t>(a)] < first[static_cast<std::size_t>(b)];
  });
  std::vector<Index> rank(static_cast<std::size_t>(K));
  Matrix centers(c.centers.rows(), K);
  for (Index r = 0; r < K; ++r) {
    rank[static_cast<std::size_t>(order[static_cast<std::size_t>(r)])] = r;
    centers.col(r) = c.centers.col(order[static_cast<std::size_t>(r)]);
  }
  for (auto& l : c.labels) l = rank[static_cast<std::size_t>(l)];
  c.centers = std::move(centers);
}

}  // namespace detail

/// Number of pairwise-distinct columns (exact equality).
inline Index count_distinct_columns(const Matrix& points) {
  std::vector<Index> idx(static_cast<std::size_t>(points.cols()));
  std::iota(idx.begin(), idx.end(), Index{0});
  auto less = [&](Index a, Index b) {
    for (Index r = 0; r < points.rows(); ++r) {
      if (points(r, a) != points(r, b)) return points(r, a) < points(r, b);
    }
    return false;
  };
  std::sort(idx.begin(), idx.end(), less);
  Index distinct = idx.empty() ? 0 : 1;
  for (std::size_t i = 1; i < idx.size(); ++i) distinct += less(idx[i - 1], idx[i]) ? 1 : 0;
  return distinct;
}

/// Lloyd's algorithm with k-means++ seeding on the columns of `points`,
/// keeping the lowest-cost restart (earliest restart wins ties).
inline Clustering lloyd(const Matrix& points, const KMeansConfig& cfg) {
  detail::validate_kmeans(cfg, points.cols());
  if (count_distinct_columns(points) < cfg.K) {
    throw Error(ErrorCode::kDegenerateDictionary,
                "fewer than K=" + std::to_string(cfg.K) + " distinct points");
  }
  std::optional<Clustering> best;
  for (int r = 0; r < cfg.n_restarts; ++r) {
    Rng rng = make_rng(derive_seed(cfg.seed, {static_cast<std::uint64_t>(r)}));
    Clustering run = detail::lloyd_run(points, cfg.K, cfg.max_iter, cfg.tol, rng);
    run.restart = r;
    if (!best || run.cost < best->cost) best = std::move(run);
  }
  detail::canonicalize(*best);
  return *best;
}

/// Empirical K-means cost of representing `points` by `centers`.
inline double kmeans_cost(const Matrix& points, const Matrix& centers) {
  double cost = 0.0;
  detail::assign(points, centers, &cost);
  return cost;
}

/// K-means prototypes: cluster means of the dictionary curves.
inline PrototypeBasis kmeans_select(const Dictionary& dict, const KMeansConfig& cfg) {
  require_valid(dict);
  const Clustering c = lloyd(dict.curves, cfg);
  return cluster_mean_basis(dict, c.labels, cfg.K, "km");
}

namespace detail {

inline std::vector<Index> snap_to_columns(const Matrix& points, const Matrix& centers) {
  std::vector<Index> chosen;
  std::vector<bool> used(static_cast<std::size_t>(points.cols()), false);
  for (Index k = 0; k < centers.cols(); ++k) {
    Index best = -1;
    double best_d = std::numeric_limits<double>::infinity();
    for (Index i = 0; i < points.cols(); ++i) {
      if (used[static_cast<std::size_t>(i)]) continue;
      const double d = (points.col(i) - centers.col(k)).squaredNorm();
      if (d < best_d) {
        best_d = d;
        best = i;
      }
    }
    used[static_cast<std::size_t>(best)] = true;
    chosen.push_back(best);
  }
  return chosen;
}

}  // namespace detail

/// K-means followed by snapping each centroid to its nearest dictionary
/// column (lowest index on ties; a column already taken by an earlier
/// centroid is skipped so the K prototypes stay distinct).
inline PrototypeBasis kmeans_central_select(const Dictionary& dict, const KMeansConfig& cfg) {
  require_valid(dict);
  const Clustering c = lloyd(dict.curves, cfg);
  return indicator_basis(dict, detail::snap_to_columns(dict.curves, c.centers), "km-central");
}

struct EpsilonRule {
  enum class Kind { kMedianScaled, kFixed };
  Kind kind = Kind::kMedianScaled;
  double value = 1.0;  // multiplier of the median squared distance, or the fixed epsilon
};

struct DiffusionConfig {
  EpsilonRule epsilon;
  int n_coords = 0;  // 0 selects the smallest m with lambda_m / lambda_1 < 0.05, capped at 20
  KMeansConfig kmeans;
};

struct DiffusionMap {
  Matrix coords;        // N x n_coords, psi_l * lambda_l for l = 1..n_coords
  Vector eigenvalues;   // lambda_0..lambda_{n_coords}, descending
  Matrix psi;           // N x (n_coords + 1) right eigenvectors, psi_0 == 1
  double epsilon = 0.0;
};

inline Matrix squared_distances(const Matrix& points) {
  const Index n = points.cols();
  const Vector norms = points.colwise().squaredNorm().transpose();
  Matrix d2 = (-2.0 * points.transpose() * points).eval();
  d2.colwise() += norms;
  d2.rowwise() += norms.transpose();
  for (Index i = 0; i < n; ++i) {
    d2(i, i) = 0.0;
    for (Index j = 0; j < i; ++j) {
      const double v = std::max(0.0, 0.5 * (d2(i, j) + d2(j, i)));
      d2(i, j) = v;
      d2(j, i) = v;
    }
  }
  return d2;
}

/// Diffusion-map embedding of the dictionary curves with t = 1.
inline DiffusionMap diffusion_map(const Dictionary& dict, const DiffusionConfig& cfg) {
  require_valid(dict);
  const Index n = dict.size();
  if (n < 2) throw Error(ErrorCode::kInvalidArgument, "diffusion map needs at least two curves");
  if (cfg.n_coords < 0 || cfg.n_coords > n - 1) {
    throw Error(ErrorCode::kInvalidArgument, "n_coords must lie in [1, N-1]");
  }
  if (!(cfg.epsilon.value > 0.0)) throw Error(ErrorCode::kInvalidArgument, "epsilon rule value must be positive");

  const Matrix d2 = squared_distances(dict.curves);
  DiffusionMap out;
  if (cfg.epsilon.kind == EpsilonRule::Kind::kFixed) {
    out.epsilon = cfg.epsilon.value;
  } else {
    std::vector<double> off;
    off.reserve(static_cast<std::size_t>(n * (n - 1) / 2));
    for (Index j = 0; j < n; ++j)
      for (Index i = j + 1; i < n; ++i) off.push_back(d2(i, j));
    const std::size_t mid = off.size() / 2;
    std::nth_element(off.begin(), off.begin() + static_cast<std::ptrdiff_t>(mid), off.end());
    double median = off[mid];
    if (off.size() % 2 == 0) {
      median = 0.5 * (median + *std::max_element(off.begin(), off.begin() + static_cast<std::ptrdiff_t>(mid)));
    }
    out.epsilon = cfg.epsilon.value * median;
    if (!(out.epsilon > 0.0)) throw Error(ErrorCode::kEpsilonTooSmall, "median squared distance is zero");
  }

  const Matrix kernel = (-d2 / out.epsilon).array().exp().matrix();
  const Vector degree = kernel.rowwise().sum();
  for (Index i = 0; i < n; ++i) {
    if (degree(i) - kernel(i, i) < 1e-300) {
      throw Error(ErrorCode::kEpsilonTooSmall,
                  "kernel row " + std::to_string(i) + " is disconnected at epsilon " + std::to_string(out.epsilon),
                  static_cast<std::size_t>(i));
    }
  }
  const Vector inv_sqrt = degree.cwiseSqrt().cwiseInverse();
  const Matrix sym = inv_sqrt.asDiagonal() * kernel * inv_sqrt.asDiagonal();
  Eigen::SelfAdjointEigenSolver<Matrix> eig(sym);
  // Eigen returns ascending order.
  const Vector values = eig.eigenvalues().reverse();
  Matrix vectors = eig.eigenvectors().rowwise().reverse();

  int m = cfg.n_coords;
  if (m == 0) {
    const int cap = static_cast<int>(std::min<Index>(20, n - 1));
    m = cap;
    for (int l = 1; l <= cap; ++l) {
      if (values(l) / values(1) < 0.05) {
        m = l;
        break;
      }
    }
  }

  if (vectors.col(0).sum() < 0.0) vectors.col(0) *= -1.0;
  out.eigenvalues = values.head(m + 1);
  out.psi.resize(n, m + 1);
  for (Index l = 0; l <= m; ++l) {
    Vector v = vectors.col(l);
    Index arg = 0;
    v.cwiseAbs().maxCoeff(&arg);
    if (v(arg) < 0.0) v = -v;
    out.psi.col(l) = v.cwiseQuotient(vectors.col(0));
  }
  out.coords.resize(n, m);
  for (Index l = 1; l <= m; ++l) out.coords.col(l - 1) = out.psi.col(l) * out.eigenvalues(l);
  return out;
}

/// Lloyd's algorithm in diffusion coordinates; prototypes are the
/// original-space means of the resulting clusters.
inline PrototypeBasis diffusion_kmeans_select(const Dictionary& dict, const DiffusionConfig& cfg) {
  require_valid(dict);
  detail::validate_kmeans(cfg.kmeans, dict.size());
  if (count_distinct_columns(dict.curves) < cfg.kmeans.K) {
    throw Error(ErrorCode::kDegenerateDictionary, "fewer than K distinct curves");
  }
  const DiffusionMap map = diffusion_map(dict, cfg);
  const Clustering c = lloyd(map.coords.transpose(), cfg.kmeans);
  return cluster_mean_basis(dict, c.labels, cfg.kmeans.K, "dkm");
}

/// Greedy farthest-point selection seeded at the curve farthest from the
/// dictionary mean. Returns dictionary indices in selection order.
inline std::vector<Index> uss_order(const Matrix& points, Index K) {
  const Index n = points.cols();
  if (K < 1 || K > n) throw Error(ErrorCode::kInvalidArgument, "K must satisfy 1 <= K <= N");
  const Vector mean = points.rowwise().mean();
  Index first = 0;
  double best = -1.0;
  for (Index i = 0; i < n; ++i) {
    const double d = (points.col(i) - mean).squaredNorm();
    if (d > best) {
      best = d;
      first = i;
    }
  }
  std::vector<Index> chosen{first};
  Vector min_d(n);
  for (Index i = 0; i < n; ++i) min_d(i) = (points.col(i) - points.col(first)).squaredNorm();
  while (static_cast<Index>(chosen.size()) < K) {
    Index next = 0;
    double far = -1.0;
    for (Index i = 0; i < n; ++i) {
      if (min_d(i) > far) {
        far = min_d(i);
        next = i;
      }
    }
    chosen.push_back(next);
    for (Index i = 0; i < n; ++i) min_d(i) = std::min(min_d(i), (points.col(i) - points.col(next)).squaredNorm());
  }
  return chosen;
}

inline PrototypeBasis uss_select(const Dictionary& dict, Index K) {
  require_valid(dict);
  return indicator_basis(dict, uss_order(dict.curves, K), "uss");
}

}  // namespace protobasis
