#pragma once

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "protobasis/model.hpp"
#include "protobasis/quantize.hpp"
#include "protobasis/rng.hpp"

namespace protobasis {

struct SimplexLsqResult {
  Vector w;
  double residual_ss = 0.0;
  int iterations = 0;
};

/// Active-set solver for argmin ||A w - b||^2 subject to w >= 0, sum(w) = 1.
///
/// On a passive set P the equality constraint is eliminated by expressing
/// the first passive weight through the others, which leaves an
/// unconstrained least-squares problem in |P| - 1 unknowns. Optimality holds
/// when every inactive gradient entry is at least the common gradient value
/// on P.
inline SimplexLsqResult simplex_lsq(const Matrix& A, const Vector& b, double tol = 1e-12) {
  const Index p = A.rows();
  const Index n = A.cols();
  if (n < 1) throw Error(ErrorCode::kDimensionMismatch, "simplex_lsq needs at least one column");
  if (b.size() != p) throw Error(ErrorCode::kDimensionMismatch, "simplex_lsq: b length differs from rows of A");

  SimplexLsqResult res;
  Index start = 0;
  (A.colwise() - b).colwise().squaredNorm().minCoeff(&start);
  res.w = Vector::Zero(n);
  res.w(start) = 1.0;
  std::vector<bool> passive(static_cast<std::size_t>(n), false);
  std::vector<bool> excluded(static_cast<std::size_t>(n), false);
  passive[static_cast<std::size_t>(start)] = true;

  const double scale = A.colwise().norm().maxCoeff();
  const double thresh = tol * std::max(scale * (scale + b.norm()), std::numeric_limits<double>::min());
  const int max_iter = static_cast<int>(10 * n + 100);

  std::vector<Index> cols;
  Vector z;
  auto solve_passive = [&] {
    cols.clear();
    for (Index j = 0; j < n; ++j)
      if (passive[static_cast<std::size_t>(j)]) cols.push_back(j);
    const Index m = static_cast<Index>(cols.size());
    z.resize(m);
    if (m == 1) {
      z(0) = 1.0;
      return;
    }
    const Vector ref = A.col(cols[0]);
    Matrix D(p, m - 1);
    for (Index c = 1; c < m; ++c) D.col(c - 1) = A.col(cols[static_cast<std::size_t>(c)]) - ref;
    const Vector u = D.colPivHouseholderQr().solve(b - ref);
    z.tail(m - 1) = u;
    z(0) = 1.0 - u.sum();
  };

  while (true) {
    const Vector grad = A.transpose() * (A * res.w - b);
    double level = 0.0;
    int np = 0;
    for (Index j = 0; j < n; ++j) {
      if (passive[static_cast<std::size_t>(j)]) {
        level += grad(j);
        ++np;
      }
    }
    level /= np;
    Index best = -1;
    double best_val = -thresh;
    for (Index j = 0; j < n; ++j) {
      const auto ju = static_cast<std::size_t>(j);
      if (passive[ju] || excluded[ju]) continue;
      if (grad(j) - level < best_val) {
        best_val = grad(j) - level;
        best = j;
      }
    }
    if (best < 0) break;
    passive[static_cast<std::size_t>(best)] = true;

    bool first = true;
    while (true) {
      if (++res.iterations > max_iter) {
        throw Error(ErrorCode::kIterationLimit, "simplex_lsq exceeded " + std::to_string(max_iter) + " iterations");
      }
      solve_passive();
      bool feasible = true;
      for (Index c = 0; c < z.size(); ++c) feasible = feasible && z(c) > 0.0;
      if (feasible) {
        res.w.setZero();
        for (std::size_t c = 0; c < cols.size(); ++c) res.w(cols[c]) = z(static_cast<Index>(c));
        std::fill(excluded.begin(), excluded.end(), false);
        break;
      }
      if (first) {
        const auto it = std::find(cols.begin(), cols.end(), best);
        if (z(static_cast<Index>(it - cols.begin())) <= 0.0) {
          passive[static_cast<std::size_t>(best)] = false;
          excluded[static_cast<std::size_t>(best)] = true;
          break;
        }
      }
      first = false;
      std::vector<double> ratio(cols.size(), std::numeric_limits<double>::infinity());
      double step = 1.0;
      for (std::size_t c = 0; c < cols.size(); ++c) {
        const double zc = z(static_cast<Index>(c));
        if (zc <= 0.0) {
          const double wc = res.w(cols[c]);
          ratio[c] = wc / (wc - zc);
          step = std::min(step, ratio[c]);
        }
      }
      for (std::size_t c = 0; c < cols.size(); ++c) {
        const Index j = cols[c];
        const double next = res.w(j) + step * (z(static_cast<Index>(c)) - res.w(j));
        if (ratio[c] <= step * (1.0 + 1e-12) || next <= 0.0) {
          res.w(j) = 0.0;
          passive[static_cast<std::size_t>(j)] = false;
        } else {
          res.w(j) = next;
        }
      }
      // Weights move along a segment between two simplex points; renormalize
      // against drift from the dropped entries.
      res.w /= res.w.sum();
    }
  }
  res.residual_ss = (A * res.w - b).squaredNorm();
  return res;
}

// ---------------------------------------------------------------------------
// Archetypal analysis

struct AAConfig {
  Index K = 7;
  int max_iter = 500;
  double tol = 1e-9;  // relative RSS decrease
  std::uint64_t seed = 0;
  int n_restarts = 5;
};

struct AAResult {
  Matrix alpha;   // N x K, archetypes = curves * alpha
  Matrix beta;    // K x N, column i reconstructs curve i
  double rss = 0.0;
  std::vector<double> rss_history;  // RSS after every half-step
  bool converged = false;
  int iterations = 0;
  int restart = 0;
  bool rank_deficient = false;
  std::string deficiency;  // why the reconstruction system is degenerate
};

namespace detail {

/// FurthestSum initialization: from a random column, repeatedly add the
/// column with the largest summed distance to those chosen, then re-pick the
/// random start the same way. Favors hull vertices.
inline std::vector<Index> furthest_sum(const Matrix& X, Index K, Rng& rng) {
  const Index n = X.cols();
  std::uniform_int_distribution<Index> pick(0, n - 1);
  std::vector<Index> chosen{pick(rng)};
  Vector total = (X.colwise() - X.col(chosen[0])).colwise().norm().transpose();
  std::vector<bool> used(static_cast<std::size_t>(n), false);
  used[static_cast<std::size_t>(chosen[0])] = true;
  auto next = [&] {
    Index best = -1;
    for (Index i = 0; i < n; ++i)
      if (!used[static_cast<std::size_t>(i)] && (best < 0 || total(i) > total(best))) best = i;
    return best;
  };
  while (static_cast<Index>(chosen.size()) < K) {
    const Index i = next();
    chosen.push_back(i);
    used[static_cast<std::size_t>(i)] = true;
    total += (X.colwise() - X.col(i)).colwise().norm().transpose();
  }
  if (K < n) {
    // Replace the random start by the best remaining column.
    total -= (X.colwise() - X.col(chosen[0])).colwise().norm().transpose();
    used[static_cast<std::size_t>(chosen[0])] = false;
    const Index i = next();
    used[static_cast<std::size_t>(i)] = true;
    chosen[0] = i;
  }
  return chosen;
}

inline AAResult archetypes_run(const Matrix& X, Index K, const AAConfig& cfg, Rng& rng) {
  const Index n = X.cols();
  AAResult out;
  out.alpha = Matrix::Zero(n, K);
  const std::vector<Index> seeds = furthest_sum(X, K, rng);
  for (Index k = 0; k < K; ++k) out.alpha(seeds[static_cast<std::size_t>(k)], k) = 1.0;
  Matrix Z = X * out.alpha;
  out.beta = Matrix::Zero(K, n);
  const double floor = 1e-28 * std::max(X.squaredNorm(), std::numeric_limits<double>::min());

  double prev = std::numeric_limits<double>::infinity();
  for (int it = 1; it <= cfg.max_iter; ++it) {
    out.iterations = it;
    // Reconstruction weights for fixed archetypes.
    for (Index i = 0; i < n; ++i) out.beta.col(i) = simplex_lsq(Z, X.col(i)).w;
    Matrix R = X - Z * out.beta;
    out.rss_history.push_back(R.squaredNorm());

    // Archetype l minimizes ||R_{-l} - z beta_l||^2, i.e. the hull point
    // nearest to z_l + R beta_l^T / ||beta_l||^2.
    for (Index l = 0; l < K; ++l) {
      const Vector bl = out.beta.row(l).transpose();
      const double s = bl.squaredNorm();
      Vector znew;
      if (s < 1e-12) {
        // Unused archetype: move it to the worst-reconstructed curve. RSS is
        // unchanged because its weights are zero.
        Index worst = 0;
        R.colwise().squaredNorm().maxCoeff(&worst);
        out.alpha.col(l).setZero();
        out.alpha(worst, l) = 1.0;
        znew = X.col(worst);
      } else {
        const Vector target = Z.col(l) + R * bl / s;
        out.alpha.col(l) = simplex_lsq(X, target).w;
        znew = X * out.alpha.col(l);
      }
      R.noalias() -= (znew - Z.col(l)) * bl.transpose();
      Z.col(l) = znew;
    }
    const double rss = (X - Z * out.beta).squaredNorm();
    out.rss_history.push_back(rss);
    out.rss = rss;
    if (rss <= floor || (std::isfinite(prev) && prev - rss <= cfg.tol * prev)) {
      out.converged = true;
      break;
    }
    prev = rss;
  }
  for (Index i = 0; i < n; ++i) out.beta.col(i) = simplex_lsq(Z, X.col(i)).w;
  const double final_rss = (X - Z * out.beta).squaredNorm();
  if (final_rss <= out.rss) {
    out.rss = final_rss;
    out.rss_history.push_back(final_rss);
  }
  return out;
}

/// An archetype set is degenerate when an archetype carries no weight or is
/// itself a convex combination of the others: the reconstruction weights then
/// stop determining the archetypes.
inline void check_rank(const Matrix& X, AAResult& res) {
  const Index K = res.alpha.cols();
  const Matrix Z = X * res.alpha;
  const double diameter = std::sqrt(squared_distances(X).maxCoeff());
  const double usage_floor = 1e-9 * static_cast<double>(X.cols());
  for (Index l = 0; l < K; ++l) {
    if (res.beta.row(l).sum() <= usage_floor) {
      res.rank_deficient = true;
      res.deficiency = "archetype " + std::to_string(l) + " carries no reconstruction weight";
      return;
    }
  }
  if (K < 2) return;
  for (Index l = 0; l < K; ++l) {
    Matrix others(Z.rows(), K - 1);
    for (Index k = 0, c = 0; k < K; ++k)
      if (k != l) others.col(c++) = Z.col(k);
    const double resid = std::sqrt(simplex_lsq(others, Z.col(l)).residual_ss);
    if (resid <= 1e-6 * std::max(diameter, std::numeric_limits<double>::min())) {
      res.rank_deficient = true;
      res.deficiency = "archetype " + std::to_string(l) + " lies in the hull of the others";
      return;
    }
  }
}

}  // namespace detail

/// Alternating simplex-constrained least squares for archetypes. Keeps the
/// restart with the lowest RSS and reports convergence and rank status
/// without throwing.
inline AAResult archetypes_fit(const Dictionary& dict, const AAConfig& cfg) {
  require_valid(dict);
  if (cfg.K < 1) throw Error(ErrorCode::kInvalidArgument, "K must be >= 1");
  if (cfg.K > dict.size()) throw Error(ErrorCode::kInvalidArgument, "K must not exceed N");
  if (cfg.max_iter < 1 || cfg.n_restarts < 1) {
    throw Error(ErrorCode::kInvalidArgument, "max_iter and n_restarts must be >= 1");
  }
  if (count_distinct_columns(dict.curves) < cfg.K) {
    throw Error(ErrorCode::kDegenerateDictionary, "fewer than K distinct curves");
  }
  std::optional<AAResult> best;
  for (int r = 0; r < cfg.n_restarts; ++r) {
    Rng rng = make_rng(derive_seed(cfg.seed, {static_cast<std::uint64_t>(r)}));
    AAResult run = detail::archetypes_run(dict.curves, cfg.K, cfg, rng);
    run.restart = r;
    if (!best || run.rss < best->rss) best = std::move(run);
  }
  detail::check_rank(dict.curves, *best);
  return *best;
}

/// Archetypal-analysis prototypes. Throws NonConvergence (payload K) when the
/// requested count exceeds what the dictionary's hull supports.
inline PrototypeBasis archetypes_select(const Dictionary& dict, const AAConfig& cfg) {
  AAResult res = archetypes_fit(dict, cfg);
  if (res.rank_deficient) {
    throw Error(ErrorCode::kNonConvergence,
                "archetypal analysis cannot support K=" + std::to_string(cfg.K) + ": " + res.deficiency,
                std::nullopt, static_cast<long>(cfg.K));
  }
  Matrix alpha = res.alpha;
  for (Index k = 0; k < alpha.cols(); ++k) alpha.col(k) /= alpha.col(k).sum();
  return PrototypeBasis(dict, std::move(alpha), "aa");
}

// ---------------------------------------------------------------------------
// Sparse subset selection

struct SSSConfig {
  double lambda = 1e-3;
  int max_iter = 100000;
  double tol = 1e-8;  // relative objective change
  std::optional<Index> target_k;
  double row_threshold = 1e-6;
};

struct SSSResult {
  Matrix B;  // N x N, columns on the simplex
  std::vector<Index> selected;
  std::vector<double> objective_history;
  double lambda = 0.0;
  bool converged = false;
  int iterations = 0;
};

namespace detail {

/// Euclidean projection of v onto {x >= 0, sum(x) = 1}.
inline Vector project_simplex(const Vector& v) {
  std::vector<double> u(v.data(), v.data() + v.size());
  std::sort(u.begin(), u.end(), std::greater<>());
  double cumsum = 0.0;
  double theta = 0.0;
  for (std::size_t j = 0; j < u.size(); ++j) {
    cumsum += u[j];
    const double t = (cumsum - 1.0) / static_cast<double>(j + 1);
    if (u[j] - t > 0.0) theta = t;
  }
  return (v.array() - theta).cwiseMax(0.0).matrix();
}

inline Matrix group_shrink_rows(const Matrix& V, double amount) {
  Matrix out = V;
  for (Index i = 0; i < V.rows(); ++i) {
    const double norm = V.row(i).norm();
    out.row(i) *= norm > amount ? 1.0 - amount / norm : 0.0;
  }
  return out;
}

inline double sss_objective(const Matrix& X, const Matrix& B, double lambda) {
  const double n = static_cast<double>(X.cols());
  return (X - X * B).squaredNorm() / (2.0 * n) + lambda * B.rowwise().norm().sum();
}

/// Exact proximal map of amount * sum_i ||row_i|| plus the column-simplex
/// indicator. For fixed multipliers mu on the column-sum constraints the
/// problem separates by rows, row i being shrink(max(v_i + mu, 0)), so zero
/// rows are exact. The concave dual in mu is maximized by a damped
/// semismooth Newton method; `mu` carries a warm start between calls.
inline Matrix sss_prox(const Matrix& V, double amount, Vector& mu) {
  const Index n_rows = V.rows();
  const Index n_cols = V.cols();
  if (mu.size() != n_cols) {
    mu.resize(n_cols);
    for (Index c = 0; c < n_cols; ++c) mu(c) = (project_simplex(V.col(c)) - V.col(c)).maxCoeff();
  }
  Matrix B(n_rows, n_cols);
  Vector norms(n_rows);
  auto primal = [&](const Vector& m) {
    B = (V.rowwise() + m.transpose()).cwiseMax(0.0);
    for (Index i = 0; i < n_rows; ++i) {
      norms(i) = B.row(i).norm();
      B.row(i) *= norms(i) > amount ? 1.0 - amount / norms(i) : 0.0;
    }
  };
  auto dual = [&](const Vector& m) {
    double g = m.sum() + 0.5 * (B - V).squaredNorm() - (B * m).sum();
    for (Index i = 0; i < n_rows; ++i)
      if (norms(i) > amount) g += amount * (norms(i) - amount);
    return g;
  };

  primal(mu);
  double g = dual(mu);
  for (int it = 0; it < 200; ++it) {
    const Vector gap = Vector::Ones(n_cols) - B.colwise().sum().transpose();
    if (gap.cwiseAbs().maxCoeff() <= 1e-13) break;
    Matrix J = Matrix::Zero(n_cols, n_cols);
    for (Index i = 0; i < n_rows; ++i) {
      if (!(norms(i) > amount)) continue;
      const double r = norms(i);
      const Eigen::RowVectorXd raw = B.row(i) / (1.0 - amount / r);
      for (Index c = 0; c < n_cols; ++c)
        if (raw(c) > 0.0) J(c, c) += 1.0 - amount / r;
      J.noalias() += (amount / (r * r * r)) * raw.transpose() * raw;
    }
    for (Index c = 0; c < n_cols; ++c) J(c, c) += J(c, c) > 1e-14 ? 1e-12 : 1.0;
    const Vector step = J.ldlt().solve(gap);
    const double slope = gap.dot(step);
    double t = 1.0;
    bool moved = false;
    for (int ls = 0; ls < 60; ++ls, t *= 0.5) {
      const Vector trial = mu + t * step;
      primal(trial);
      const double gt = dual(trial);
      if (gt >= g + 1e-4 * t * slope) {
        mu = trial;
        g = gt;
        moved = true;
        break;
      }
    }
    if (!moved) {
      primal(mu);
      break;
    }
  }
  // Remove the residual column-sum error; zero rows stay zero.
  for (Index c = 0; c < n_cols; ++c) {
    const double s = B.col(c).sum();
    if (s > 0.0) B.col(c) /= s;
    else B.col(c) = project_simplex(V.col(c));
  }
  return B;
}

inline std::vector<Index> active_rows(const Matrix& B, double threshold) {
  std::vector<Index> rows;
  for (Index i = 0; i < B.rows(); ++i)
    if (B.row(i).norm() > threshold) rows.push_back(i);
  return rows;
}

}  // namespace detail

/// Proximal-gradient solver for
///   (1/2N) ||X - X B||_F^2 + lambda * sum_i ||B_i.||_2
/// over nonnegative B with unit column sums. Uses the monotone variant of
/// the accelerated proximal gradient method with adaptive restart, so the
/// recorded objective never increases. Stops when the objective falls by less than `tol` (relative)
/// over a window of 1000 iterations: the problem is degenerate and progress
/// per iteration becomes tiny long before the row support settles.
inline SSSResult sss_solve(const Matrix& X, double lambda, const SSSConfig& cfg,
                           const Matrix* warm_start = nullptr) {
  if (!(lambda > 0.0)) throw Error(ErrorCode::kInvalidArgument, "lambda must be positive");
  const Index n = X.cols();
  const Matrix gram = X.transpose() * X;
  const double nd = static_cast<double>(n);
  Eigen::SelfAdjointEigenSolver<Matrix> eig(gram, Eigen::EigenvaluesOnly);
  const double lipschitz = std::max(eig.eigenvalues().maxCoeff() / nd, std::numeric_limits<double>::min());
  const double step = 1.0 / lipschitz;
  constexpr int kWindow = 1000;

  SSSResult res;
  res.lambda = lambda;
  res.B = warm_start ? *warm_start : Matrix::Identity(n, n);
  double obj = detail::sss_objective(X, res.B, lambda);
  res.objective_history.push_back(obj);
  Matrix z = res.B;
  Vector mu;
  double t = 1.0;
  for (int it = 1; it <= cfg.max_iter; ++it) {
    res.iterations = it;
    const Matrix grad = (gram * z - gram) / nd;
    const Matrix u = detail::sss_prox(z - step * grad, step * lambda, mu);
    const double u_obj = detail::sss_objective(X, u, lambda);
    const Matrix prev = res.B;
    const bool accepted = u_obj <= obj;
    if (accepted) {
      res.B = u;
      obj = u_obj;
    }
    res.objective_history.push_back(obj);
    if (it >= kWindow) {
      const double before = res.objective_history[res.objective_history.size() - 1 - kWindow];
      if (before - obj <= cfg.tol * std::max(std::abs(obj), std::numeric_limits<double>::min())) {
        res.converged = true;
        break;
      }
    }
    // Restart the momentum after a rejected step or when it points uphill.
    if (!accepted || ((z - u).cwiseProduct(u - prev)).sum() > 0.0) {
      t = 1.0;
      z = res.B;
      continue;
    }
    const double t_next = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * t * t));
    z = res.B + (t / t_next) * (u - res.B) + ((t - 1.0) / t_next) * (res.B - prev);
    t = t_next;
  }
  res.selected = detail::active_rows(res.B, cfg.row_threshold);
  return res;
}

/// Sparse subset selection prototypes: the dictionary columns whose rows of B
/// stay active. With `target_k` set, lambda is bisected on a log scale until
/// exactly that many columns are selected.
inline PrototypeBasis sss_select(const Dictionary& dict, const SSSConfig& cfg, SSSResult* details = nullptr) {
  require_valid(dict);
  const Matrix& X = dict.curves;
  auto finish = [&](SSSResult res) {
    if (!res.converged) {
      throw Error(ErrorCode::kNotConverged,
                  "objective still changing after " + std::to_string(cfg.max_iter) + " iterations");
    }
    PrototypeBasis basis = indicator_basis(dict, res.selected, "sss");
    if (details) *details = std::move(res);
    return basis;
  };

  if (!cfg.target_k) return finish(sss_solve(X, cfg.lambda, cfg));

  const Index target = *cfg.target_k;
  if (target < 1 || target > dict.size()) throw Error(ErrorCode::kInvalidArgument, "target_k must lie in [1, N]");
  auto count = [](const SSSResult& r) { return static_cast<Index>(r.selected.size()); };

  // The count is not monotone in lambda, so scan outward from cfg.lambda for
  // adjacent values with count(lo) > target >= count(hi), then bisect.
  double lo = cfg.lambda;
  SSSResult lo_res = sss_solve(X, lo, cfg);
  Index nearest = count(lo_res);
  if (count(lo_res) == target) return finish(std::move(lo_res));
  for (int e = 0; e < 30 && count(lo_res) < target; ++e) {
    lo /= 4.0;
    lo_res = sss_solve(X, lo, cfg);
    if (std::abs(count(lo_res) - target) < std::abs(nearest - target)) nearest = count(lo_res);
    if (count(lo_res) == target) return finish(std::move(lo_res));
  }
  if (count(lo_res) < target) {
    throw Error(ErrorCode::kTargetKUnreachable, "no lambda selects as many as target_k columns", std::nullopt, nearest);
  }
  double hi = lo;
  std::optional<SSSResult> hi_res;
  for (int e = 0; e < 16; ++e) {
    hi = lo * 2.0;
    SSSResult r = sss_solve(X, hi, cfg, &lo_res.B);
    if (std::abs(count(r) - target) < std::abs(nearest - target)) nearest = count(r);
    if (count(r) == target) return finish(std::move(r));
    if (count(r) < target) {
      hi_res = std::move(r);
      break;
    }
    lo = hi;
    lo_res = std::move(r);
  }
  if (!hi_res) {
    throw Error(ErrorCode::kTargetKUnreachable, "lambda scan found no count at or below target_k", std::nullopt,
                nearest);
  }
  for (int step = 0; step < 50; ++step) {
    const double mid = std::sqrt(lo * hi);
    SSSResult mid_res = sss_solve(X, mid, cfg, &lo_res.B);
    const Index c = count(mid_res);
    if (std::abs(c - target) < std::abs(nearest - target)) nearest = c;
    if (c == target) return finish(std::move(mid_res));
    if (c > target) {
      lo = mid;
      lo_res = std::move(mid_res);
    } else {
      hi = mid;
    }
  }
  throw Error(ErrorCode::kTargetKUnreachable,
              "no lambda within 50 bisection steps selects " + std::to_string(target) + " columns", std::nullopt,
              nearest);
}

// ---------------------------------------------------------------------------
// Physicality guard

struct GuardReport {
  std::vector<double> relative_residual;  // per candidate column
  std::vector<Index> violations;
  bool ok() const { return violations.empty(); }
};

/// Checks whether each candidate prototype is a convex combination of the
/// dictionary curves, to within 1e-6 relative residual.
inline GuardReport guard_nonphysical(const Matrix& candidates, const Dictionary& dict, double rel_tol = 1e-6) {
  require_valid(dict);
  if (candidates.rows() != dict.length()) {
    throw Error(ErrorCode::kDimensionMismatch, "candidate length differs from dictionary length");
  }
  GuardReport report;
  for (Index k = 0; k < candidates.cols(); ++k) {
    const SimplexLsqResult fit = simplex_lsq(dict.curves, candidates.col(k));
    const double norm = candidates.col(k).norm();
    const double rel = std::sqrt(fit.residual_ss) / (norm > 0.0 ? norm : 1.0);
    report.relative_residual.push_back(rel);
    if (!(rel < rel_tol)) report.violations.push_back(k);
  }
  return report;
}

}  // namespace protobasis
