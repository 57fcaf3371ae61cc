#pragma once

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <random>
#include <vector>

#include "protobasis/model.hpp"
#include "protobasis/rng.hpp"

namespace protobasis {

/// Closed arithmetic range min, min+step, ..., <= max.
struct GridRange {
  double min = 0.0;
  double max = 0.0;
  double step = 1.0;

  Index count() const {
    if (!(step > 0.0) || !std::isfinite(min) || !std::isfinite(max) || max < min) return 0;
    // Absorbs rounding in (max - min) / step so that 0.2:8:0.05 has 157 points.
    return static_cast<Index>(std::floor((max - min) / step + 1e-9)) + 1;
  }

  Vector values() const {
    const Index n = count();
    Vector v(n);
    for (Index i = 0; i < n; ++i) v(i) = min + static_cast<double>(i) * step;
    return v;
  }
};

struct MixtureSimConfig {
  int n_observations = 100;
  int max_components = 5;
  double noise_sd = 0.05;
  std::uint64_t seed = 0;
};

/// Dictionary of zero-mean unit-area Gaussian densities, one per sigma,
/// sampled on the x grid. params column 0 holds sigma.
inline Dictionary gaussian_dictionary(const GridRange& sigma, const GridRange& x) {
  if (!(sigma.min > 0.0)) throw Error(ErrorCode::kInvalidArgument, "sigma_min must be positive");
  if (!(sigma.step > 0.0) || !(x.step > 0.0)) {
    throw Error(ErrorCode::kInvalidArgument, "grid steps must be positive");
  }
  if (sigma.count() == 0) throw Error(ErrorCode::kEmptyGrid, "sigma range contains no points");
  if (x.count() == 0) throw Error(ErrorCode::kEmptyGrid, "x range contains no points");

  Dictionary dict;
  const Vector sigmas = sigma.values();
  dict.sample_grid = x.values();
  dict.curves.resize(dict.sample_grid.size(), sigmas.size());
  const double norm = 1.0 / std::sqrt(2.0 * std::numbers::pi);
  for (Index j = 0; j < sigmas.size(); ++j) {
    const double s = sigmas(j);
    for (Index i = 0; i < dict.sample_grid.size(); ++i) {
      const double z = dict.sample_grid(i) / s;
      dict.curves(i, j) = norm / s * std::exp(-0.5 * z * z);
    }
  }
  dict.params = sigmas;
  dict.labels = {"sigma"};
  return dict;
}

/// Draws one sparse mixture observation from its own substream. The support
/// size is uniform on {1..max_components}, the support is uniform without
/// replacement and the weights are flat-Dirichlet.
inline Observation simulate_one(const Dictionary& dict, const MixtureSimConfig& cfg, Index j) {
  Rng rng = make_rng(derive_seed(cfg.seed, {static_cast<std::uint64_t>(j)}));
  const Index n = dict.size();

  std::uniform_int_distribution<int> support_size(1, cfg.max_components);
  const int m = support_size(rng);

  std::vector<Index> pool(static_cast<std::size_t>(n));
  std::iota(pool.begin(), pool.end(), Index{0});
  for (int s = 0; s < m; ++s) {
    std::uniform_int_distribution<Index> pick(s, n - 1);
    std::swap(pool[static_cast<std::size_t>(s)], pool[static_cast<std::size_t>(pick(rng))]);
  }

  std::exponential_distribution<double> expo(1.0);
  std::vector<double> w(static_cast<std::size_t>(m));
  double total = 0.0;
  for (auto& v : w) total += (v = expo(rng));

  Truth truth;
  truth.gamma = Vector::Zero(n);
  for (int s = 0; s < m; ++s) truth.gamma(pool[static_cast<std::size_t>(s)]) = w[static_cast<std::size_t>(s)] / total;
  truth.rho = dict.params.transpose() * truth.gamma;

  Observation obs;
  obs.y = dict.curves * truth.gamma;
  if (cfg.noise_sd > 0.0) {
    std::normal_distribution<double> noise(0.0, cfg.noise_sd);
    for (Index i = 0; i < obs.y.size(); ++i) obs.y(i) += noise(rng);
  }
  obs.truth = std::move(truth);
  return obs;
}

inline std::vector<Observation> simulate_mixtures(const Dictionary& dict, const MixtureSimConfig& cfg) {
  require_valid(dict);
  if (cfg.n_observations < 1) throw Error(ErrorCode::kInvalidArgument, "n_observations must be >= 1");
  if (cfg.max_components < 1 || cfg.max_components > dict.size()) {
    throw Error(ErrorCode::kInvalidArgument, "max_components must lie in [1, N]");
  }
  if (!(cfg.noise_sd >= 0.0)) throw Error(ErrorCode::kInvalidArgument, "noise_sd must be >= 0");

  std::vector<Observation> out;
  out.reserve(static_cast<std::size_t>(cfg.n_observations));
  for (Index j = 0; j < cfg.n_observations; ++j) out.push_back(simulate_one(dict, cfg, j));
  return out;
}

inline Vector true_target(const Observation& obs) {
  if (!obs.truth) throw Error(ErrorCode::kMissingTruth, "observation carries no ground truth");
  return obs.truth->rho;
}

}  // namespace protobasis
