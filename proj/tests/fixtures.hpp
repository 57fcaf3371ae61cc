#pragma once

#include <cmath>
#include <random>
#include <string>
#include <vector>

#include "protobasis/protobasis.hpp"

namespace fixture {

using namespace protobasis;

/// Dictionary over arbitrary columns; params are the column indices and the
/// grid is 0..p-1.
inline Dictionary from_columns(const Matrix& curves) {
  Dictionary d;
  d.curves = curves;
  d.params.resize(curves.cols(), 1);
  for (Index i = 0; i < curves.cols(); ++i) d.params(i, 0) = static_cast<double>(i);
  d.sample_grid = Vector::LinSpaced(curves.rows(), 0.0, static_cast<double>(curves.rows() - 1));
  return d;
}

/// One-dimensional "curves" (p = 1) with the values themselves as params.
inline Dictionary scalar_points(const std::vector<double>& values) {
  Matrix curves(1, static_cast<Index>(values.size()));
  for (std::size_t i = 0; i < values.size(); ++i) curves(0, static_cast<Index>(i)) = values[i];
  Dictionary d = from_columns(curves);
  d.params = curves.transpose();
  d.sample_grid = Vector::Zero(1);
  return d;
}

inline Dictionary benchmark_dictionary() { return gaussian_dictionary({0.2, 8.0, 0.05}, {-8.0, 8.0, 0.05}); }

/// The 32-curve Gaussian grid spanning the same sigma range.
inline Dictionary coarse_dictionary() { return gaussian_dictionary({0.2, 8.0, 7.8 / 31.0}, {-8.0, 8.0, 0.05}); }

/// 2-D cloud: the 7 vertices of a regular heptagon (unit circumradius) plus
/// points drawn uniformly inside it, 250 in total.
inline Dictionary heptagon_cloud(std::uint64_t seed = 7, Index n = 250) {
  constexpr int kVertices = 7;
  const double pi = std::acos(-1.0);
  Matrix P(2, n);
  for (int v = 0; v < kVertices; ++v) {
    P(0, v) = std::cos(2.0 * pi * v / kVertices);
    P(1, v) = std::sin(2.0 * pi * v / kVertices);
  }
  auto inside = [&](double x, double y) {
    for (int v = 0; v < kVertices; ++v) {
      const int w = (v + 1) % kVertices;
      if ((P(0, w) - P(0, v)) * (y - P(1, v)) - (P(1, w) - P(1, v)) * (x - P(0, v)) < 0.0) return false;
    }
    return true;
  };
  Rng rng = make_rng(seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (Index i = kVertices; i < n;) {
    const double x = u(rng);
    const double y = u(rng);
    if (inside(x, y)) {
      P(0, i) = x;
      P(1, i) = y;
      ++i;
    }
  }
  return from_columns(P);
}

/// Two tight, well-separated groups of 2-D points.
inline Dictionary two_clusters() {
  Matrix P(2, 8);
  P << 0.0, 0.1, 0.05, 0.12, 5.0, 5.1, 4.95, 5.05,
       0.0, 0.05, 0.1, -0.05, 5.0, 4.9, 5.1, 5.05;
  return from_columns(P);
}

/// Empty string when every PrototypeBasis invariant holds, else the reason.
inline std::string basis_violation(const PrototypeBasis& b, const Dictionary& d) {
  const Matrix& a = b.alpha();
  if (a.rows() != d.size() || b.size() > d.size() || b.size() < 1) return "shape";
  if (a.minCoeff() < -1e-10) return "negative alpha";
  for (Index k = 0; k < a.cols(); ++k)
    if (std::abs(a.col(k).sum() - 1.0) > 1e-10) return "alpha column " + std::to_string(k) + " does not sum to 1";
  if ((b.prototypes() - d.curves * a).cwiseAbs().maxCoeff() > 1e-10) return "prototypes differ from curves*alpha";
  if ((b.proto_params() - a.transpose() * d.params).cwiseAbs().maxCoeff() > 1e-10) return "proto_params mismatch";
  if (b.source_fingerprint() != fingerprint(d)) return "fingerprint";
  return {};
}

}  // namespace fixture
