#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <cstring>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "protobasis/error.hpp"

namespace protobasis {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Index = Eigen::Index;

/// Absolute tolerance for simplex / nonnegativity checks.
inline constexpr double kSimplexTol = 1e-10;
/// Relative tolerance for residual identities.
inline constexpr double kResidualRelTol = 1e-8;

/// A dictionary of N component curves sampled on a common grid of p points.
/// Column i of `curves` is component X_i; row i of `params` holds its known
/// physical parameters.
struct Dictionary {
  Matrix curves;        // p x N
  Matrix params;        // N x d
  Vector sample_grid;   // p
  std::vector<std::string> labels;  // optional, one per parameter column

  Index size() const { return curves.cols(); }
  Index length() const { return curves.rows(); }
  Index param_dim() const { return params.cols(); }
};

/// Returns the first violated Dictionary invariant, or nullopt when valid.
inline std::optional<Error> validate_dictionary(const Dictionary& dict) {
  const Index p = dict.curves.rows();
  const Index n = dict.curves.cols();
  if (n < 1 || p < 1) {
    return Error(ErrorCode::kShapeMismatch, "dictionary must have at least one curve and one sample");
  }
  if (dict.sample_grid.size() != p) {
    return Error(ErrorCode::kShapeMismatch,
                 "sample_grid has " + std::to_string(dict.sample_grid.size()) +
                     " entries, curves have " + std::to_string(p) + " rows",
                 static_cast<std::size_t>(dict.sample_grid.size()));
  }
  if (dict.params.rows() != n) {
    return Error(ErrorCode::kShapeMismatch,
                 "params has " + std::to_string(dict.params.rows()) + " rows, expected " +
                     std::to_string(n),
                 static_cast<std::size_t>(dict.params.rows()));
  }
  if (dict.params.cols() < 1) {
    return Error(ErrorCode::kShapeMismatch, "params must have at least one column");
  }
  if (!dict.labels.empty() && static_cast<Index>(dict.labels.size()) != dict.params.cols()) {
    return Error(ErrorCode::kShapeMismatch, "one label per parameter column required",
                 dict.labels.size());
  }
  for (Index j = 0; j < n; ++j) {
    for (Index i = 0; i < p; ++i) {
      if (!std::isfinite(dict.curves(i, j))) {
        return Error(ErrorCode::kNonFiniteEntry,
                     "curves(" + std::to_string(i) + "," + std::to_string(j) + ") is not finite",
                     static_cast<std::size_t>(j * p + i));
      }
    }
  }
  for (Index j = 0; j < dict.params.cols(); ++j) {
    for (Index i = 0; i < n; ++i) {
      if (!std::isfinite(dict.params(i, j))) {
        return Error(ErrorCode::kNonFiniteEntry,
                     "params(" + std::to_string(i) + "," + std::to_string(j) + ") is not finite",
                     static_cast<std::size_t>(i));
      }
    }
  }
  for (Index i = 0; i < p; ++i) {
    if (!std::isfinite(dict.sample_grid(i))) {
      return Error(ErrorCode::kNonFiniteEntry, "sample_grid entry is not finite",
                   static_cast<std::size_t>(i));
    }
    if (i > 0 && !(dict.sample_grid(i) > dict.sample_grid(i - 1))) {
      return Error(ErrorCode::kNonMonotoneGrid,
                   "sample_grid not strictly increasing at index " + std::to_string(i),
                   static_cast<std::size_t>(i));
    }
  }
  return std::nullopt;
}

inline void require_valid(const Dictionary& dict) {
  if (auto err = validate_dictionary(dict)) throw *err;
}

namespace detail {

inline void fnv1a(std::uint64_t& h, const void* data, std::size_t bytes) {
  const auto* p = static_cast<const unsigned char*>(data);
  for (std::size_t i = 0; i < bytes; ++i) {
    h ^= p[i];
    h *= 0x100000001b3ULL;
  }
}

}  // namespace detail

/// Content hash of the numeric payload of a dictionary.
inline std::uint64_t fingerprint(const Dictionary& dict) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  const Index dims[3] = {dict.curves.rows(), dict.curves.cols(), dict.params.cols()};
  detail::fnv1a(h, dims, sizeof(dims));
  detail::fnv1a(h, dict.curves.data(), sizeof(double) * dict.curves.size());
  detail::fnv1a(h, dict.params.data(), sizeof(double) * dict.params.size());
  detail::fnv1a(h, dict.sample_grid.data(), sizeof(double) * dict.sample_grid.size());
  return h;
}

/// K prototypes Psi = X * alpha, each a convex combination of dictionary
/// columns. Immutable once built; construction enforces every invariant.
class PrototypeBasis {
 public:
  PrototypeBasis(const Dictionary& dict, Matrix alpha, std::string method_tag)
      : alpha_(std::move(alpha)), method_tag_(std::move(method_tag)) {
    check_alpha(dict);
    prototypes_ = dict.curves * alpha_;
    proto_params_ = alpha_.transpose() * dict.params;
    fingerprint_ = fingerprint(dict);
  }

  /// Rebuilds a basis from stored parts, rejecting precomputed prototypes or
  /// parameters that disagree with `dict * alpha` beyond 1e-10.
  PrototypeBasis(const Dictionary& dict, Matrix alpha, const Matrix& prototypes,
                 const Matrix& proto_params, std::string method_tag)
      : PrototypeBasis(dict, std::move(alpha), std::move(method_tag)) {
    if (prototypes.rows() != prototypes_.rows() || prototypes.cols() != prototypes_.cols() ||
        proto_params.rows() != proto_params_.rows() || proto_params.cols() != proto_params_.cols()) {
      throw Error(ErrorCode::kShapeMismatch, "precomputed prototype shapes disagree with alpha");
    }
    if ((prototypes - prototypes_).cwiseAbs().maxCoeff() > kSimplexTol) {
      throw Error(ErrorCode::kInvalidArgument, "precomputed prototypes differ from curves * alpha");
    }
    if ((proto_params - proto_params_).cwiseAbs().maxCoeff() > kSimplexTol) {
      throw Error(ErrorCode::kInvalidArgument, "precomputed prototype parameters differ from alpha^T params");
    }
  }

  const Matrix& alpha() const { return alpha_; }
  const Matrix& prototypes() const { return prototypes_; }
  const Matrix& proto_params() const { return proto_params_; }
  const std::string& method_tag() const { return method_tag_; }
  std::uint64_t source_fingerprint() const { return fingerprint_; }
  Index size() const { return alpha_.cols(); }
  Index length() const { return prototypes_.rows(); }

 private:
  void check_alpha(const Dictionary& dict) {
    require_valid(dict);
    if (alpha_.rows() != dict.size()) {
      throw Error(ErrorCode::kShapeMismatch,
                  "alpha has " + std::to_string(alpha_.rows()) + " rows, dictionary has " +
                      std::to_string(dict.size()) + " curves");
    }
    if (alpha_.cols() < 1 || alpha_.cols() > dict.size()) {
      throw Error(ErrorCode::kShapeMismatch, "basis size must satisfy 1 <= K <= N");
    }
    for (Index k = 0; k < alpha_.cols(); ++k) {
      for (Index i = 0; i < alpha_.rows(); ++i) {
        const double a = alpha_(i, k);
        if (!std::isfinite(a) || a < -kSimplexTol) {
          throw Error(ErrorCode::kInvalidArgument,
                      "alpha(" + std::to_string(i) + "," + std::to_string(k) + ") is negative",
                      static_cast<std::size_t>(k));
        }
        if (a < 0.0) alpha_(i, k) = 0.0;
      }
      if (std::abs(alpha_.col(k).sum() - 1.0) > kSimplexTol) {
        throw Error(ErrorCode::kInvalidArgument,
                    "alpha column " + std::to_string(k) + " does not sum to 1",
                    static_cast<std::size_t>(k));
      }
    }
  }

  Matrix alpha_;
  Matrix prototypes_;
  Matrix proto_params_;
  std::string method_tag_;
  std::uint64_t fingerprint_ = 0;
};

/// Builds an indicator basis selecting the given dictionary columns.
inline PrototypeBasis indicator_basis(const Dictionary& dict, const std::vector<Index>& columns,
                                      std::string method_tag) {
  Matrix alpha = Matrix::Zero(dict.size(), static_cast<Index>(columns.size()));
  for (std::size_t k = 0; k < columns.size(); ++k) alpha(columns[k], static_cast<Index>(k)) = 1.0;
  return PrototypeBasis(dict, std::move(alpha), std::move(method_tag));
}

/// Builds a cluster-mean basis: alpha_ik = 1/|S_k| for i in S_k.
inline PrototypeBasis cluster_mean_basis(const Dictionary& dict, const std::vector<Index>& labels,
                                         Index n_clusters, std::string method_tag) {
  Matrix alpha = Matrix::Zero(dict.size(), n_clusters);
  std::vector<Index> counts(static_cast<std::size_t>(n_clusters), 0);
  for (Index label : labels) ++counts[static_cast<std::size_t>(label)];
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const Index k = labels[i];
    alpha(static_cast<Index>(i), k) = 1.0 / static_cast<double>(counts[static_cast<std::size_t>(k)]);
  }
  return PrototypeBasis(dict, std::move(alpha), std::move(method_tag));
}

struct Truth {
  Vector gamma;  // length N, on the simplex
  Vector rho;    // length d
};

/// An observed data vector with optional noise scale and ground truth.
struct Observation {
  Vector y;
  std::optional<Vector> noise_scale;
  std::optional<Truth> truth;
};

/// Scaled simplex mixture fit: y ~ scale * Psi * beta.
struct MixtureFit {
  Vector beta;
  double scale = 0.0;
  double residual_ss = 0.0;
  std::optional<double> chi_square;
  int iterations = 0;
  bool zero_fit = false;
};

struct ReportRow {
  std::string method_tag;
  Index K = 0;
  int rep_count = 0;
  double mean_mse = 0.0;
  double band_low = 0.0;
  double band_high = 0.0;
  double wall_time = 0.0;  // seconds spent building and evaluating this cell
  bool failed = false;
  std::string reason;
  std::vector<double> rep_mse;  // per-repetition MSE, in repetition order
};

}  // namespace protobasis
