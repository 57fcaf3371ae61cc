#include <gtest/gtest.h>

#include <algorithm>

#include "fixtures.hpp"

using namespace protobasis;

namespace {

MixtureFit fit_with(const Vector& beta, double scale = 1.0) {
  MixtureFit f;
  f.beta = beta;
  f.scale = scale;
  return f;
}

Dictionary sigma_dictionary(const std::vector<double>& sig) {
  Dictionary d = gaussian_dictionary({0.5, 0.5, 1.0}, {-4.0, 4.0, 0.5});
  Matrix curves(d.length(), static_cast<Index>(sig.size()));
  Matrix params(static_cast<Index>(sig.size()), 1);
  for (std::size_t i = 0; i < sig.size(); ++i) {
    const Dictionary one = gaussian_dictionary({sig[i], sig[i], 1.0}, {-4.0, 4.0, 0.5});
    curves.col(static_cast<Index>(i)) = one.curves.col(0);
    params(static_cast<Index>(i), 0) = sig[i];
  }
  d.curves = curves;
  d.params = params;
  return d;
}

ExperimentConfig small_experiment() {
  ExperimentConfig cfg;
  cfg.dictionary.sigma = {0.2, 8.0, 0.2};
  cfg.sim = {30, 5, 0.05, 0};
  cfg.methods = {{"km", "km", {{"n_restarts", 3}}}, {"uss", "uss", nlohmann::json::object()}};
  cfg.k_values = {3, 6};
  cfg.grid_baselines = {GridSpacing::kUniformSigma};
  cfg.n_reps = 4;
  cfg.seed = 17;
  return cfg;
}

}  // namespace

TEST(EstimateTarget, PurePrototype) {
  const Dictionary d = sigma_dictionary({0.5, 1.0, 4.0});
  const PrototypeBasis b = indicator_basis(d, {0, 1, 2}, "t");
  EXPECT_DOUBLE_EQ(estimate_target(fit_with(Vector::Unit(3, 2)), b)(0), 4.0);
}

TEST(EstimateTarget, UniformWeightsGiveTheMean) {
  const Dictionary d = sigma_dictionary({1.0, 2.0, 3.0});
  const PrototypeBasis b = indicator_basis(d, {0, 1, 2}, "t");
  EXPECT_NEAR(estimate_target(fit_with(Vector::Constant(3, 1.0 / 3.0)), b)(0), 2.0, 1e-15);
}

TEST(EstimateTarget, HandComputedCombination) {
  const Dictionary d = sigma_dictionary({0.5, 4.0});
  const PrototypeBasis b = indicator_basis(d, {0, 1}, "t");
  Vector beta(2);
  beta << 0.3, 0.7;
  EXPECT_NEAR(estimate_target(fit_with(beta), b)(0), 2.95, 1e-14);
  // The raw convention applies the scale as well.
  EXPECT_NEAR(estimate_target(fit_with(beta, 2.0), b, TargetWeighting::kRaw)(0), 5.9, 1e-14);
}

TEST(EstimateTarget, DimensionMismatch) {
  const Dictionary d = sigma_dictionary({0.5, 4.0});
  const PrototypeBasis b = indicator_basis(d, {0, 1}, "t");
  try {
    estimate_target(fit_with(Vector::Ones(3) / 3.0), b);
    FAIL() << "expected DimensionMismatch";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kDimensionMismatch);
  }
}

TEST(EstimateTarget, InvariantUnderJointPermutation) {
  const Dictionary d = fixture::benchmark_dictionary();
  const std::vector<Index> cols{3, 50, 100, 140};
  const std::vector<Index> perm{100, 3, 140, 50};
  const PrototypeBasis a = indicator_basis(d, cols, "a");
  const PrototypeBasis b = indicator_basis(d, perm, "b");
  Vector beta(4);
  beta << 0.1, 0.2, 0.3, 0.4;
  Vector beta_perm(4);
  beta_perm << 0.3, 0.1, 0.4, 0.2;
  EXPECT_NEAR(estimate_target(fit_with(beta), a)(0), estimate_target(fit_with(beta_perm), b)(0), 1e-14);
}

TEST(EstimateTarget, SimplexEstimatesStayInParameterRange) {
  const Dictionary d = fixture::benchmark_dictionary();
  KMeansConfig km;
  km.K = 10;
  km.n_restarts = 2;
  const std::vector<PrototypeBasis> bases{kmeans_select(d, km), uss_select(d, 12),
                                          grid_basis(d, 7, GridSpacing::kUniformLogSigma)};
  const double lo = d.params.minCoeff();
  const double hi = d.params.maxCoeff();
  for (const auto& b : bases) {
    for (const auto& o : simulate_mixtures(d, {60, 5, 0.05, 23})) {
      const double rho = estimate_target(simplex_fit(b, o), b)(0);
      EXPECT_GE(rho, lo - 1e-12);
      EXPECT_LE(rho, hi + 1e-12);
    }
  }
}

TEST(GridBasis, TwoUniformPicksEndpoints) {
  const Dictionary d = fixture::benchmark_dictionary();
  const PrototypeBasis b = grid_basis(d, 2, GridSpacing::kUniformSigma);
  EXPECT_NEAR(b.proto_params()(0, 0), 0.2, 1e-12);
  EXPECT_NEAR(b.proto_params()(1, 0), 8.0, 1e-12);
}

TEST(GridBasis, FullSizeIsWholeDictionary) {
  const Dictionary d = fixture::benchmark_dictionary();
  const PrototypeBasis b = grid_basis(d, d.size(), GridSpacing::kUniformSigma);
  for (Index i = 0; i < d.size(); ++i) EXPECT_EQ(b.alpha().row(i).sum(), 1.0) << i;
}

TEST(GridBasis, LogSpacedTargets) {
  const Dictionary d = fixture::benchmark_dictionary();
  const PrototypeBasis b = grid_basis(d, 5, GridSpacing::kUniformLogSigma);
  for (int k = 0; k < 5; ++k) {
    const double target = 0.2 * std::pow(40.0, k / 4.0);
    double nearest = std::numeric_limits<double>::infinity();
    for (Index i = 0; i < d.size(); ++i)
      if (std::abs(d.params(i, 0) - target) < std::abs(nearest - target)) nearest = d.params(i, 0);
    EXPECT_NEAR(b.proto_params()(k, 0), nearest, 1e-12) << "target " << target;
  }
}

TEST(Mse, Examples) {
  std::vector<Vector> t(10, Vector::Constant(1, 1.0));
  EXPECT_EQ(mse(t, t)(0), 0.0);
  std::vector<Vector> off(10, Vector::Constant(1, 1.1));
  EXPECT_NEAR(mse(off, t)(0), 0.01, 1e-15);
  EXPECT_DOUBLE_EQ(mse({Vector::Constant(1, 1.0), Vector::Constant(1, 3.0)},
                       {Vector::Constant(1, 2.0), Vector::Constant(1, 1.0)})(0),
                   2.5);
  try {
    mse({Vector::Zero(1)}, {});
    FAIL() << "expected LengthMismatch";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kLengthMismatch);
  }
}

TEST(Percentile, LinearInterpolation) {
  EXPECT_DOUBLE_EQ(percentile({4.0, 1.0, 3.0, 2.0}, 0.5), 2.5);
  EXPECT_DOUBLE_EQ(percentile({1.0, 2.0}, 0.16), 1.16);
  EXPECT_DOUBLE_EQ(percentile({5.0}, 0.84), 5.0);
}

TEST(Experiment, NoiselessPureComponentsAreRecoveredByFullDictionary) {
  ExperimentConfig cfg = small_experiment();
  cfg.sim = {20, 1, 0.0, 0};
  for (TargetWeighting w : {TargetWeighting::kSimplex, TargetWeighting::kRaw}) {
    cfg.target_weighting = w;
    const ExperimentReport r = run_experiment(cfg);
    const ReportRow* full = r.find("full", 40);
    ASSERT_NE(full, nullptr);
    EXPECT_FALSE(full->failed);
    EXPECT_LE(full->mean_mse, 1e-20);
  }
}

TEST(Experiment, ReportIsDeterministicAndIndependentOfJobs) {
  ExperimentConfig cfg = small_experiment();
  cfg.jobs = 1;
  const ExperimentReport a = run_experiment(cfg);
  cfg.jobs = 3;
  const ExperimentReport b = run_experiment(cfg);
  ASSERT_EQ(a.rows.size(), b.rows.size());
  for (std::size_t i = 0; i < a.rows.size(); ++i) {
    EXPECT_EQ(a.rows[i].method_tag, b.rows[i].method_tag);
    EXPECT_EQ(a.rows[i].rep_mse, b.rows[i].rep_mse);
    EXPECT_EQ(a.rows[i].mean_mse, b.rows[i].mean_mse);
    EXPECT_LE(a.rows[i].band_low, a.rows[i].band_high);
  }
}

TEST(Experiment, RepetitionsAreReproducibleStandalone) {
  const ExperimentConfig cfg = small_experiment();
  const ExperimentReport report = run_experiment(cfg);
  const Dictionary d = experiment_dictionary(cfg);
  const ReportRow* row = report.find("km", 6);
  ASSERT_NE(row, nullptr);
  const PrototypeBasis basis = select_basis(d, "km", 6, cfg.methods[0].options, selector_seed(cfg.seed, "km", 6));
  for (int r = 0; r < cfg.n_reps; ++r) {
    MixtureSimConfig sim = cfg.sim;
    sim.seed = repetition_seed(cfg.seed, r);
    const double v = score_basis(basis, simulate_mixtures(d, sim), cfg.fit, cfg.target_weighting).mean();
    EXPECT_EQ(v, row->rep_mse[static_cast<std::size_t>(r)]) << "repetition " << r;
  }
}

TEST(Experiment, FailedCellsAreReportedNotThrown) {
  ExperimentConfig cfg = small_experiment();
  cfg.methods.push_back({"aa", "aa", {{"n_restarts", 1}}});
  cfg.k_values = {3, 12};
  cfg.grid_baselines.clear();
  // Seven hull vertices support at most seven archetypes.
  const ExperimentReport r = run_experiment(cfg, fixture::heptagon_cloud(7, 60));
  const ReportRow* bad = r.find("aa", 12);
  ASSERT_NE(bad, nullptr);
  EXPECT_TRUE(bad->failed);
  EXPECT_NE(bad->reason.find("NonConvergence"), std::string::npos) << bad->reason;
  EXPECT_FALSE(r.find("aa", 3)->failed);
  EXPECT_FALSE(r.find("km", 12)->failed);
}

TEST(Experiment, ConfigRoundTripsThroughJson) {
  ExperimentConfig cfg = small_experiment();
  cfg.target_weighting = TargetWeighting::kRaw;
  const nlohmann::json j = to_json(cfg);
  const ExperimentConfig back = experiment_config_from_json(j);
  EXPECT_EQ(to_json(back), j);
}

TEST(Experiment, InvalidConfigsAreRejected) {
  ExperimentConfig cfg = small_experiment();
  cfg.methods.clear();
  EXPECT_THROW(run_experiment(cfg), Error);
  EXPECT_THROW(experiment_config_from_json({{"bogus", 1}}), Error);
  EXPECT_THROW(experiment_config_from_json({{"target_weighting", "sideways"}}), Error);
  ExperimentConfig unknown = small_experiment();
  unknown.methods = {{"x", "nmf", nlohmann::json::object()}};
  try {
    run_experiment(unknown);
    FAIL() << "expected UnknownMethod";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kUnknownMethod);
  }
}
