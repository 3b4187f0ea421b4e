#include <gtest/gtest.h>

#include <cmath>

#include "kmse/io.hpp"
#include "kmse/kmse.hpp"

using namespace kmse;

namespace {

MixtureModel two_blobs() {
  MixtureModel q;
  q.weights = (Vector(2) << 0.3, 0.7).finished();
  q.means = (Matrix(2, 2) << -1.0, 0.5, 1.5, -0.2).finished();
  q.variances = (Vector(2) << 0.4, 0.9).finished();
  return q;
}

Dataset blob_sample(std::uint64_t seed, Eigen::Index n) {
  RngStream rng(seed, 0);
  MixtureParams p = two_blobs().as_params();
  return sample_mixture(p, n, rng);
}

}  // namespace

// shrinkage admissibility bound

TEST(ShrinkageBound, RiskDifferenceExamples) {
  const double c = 0.7, b = 1.5, n = 12.0, mu = 0.4;
  const double nb = std::pow(n, b);
  EXPECT_NEAR(skmse_risk_difference_exact(c, b, n, mu, mu), n * c * c * mu / (n * (nb + c) * (nb + c)),
              1e-15);
  EXPECT_GT(skmse_risk_difference_exact(c, b, n, mu, mu), 0.0);
  for (double m : {1.0, 10.0, 1e4}) EXPECT_LT(skmse_risk_difference_exact(c, b, m, 0.0, 1.0), 0.0);
  EXPECT_LT(skmse_risk_difference_exact(1.0, 2.0, 10.0, 0.2, 1.0), 0.0);
  EXPECT_NEAR(skmse_admissibility_ratio(1.0, 2.0, 10.0), 201.0 / 211.0, 1e-15);
  EXPECT_THROW(skmse_risk_difference_exact(1.0, 2.0, 10.0, 0.5, 0.2), input_error);
  EXPECT_THROW(skmse_risk_difference_exact(0.0, 2.0, 10.0, 0.1, 0.2), input_error);
}

TEST(ShrinkageBound, AdmissibilityBound) {
  const double a = theorem1_admissibility_bound(1.0, 2.0);
  EXPECT_NEAR(a, 2.0 * std::sqrt(2.0) / (2.0 * std::sqrt(2.0) + 1.0), 1e-15);
  EXPECT_NEAR(a, 0.7388, 1e-4);
  EXPECT_NEAR(admissibility_infimum_real(1.0, 2.0), a, 1e-9);
  EXPECT_GE(admissibility_infimum_integer(1.0, 2.0, 1000), a);
  EXPECT_GT(theorem1_admissibility_bound(1e-10, 2.0), 0.99999);
  // The closed form tends to 1/2, not 1, as b grows.
  EXPECT_NEAR(theorem1_admissibility_bound(1.0, 1e6), 0.5, 1e-4);
  EXPECT_NEAR(admissibility_infimum_real(1.0, 50.0), theorem1_admissibility_bound(1.0, 50.0), 1e-6);
  EXPECT_GT(theorem1_admissibility_bound(1.0, 3.0), theorem1_admissibility_bound(1.0, 30.0));
  EXPECT_THROW(theorem1_admissibility_bound(1.0, 1.0), input_error);
  EXPECT_THROW(theorem1_admissibility_bound(-1.0, 2.0), input_error);
}

TEST(ShrinkageBound, ClosedFormMatchesBruteForce) {
  for (double c : {0.05, 0.5, 2.0, 20.0})
    for (double b : {1.1, 1.7, 2.5, 6.0})
      EXPECT_NEAR(theorem1_admissibility_bound(c, b), admissibility_infimum_real(c, b), 1e-6) << c << " " << b;
}

// component-wise shrinkage

TEST(ComponentShrinkage, ComponentRiskDifferenceExamples) {
  EXPECT_EQ(component_risk_difference(0.0, 0.5, 1.0, 0.2), 0.0);
  const double hi = component_shrinkage_bound(0.5, 1.0, 0.2);
  EXPECT_NEAR(component_risk_difference(hi, 0.5, 1.0, 0.2), 0.0, 1e-15);
  EXPECT_DOUBLE_EQ(component_risk_difference(1.0, 1.0, 0.3, 0.3), -1.0);
  EXPECT_GT(component_risk_difference(-0.1, 0.5, 1.0, 0.2), 0.0);
  EXPECT_GT(component_risk_difference(hi * 1.01, 0.5, 1.0, 0.2), 0.0);
  EXPECT_THROW(component_risk_difference(0.5, 0.0, 1.0, 0.2), input_error);
}

// spectral and operator equivalence

TEST(SpectralEquivalence, SpectralEquivalenceExamples) {
  RngStream rng(1, 0);
  const auto kbar = random_normalized_gram(20, rng, true);
  EXPECT_LE(verify_spectral_equivalence(kbar, filter::Landweber{10, 1.0}), 1e-8);
  EXPECT_LE(verify_spectral_equivalence(kbar, filter::IteratedTikhonov{3, 0.05}), 1e-8);
  EXPECT_EQ(verify_spectral_equivalence(kbar, filter::Landweber{0, 1.0}), 0.0);
  EXPECT_EQ(verify_spectral_equivalence(kbar, filter::NuMethod{0, 1.0}), 0.0);
}

TEST(OperatorEquivalence, OperatorEquivalenceExamples) {
  const Dataset one(Matrix::Ones(1, 1));
  EXPECT_LE(verify_operator_equivalence(one, 1.0), 1e-15);
  const auto beta = spectral_weights(normalized_gram(one, KernelSpec::linear(1.0)), filter::Tikhonov{1.0});
  EXPECT_NEAR(beta.weights[0], 0.5, 1e-15);

  RngStream rng(2, 0);
  const Dataset x(rng.normal_matrix(40, 5));
  for (double lambda : {1e-6, 0.1, 1.0}) EXPECT_LE(verify_operator_equivalence(x, lambda), 1e-8);
  EXPECT_THROW(verify_operator_equivalence(x, 0.1, KernelSpec::gaussian(1.0)), unsupported_error);
  EXPECT_THROW(verify_operator_equivalence(Dataset(Matrix::Ones(3, 21)), 0.1), input_error);
}

// rates

TEST(Rates, ExactSlopeAndLimits) {
  RateExperimentConfig cfg;
  cfg.moments = LinearMoments::gaussian(Vector::Zero(3), Matrix::Identity(3, 3));
  const auto r = rate_experiment(cfg);
  EXPECT_TRUE(r.exact);
  EXPECT_NEAR(r.slope, -1.0, 0.05);

  cfg.c = 1e-12;
  for (const auto& row : rate_experiment(cfg).rows) EXPECT_LE(std::abs(row.risk - row.kme_risk), 1e-10);

  cfg.c = 1.0;
  cfg.b = 8.0;
  cfg.n_grid = {10, 100, 1000};
  for (const auto& row : rate_experiment(cfg).rows)
    EXPECT_LE(std::abs(row.risk - row.kme_risk), 1e-7 * row.kme_risk) << row.n;
}

TEST(Rates, GridValidation) {
  RateExperimentConfig cfg;
  cfg.moments = LinearMoments{0.0, 1.0};
  cfg.n_grid = {10, 100};
  EXPECT_THROW(rate_experiment(cfg), input_error);
  cfg.n_grid = {10, 100, 50};
  EXPECT_THROW(rate_experiment(cfg), input_error);
  cfg.n_grid = {10, 100, 1000};
  cfg.moments.reset();
  EXPECT_THROW(rate_experiment(cfg), unsupported_error);
}

TEST(Rates, MixtureMoments) {
  MixtureParams p;
  p.weights = (Vector(2) << 0.5, 0.5).finished();
  p.means = {Vector::Constant(2, 1.0), Vector::Constant(2, -1.0)};
  p.covariances = {Matrix::Identity(2, 2), Matrix::Zero(2, 2)};
  p.noise_var = 0.1;
  const auto m = LinearMoments::mixture(p);
  EXPECT_NEAR(m.mean_norm_sq, 0.0, 1e-15);
  EXPECT_NEAR(m.k_diag_mean, 2.0 + 0.5 * 2.0 + 2 * 0.1, 1e-14);
}

TEST(Rates, LogLogSlope) {
  EXPECT_NEAR(log_log_slope({1, 10, 100}, {5, 0.5, 0.05}), -1.0, 1e-12);
  EXPECT_THROW(log_log_slope({1, 10}, {1, -1}), input_error);
}

// verify entry points

TEST(Verify, AllChecksPass) {
  for (const auto& v : {check_prop1(1, 10), check_prop2(1, 5), check_thm1(1, 2000), check_thm2(1, 2000),
                        check_rates()})
    EXPECT_TRUE(v.pass) << v.check << ": " << v.detail;
}

// kmm density

TEST(Kmm, ObjectiveMatchesAnalyticExpansion) {
  const Dataset x = blob_sample(1, 30);
  const double sigma_sq = 0.8;
  const MixtureModel q = two_blobs();
  const WeightVector beta = skmse_weights(30, 0.2);
  const double got = kmm_objective(q, beta, x, sigma_sq);

  const MixtureEmbedding emb(q.as_params(), sigma_sq);
  const Matrix k = gram_matrix(x, KernelSpec::gaussian(sigma_sq)).raw.matrix();
  const double want =
      emb.norm_sq() - 2.0 * beta.weights.dot(emb.inner_all(x)) + beta.weights.dot(k * beta.weights);
  EXPECT_NEAR(got, want, 1e-12);
}

TEST(Kmm, GradientMatchesFiniteDifferences) {
  const Dataset x = blob_sample(2, 25);
  const KmmObjective obj(x, empirical_kme_weights(25).weights, 1.1);
  const auto p = KmmParameters::from(two_blobs());
  Vector grad;
  obj.value_and_gradient(p, grad);
  const Vector v = p.flat();
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    const double h = 1e-6;
    Vector up = v, dn = v;
    up[i] += h;
    dn[i] -= h;
    const double fd = (obj.value(KmmParameters::unflat(up, 2, 2).model()) -
                       obj.value(KmmParameters::unflat(dn, 2, 2).model())) / (2 * h);
    EXPECT_LE(std::abs(fd - grad[i]), 1e-5 * std::max(1.0, std::abs(grad[i]))) << i;
  }
}

TEST(Kmm, ParameterRoundTrip) {
  const MixtureModel q = two_blobs();
  const auto back = KmmParameters::unflat(KmmParameters::from(q).flat(), 2, 2).model();
  EXPECT_LE((back.means - q.means).cwiseAbs().maxCoeff(), 1e-15);
  EXPECT_LE((back.variances - q.variances).cwiseAbs().maxCoeff(), 1e-12);
  EXPECT_LE((back.weights - q.weights).cwiseAbs().maxCoeff(), 1e-15);
}

TEST(Kmm, FitDecreasesObjective) {
  const Dataset x = blob_sample(3, 60);
  const double bw = median_heuristic_bandwidth(x);
  KmmConfig cfg;
  cfg.components = 2;
  cfg.restarts = 5;
  cfg.seed = 3;
  const auto fit = kmm_fit(x, empirical_kme_weights(60), bw, cfg);
  EXPECT_LE(fit.objective, fit.initial_objective);
  for (std::size_t i = 1; i < fit.trace.size(); ++i) EXPECT_LE(fit.trace[i], fit.trace[i - 1]);
  EXPECT_NO_THROW(check_model(fit.model));
  EXPECT_GE(fit.model.variances.minCoeff(), variance_floor);
}

TEST(Kmm, KmeansFindsSeparatedClusters) {
  Matrix rows(40, 1);
  for (int i = 0; i < 20; ++i) rows(i, 0) = -10.0 + 0.01 * i, rows(20 + i, 0) = 10.0 + 0.01 * i;
  RngStream rng(4, 0);
  const auto km = kmeans(Dataset(rows), 2, 5, rng);
  const double lo = std::min(km.model.means(0, 0), km.model.means(1, 0));
  const double hi = std::max(km.model.means(0, 0), km.model.means(1, 0));
  EXPECT_NEAR(lo, -10.0 + 0.095, 1e-12);
  EXPECT_NEAR(hi, 10.0 + 0.095, 1e-12);
  EXPECT_NEAR(km.model.weights[0], 0.5, 1e-12);
  EXPECT_THROW(kmeans(Dataset(rows), 41, 1, rng), input_error);
}

TEST(Kmm, NegativeLogLikelihood) {
  MixtureModel q;
  q.weights = Vector::Ones(1);
  q.means = Matrix::Zero(1, 2);
  q.variances = Vector::Ones(1);
  EXPECT_NEAR(nll(q, Dataset(Matrix::Zero(1, 2))), std::log(2.0 * std::acos(-1.0)), 1e-12);
  EXPECT_NEAR(nll(q, Dataset(Matrix::Zero(1, 2))), 1.8379, 1e-4);
  EXPECT_THROW(nll(q, Dataset(Matrix::Zero(1, 3))), input_error);
}

TEST(Kmm, TrainTestSplit) {
  Matrix rows(20, 1);
  for (int i = 0; i < 20; ++i) rows(i, 0) = i;
  const auto a = train_test_split(Dataset(rows), 0.25, 9);
  const auto b = train_test_split(Dataset(rows), 0.25, 9);
  EXPECT_EQ(a.train.size(), 15);
  EXPECT_EQ(a.test.size(), 5);
  EXPECT_EQ(a.test.rows, b.test.rows);
  std::vector<double> all;
  for (Eigen::Index i = 0; i < 15; ++i) all.push_back(a.train.rows(i, 0));
  for (Eigen::Index i = 0; i < 5; ++i) all.push_back(a.test.rows(i, 0));
  std::sort(all.begin(), all.end());
  for (int i = 0; i < 20; ++i) EXPECT_EQ(all[std::size_t(i)], i);
  EXPECT_THROW(train_test_split(Dataset(rows), 1.0, 9), input_error);
}

TEST(Kmm, DensityExperimentRuns) {
  const Dataset raw = blob_sample(5, 80);
  EstimatorConfig target;
  target.estimator = Estimator::tikhonov;
  KmmConfig cfg;
  cfg.components = 2;
  cfg.restarts = 5;
  cfg.seed = 5;
  const auto r = density_experiment(raw, target, cfg);
  EXPECT_EQ(r.target_estimator, "tikhonov/loocv");
  EXPECT_TRUE(std::isfinite(r.nll_test));
  EXPECT_TRUE(r.selection.has_value());
}

// io

TEST(Io, FilterAndWeightsJson) {
  const auto tsvd = filter_json(filter::TruncatedSvd{0.25});
  EXPECT_EQ(tsvd["name"], "tsvd");
  EXPECT_EQ(tsvd["threshold"], 0.25);
  EXPECT_EQ(tsvd["qualification"], "inf");
  EXPECT_EQ(filter_json(filter::Tikhonov{0.1})["qualification"], 1.0);

  const WeightVector w = skmse_weights(2, 1.0);
  const auto j = weights_json(w);
  EXPECT_EQ(j["estimator_id"], "skmse");
  EXPECT_EQ(j["beta"].size(), 2u);
  EXPECT_EQ(j["beta"][0], 0.25);
}

TEST(Io, EstimatorConfigCompactsDefaultGrid) {
  EstimatorConfig c;
  c.estimator = Estimator::tikhonov;
  const auto j = estimator_config_json(c);
  EXPECT_EQ(j["selection"], "loocv");
  EXPECT_EQ(j["lambda_grid"]["points"], 30);
  c.lambda_grid = {0.5};
  EXPECT_TRUE(estimator_config_json(c)["lambda_grid"].is_array());
}

TEST(Io, VerdictJson) {
  const CheckVerdict v{"thm2", true, 0.0, 0.0, "ok"};
  const auto j = verdict_json(v);
  EXPECT_EQ(j["check"], "thm2");
  EXPECT_EQ(j["pass"], true);
  EXPECT_EQ(j.dump().find("\"check\""), 1u);
}
