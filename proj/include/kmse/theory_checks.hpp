#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "kmse/dataset.hpp"
#include "kmse/errors.hpp"
#include "kmse/estimators.hpp"
#include "kmse/filters.hpp"
#include "kmse/kernels.hpp"
#include "kmse/linalg.hpp"
#include "kmse/pipeline.hpp"
#include "kmse/risk.hpp"
#include "kmse/rng.hpp"
#include "kmse/synthetic.hpp"

namespace kmse {

// E|mu_check - mu|^2 - E|mu_hat - mu|^2 for mu_check = mu_hat / (1 + c n^-b):
//   [(n c^2 + c^2 + 2 c n^b) |mu|^2 - (c^2 + 2 c n^b) Ek] / [n (n^b + c)^2].
// The numerator is regrouped as n c^2 |mu|^2 - (c^2 + 2 c n^b)(Ek - |mu|^2)
// and evaluated in extended precision.
inline double skmse_risk_difference_exact(double c, double b, double n, double mu_norm_sq,
                                          double k_diag_mean) {
  if (!(c > 0.0) || !(b > 0.0) || !(n > 0.0))
    throw input_error("skmse_risk_difference_exact: need c > 0, b > 0, n > 0");
  if (!(mu_norm_sq >= 0.0) || !(k_diag_mean >= mu_norm_sq))
    throw input_error("skmse_risk_difference_exact: need Ek >= |mu|^2 >= 0");
  using ld = long double;
  const ld cc = c;
  const ld nb = std::pow(static_cast<ld>(n), static_cast<ld>(b));
  const ld gap = static_cast<ld>(k_diag_mean) - static_cast<ld>(mu_norm_sq);
  const ld num = static_cast<ld>(n) * cc * cc * mu_norm_sq - (cc * cc + 2.0L * cc * nb) * gap;
  const ld den = static_cast<ld>(n) * (nb + cc) * (nb + cc);
  return static_cast<double>(num / den);
}

// The shrinkage estimator beats the empirical one at sample size n iff
// |mu|^2 / Ek is below this ratio.
inline double skmse_admissibility_ratio(double c, double b, double n) {
  const double nb = std::pow(n, b);
  return (c * c + 2.0 * c * nb) / (n * c * c + c * c + 2.0 * c * nb);
}

// A = 2^{1/b} b / (2^{1/b} b + c^{1/b} (b - 1)^{(b-1)/b}), the infimum of the
// admissibility ratio over n > 0.
inline double theorem1_admissibility_bound(double c, double b) {
  if (!(b > 1.0)) throw input_error("theorem1_admissibility_bound: b must be > 1");
  if (!(c > 0.0)) throw input_error("theorem1_admissibility_bound: c must be > 0");
  const double top = std::pow(2.0, 1.0 / b) * b;
  return top / (top + std::pow(c, 1.0 / b) * std::pow(b - 1.0, (b - 1.0) / b));
}

// Brute-force infimum of the admissibility ratio. Over the integers
// 1..n_max, or over real n > 0 (log-grid scan refined by golden section).
inline double admissibility_infimum_integer(double c, double b, long n_max = 1000000) {
  double best = 1.0;
  for (long n = 1; n <= n_max; ++n) best = std::min(best, skmse_admissibility_ratio(c, b, double(n)));
  return best;
}

inline double admissibility_infimum_real(double c, double b) {
  auto h = [&](double log_n) { return skmse_admissibility_ratio(c, b, std::exp(log_n)); };
  const double lo = std::log(1e-12), hi = std::log(1e12);
  const int steps = 24000;
  int best_i = 0;
  double best = h(lo);
  for (int i = 1; i <= steps; ++i) {
    const double v = h(lo + (hi - lo) * i / steps);
    if (v < best) {
      best = v;
      best_i = i;
    }
  }
  double a = lo + (hi - lo) * std::max(best_i - 1, 0) / steps;
  double z = lo + (hi - lo) * std::min(best_i + 1, steps) / steps;
  const double phi = (std::sqrt(5.0) - 1.0) / 2.0;
  double x1 = z - phi * (z - a), x2 = a + phi * (z - a);
  double f1 = h(x1), f2 = h(x2);
  for (int it = 0; it < 200 && z - a > 1e-13; ++it) {
    if (f1 < f2) {
      z = x2, x2 = x1, f2 = f1;
      x1 = z - phi * (z - a), f1 = h(x1);
    } else {
      a = x1, x1 = x2, f1 = f2;
      x2 = a + phi * (z - a), f2 = h(x2);
    }
  }
  return std::min({best, f1, f2});
}

// alpha^2 (delta + (f* - mu)^2) - 2 alpha delta, in the factored form
// alpha (alpha (delta + e^2) - 2 delta) so its sign is exact.
inline double component_risk_difference(double alpha, double delta, double f_star, double mu) {
  if (!(delta > 0.0)) throw input_error("component_risk_difference: delta must be > 0");
  const double e = f_star - mu;
  return alpha * std::fma(alpha, delta + e * e, -2.0 * delta);
}

// Upper end 2 delta / (delta + (f* - mu)^2) of the shrinkage interval.
inline double component_shrinkage_bound(double delta, double f_star, double mu) {
  const double e = f_star - mu;
  return 2.0 * delta / (delta + e * e);
}

// Iterative vs spectral weights for one filter; returns the max-abs difference.
inline double verify_spectral_equivalence(const NormalizedGram& kbar, const FilterSpec& spec) {
  const Vector iterative = estimate_weights(kbar, spec).weights;
  const Vector spectral = spectral_weights(kbar, spec).weights;
  return (iterative - spectral).cwiseAbs().maxCoeff();
}

// Linear kernel, Tikhonov filter: the covariance-operator estimate
// C (C + lambda)^{-1} mu_hat with C = X^T X / n, evaluated at the sample
// points, against the Gram-side estimate sum_j beta_j <x_j, x_i>.
inline double verify_operator_equivalence(const Dataset& x, double lambda,
                                          const std::optional<KernelSpec>& kernel = std::nullopt) {
  if (kernel && kernel->kind() != KernelKind::linear)
    throw unsupported_error("operator equivalence is checked for the linear kernel only");
  if (!(lambda > 0.0)) throw input_error("verify_operator_equivalence: lambda must be > 0");
  if (x.dim() > 20 || x.size() > 200)
    throw input_error("verify_operator_equivalence: needs d <= 20 and n <= 200");
  const Eigen::Index n = x.size(), d = x.dim();
  const Matrix cov = x.rows.transpose() * x.rows / static_cast<double>(n);
  const Vector mean = x.rows.colwise().mean().transpose();
  const Vector w = cov * solve_spd(SymMatrix(cov + lambda * Matrix::Identity(d, d)), mean);
  const Vector op_side = x.rows * w;

  const KernelSpec spec = kernel ? *kernel : KernelSpec::linear_for(x);
  const auto kbar = normalized_gram(x, spec);
  const auto beta = spectral_weights(kbar, filter::Tikhonov{lambda});
  Vector gram_side(n);
  for (Eigen::Index i = 0; i < n; ++i)
    gram_side[i] = evaluate_estimate(x, beta, spec, x.rows.row(i).transpose());
  return (op_side - gram_side).cwiseAbs().maxCoeff();
}

// Moments of P needed by the exact linear-kernel risk: |mu_P|^2 and E k(x, x).
// For P = N(m, S): |m|^2 and |m|^2 + tr S.
struct LinearMoments {
  double mean_norm_sq = 0.0;
  double k_diag_mean = 0.0;

  static LinearMoments gaussian(const Vector& mean, const Matrix& cov) {
    return {mean.squaredNorm(), mean.squaredNorm() + cov.trace()};
  }

  // |sum_j pi_j theta_j|^2 and sum_j pi_j (|theta_j|^2 + tr S_j) + d noise.
  static LinearMoments mixture(const MixtureParams& p) {
    const MixtureParams e = effective_components(p);
    Vector mean = Vector::Zero(e.dim());
    double ek = 0.0;
    for (std::size_t j = 0; j < e.components(); ++j) {
      const double w = e.weights[static_cast<Eigen::Index>(j)];
      mean += w * e.means[j];
      ek += w * (e.means[j].squaredNorm() + e.covariances[j].trace());
    }
    return {mean.squaredNorm(), ek};
  }
};

struct RateExperimentConfig {
  double c = 1.0;
  double b = 1.0;
  std::vector<long> n_grid{1000, 10000, 100000};
  std::size_t m = 200;
  KernelSpec kernel = KernelSpec::linear(1.0);
  std::optional<LinearMoments> moments;  // exact path (linear kernel)
  std::uint64_t seed = 0;                // Monte-Carlo path
  Eigen::Index d = 3;
  std::optional<double> bandwidth_sq;    // Monte-Carlo path; empty: median heuristic
};

struct RateRow {
  long n = 0;
  double risk = 0.0;
  double stderr_ = 0.0;
  double kme_risk = 0.0;
};

struct RateResult {
  std::vector<RateRow> rows;
  double slope = 0.0;
  bool exact = false;
};

inline double log_log_slope(const std::vector<double>& x, const std::vector<double>& y) {
  const std::size_t k = x.size();
  if (k < 2 || y.size() != k) throw input_error("log_log_slope: need two equal-length series of length >= 2");
  for (std::size_t i = 0; i < k; ++i)
    if (!(x[i] > 0.0) || !(y[i] > 0.0)) throw input_error("log_log_slope: values must be positive");
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < k; ++i) mx += std::log(x[i]), my += std::log(y[i]);
  mx /= double(k), my /= double(k);
  double sxy = 0.0, sxx = 0.0;
  for (std::size_t i = 0; i < k; ++i) {
    const double dx = std::log(x[i]) - mx;
    sxy += dx * (std::log(y[i]) - my);
    sxx += dx * dx;
  }
  return sxy / sxx;
}

// (n^b / (n^b + c))^2 Delta + (c / (n^b + c))^2 |mu|^2,  Delta = (Ek - |mu|^2) / n
inline double exact_shrinkage_risk(const LinearMoments& p, double c, double b, double n) {
  const double nb = std::pow(n, b);
  const double delta = (p.k_diag_mean - p.mean_norm_sq) / n;
  const double keep = nb / (nb + c), drop = c / (nb + c);
  return keep * keep * delta + drop * drop * p.mean_norm_sq;
}

// Risk of mu_hat / (1 + c n^-b) along n_grid and its log-log slope. With
// moments and a linear kernel the closed form is used; otherwise the risk is
// estimated on the synthetic mixture by Monte Carlo.
inline RateResult rate_experiment(const RateExperimentConfig& cfg) {
  if (!(cfg.c > 0.0) || !(cfg.b > 0.0)) throw input_error("rate_experiment: need c > 0 and b > 0");
  if (cfg.n_grid.size() < 3) throw input_error("rate_experiment: need at least 3 grid points");
  for (std::size_t i = 0; i < cfg.n_grid.size(); ++i)
    if (cfg.n_grid[i] < 1 || (i > 0 && cfg.n_grid[i] <= cfg.n_grid[i - 1]))
      throw input_error("rate_experiment: n_grid must be positive and strictly increasing");

  RateResult out;
  out.exact = cfg.moments.has_value() && cfg.kernel.kind() == KernelKind::linear;
  out.rows.resize(cfg.n_grid.size());
  if (out.exact) {
    for (std::size_t i = 0; i < cfg.n_grid.size(); ++i) {
      const double n = double(cfg.n_grid[i]);
      const auto& p = *cfg.moments;
      out.rows[i] = {cfg.n_grid[i], exact_shrinkage_risk(p, cfg.c, cfg.b, n), 0.0,
                     (p.k_diag_mean - p.mean_norm_sq) / n};
    }
  } else {
    if (cfg.kernel.kind() != KernelKind::gaussian_rbf)
      throw unsupported_error("rate_experiment: Monte-Carlo path needs the Gaussian RBF kernel");
    for (std::size_t i = 0; i < cfg.n_grid.size(); ++i) {
      RiskConfig rc;
      rc.n = cfg.n_grid[i];
      rc.d = cfg.d;
      rc.m = cfg.m;
      rc.seed = cfg.seed;
      rc.bandwidth_sq = cfg.bandwidth_sq;
      EstimatorConfig shrink;
      shrink.estimator = Estimator::skmse;
      shrink.selection = Selection::none;
      shrink.lambda = cfg.c * std::pow(double(rc.n), -cfg.b);
      const auto reps = run_benchmark({EstimatorConfig{}, shrink}, rc);
      out.rows[i] = {cfg.n_grid[i], reps[1].mean_loss, reps[1].stderr_, reps[0].mean_loss};
    }
  }
  std::vector<double> xs, ys;
  for (const auto& r : out.rows) xs.push_back(double(r.n)), ys.push_back(r.risk);
  out.slope = log_log_slope(xs, ys);
  return out;
}

// Pass/fail verdict of one named check, as reported by `kmse verify`.
struct CheckVerdict {
  std::string check;
  bool pass = false;
  double metric = 0.0;
  double threshold = 0.0;
  std::string detail;
};

// A random normalized Gram matrix with spectrum in [0, 1]: even indices use a
// Gaussian RBF Gram of random points, odd ones a random low-rank PSD matrix
// with unit trace.
inline NormalizedGram random_normalized_gram(Eigen::Index n, RngStream& rng, bool rbf) {
  if (rbf) {
    const Eigen::Index d = 1 + static_cast<Eigen::Index>(rng.uniform(0.0, 5.0));
    Dataset x(rng.normal_matrix(n, d));
    return normalized_gram(x, KernelSpec::gaussian(rng.uniform(0.2, 5.0) * double(d)));
  }
  const Eigen::Index r = 1 + static_cast<Eigen::Index>(rng.uniform(0.0, double(n)));
  const Matrix a = rng.normal_matrix(n, r);
  Matrix k = a * a.transpose();
  k /= k.trace();
  return NormalizedGram(SymMatrix(k), 1.0);
}

inline CheckVerdict check_prop1(std::uint64_t seed = 1, int matrices = 100, Eigen::Index n = 30) {
  double worst = 0.0;
  for (int s = 0; s < matrices; ++s) {
    RngStream rng(seed, static_cast<std::uint64_t>(s));
    const auto kbar = random_normalized_gram(n, rng, s % 2 == 0);
    for (int t = 0; t <= 50; ++t)
      worst = std::max(worst, verify_spectral_equivalence(kbar, filter::Landweber{t, 1.0}));
    for (int t = 0; t <= 20; ++t)
      worst = std::max(worst, verify_spectral_equivalence(kbar, filter::NuMethod{t, 1.0}));
    for (const double lambda : {1e-3, 1e-2, 1e-1, 1.0})
      worst = std::max(worst, verify_spectral_equivalence(kbar, filter::IteratedTikhonov{3, lambda}));
  }
  return {"prop1", worst <= 1e-8, worst, 1e-8,
          "landweber t<=50, nu t<=20, itik t=3 on " + std::to_string(matrices) + " matrices"};
}

inline CheckVerdict check_prop2(std::uint64_t seed = 1, int seeds = 20) {
  double worst = 0.0;
  for (int s = 0; s < seeds; ++s) {
    RngStream rng(seed, static_cast<std::uint64_t>(s));
    const Dataset x(rng.normal_matrix(40, 5));
    for (const double lambda : {0.1, 1.0}) worst = std::max(worst, verify_operator_equivalence(x, lambda));
  }
  return {"prop2", worst <= 1e-8, worst, 1e-8, "linear kernel, d=5, n=40, lambda in {0.1, 1}"};
}

// Sign agreement of the exact risk difference with the ratio inequality,
// plus the closed-form bound against the real-n brute force.
inline CheckVerdict check_thm1(std::uint64_t seed = 1, int tuples = 10000) {
  RngStream rng(seed, 0);
  int mismatches = 0;
  for (int i = 0; i < tuples; ++i) {
    const double c = std::exp(rng.uniform(std::log(1e-3), std::log(1e2)));
    const double b = rng.uniform(1.01, 4.0);
    const double n = std::floor(std::exp(rng.uniform(0.0, std::log(1e4))));
    const double ek = rng.uniform(0.1, 2.0);
    const double mu = ek * rng.uniform(0.0, 1.0);
    const bool negative = skmse_risk_difference_exact(c, b, n, mu, ek) < 0.0;
    if (negative != (mu / ek < skmse_admissibility_ratio(c, b, n))) ++mismatches;
  }
  const double a12 = theorem1_admissibility_bound(1.0, 2.0);
  const double closed = 2.0 * std::sqrt(2.0) / (2.0 * std::sqrt(2.0) + 1.0);
  const bool bound_ok = std::abs(a12 - closed) <= 1e-12;
  double brute = 0.0;
  for (const double c : {0.01, 0.1, 1.0, 3.0, 10.0})
    for (const double b : {1.2, 1.5, 2.0, 3.0, 5.0})
      brute = std::max(brute, std::abs(theorem1_admissibility_bound(c, b) - admissibility_infimum_real(c, b)));
  const bool pass = mismatches == 0 && bound_ok && brute <= 1e-6;
  return {"thm1", pass, double(mismatches), 0.0,
          "sign mismatches over " + std::to_string(tuples) + " tuples; |A(1,2)-0.73877|=" +
              std::to_string(std::abs(a12 - 0.73877)) + " (2 sqrt2/(2 sqrt2+1) = " +
              std::to_string(closed) + "); max |A - inf_n|=" + std::to_string(brute)};
}

inline CheckVerdict check_thm2(std::uint64_t seed = 1, int tuples = 10000) {
  RngStream rng(seed, 0);
  int mismatches = 0;
  for (int i = 0; i < tuples; ++i) {
    const double delta = std::exp(rng.uniform(std::log(1e-3), std::log(10.0)));
    const double f_star = rng.uniform(-3.0, 3.0);
    const double mu = rng.uniform(-3.0, 3.0);
    const double hi = component_shrinkage_bound(delta, f_star, mu);
    const double alpha = rng.uniform(-1.0, 2.0 * hi + 1.0);
    const double v = component_risk_difference(alpha, delta, f_star, mu);
    const bool inside = alpha >= 0.0 && alpha <= hi;
    if (inside ? !(v <= 0.0) : !(v > 0.0)) ++mismatches;
  }
  return {"thm2", mismatches == 0, double(mismatches), 0.0,
          "sign mismatches over " + std::to_string(tuples) + " tuples"};
}

inline CheckVerdict check_rates() {
  RateExperimentConfig cfg;
  cfg.moments = LinearMoments::gaussian(Vector::Unit(3, 0), Matrix::Identity(3, 3));
  const auto rate = rate_experiment(cfg);
  RateExperimentConfig tiny = cfg;
  tiny.c = 1e-12;
  double gap = 0.0;
  for (const auto& r : rate_experiment(tiny).rows) gap = std::max(gap, std::abs(r.risk - r.kme_risk));
  const double err = std::abs(rate.slope + 1.0);
  return {"rates", err <= 0.05 && gap <= 1e-10, rate.slope, -1.0,
          "slope tolerance 0.05; max |risk - kme risk| at c=1e-12: " + std::to_string(gap)};
}

}  // namespace kmse
