#pragma once

#include <cmath>
#include <optional>
#include <string>

#include "kmse/dataset.hpp"
#include "kmse/errors.hpp"
#include "kmse/filters.hpp"
#include "kmse/kernels.hpp"
#include "kmse/linalg.hpp"

namespace kmse {

// Coefficients of an estimate sum_i beta_i k(x_i, .). The shrinkage target is
// the zero function, so every estimator starts from beta = 0.
struct WeightVector {
  Vector weights;
  std::string estimator_id;
  std::optional<FilterSpec> shrinkage;  // empty for the empirical kernel mean

  Eigen::Index size() const noexcept { return weights.size(); }
};

inline Vector uniform_weights(Eigen::Index n) {
  return Vector::Constant(n, 1.0 / static_cast<double>(n));
}

inline WeightVector empirical_kme_weights(Eigen::Index n) {
  if (n < 1) throw input_error("empirical_kme_weights: n must be >= 1");
  return {uniform_weights(n), "kme", std::nullopt};
}

inline WeightVector skmse_weights(Eigen::Index n, double lambda) {
  if (n < 1) throw input_error("skmse_weights: n must be >= 1");
  if (!(lambda >= 0.0)) throw input_error("skmse_weights: lambda must be >= 0");
  return {Vector::Constant(n, 1.0 / (static_cast<double>(n) * (1.0 + lambda))), "skmse",
          filter::Skmse{lambda}};
}

// beta = U diag(g(gamma)) U^T (K/n) 1_n, written with (K/n) 1_n = U diag(gamma) U^T 1_n
// so that components in the null space of K/n vanish exactly.
inline WeightVector spectral_weights(const NormalizedGram& kbar, const FilterSpec& spec) {
  validate(spec, kbar.kappa_sq());
  const auto& eig = kbar.spectrum();
  const Vector gamma = eig.clamped_values();
  const Eigen::Index n = kbar.n();
  Vector coeff = eig.vectors.transpose() * uniform_weights(n);
  for (Eigen::Index i = 0; i < n; ++i)
    coeff[i] *= gamma[i] * scalar_filter(spec, gamma[i], kbar.kappa_sq());
  return {eig.vectors * coeff, filter_name(spec), spec};
}

namespace detail {

inline void divergence_guard(const Vector& beta, int step, const char* who) {
  const double limit = 1e6 / std::sqrt(static_cast<double>(beta.size()));
  const double norm = beta.norm();
  if (!(norm <= limit))
    throw step_size_error(std::string(who) + " diverged at step " + std::to_string(step) +
                          " (|beta| = " + std::to_string(norm) + "); reduce the step size");
}

}  // namespace detail

// Visits beta^1, ..., beta^t_max of the Landweber iteration
// beta^s = beta^{s-1} + eta ((K/n) 1_n - (K/n) beta^{s-1}). The visitor
// receives (s, beta^s).
template <class Visitor>
void landweber_path(const NormalizedGram& kbar, int t_max, double eta, Visitor&& visit) {
  validate(filter::Landweber{t_max, eta}, kbar.kappa_sq());
  const Matrix& k = kbar.matrix().matrix();
  const Vector target = kbar.target();
  Vector beta = Vector::Zero(kbar.n());
  Vector kb(kbar.n());
  for (int s = 1; s <= t_max; ++s) {
    kb.noalias() = k * beta;
    beta += eta * (target - kb);
    detail::divergence_guard(beta, s, "landweber");
    visit(s, static_cast<const Vector&>(beta));
  }
}

inline WeightVector landweber_weights(const NormalizedGram& kbar, int t, double eta) {
  if (t < 0) throw input_error("landweber_weights: t must be >= 0");
  Vector out = Vector::Zero(kbar.n());
  landweber_path(kbar, t, eta, [&](int, const Vector& beta) { out = beta; });
  return {std::move(out), "landweber", filter::Landweber{t, eta}};
}

inline WeightVector landweber_weights(const NormalizedGram& kbar, int t) {
  return landweber_weights(kbar, t, 1.0 / kbar.kappa_sq());
}

// nu-method: beta^s = beta^{s-1} + omega_s (beta^{s-1} - beta^{s-2}) + kappa_s a / kappa^2,
// a = (K/n) 1_n - (K/n) beta^{s-1}.
template <class Visitor>
void nu_method_path(const NormalizedGram& kbar, int t_max, double nu, Visitor&& visit) {
  validate(filter::NuMethod{t_max, nu}, kbar.kappa_sq());
  const double step = 1.0 / kbar.kappa_sq();
  const Matrix& k = kbar.matrix().matrix();
  const Vector target = kbar.target();
  Vector prev = Vector::Zero(kbar.n());
  Vector beta = Vector::Zero(kbar.n());
  Vector next(kbar.n());
  for (int s = 1; s <= t_max; ++s) {
    const auto [omega, kappa] = nu_coefficients(s, nu);
    next.noalias() = k * beta;
    next = beta + omega * (beta - prev) + (kappa * step) * (target - next);
    prev.swap(beta);
    beta.swap(next);
    detail::divergence_guard(beta, s, "nu-method");
    visit(s, static_cast<const Vector&>(beta));
  }
}

inline WeightVector nu_method_weights(const NormalizedGram& kbar, int t, double nu = 1.0) {
  if (t < 0) throw input_error("nu_method_weights: t must be >= 0");
  Vector out = Vector::Zero(kbar.n());
  nu_method_path(kbar, t, nu, [&](int, const Vector& beta) { out = beta; });
  return {std::move(out), "nu", filter::NuMethod{t, nu}};
}

// (K/n + lambda I) beta_s = (K/n) 1_n + lambda beta_{s-1}, beta_0 = 0. Its
// t-step filter is ((gamma + lambda)^t - lambda^t) / (gamma (gamma + lambda)^t).
inline WeightVector iterated_tikhonov_weights(const NormalizedGram& kbar, int t, double lambda) {
  if (t < 0) throw input_error("iterated_tikhonov_weights: t must be >= 0");
  validate(filter::IteratedTikhonov{t, lambda}, kbar.kappa_sq());
  const Eigen::Index n = kbar.n();
  Vector beta = Vector::Zero(n);
  if (t > 0) {
    const SymMatrix shifted(kbar.matrix().matrix() + lambda * Matrix::Identity(n, n));
    const Cholesky chol(shifted);
    const Vector target = kbar.target();
    for (int s = 1; s <= t; ++s) {
      const Vector rhs = target + lambda * beta;
      beta = chol.solve(rhs);
      beta += chol.solve(rhs - shifted.matrix() * beta);
    }
  }
  return {std::move(beta), "itik", filter::IteratedTikhonov{t, lambda}};
}

inline WeightVector tikhonov_weights(const NormalizedGram& kbar, double lambda) {
  return spectral_weights(kbar, filter::Tikhonov{lambda});
}

inline WeightVector tsvd_weights(const NormalizedGram& kbar, double threshold) {
  return spectral_weights(kbar, filter::TruncatedSvd{threshold});
}

// The iterative route where one exists, the spectral one otherwise.
inline WeightVector estimate_weights(const NormalizedGram& kbar, const FilterSpec& spec) {
  return std::visit(overloaded{
                        [&](const filter::Landweber& f) {
                          return landweber_weights(kbar, f.iters, f.eta);
                        },
                        [&](const filter::NuMethod& f) {
                          if (f.step > 0.0 && f.step != 1.0 / kbar.kappa_sq())
                            return spectral_weights(kbar, spec);
                          return nu_method_weights(kbar, f.iters, f.nu);
                        },
                        [&](const filter::IteratedTikhonov& f) {
                          return iterated_tikhonov_weights(kbar, f.iters, f.lambda);
                        },
                        [&](const filter::Skmse& f) { return skmse_weights(kbar.n(), f.lambda); },
                        [&](const auto&) { return spectral_weights(kbar, spec); },
                    },
                    spec);
}

// sum_i beta_i k(x_i, query)
template <class Q>
double evaluate_estimate(const Dataset& points, const WeightVector& beta, const KernelSpec& kernel,
                         const Eigen::MatrixBase<Q>& query) {
  if (beta.size() != points.size())
    throw input_error("evaluate_estimate: " + std::to_string(beta.size()) + " weights for " +
                      std::to_string(points.size()) + " points");
  if (query.size() != points.dim()) throw input_error("evaluate_estimate: query dimension mismatch");
  double sum = 0.0;
  for (Eigen::Index i = 0; i < points.size(); ++i)
    sum += beta.weights[i] * kernel(points.rows.row(i), query);
  return sum;
}

// |sum_i beta_i k(x_i, .)|^2_H = beta^T K beta
inline double rkhs_norm_sq(const Vector& beta, const Matrix& k) { return beta.dot(k * beta); }

}  // namespace kmse
