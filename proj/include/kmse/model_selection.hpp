#pragma once

#include <cmath>
#include <functional>
#include <limits>
#include <string>
#include <utility>
#include <vector>

#include "kmse/dataset.hpp"
#include "kmse/errors.hpp"
#include "kmse/estimators.hpp"
#include "kmse/filters.hpp"
#include "kmse/kernels.hpp"
#include "kmse/linalg.hpp"

namespace kmse {

enum class ScoreKind { loocv, gcv };

inline std::string to_string(ScoreKind k) { return k == ScoreKind::loocv ? "loocv" : "gcv"; }

struct SelectionResult {
  FilterSpec chosen;
  std::vector<std::pair<double, double>> score_path;  // (parameter, score)
  ScoreKind score_kind;
  std::size_t chosen_index = 0;

  double chosen_score() const { return score_path[chosen_index].second; }
};

enum class IterativeAlgorithm { landweber, nu_method };

namespace detail {

// First index attaining the minimum; NaN scores never win.
inline std::size_t argmin_first(const std::vector<std::pair<double, double>>& path) {
  std::size_t best = 0;
  double best_score = std::numeric_limits<double>::infinity();
  bool found = false;
  for (std::size_t i = 0; i < path.size(); ++i) {
    if (path[i].second < best_score || (!found && path[i].second == best_score)) {
      best = i;
      best_score = path[i].second;
      found = true;
    }
  }
  return best;
}

inline Matrix drop_index(const Matrix& k, Eigen::Index i) {
  const Eigen::Index n = k.rows();
  const Eigen::Index tail = n - 1 - i;
  Matrix out(n - 1, n - 1);
  out.topLeftCorner(i, i) = k.topLeftCorner(i, i);
  out.topRightCorner(i, tail) = k.topRightCorner(i, tail);
  out.bottomLeftCorner(tail, i) = k.bottomLeftCorner(tail, i);
  out.bottomRightCorner(tail, tail) = k.bottomRightCorner(tail, tail);
  return out;
}

inline Vector drop_entry(const Vector& v, Eigen::Index i) {
  const Eigen::Index n = v.size();
  Vector out(n - 1);
  out.head(i) = v.head(i);
  out.tail(n - 1 - i) = v.tail(n - 1 - i);
  return out;
}

// |sum_j beta_j k(x_j, .) - k(x_i, .)|^2 for a fit on the sample without x_i.
inline double held_out_distance(const Vector& beta, const Matrix& k_rest, const Vector& k_cross,
                                double k_ii) {
  return beta.dot(k_rest * beta) - 2.0 * beta.dot(k_cross) + k_ii;
}

struct Fold {
  Matrix k_rest;   // raw Gram without row/column i
  Vector k_cross;  // k(x_j, x_i), j != i
  double k_ii;
  NormalizedGram kbar;
};

inline Fold make_fold(const Matrix& k, Eigen::Index i, double kappa_sq) {
  Matrix rest = drop_index(k, i);
  Vector cross = drop_entry(k.col(i), i);
  const auto m = static_cast<double>(rest.rows());
  NormalizedGram kbar(SymMatrix(rest / m), kappa_sq);
  return Fold{std::move(rest), std::move(cross), k(i, i), std::move(kbar)};
}

}  // namespace detail

// Leave-one-out score (1/n) sum_i |mu_hat^{(-i)}_t - k(x_i, .)|^2 for every
// t <= t_max along the iteration path; returns the minimizing t.
inline SelectionResult loocv_select_iterations(const Dataset& points, const KernelSpec& kernel,
                                               IterativeAlgorithm algo, int t_max) {
  const Eigen::Index n = points.size();
  if (n < 3) throw input_error("LOOCV needs at least 3 points, got " + std::to_string(n));
  if (t_max < 1) throw input_error("LOOCV: t_max must be >= 1");
  const GramMatrix gram = gram_matrix(points, kernel);
  const Matrix& k = gram.raw.matrix();

  std::vector<double> score(static_cast<std::size_t>(t_max), 0.0);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto fold = detail::make_fold(k, i, kernel.kappa_sq());
    auto accumulate = [&](int t, const Vector& beta) {
      score[static_cast<std::size_t>(t - 1)] +=
          detail::held_out_distance(beta, fold.k_rest, fold.k_cross, fold.k_ii);
    };
    if (algo == IterativeAlgorithm::landweber)
      landweber_path(fold.kbar, t_max, 1.0 / kernel.kappa_sq(), accumulate);
    else
      nu_method_path(fold.kbar, t_max, 1.0, accumulate);
  }

  SelectionResult result{filter::Tikhonov{1.0}, {}, ScoreKind::loocv, 0};
  for (int t = 1; t <= t_max; ++t)
    result.score_path.emplace_back(t, score[static_cast<std::size_t>(t - 1)] / static_cast<double>(n));
  result.chosen_index = detail::argmin_first(result.score_path);
  const int t = static_cast<int>(result.chosen_index) + 1;
  if (algo == IterativeAlgorithm::landweber)
    result.chosen = filter::Landweber{t, 1.0 / kernel.kappa_sq()};
  else
    result.chosen = filter::NuMethod{t, 1.0};
  return result;
}

// Builds the filter for a candidate lambda.
using FilterFamily = std::function<FilterSpec(double)>;

// Leave-one-out over a lambda grid for any spectral filter family, refitting
// each fold (one eigendecomposition per fold, reused across the grid).
inline SelectionResult loocv_select_lambda(const Dataset& points, const KernelSpec& kernel,
                                           const std::vector<double>& lambda_grid,
                                           const FilterFamily& family) {
  const Eigen::Index n = points.size();
  if (lambda_grid.empty()) throw input_error("LOOCV: empty lambda grid");
  if (n < 3) throw input_error("LOOCV needs at least 3 points, got " + std::to_string(n));
  const GramMatrix gram = gram_matrix(points, kernel);
  const Matrix& k = gram.raw.matrix();

  std::vector<double> score(lambda_grid.size(), 0.0);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto fold = detail::make_fold(k, i, kernel.kappa_sq());
    for (std::size_t g = 0; g < lambda_grid.size(); ++g) {
      const auto beta = spectral_weights(fold.kbar, family(lambda_grid[g]));
      score[g] += detail::held_out_distance(beta.weights, fold.k_rest, fold.k_cross, fold.k_ii);
    }
  }

  SelectionResult result{family(lambda_grid.front()), {}, ScoreKind::loocv, 0};
  for (std::size_t g = 0; g < lambda_grid.size(); ++g)
    result.score_path.emplace_back(lambda_grid[g], score[g] / static_cast<double>(n));
  result.chosen_index = detail::argmin_first(result.score_path);
  result.chosen = family(lambda_grid[result.chosen_index]);
  return result;
}

inline SelectionResult loocv_select_lambda_tikhonov(const Dataset& points, const KernelSpec& kernel,
                                                    const std::vector<double>& lambda_grid) {
  return loocv_select_lambda(points, kernel, lambda_grid,
                             [](double l) -> FilterSpec { return filter::Tikhonov{l}; });
}

// GCV over truncation levels m = 1..n-1 with the projector H_m onto the top-m
// eigenvectors of K/n: GCV(m) = |(I - H_m)(K/n) 1_n|^2 / (1 - m/n)^2, GCV(n) = inf.
// The chosen threshold is the m-th largest eigenvalue.
inline SelectionResult gcv_select_tsvd(const NormalizedGram& kbar) {
  const Eigen::Index n = kbar.n();
  if (n < 2) throw input_error("GCV needs at least 2 points");
  const auto& eig = kbar.spectrum();
  const Vector gamma = eig.clamped_values();
  const Vector coeff = eig.vectors.transpose() * kbar.target();

  // tail[m] = sum_{i >= m} coeff_i^2 (0-based), i.e. the residual after keeping m components.
  std::vector<double> tail(static_cast<std::size_t>(n) + 1, 0.0);
  for (Eigen::Index i = n - 1; i >= 0; --i)
    tail[static_cast<std::size_t>(i)] = tail[static_cast<std::size_t>(i) + 1] + coeff[i] * coeff[i];

  SelectionResult result{filter::TruncatedSvd{1.0}, {}, ScoreKind::gcv, 0};
  for (Eigen::Index m = 1; m <= n; ++m) {
    double score = std::numeric_limits<double>::infinity();
    if (m < n) {
      const double dof = 1.0 - static_cast<double>(m) / static_cast<double>(n);
      score = tail[static_cast<std::size_t>(m)] / (dof * dof);
    }
    result.score_path.emplace_back(static_cast<double>(m), score);
  }
  result.chosen_index = detail::argmin_first(result.score_path);
  const auto m = static_cast<Eigen::Index>(result.chosen_index) + 1;
  double threshold = gamma[m - 1];
  if (!(threshold > 0.0)) {
    // Numerically rank-deficient: keep the positive part of the top m.
    threshold = std::numeric_limits<double>::min();
    for (Eigen::Index i = m - 1; i >= 0; --i)
      if (gamma[i] > 0.0) {
        threshold = gamma[i];
        break;
      }
  }
  result.chosen = filter::TruncatedSvd{threshold};
  return result;
}

}  // namespace kmse
