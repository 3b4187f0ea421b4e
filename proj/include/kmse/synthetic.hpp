#pragma once

#include <cmath>
#include <vector>

#include "kmse/dataset.hpp"
#include "kmse/errors.hpp"
#include "kmse/linalg.hpp"
#include "kmse/rng.hpp"

namespace kmse {

// x ~ sum_j pi_j N(theta_j, Sigma_j) + eps, eps ~ N(0, noise_var I).
struct MixtureParams {
  Vector weights;
  std::vector<Vector> means;
  std::vector<Matrix> covariances;
  double noise_var = 0.0;

  std::size_t components() const noexcept { return means.size(); }
  Eigen::Index dim() const { return means.empty() ? 0 : means.front().size(); }
};

// F with F F^T = S for a symmetric PSD S, via eigendecomposition with
// negative round-off clamped to zero (works for rank-deficient S).
inline Matrix psd_factor(const Matrix& s, double tol = 1e-10) {
  const auto eig = sym_eigendecompose(SymMatrix(s));
  const double scale = std::max(1.0, eig.values.cwiseAbs().maxCoeff());
  if (eig.values.minCoeff() < -tol * scale)
    throw input_error("matrix is not positive semidefinite (min eigenvalue " +
                      std::to_string(eig.values.minCoeff()) + ")");
  return eig.vectors * eig.clamped_values().cwiseSqrt().asDiagonal();
}

// Wishart draw via the Gaussian outer-product construction S G G^T S^T,
// G being d x df standard normal. Valid (and rank-deficient) for df < d.
inline Matrix wishart_sample(const Matrix& scale, int df, RngStream& rng) {
  if (df < 1) throw input_error("wishart_sample: df must be >= 1");
  const Matrix factor = psd_factor(scale);
  const Matrix g = rng.normal_matrix(scale.rows(), df);
  const Matrix fg = factor * g;
  return SymMatrix(fg * fg.transpose()).matrix();
}

struct MixtureDesign {
  Vector weights = (Vector(4) << 0.05, 0.3, 0.4, 0.25).finished();
  double mean_lo = -10.0;
  double mean_hi = 10.0;
  double wishart_scale = 3.0;
  int wishart_df = 7;
  double noise_var = 0.2;
};

inline MixtureParams draw_mixture_params(Eigen::Index d, RngStream& rng,
                                         const MixtureDesign& design = {}) {
  if (d < 1) throw input_error("draw_mixture_params: d must be >= 1");
  MixtureParams p;
  p.weights = design.weights;
  p.noise_var = design.noise_var;
  const Matrix scale = design.wishart_scale * Matrix::Identity(d, d);
  for (Eigen::Index j = 0; j < design.weights.size(); ++j) {
    Vector mean(d);
    for (Eigen::Index i = 0; i < d; ++i) mean[i] = rng.uniform(design.mean_lo, design.mean_hi);
    p.means.push_back(std::move(mean));
    p.covariances.push_back(wishart_sample(scale, design.wishart_df, rng));
  }
  return p;
}

inline void check_mixture(const MixtureParams& p) {
  if (p.means.empty() || p.means.size() != p.covariances.size() ||
      static_cast<Eigen::Index>(p.means.size()) != p.weights.size())
    throw input_error("mixture: inconsistent component counts");
  if ((p.weights.array() < 0.0).any() || std::abs(p.weights.sum() - 1.0) > 1e-12)
    throw input_error("mixture: weights must lie on the simplex");
  if (p.noise_var < 0.0) throw input_error("mixture: negative noise variance");
}

inline Dataset sample_mixture(const MixtureParams& params, Eigen::Index n, RngStream& rng) {
  check_mixture(params);
  if (n < 1) throw input_error("sample_mixture: n must be >= 1");
  const Eigen::Index d = params.dim();
  std::vector<Matrix> factors;
  factors.reserve(params.components());
  for (const auto& cov : params.covariances) factors.push_back(psd_factor(cov));
  const double noise_sd = std::sqrt(params.noise_var);

  Matrix rows(n, d);
  for (Eigen::Index i = 0; i < n; ++i) {
    const std::size_t c = rng.categorical(params.weights);
    Vector x = params.means[c] + factors[c] * rng.normal_vector(d);
    if (noise_sd > 0.0) x += noise_sd * rng.normal_vector(d);
    rows.row(i) = x.transpose();
  }
  return Dataset(std::move(rows));
}

// Folds the additive noise into each component: Sigma_j + noise_var I.
inline MixtureParams effective_components(const MixtureParams& params) {
  MixtureParams out = params;
  if (params.noise_var != 0.0) {
    const Eigen::Index d = params.dim();
    for (auto& cov : out.covariances) cov += params.noise_var * Matrix::Identity(d, d);
  }
  out.noise_var = 0.0;
  return out;
}

}  // namespace kmse
