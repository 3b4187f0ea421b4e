#pragma once

#include <cmath>
#include <vector>

#include "kmse/dataset.hpp"
#include "kmse/errors.hpp"
#include "kmse/estimators.hpp"
#include "kmse/kernels.hpp"
#include "kmse/linalg.hpp"
#include "kmse/synthetic.hpp"

namespace kmse {

// Closed forms for the Gaussian RBF kernel against Gaussian measures, from
// the convolution identity
//   int exp(-|x-y|^2 / 2s^2) N(y; theta, Sigma) dy
//     = (s^2)^{d/2} det(Sigma + s^2 I)^{-1/2} exp(-(x-theta)^T (Sigma + s^2 I)^{-1} (x-theta) / 2).
// Determinant and quadratic form go through the eigendecomposition of
// Sigma + s^2 I so rank-deficient Sigma is handled symmetrically.
class GaussianSmoothing {
 public:
  GaussianSmoothing(Vector center, const Matrix& cov, double sigma_sq)
      : center_(std::move(center)) {
    if (!(sigma_sq > 0.0)) throw input_error("GaussianSmoothing: sigma^2 must be > 0");
    if (cov.rows() != center_.size() || cov.cols() != center_.size())
      throw input_error("GaussianSmoothing: covariance/mean dimension mismatch");
    const Eigen::Index d = center_.size();
    const auto eig = sym_eigendecompose(SymMatrix(cov + sigma_sq * Matrix::Identity(d, d)));
    const Vector a = eig.values.cwiseMax(sigma_sq);  // Sigma PSD => a >= sigma^2
    basis_t_ = eig.vectors.transpose();
    inv_scale_ = a.cwiseInverse();
    log_norm_ = 0.5 * (sigma_sq * inv_scale_).array().log().sum();
  }

  template <class X>
  double operator()(const Eigen::MatrixBase<X>& x) const {
    if (x.size() != center_.size()) throw input_error("GaussianSmoothing: dimension mismatch");
    const Vector proj = basis_t_ * (x - center_);
    const double quad = proj.cwiseAbs2().dot(inv_scale_);
    return std::exp(log_norm_ - 0.5 * quad);
  }

 private:
  Vector center_;
  Matrix basis_t_;
  Vector inv_scale_;
  double log_norm_ = 0.0;
};

// <mu_{N(theta, Sigma)}, k(x, .)> for the Gaussian RBF kernel with bandwidth sigma^2.
template <class X>
double kernel_mean_inner(const Eigen::MatrixBase<X>& x, const Vector& theta, const Matrix& cov,
                         double sigma_sq) {
  return GaussianSmoothing(theta, cov, sigma_sq)(x);
}

// |mu_P|^2 = sum_{j,l} pi_j pi_l (s^2)^{d/2} det(S_j + S_l + s^2 I)^{-1/2}
//            exp(-D^T (S_j + S_l + s^2 I)^{-1} D / 2),  D = theta_j - theta_l.
// Additive noise is folded into the components first.
inline double mixture_mean_sq_norm(const MixtureParams& params, double sigma_sq) {
  const MixtureParams p = effective_components(params);
  check_mixture(p);
  const std::size_t r = p.components();
  double total = 0.0;
  for (std::size_t j = 0; j < r; ++j) {
    for (std::size_t l = j; l < r; ++l) {
      const GaussianSmoothing s(p.means[j], p.covariances[j] + p.covariances[l], sigma_sq);
      const double v = p.weights[static_cast<Eigen::Index>(j)] *
                       p.weights[static_cast<Eigen::Index>(l)] * s(p.means[l]);
      total += (j == l) ? v : 2.0 * v;
    }
  }
  return total;
}

// <mu_P, k(x, .)> = sum_j pi_j kernel_mean_inner(x, theta_j, Sigma_j).
class MixtureEmbedding {
 public:
  MixtureEmbedding(const MixtureParams& params, double sigma_sq)
      : params_(effective_components(params)), sigma_sq_(sigma_sq) {
    check_mixture(params_);
    for (std::size_t j = 0; j < params_.components(); ++j)
      parts_.emplace_back(params_.means[j], params_.covariances[j], sigma_sq);
    norm_sq_ = mixture_mean_sq_norm(params_, sigma_sq);
  }

  template <class X>
  double inner(const Eigen::MatrixBase<X>& x) const {
    double v = 0.0;
    for (std::size_t j = 0; j < parts_.size(); ++j)
      v += params_.weights[static_cast<Eigen::Index>(j)] * parts_[j](x);
    return v;
  }

  Vector inner_all(const Dataset& x) const {
    Vector z(x.size());
    for (Eigen::Index i = 0; i < x.size(); ++i) z[i] = inner(x.rows.row(i).transpose());
    return z;
  }

  double norm_sq() const noexcept { return norm_sq_; }
  double sigma_sq() const noexcept { return sigma_sq_; }
  const MixtureParams& params() const noexcept { return params_; }

 private:
  MixtureParams params_;
  double sigma_sq_;
  std::vector<GaussianSmoothing> parts_;
  double norm_sq_ = 0.0;
};

// L(beta, X, P) = |sum_i beta_i k(x_i, .) - mu_P|^2 = beta^T K beta - 2 beta^T z + |mu_P|^2,
// precomputed for one sample so many weight vectors can be scored cheaply.
class LossEvaluator {
 public:
  LossEvaluator(const Dataset& x, const MixtureParams& params, const KernelSpec& kernel)
      : LossEvaluator(x, params, kernel, gram_matrix(x, kernel).raw.matrix()) {}

  LossEvaluator(const Dataset& x, const MixtureParams& params, const KernelSpec& kernel,
                Matrix gram)
      : gram_(std::move(gram)) {
    if (kernel.kind() != KernelKind::gaussian_rbf)
      throw unsupported_error("analytic loss requires the Gaussian RBF kernel");
    if (params.dim() != x.dim()) throw input_error("loss: sample/mixture dimension mismatch");
    const MixtureEmbedding emb(params, kernel.bandwidth_sq());
    z_ = emb.inner_all(x);
    norm_sq_ = emb.norm_sq();
  }

  double operator()(const Vector& beta) const {
    if (beta.size() != z_.size())
      throw input_error("loss: " + std::to_string(beta.size()) + " weights for " +
                        std::to_string(z_.size()) + " points");
    return beta.dot(gram_ * beta) - 2.0 * beta.dot(z_) + norm_sq_;
  }

  const Vector& cross_terms() const noexcept { return z_; }
  double mean_norm_sq() const noexcept { return norm_sq_; }
  const Matrix& gram() const noexcept { return gram_; }

 private:
  Matrix gram_;
  Vector z_;
  double norm_sq_ = 0.0;
};

inline double loss(const WeightVector& beta, const Dataset& x, const MixtureParams& params,
                   const KernelSpec& kernel) {
  return LossEvaluator(x, params, kernel)(beta.weights);
}

}  // namespace kmse
