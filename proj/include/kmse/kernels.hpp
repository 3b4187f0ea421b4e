#pragma once

#include <algorithm>
#include <cmath>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "kmse/dataset.hpp"
#include "kmse/errors.hpp"
#include "kmse/linalg.hpp"

namespace kmse {

enum class KernelKind { gaussian_rbf, linear };

// k and kappa^2 = sup_x k(x, x).
class KernelSpec {
 public:
  // exp(-|x - y|^2 / (2 sigma^2)); kappa^2 = 1.
  static KernelSpec gaussian(double bandwidth_sq) {
    if (!(bandwidth_sq > 0.0) || !std::isfinite(bandwidth_sq))
      throw input_error("Gaussian RBF bandwidth must be positive and finite, got " +
                        std::to_string(bandwidth_sq));
    return KernelSpec(KernelKind::gaussian_rbf, bandwidth_sq, 1.0);
  }

  // <x, y> with a caller-supplied bound on |x|^2.
  static KernelSpec linear(double kappa_sq) {
    if (!(kappa_sq > 0.0)) throw input_error("linear kernel needs kappa^2 > 0");
    return KernelSpec(KernelKind::linear, 0.0, kappa_sq);
  }

  // Linear kernel with kappa^2 = max_i |x_i|^2 over the given data.
  static KernelSpec linear_for(const Dataset& data) {
    const double m = data.rows.rowwise().squaredNorm().maxCoeff();
    return linear(m > 0.0 ? m : 1.0);
  }

  KernelKind kind() const noexcept { return kind_; }
  double bandwidth_sq() const noexcept { return bandwidth_sq_; }
  double kappa_sq() const noexcept { return kappa_sq_; }

  std::string name() const { return kind_ == KernelKind::gaussian_rbf ? "rbf" : "linear"; }

  template <class A, class B>
  double operator()(const Eigen::MatrixBase<A>& x, const Eigen::MatrixBase<B>& y) const {
    if (x.size() != y.size())
      throw input_error("kernel: dimension mismatch " + std::to_string(x.size()) + " vs " +
                        std::to_string(y.size()));
    if (kind_ == KernelKind::linear) return x.dot(y);
    return std::exp(-(x - y).squaredNorm() / (2.0 * bandwidth_sq_));
  }

 private:
  KernelSpec(KernelKind kind, double bw, double kappa_sq)
      : kind_(kind), bandwidth_sq_(bw), kappa_sq_(kappa_sq) {}

  KernelKind kind_;
  double bandwidth_sq_;
  double kappa_sq_;
};

template <class A, class B>
double kernel_eval(const KernelSpec& spec, const Eigen::MatrixBase<A>& x,
                   const Eigen::MatrixBase<B>& y) {
  return spec(x, y);
}

struct GramMatrix {
  SymMatrix raw;
  KernelSpec kernel;

  Eigen::Index n() const noexcept { return raw.dim(); }
};

// Row i, column j: k(x_i, y_j).
inline Matrix cross_kernel(const Dataset& x, const Dataset& y, const KernelSpec& spec) {
  if (x.dim() != y.dim()) throw input_error("cross_kernel: dimension mismatch");
  Matrix k(x.size(), y.size());
  for (Eigen::Index j = 0; j < y.size(); ++j)
    for (Eigen::Index i = 0; i < x.size(); ++i)
      k(i, j) = spec(x.rows.row(i), y.rows.row(j));
  return k;
}

inline GramMatrix gram_matrix(const Dataset& points, const KernelSpec& spec) {
  const Eigen::Index n = points.size();
  if (n == 0) throw input_error("gram_matrix: empty dataset");
  Matrix k(n, n);
  for (Eigen::Index j = 0; j < n; ++j) {
    k(j, j) = spec(points.rows.row(j), points.rows.row(j));
    if (k(j, j) > spec.kappa_sq() * (1.0 + 1e-12) + 1e-12)
      throw config_error("gram_matrix: k(x,x) = " + std::to_string(k(j, j)) +
                         " exceeds kappa^2 = " + std::to_string(spec.kappa_sq()));
    for (Eigen::Index i = j + 1; i < n; ++i) {
      const double v = spec(points.rows.row(i), points.rows.row(j));
      k(i, j) = v;
      k(j, i) = v;
    }
  }
  return GramMatrix{SymMatrix(std::move(k)), spec};
}

// Lower median of |x_i - x_j|^2 over pairs i < j. If that median is zero
// because most pairs coincide, the median of the non-zero pairs is used so
// duplicates alone never produce a zero bandwidth.
inline double median_heuristic_bandwidth(const Dataset& points) {
  const Eigen::Index n = points.size();
  if (n < 2) throw input_error("median heuristic needs at least 2 points");
  std::vector<double> sq;
  sq.reserve(static_cast<std::size_t>(n * (n - 1) / 2));
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = i + 1; j < n; ++j)
      sq.push_back((points.rows.row(i) - points.rows.row(j)).squaredNorm());
  auto lower_median = [](std::vector<double>& v) {
    const auto mid = v.begin() + static_cast<std::ptrdiff_t>((v.size() - 1) / 2);
    std::nth_element(v.begin(), mid, v.end());
    return *mid;
  };
  const double med = lower_median(sq);
  if (med > 0.0) return med;
  std::vector<double> nonzero;
  std::copy_if(sq.begin(), sq.end(), std::back_inserter(nonzero), [](double v) { return v > 0.0; });
  if (nonzero.empty())
    throw degenerate_bandwidth_error("median heuristic: all points are identical");
  return lower_median(nonzero);
}

// K / n together with its (lazily computed) spectrum. The spectrum of K/n
// coincides with the non-zero spectrum of the empirical covariance operator,
// so it lies in [0, kappa^2] and is the domain every filter acts on.
class NormalizedGram {
 public:
  NormalizedGram(SymMatrix kbar, double kappa_sq)
      : matrix_(std::move(kbar)), kappa_sq_(kappa_sq), cache_(std::make_shared<Cache>()) {}

  const SymMatrix& matrix() const noexcept { return matrix_; }
  Eigen::Index n() const noexcept { return matrix_.dim(); }
  double kappa_sq() const noexcept { return kappa_sq_; }

  // K/n applied to the uniform vector 1_n = (1/n, ..., 1/n).
  Vector target() const {
    return matrix_.matrix().rowwise().sum() / static_cast<double>(n());
  }

  const EigenDecomposition& spectrum() const {
    std::call_once(cache_->once, [this] { cache_->eig = sym_eigendecompose(matrix_); });
    return *cache_->eig;
  }

  bool has_spectrum() const { return cache_->eig.has_value(); }

 private:
  struct Cache {
    std::once_flag once;
    std::optional<EigenDecomposition> eig;
  };
  SymMatrix matrix_;
  double kappa_sq_;
  std::shared_ptr<Cache> cache_;
};

inline NormalizedGram normalize_gram(const GramMatrix& k) {
  return NormalizedGram(SymMatrix(k.raw.matrix() / static_cast<double>(k.n())),
                        k.kernel.kappa_sq());
}

inline NormalizedGram normalized_gram(const Dataset& points, const KernelSpec& spec) {
  return normalize_gram(gram_matrix(points, spec));
}

}  // namespace kmse
