#pragma once

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <utility>
#include <vector>

#include "kmse/errors.hpp"

namespace kmse {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

// Dense symmetric matrix. Symmetry is exact: the constructor replaces M by
// (M + M^T) / 2 entrywise, so (i,j) and (j,i) hold the same double.
class SymMatrix {
 public:
  explicit SymMatrix(Matrix m) : m_(std::move(m)) {
    if (m_.rows() == 0 || m_.rows() != m_.cols())
      throw input_error("SymMatrix: expected a non-empty square matrix, got " +
                        std::to_string(m_.rows()) + "x" + std::to_string(m_.cols()));
    const Eigen::Index n = m_.rows();
    for (Eigen::Index j = 0; j < n; ++j)
      for (Eigen::Index i = j + 1; i < n; ++i) {
        const double s = 0.5 * (m_(i, j) + m_(j, i));
        m_(i, j) = s;
        m_(j, i) = s;
      }
  }

  Eigen::Index dim() const noexcept { return m_.rows(); }
  const Matrix& matrix() const noexcept { return m_; }
  double operator()(Eigen::Index i, Eigen::Index j) const { return m_(i, j); }

  bool all_finite() const { return m_.allFinite(); }

 private:
  Matrix m_;
};

struct EigenDecomposition {
  Vector values;   // non-increasing
  Matrix vectors;  // column i pairs with values[i]

  Matrix reconstruct() const {
    return vectors * values.asDiagonal() * vectors.transpose();
  }

  double orthogonality_error() const {
    const Eigen::Index n = vectors.cols();
    return (vectors.transpose() * vectors - Matrix::Identity(n, n)).cwiseAbs().maxCoeff();
  }

  // Eigenvalues with tiny negative round-off set to zero; filters live on [0, kappa^2].
  Vector clamped_values() const { return values.cwiseMax(0.0); }
};

enum class EigenMethod {
  automatic,    // Jacobi for small problems, tridiagonal QL otherwise
  jacobi,       // cyclic Jacobi rotations
  tridiagonal,  // Householder reduction + implicit QL
};

namespace detail {

inline void sort_descending(Vector& values, Matrix& vectors) {
  const Eigen::Index n = values.size();
  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](Eigen::Index a, Eigen::Index b) { return values[a] > values[b]; });
  Vector sorted_values(n);
  Matrix sorted_vectors(n, n);
  for (Eigen::Index k = 0; k < n; ++k) {
    sorted_values[k] = values[order[static_cast<std::size_t>(k)]];
    sorted_vectors.col(k) = vectors.col(order[static_cast<std::size_t>(k)]);
  }
  values = std::move(sorted_values);
  vectors = std::move(sorted_vectors);
}

inline double off_diagonal_norm(const Matrix& a) {
  double sum = 0.0;
  const Eigen::Index n = a.rows();
  for (Eigen::Index j = 0; j < n; ++j)
    for (Eigen::Index i = j + 1; i < n; ++i) sum += a(i, j) * a(i, j);
  return std::sqrt(2.0 * sum);
}

inline EigenDecomposition jacobi_eigen(const SymMatrix& m, int max_sweeps) {
  Matrix a = m.matrix();
  const Eigen::Index n = a.rows();
  Matrix v = Matrix::Identity(n, n);
  const double tol = 1e-12 * a.norm();

  double off = off_diagonal_norm(a);
  int sweep = 0;
  while (off > tol) {
    if (sweep == max_sweeps)
      throw convergence_error("Jacobi eigensolver did not converge in " +
                                  std::to_string(max_sweeps) + " sweeps",
                              off);
    ++sweep;
    for (Eigen::Index p = 0; p < n - 1; ++p) {
      for (Eigen::Index q = p + 1; q < n; ++q) {
        const double apq = a(p, q);
        if (apq == 0.0) continue;
        const double theta = (a(q, q) - a(p, p)) / (2.0 * apq);
        const double t = (theta >= 0.0 ? 1.0 : -1.0) /
                         (std::abs(theta) + std::sqrt(1.0 + theta * theta));
        const double c = 1.0 / std::sqrt(1.0 + t * t);
        const double s = t * c;
        for (Eigen::Index k = 0; k < n; ++k) {
          if (k == p || k == q) continue;
          const double akp = a(k, p);
          const double akq = a(k, q);
          const double new_kp = c * akp - s * akq;
          const double new_kq = s * akp + c * akq;
          a(k, p) = a(p, k) = new_kp;
          a(k, q) = a(q, k) = new_kq;
        }
        a(p, p) -= t * apq;
        a(q, q) += t * apq;
        a(p, q) = a(q, p) = 0.0;
        for (Eigen::Index k = 0; k < n; ++k) {
          const double vkp = v(k, p);
          const double vkq = v(k, q);
          v(k, p) = c * vkp - s * vkq;
          v(k, q) = s * vkp + c * vkq;
        }
      }
    }
    off = off_diagonal_norm(a);
  }

  EigenDecomposition out{a.diagonal(), std::move(v)};
  sort_descending(out.values, out.vectors);
  return out;
}

// Householder tridiagonalization followed by implicit QL with Wilkinson-type
// shifts (the EISPACK tred2/tql2 pair). Column-oriented inner loops.
inline EigenDecomposition tridiagonal_ql_eigen(const SymMatrix& m) {
  const Eigen::Index n = m.dim();
  Matrix v = m.matrix();
  Vector d(n), e(n);

  for (Eigen::Index j = 0; j < n; ++j) d[j] = v(n - 1, j);

  for (Eigen::Index i = n - 1; i > 0; --i) {
    double scale = 0.0;
    double h = 0.0;
    for (Eigen::Index k = 0; k < i; ++k) scale += std::abs(d[k]);
    if (scale == 0.0) {
      e[i] = d[i - 1];
      for (Eigen::Index j = 0; j < i; ++j) {
        d[j] = v(i - 1, j);
        v(i, j) = 0.0;
        v(j, i) = 0.0;
      }
    } else {
      for (Eigen::Index k = 0; k < i; ++k) {
        d[k] /= scale;
        h += d[k] * d[k];
      }
      double f = d[i - 1];
      double g = std::sqrt(h);
      if (f > 0) g = -g;
      e[i] = scale * g;
      h -= f * g;
      d[i - 1] = f - g;
      e.head(i).setZero();
      for (Eigen::Index j = 0; j < i; ++j) {
        f = d[j];
        v(j, i) = f;
        g = e[j] + v(j, j) * f;
        const Eigen::Index len = i - 1 - j;
        if (len > 0) {
          auto col = v.col(j).segment(j + 1, len);
          g += col.dot(d.segment(j + 1, len));
          e.segment(j + 1, len) += f * col;
        }
        e[j] = g;
      }
      f = 0.0;
      for (Eigen::Index j = 0; j < i; ++j) {
        e[j] /= h;
        f += e[j] * d[j];
      }
      const double hh = f / (h + h);
      e.head(i) -= hh * d.head(i);
      for (Eigen::Index j = 0; j < i; ++j) {
        f = d[j];
        g = e[j];
        const Eigen::Index len = i - j;
        v.col(j).segment(j, len) -= f * e.segment(j, len) + g * d.segment(j, len);
        d[j] = v(i - 1, j);
        v(i, j) = 0.0;
      }
    }
    d[i] = h;
  }

  for (Eigen::Index i = 0; i < n - 1; ++i) {
    v(n - 1, i) = v(i, i);
    v(i, i) = 1.0;
    const double h = d[i + 1];
    if (h != 0.0) {
      const Eigen::Index len = i + 1;
      Vector u = v.col(i + 1).head(len) / h;
      // V[0..i, 0..i] -= u * (V[0..i, i+1]^T V[0..i, 0..i])
      Eigen::RowVectorXd g = v.col(i + 1).head(len).transpose() * v.topLeftCorner(len, len);
      v.topLeftCorner(len, len).noalias() -= u * g;
    }
    v.col(i + 1).head(i + 1).setZero();
  }
  for (Eigen::Index j = 0; j < n; ++j) {
    d[j] = v(n - 1, j);
    v(n - 1, j) = 0.0;
  }
  v(n - 1, n - 1) = 1.0;
  e[0] = 0.0;

  // Implicit QL on the tridiagonal (d, e).
  for (Eigen::Index i = 1; i < n; ++i) e[i - 1] = e[i];
  e[n - 1] = 0.0;

  double f = 0.0;
  double tst1 = 0.0;
  const double eps = std::ldexp(1.0, -52);
  constexpr int max_iter_per_value = 60;
  for (Eigen::Index l = 0; l < n; ++l) {
    tst1 = std::max(tst1, std::abs(d[l]) + std::abs(e[l]));
    Eigen::Index mm = l;
    while (mm < n && std::abs(e[mm]) > eps * tst1) ++mm;
    if (mm > l) {
      int iter = 0;
      do {
        if (++iter > max_iter_per_value)
          throw convergence_error("tridiagonal QL did not converge", std::abs(e[l]));
        double g = d[l];
        double p = (d[l + 1] - g) / (2.0 * e[l]);
        double r = std::hypot(p, 1.0);
        if (p < 0) r = -r;
        d[l] = e[l] / (p + r);
        d[l + 1] = e[l] * (p + r);
        const double dl1 = d[l + 1];
        double h = g - d[l];
        for (Eigen::Index i = l + 2; i < n; ++i) d[i] -= h;
        f += h;

        p = d[mm];
        double c = 1.0, c2 = 1.0, c3 = 1.0;
        const double el1 = e[l + 1];
        double s = 0.0, s2 = 0.0;
        for (Eigen::Index i = mm - 1; i >= l; --i) {
          c3 = c2;
          c2 = c;
          s2 = s;
          g = c * e[i];
          h = c * p;
          r = std::hypot(p, e[i]);
          e[i + 1] = s * r;
          s = e[i] / r;
          c = p / r;
          p = c * d[i] - s * g;
          d[i + 1] = h + s * (c * g + s * d[i]);
          double* vi = v.col(i).data();
          double* vi1 = v.col(i + 1).data();
          for (Eigen::Index k = 0; k < n; ++k) {
            const double t = vi1[k];
            vi1[k] = s * vi[k] + c * t;
            vi[k] = c * vi[k] - s * t;
          }
        }
        p = -s * s2 * c3 * el1 * e[l] / dl1;
        e[l] = s * p;
        d[l] = c * p;
      } while (std::abs(e[l]) > eps * tst1);
    }
    d[l] += f;
    e[l] = 0.0;
  }

  EigenDecomposition out{std::move(d), std::move(v)};
  sort_descending(out.values, out.vectors);
  return out;
}

}  // namespace detail

inline constexpr Eigen::Index jacobi_max_dim = 128;
inline constexpr int jacobi_max_sweeps = 100;

inline EigenDecomposition sym_eigendecompose(const SymMatrix& m,
                                             EigenMethod method = EigenMethod::automatic) {
  if (!m.all_finite()) throw input_error("sym_eigendecompose: non-finite entries");
  if (method == EigenMethod::automatic)
    method = m.dim() <= jacobi_max_dim ? EigenMethod::jacobi : EigenMethod::tridiagonal;
  if (method == EigenMethod::jacobi) return detail::jacobi_eigen(m, jacobi_max_sweeps);
  return detail::tridiagonal_ql_eigen(m);
}

// Cholesky factor M = L L^T of a symmetric positive definite matrix.
class Cholesky {
 public:
  explicit Cholesky(const SymMatrix& m) : l_(m.matrix()) {
    const Eigen::Index n = l_.rows();
    for (Eigen::Index j = 0; j < n; ++j) {
      double pivot = l_(j, j) - l_.row(j).head(j).squaredNorm();
      if (!(pivot > 0.0)) throw definiteness_error(static_cast<std::size_t>(j), pivot);
      const double ljj = std::sqrt(pivot);
      l_(j, j) = ljj;
      for (Eigen::Index i = j + 1; i < n; ++i)
        l_(i, j) = (l_(i, j) - l_.row(i).head(j).dot(l_.row(j).head(j))) / ljj;
    }
    l_.triangularView<Eigen::StrictlyUpper>().setZero();
  }

  Vector solve(const Vector& b) const {
    if (b.size() != l_.rows())
      throw input_error("Cholesky::solve: right-hand side has length " +
                        std::to_string(b.size()) + ", expected " + std::to_string(l_.rows()));
    const Eigen::Index n = l_.rows();
    Vector y = b;
    for (Eigen::Index i = 0; i < n; ++i) y[i] = (y[i] - l_.row(i).head(i).dot(y.head(i))) / l_(i, i);
    for (Eigen::Index i = n - 1; i >= 0; --i)
      y[i] = (y[i] - l_.col(i).tail(n - 1 - i).dot(y.tail(n - 1 - i))) / l_(i, i);
    return y;
  }

  const Matrix& factor() const noexcept { return l_; }

 private:
  Matrix l_;
};

// Solves M x = b for symmetric positive definite M, with one step of
// iterative refinement.
inline Vector solve_spd(const SymMatrix& m, const Vector& b) {
  if (b.size() != m.dim())
    throw input_error("solve_spd: right-hand side has length " + std::to_string(b.size()) +
                      ", expected " + std::to_string(m.dim()));
  const Cholesky chol(m);
  Vector x = chol.solve(b);
  x += chol.solve(b - m.matrix() * x);
  return x;
}

}  // namespace kmse
