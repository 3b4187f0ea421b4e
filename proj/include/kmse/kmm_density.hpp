#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "kmse/dataset.hpp"
#include "kmse/errors.hpp"
#include "kmse/estimators.hpp"
#include "kmse/kernels.hpp"
#include "kmse/linalg.hpp"
#include "kmse/pipeline.hpp"
#include "kmse/rng.hpp"
#include "kmse/synthetic.hpp"

namespace kmse {

inline constexpr double variance_floor = 1e-6;

// Q = sum_j pi_j N(theta_j, sigma_j^2 I). Means are stored one per row.
struct MixtureModel {
  Vector weights;
  Matrix means;
  Vector variances;

  Eigen::Index components() const noexcept { return weights.size(); }
  Eigen::Index dim() const noexcept { return means.cols(); }

  MixtureParams as_params() const {
    MixtureParams p;
    p.weights = weights;
    for (Eigen::Index j = 0; j < components(); ++j) {
      p.means.push_back(means.row(j).transpose());
      p.covariances.push_back(variances[j] * Matrix::Identity(dim(), dim()));
    }
    return p;
  }
};

inline void check_model(const MixtureModel& q) {
  const Eigen::Index r = q.components();
  if (r < 1 || q.means.rows() != r || q.variances.size() != r)
    throw input_error("mixture model: inconsistent component counts");
  if ((q.weights.array() < 0.0).any() || std::abs(q.weights.sum() - 1.0) > 1e-9)
    throw input_error("mixture model: weights must lie on the simplex");
  if ((q.variances.array() <= 0.0).any()) throw input_error("mixture model: variances must be > 0");
}

// Lloyd's algorithm from `restarts` random starts (distinct data points); the
// lowest within-cluster sum of squares wins. Empty clusters are re-seeded at
// the point farthest from its centroid.
struct KMeansResult {
  MixtureModel model;
  double wcss = 0.0;
  std::vector<Eigen::Index> labels;
};

namespace detail {

inline double assign(const Matrix& x, const Matrix& centers, std::vector<Eigen::Index>& labels,
                     Vector& dist) {
  double total = 0.0;
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    Eigen::Index best = 0;
    double best_d = std::numeric_limits<double>::infinity();
    for (Eigen::Index j = 0; j < centers.rows(); ++j) {
      const double d2 = (x.row(i) - centers.row(j)).squaredNorm();
      if (d2 < best_d) best_d = d2, best = j;
    }
    labels[static_cast<std::size_t>(i)] = best;
    dist[i] = best_d;
    total += best_d;
  }
  return total;
}

inline KMeansResult lloyd(const Matrix& x, Matrix centers, int max_iter = 300) {
  const Eigen::Index n = x.rows(), r = centers.rows();
  std::vector<Eigen::Index> labels(static_cast<std::size_t>(n), 0);
  Vector dist(n);
  double wcss = assign(x, centers, labels, dist);
  for (int it = 0; it < max_iter; ++it) {
    Matrix sums = Matrix::Zero(r, x.cols());
    Vector counts = Vector::Zero(r);
    for (Eigen::Index i = 0; i < n; ++i) {
      sums.row(labels[static_cast<std::size_t>(i)]) += x.row(i);
      counts[labels[static_cast<std::size_t>(i)]] += 1.0;
    }
    for (Eigen::Index j = 0; j < r; ++j) {
      if (counts[j] > 0.0) {
        centers.row(j) = sums.row(j) / counts[j];
      } else {
        Eigen::Index far = 0;
        dist.maxCoeff(&far);
        centers.row(j) = x.row(far);
        dist[far] = 0.0;
      }
    }
    const double next = assign(x, centers, labels, dist);
    const bool done = next >= wcss;
    wcss = next;
    if (done) break;
  }
  KMeansResult out;
  out.wcss = wcss;
  out.labels = std::move(labels);
  out.model.means = std::move(centers);
  return out;
}

}  // namespace detail

inline KMeansResult kmeans(const Dataset& data, Eigen::Index r, int restarts, RngStream& rng) {
  const Eigen::Index n = data.size(), d = data.dim();
  if (r < 1) throw input_error("kmeans: r must be >= 1");
  if (n < r) throw input_error("kmeans: need at least r points");
  if (restarts < 1) throw input_error("kmeans: restarts must be >= 1");
  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  KMeansResult best;
  best.wcss = std::numeric_limits<double>::infinity();
  for (int s = 0; s < restarts; ++s) {
    std::iota(order.begin(), order.end(), Eigen::Index{0});
    Matrix start(r, d);
    for (Eigen::Index j = 0; j < r; ++j) {
      std::uniform_int_distribution<Eigen::Index> pick(j, n - 1);
      std::swap(order[static_cast<std::size_t>(j)], order[static_cast<std::size_t>(pick(rng.engine()))]);
      start.row(j) = data.rows.row(order[static_cast<std::size_t>(j)]);
    }
    auto result = detail::lloyd(data.rows, std::move(start));
    if (result.wcss < best.wcss) best = std::move(result);
  }

  MixtureModel& q = best.model;
  q.weights = Vector::Zero(r);
  q.variances = Vector::Zero(r);
  for (Eigen::Index i = 0; i < n; ++i) {
    const Eigen::Index j = best.labels[static_cast<std::size_t>(i)];
    q.weights[j] += 1.0;
    q.variances[j] += (data.rows.row(i) - q.means.row(j)).squaredNorm();
  }
  for (Eigen::Index j = 0; j < r; ++j) {
    q.variances[j] = q.weights[j] > 0.0 ? q.variances[j] / (q.weights[j] * double(d)) : 0.0;
    q.variances[j] = std::max(q.variances[j], variance_floor);
  }
  q.weights = (q.weights / double(n)).cwiseMax(1e-3);
  q.weights /= q.weights.sum();
  return best;
}

inline MixtureModel kmeans_init(const Dataset& data, Eigen::Index r, int restarts, RngStream& rng) {
  return kmeans(data, r, restarts, rng).model;
}

// Unconstrained coordinates: theta, log(sigma^2 - floor), softmax logits.
struct KmmParameters {
  Matrix means;
  Vector log_var;
  Vector logits;

  static KmmParameters from(const MixtureModel& q) {
    KmmParameters p{q.means, Vector(q.components()), Vector(q.components())};
    for (Eigen::Index j = 0; j < q.components(); ++j) {
      p.log_var[j] = std::log(std::max(q.variances[j] - variance_floor, 1e-8));
      p.logits[j] = std::log(q.weights[j]);
    }
    p.logits.array() -= p.logits.maxCoeff();
    return p;
  }

  MixtureModel model() const {
    MixtureModel q;
    q.means = means;
    q.variances = log_var.array().exp() + variance_floor;
    const Vector e = (logits.array() - logits.maxCoeff()).exp();
    q.weights = e / e.sum();
    return q;
  }

  Vector flat() const {
    Vector v(means.size() + log_var.size() + logits.size());
    Eigen::Index k = 0;
    for (Eigen::Index j = 0; j < means.rows(); ++j)
      for (Eigen::Index c = 0; c < means.cols(); ++c) v[k++] = means(j, c);
    v.segment(k, log_var.size()) = log_var;
    v.segment(k + log_var.size(), logits.size()) = logits;
    return v;
  }

  static KmmParameters unflat(const Vector& v, Eigen::Index r, Eigen::Index d) {
    KmmParameters p{Matrix(r, d), Vector(r), Vector(r)};
    Eigen::Index k = 0;
    for (Eigen::Index j = 0; j < r; ++j)
      for (Eigen::Index c = 0; c < d; ++c) p.means(j, c) = v[k++];
    p.log_var = v.segment(k, r);
    p.logits = v.segment(k + r, r);
    return p;
  }
};

// |mu_Q - sum_i beta_i k(x_i, .)|^2 for the Gaussian RBF kernel with
// bandwidth sigma^2, with isotropic components:
//   <N(a, s I), N(b, t I)> = (sigma^2 / (sigma^2 + s + t))^{d/2} exp(-|a-b|^2 / 2(sigma^2 + s + t)),
// a point mass being the s = 0 case.
class KmmObjective {
 public:
  KmmObjective(const Dataset& x, const Vector& beta, double sigma_sq)
      : x_(x.rows), beta_(beta), sigma_sq_(sigma_sq) {
    if (!(sigma_sq > 0.0)) throw input_error("kmm_objective: sigma^2 must be > 0");
    if (beta.size() != x.size())
      throw input_error("kmm_objective: " + std::to_string(beta.size()) + " weights for " +
                        std::to_string(x.size()) + " points");
    const Matrix k = gram_matrix(x, KernelSpec::gaussian(sigma_sq)).raw.matrix();
    target_norm_sq_ = beta.dot(k * beta);
  }

  double value(const MixtureModel& q) const { return evaluate(q, nullptr); }

  // Value and gradient with respect to KmmParameters::flat().
  double value_and_gradient(const KmmParameters& p, Vector& grad) const {
    return evaluate(p.model(), &grad, &p);
  }

  double target_norm_sq() const noexcept { return target_norm_sq_; }

 private:
  double evaluate(const MixtureModel& q, Vector* grad, const KmmParameters* p = nullptr) const {
    if (q.dim() != x_.cols()) throw input_error("kmm_objective: model/data dimension mismatch");
    const Eigen::Index r = q.components(), d = q.dim(), n = x_.rows();
    const double half_d = 0.5 * double(d);
    // term T(D, v) and its partials: dT/dD = -T D / (s2 + v),
    // dT/dv = T (|D|^2 / (2 (s2 + v)^2) - d / (2 (s2 + v)))
    auto term = [&](double dist_sq, double v) {
      const double w = sigma_sq_ + v;
      return std::exp(half_d * std::log(sigma_sq_ / w) - 0.5 * dist_sq / w);
    };

    Vector g_pi = Vector::Zero(r);
    Matrix g_theta = Matrix::Zero(r, d);
    Vector g_var = Vector::Zero(r);
    double value = target_norm_sq_;

    for (Eigen::Index j = 0; j < r; ++j) {
      for (Eigen::Index l = 0; l < r; ++l) {
        const Vector diff = (q.means.row(j) - q.means.row(l)).transpose();
        const double v = q.variances[j] + q.variances[l];
        const double w = sigma_sq_ + v;
        const double dsq = diff.squaredNorm();
        const double t = term(dsq, v);
        value += q.weights[j] * q.weights[l] * t;
        if (grad) {
          g_pi[j] += 2.0 * q.weights[l] * t;
          g_theta.row(j) -= 2.0 * q.weights[j] * q.weights[l] * t / w * diff.transpose();
          g_var[j] += 2.0 * q.weights[j] * q.weights[l] * t * (0.5 * dsq / (w * w) - half_d / w);
        }
      }
      const double w = sigma_sq_ + q.variances[j];
      double cross = 0.0;
      Vector cross_theta = Vector::Zero(d);
      double cross_var = 0.0;
      for (Eigen::Index i = 0; i < n; ++i) {
        if (beta_[i] == 0.0) continue;
        const Vector diff = (x_.row(i) - q.means.row(j)).transpose();
        const double dsq = diff.squaredNorm();
        const double bt = beta_[i] * term(dsq, q.variances[j]);
        cross += bt;
        if (grad) {
          cross_theta += bt / w * diff;
          cross_var += bt * (0.5 * dsq / (w * w) - half_d / w);
        }
      }
      value -= 2.0 * q.weights[j] * cross;
      if (grad) {
        g_pi[j] -= 2.0 * cross;
        g_theta.row(j) -= 2.0 * q.weights[j] * cross_theta.transpose();
        g_var[j] -= 2.0 * q.weights[j] * cross_var;
      }
    }

    if (grad) {
      const double mean_g = q.weights.dot(g_pi);
      const Vector g_logits = q.weights.cwiseProduct((g_pi.array() - mean_g).matrix());
      const Vector g_log_var = g_var.cwiseProduct((p->log_var.array().exp()).matrix());
      KmmParameters gp{g_theta, g_log_var, g_logits};
      *grad = gp.flat();
    }
    return value;
  }

  Matrix x_;
  Vector beta_;
  double sigma_sq_;
  double target_norm_sq_ = 0.0;
};

inline double kmm_objective(const MixtureModel& model, const WeightVector& target_beta,
                            const Dataset& x, double sigma_sq) {
  check_model(model);
  return KmmObjective(x, target_beta.weights, sigma_sq).value(model);
}

struct KmmConfig {
  Eigen::Index components = 5;
  int restarts = 50;
  int max_iter = 2000;
  double rel_tol = 1e-8;
  std::uint64_t seed = 0;
};

struct KmmFit {
  MixtureModel model;
  double initial_objective = 0.0;
  double objective = 0.0;
  int iterations = 0;
  std::vector<double> trace;  // accepted objective values, starting at the initialization
};

// Gradient descent with Armijo backtracking on the unconstrained coordinates,
// started from K-means.
inline KmmFit kmm_fit_from(const Dataset& x, const WeightVector& target_beta, double sigma_sq,
                           const MixtureModel& init, const KmmConfig& cfg) {
  const KmmObjective obj(x, target_beta.weights, sigma_sq);
  const Eigen::Index r = init.components(), d = init.dim();
  KmmParameters p = KmmParameters::from(init);
  Vector grad;
  double f = obj.value_and_gradient(p, grad);
  if (!std::isfinite(f)) throw convergence_error("kmm_fit: non-finite objective at iteration 0", f);

  KmmFit out;
  out.initial_objective = f;
  out.trace.push_back(f);
  double step = 1.0;
  int it = 0;
  for (; it < cfg.max_iter; ++it) {
    const double gsq = grad.squaredNorm();
    if (gsq == 0.0) break;
    const Vector v = p.flat();
    bool accepted = false;
    KmmParameters cand = p;
    double f_new = f;
    Vector g_new;
    for (int bt = 0; bt < 60; ++bt) {
      cand = KmmParameters::unflat(v - step * grad, r, d);
      f_new = obj.value_and_gradient(cand, g_new);
      if (!std::isfinite(f_new))
        throw convergence_error("kmm_fit: non-finite objective at iteration " + std::to_string(it + 1),
                                f_new);
      if (f_new <= f - 1e-4 * step * gsq) {
        accepted = true;
        break;
      }
      step *= 0.5;
    }
    if (!accepted) break;
    const double decrease = (f - f_new) / std::max(std::abs(f), 1e-300);
    p = std::move(cand);
    grad = std::move(g_new);
    f = f_new;
    out.trace.push_back(f);
    step *= 2.0;
    if (decrease < cfg.rel_tol) {
      ++it;
      break;
    }
  }
  out.model = p.model();
  out.objective = f;
  out.iterations = it;
  return out;
}

inline KmmFit kmm_fit(const Dataset& x, const WeightVector& target_beta, double sigma_sq,
                      const KmmConfig& cfg) {
  RngStream rng(cfg.seed, 0);
  const MixtureModel init = kmeans_init(x, cfg.components, cfg.restarts, rng);
  return kmm_fit_from(x, target_beta, sigma_sq, init, cfg);
}

// -(1/n) sum_i log sum_j pi_j N(x_i; theta_j, sigma_j^2 I)
inline double nll(const MixtureModel& model, const Dataset& test) {
  if (test.size() < 1) throw input_error("nll: empty test set");
  if (test.dim() != model.dim()) throw input_error("nll: model/data dimension mismatch");
  check_model(model);
  const Eigen::Index r = model.components();
  const double d = double(model.dim());
  const double log_2pi = std::log(2.0 * std::acos(-1.0));
  Vector logs(r);
  double total = 0.0;
  for (Eigen::Index i = 0; i < test.size(); ++i) {
    for (Eigen::Index j = 0; j < r; ++j) {
      const double s = model.variances[j];
      logs[j] = std::log(model.weights[j]) - 0.5 * d * (log_2pi + std::log(s)) -
                0.5 * (test.rows.row(i) - model.means.row(j)).squaredNorm() / s;
    }
    const double m = logs.maxCoeff();
    total += m + std::log((logs.array() - m).exp().sum());
  }
  return -total / double(test.size());
}

// Seeded shuffle; the last test_frac of the shuffled rows form the test set.
struct TrainTestSplit {
  Dataset train;
  Dataset test;
};

inline TrainTestSplit train_test_split(const Dataset& data, double test_frac, std::uint64_t seed) {
  if (!(test_frac > 0.0 && test_frac < 1.0)) throw input_error("test fraction must be in (0, 1)");
  const Eigen::Index n = data.size();
  const auto n_test = static_cast<Eigen::Index>(std::llround(test_frac * double(n)));
  if (n_test < 1 || n - n_test < 2) throw input_error("train/test split leaves an empty side");
  std::vector<Eigen::Index> idx(static_cast<std::size_t>(n));
  std::iota(idx.begin(), idx.end(), Eigen::Index{0});
  RngStream rng(seed, 1);
  for (Eigen::Index i = n - 1; i > 0; --i) {
    std::uniform_int_distribution<Eigen::Index> pick(0, i);
    std::swap(idx[static_cast<std::size_t>(i)], idx[static_cast<std::size_t>(pick(rng.engine()))]);
  }
  const std::vector<Eigen::Index> train(idx.begin(), idx.end() - n_test);
  const std::vector<Eigen::Index> test(idx.end() - n_test, idx.end());
  return {data.subset(train), data.subset(test)};
}

struct DensityResult {
  std::string target_estimator;
  std::uint64_t seed = 0;
  double bandwidth_sq = 0.0;
  double nll_train = 0.0;
  double nll_test = 0.0;
  KmmFit fit;
  std::optional<SelectionResult> selection;
};

// Standardize, split, fit Q to the target kernel mean of the training split
// (median-heuristic bandwidth on the training split) and score held-out NLL.
inline DensityResult density_experiment(const Dataset& raw, const EstimatorConfig& target,
                                        const KmmConfig& cfg, double test_frac = 0.25) {
  const Dataset data = standardize(raw);
  const auto split = train_test_split(data, test_frac, cfg.seed);
  const double bw = median_heuristic_bandwidth(split.train);
  const KernelSpec kernel = KernelSpec::gaussian(bw);
  auto fitted = fit_estimator(split.train, kernel, target);

  DensityResult out;
  out.target_estimator = target.label();
  out.seed = cfg.seed;
  out.bandwidth_sq = bw;
  out.selection = std::move(fitted.selection);
  out.fit = kmm_fit(split.train, fitted.beta, bw, cfg);
  out.nll_train = nll(out.fit.model, split.train);
  out.nll_test = nll(out.fit.model, split.test);
  return out;
}

}  // namespace kmse
