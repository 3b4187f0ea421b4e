#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "kmse/errors.hpp"

namespace kmse {

// Spectral filters g_lambda. Each acts on an eigenvalue gamma of the
// normalized Gram matrix K/n, i.e. on [0, kappa^2]; the estimator weights are
// beta = g(K/n) (K/n) 1_n and gamma * g(gamma) is the per-component
// shrinkage factor.
namespace filter {

struct Tikhonov {
  double lambda;
};

// Gradient descent from beta = 0 with step eta, stopped after `iters` steps.
struct Landweber {
  int iters;
  double eta;
};

// Accelerated Landweber. `step` plays the role of 1/kappa^2 (set from the
// Gram matrix when left at 0).
struct NuMethod {
  int iters;
  double nu = 1.0;
  double step = 0.0;
};

struct IteratedTikhonov {
  int iters;
  double lambda;
};

struct TruncatedSvd {
  double threshold;
};

// Uniform shrinkage mu_hat / (1 + lambda) written as a filter: gamma * g = 1/(1+lambda).
struct Skmse {
  double lambda;
};

}  // namespace filter

using FilterSpec = std::variant<filter::Tikhonov, filter::Landweber, filter::NuMethod,
                                filter::IteratedTikhonov, filter::TruncatedSvd, filter::Skmse>;

template <class... Ts>
struct overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

inline constexpr double infinite_qualification = std::numeric_limits<double>::infinity();

inline std::string filter_name(const FilterSpec& spec) {
  return std::visit(overloaded{
                        [](const filter::Tikhonov&) { return std::string("tikhonov"); },
                        [](const filter::Landweber&) { return std::string("landweber"); },
                        [](const filter::NuMethod&) { return std::string("nu"); },
                        [](const filter::IteratedTikhonov&) { return std::string("itik"); },
                        [](const filter::TruncatedSvd&) { return std::string("tsvd"); },
                        [](const filter::Skmse&) { return std::string("skmse"); },
                    },
                    spec);
}

// Qualification eta_0 (metadata; the nu-method value is nominal).
inline double qualification(const FilterSpec& spec) {
  return std::visit(overloaded{
                        [](const filter::Tikhonov&) { return 1.0; },
                        [](const filter::Landweber&) { return infinite_qualification; },
                        [](const filter::NuMethod& f) { return f.nu; },
                        [](const filter::IteratedTikhonov& f) { return double(f.iters); },
                        [](const filter::TruncatedSvd&) { return infinite_qualification; },
                        [](const filter::Skmse&) { return 0.0; },
                    },
                    spec);
}

// The regularization level lambda a filter corresponds to. Early stopping
// maps to lambda ~ kappa^2 / t (Landweber) and kappa^2 / t^2 (nu-method).
inline double regularization_level(const FilterSpec& spec, double kappa_sq = 1.0) {
  return std::visit(
      overloaded{
          [](const filter::Tikhonov& f) { return f.lambda; },
          [](const filter::Landweber& f) { return 1.0 / (f.eta * f.iters); },
          [&](const filter::NuMethod& f) {
            const double step = f.step > 0.0 ? f.step : 1.0 / kappa_sq;
            return 1.0 / (step * f.iters * f.iters);
          },
          [](const filter::IteratedTikhonov& f) { return f.lambda; },
          [](const filter::TruncatedSvd& f) { return f.threshold; },
          [](const filter::Skmse& f) { return f.lambda; },
      },
      spec);
}

// Rejects malformed parameters and filter/kappa^2 combinations outside the
// filter's domain (Landweber needs eta * kappa^2 <= 1).
inline void validate(const FilterSpec& spec, double kappa_sq) {
  std::visit(
      overloaded{
          [](const filter::Tikhonov& f) {
            if (!(f.lambda > 0.0)) throw input_error("tikhonov: lambda must be > 0");
          },
          [&](const filter::Landweber& f) {
            if (f.iters < 0) throw input_error("landweber: iteration count must be >= 0");
            if (!(f.eta > 0.0)) throw input_error("landweber: eta must be > 0");
            if (f.eta * kappa_sq > 1.0 + 1e-12)
              throw config_error("landweber: eta * kappa^2 = " + std::to_string(f.eta * kappa_sq) +
                                 " exceeds 1");
          },
          [&](const filter::NuMethod& f) {
            if (f.iters < 0) throw input_error("nu-method: iteration count must be >= 0");
            if (!(f.nu > 0.0)) throw input_error("nu-method: nu must be > 0");
            if (f.step < 0.0) throw input_error("nu-method: step must be >= 0");
            if (f.step * kappa_sq > 1.0 + 1e-12)
              throw config_error("nu-method: step * kappa^2 exceeds 1");
          },
          [](const filter::IteratedTikhonov& f) {
            if (f.iters < 0) throw input_error("itik: iteration count must be >= 0");
            if (!(f.lambda > 0.0)) throw input_error("itik: lambda must be > 0");
          },
          [](const filter::TruncatedSvd& f) {
            if (!(f.threshold > 0.0)) throw input_error("tsvd: threshold must be > 0");
          },
          [](const filter::Skmse& f) {
            if (!(f.lambda >= 0.0)) throw input_error("skmse: lambda must be >= 0");
          },
      },
      spec);
}

// nu-method recursion coefficients for step t >= 1, unscaled by the step size.
struct NuCoefficients {
  double omega;
  double kappa;
};

inline NuCoefficients nu_coefficients(int t, double nu) {
  if (t == 1) return {0.0, (4.0 * nu + 2.0) / (4.0 * nu + 1.0)};
  const double tt = t;
  const double omega = (tt - 1.0) * (2.0 * tt - 3.0) * (2.0 * tt + 2.0 * nu - 1.0) /
                       ((tt + 2.0 * nu - 1.0) * (2.0 * tt + 4.0 * nu - 1.0) *
                        (2.0 * tt + 2.0 * nu - 3.0));
  const double kappa = 4.0 * (2.0 * tt + 2.0 * nu - 1.0) * (tt + nu - 1.0) /
                       ((tt + 2.0 * nu - 1.0) * (2.0 * tt + 4.0 * nu - 1.0));
  return {omega, kappa};
}

namespace detail {

inline double nu_polynomial(const filter::NuMethod& f, double gamma, double kappa_sq) {
  const double step = f.step > 0.0 ? f.step : 1.0 / kappa_sq;
  double prev = 0.0;  // p_{t-2}
  double cur = 0.0;   // p_{t-1}
  for (int t = 1; t <= f.iters; ++t) {
    const auto [omega, kappa] = nu_coefficients(t, f.nu);
    const double next = cur + omega * (cur - prev) + kappa * step * (1.0 - gamma * cur);
    prev = cur;
    cur = next;
  }
  return cur;
}

}  // namespace detail

// g_lambda(gamma). kappa_sq only matters for the nu-method's default step.
inline double scalar_filter(const FilterSpec& spec, double gamma, double kappa_sq = 1.0) {
  if (!(gamma >= 0.0)) throw input_error("scalar_filter: gamma must be >= 0");
  return std::visit(
      overloaded{
          [&](const filter::Tikhonov& f) { return 1.0 / (gamma + f.lambda); },
          [&](const filter::Landweber& f) {
            const double x = f.eta * gamma;
            if (x == 0.0) return f.eta * f.iters;
            if (x <= 1.0) return -std::expm1(f.iters * std::log1p(-x)) / gamma;
            return (1.0 - std::pow(1.0 - x, f.iters)) / gamma;
          },
          [&](const filter::NuMethod& f) { return detail::nu_polynomial(f, gamma, kappa_sq); },
          [&](const filter::IteratedTikhonov& f) {
            // ((gamma + lambda)^t - lambda^t) / (gamma (gamma + lambda)^t)
            //   = (1 - (lambda / (gamma + lambda))^t) / gamma,  t / lambda at gamma = 0
            if (gamma == 0.0) return f.iters / f.lambda;
            const double log_q = std::log1p(-gamma / (gamma + f.lambda));
            return -std::expm1(f.iters * log_q) / gamma;
          },
          [&](const filter::TruncatedSvd& f) {
            return gamma >= f.threshold && gamma > 0.0 ? 1.0 / gamma : 0.0;
          },
          [&](const filter::Skmse& f) {
            return gamma > 0.0 ? 1.0 / ((1.0 + f.lambda) * gamma) : 0.0;
          },
      },
      spec);
}

// r_lambda(gamma) = 1 - gamma g_lambda(gamma).
inline double residual(const FilterSpec& spec, double gamma, double kappa_sq = 1.0) {
  if (const auto* f = std::get_if<filter::TruncatedSvd>(&spec); f && gamma >= f->threshold && gamma > 0.0)
    return 0.0;
  return 1.0 - gamma * scalar_filter(spec, gamma, kappa_sq);
}

// Grid estimates of the admissibility constants: B >= sup |gamma g|,
// C >= sup |r|, and D_eta >= sup |r| gamma^eta / lambda^eta.
struct AdmissibilityReport {
  double sup_gamma_g = 0.0;
  double sup_residual = 0.0;
  std::vector<std::pair<double, double>> residual_eta_bounds;
  int grid_size = 0;
  double lambda = 0.0;
};

inline AdmissibilityReport check_admissibility(const FilterSpec& spec, int grid_size,
                                               const std::vector<double>& eta_list,
                                               double kappa_sq = 1.0) {
  if (grid_size < 100) throw input_error("check_admissibility: grid_size must be >= 100");
  validate(spec, kappa_sq);
  const double lambda = regularization_level(spec, kappa_sq);

  std::vector<double> grid;
  grid.reserve(static_cast<std::size_t>(grid_size) + 1);
  for (int i = 0; i < grid_size; ++i) grid.push_back(kappa_sq * i / (grid_size - 1));
  if (lambda <= kappa_sq) grid.push_back(lambda);

  AdmissibilityReport report;
  report.grid_size = grid_size;
  report.lambda = lambda;
  std::vector<double> eta_sup(eta_list.size(), 0.0);
  for (const double gamma : grid) {
    const double g = scalar_filter(spec, gamma, kappa_sq);
    const double r = residual(spec, gamma, kappa_sq);
    report.sup_gamma_g = std::max(report.sup_gamma_g, std::abs(gamma * g));
    report.sup_residual = std::max(report.sup_residual, std::abs(r));
    for (std::size_t k = 0; k < eta_list.size(); ++k)
      eta_sup[k] = std::max(eta_sup[k], std::abs(r) * std::pow(gamma / lambda, eta_list[k]));
  }
  for (std::size_t k = 0; k < eta_list.size(); ++k)
    report.residual_eta_bounds.emplace_back(eta_list[k], eta_sup[k]);
  return report;
}

// Logarithmic grid, ascending, inclusive of both ends.
inline std::vector<double> log_grid(double lo, double hi, int points) {
  if (!(lo > 0.0) || !(hi >= lo) || points < 1) throw input_error("log_grid: bad range");
  std::vector<double> out;
  out.reserve(static_cast<std::size_t>(points));
  if (points == 1) return {lo};
  const double a = std::log(lo);
  const double b = std::log(hi);
  for (int i = 0; i < points; ++i) out.push_back(std::exp(a + (b - a) * i / (points - 1)));
  out.front() = lo;
  out.back() = hi;
  return out;
}

inline std::vector<double> default_lambda_grid() { return log_grid(1e-6, 1e2, 30); }

}  // namespace kmse
