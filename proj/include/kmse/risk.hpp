#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "kmse/analytic_risk.hpp"
#include "kmse/kernels.hpp"
#include "kmse/parallel.hpp"
#include "kmse/pipeline.hpp"
#include "kmse/rng.hpp"
#include "kmse/synthetic.hpp"

namespace kmse {

class replication_error : public std::runtime_error {
 public:
  replication_error(std::size_t index, const std::string& what)
      : std::runtime_error("replication " + std::to_string(index) + ": " + what), index_(index) {}
  std::size_t index() const noexcept { return index_; }

 private:
  std::size_t index_;
};

struct RiskConfig {
  Eigen::Index n = 50;
  Eigen::Index d = 20;
  std::size_t m = 1000;
  std::uint64_t seed = 0;
  bool redraw_params = false;
  std::optional<double> bandwidth_sq;  // empty: median heuristic per replication
  MixtureDesign design{};
};

struct RiskReport {
  std::string estimator_id;
  double mean_loss = 0.0;
  double stderr_ = 0.0;
  std::size_t replications = 0;
  std::string selection;
  RiskConfig config;
  std::vector<double> losses;  // per replication, in index order
};

inline double mean_of(const std::vector<double>& v) {
  double s = 0.0;
  for (const double x : v) s += x;
  return s / static_cast<double>(v.size());
}

// Sample standard deviation / sqrt(m).
inline double stderr_of(const std::vector<double>& v) {
  const double mu = mean_of(v);
  double ss = 0.0;
  for (const double x : v) ss += (x - mu) * (x - mu);
  return std::sqrt(ss / static_cast<double>(v.size() - 1)) / std::sqrt(static_cast<double>(v.size()));
}

// Parameters are drawn once per experiment from a dedicated stream unless
// redraw_params is set, in which case replication r draws its own.
inline constexpr std::uint64_t params_stream = std::numeric_limits<std::uint64_t>::max();

struct Replication {
  MixtureParams params;
  Dataset sample;
  KernelSpec kernel;
};

inline Replication make_replication(const RiskConfig& cfg, const MixtureParams& shared,
                                    std::size_t r) {
  RngStream rng(cfg.seed, r);
  MixtureParams params = shared;
  if (cfg.redraw_params) {
    RngStream prng = rng.child(1);
    params = draw_mixture_params(cfg.d, prng, cfg.design);
  }
  Dataset x = sample_mixture(params, cfg.n, rng);
  const double bw = cfg.bandwidth_sq ? *cfg.bandwidth_sq : median_heuristic_bandwidth(x);
  return {std::move(params), std::move(x), KernelSpec::gaussian(bw)};
}

inline MixtureParams experiment_params(const RiskConfig& cfg) {
  RngStream prng(cfg.seed, params_stream);
  return draw_mixture_params(cfg.d, prng, cfg.design);
}

// Runs every estimator on the same m samples: replication r draws its sample
// from stream r, fits each estimator (including its parameter selection) and
// records the analytic loss against the generating mixture.
inline std::vector<RiskReport> run_benchmark(const std::vector<EstimatorConfig>& estimators,
                                             const RiskConfig& cfg) {
  if (cfg.m < 2) throw input_error("risk estimation needs at least 2 replications");
  if (estimators.empty()) throw input_error("no estimators to benchmark");
  const MixtureParams shared = experiment_params(cfg);
  std::vector<std::vector<double>> losses(estimators.size(), std::vector<double>(cfg.m, 0.0));

  parallel_for(cfg.m, [&](std::size_t r) {
    try {
      const Replication rep = make_replication(cfg, shared, r);
      const LossEvaluator loss(rep.sample, rep.params, rep.kernel);
      for (std::size_t e = 0; e < estimators.size(); ++e) {
        const auto fit = fit_estimator(rep.sample, rep.kernel, estimators[e], &loss);
        losses[e][r] = loss(fit.beta.weights);
      }
    } catch (const std::exception& ex) {
      throw replication_error(r, ex.what());
    }
  });

  std::vector<RiskReport> reports;
  for (std::size_t e = 0; e < estimators.size(); ++e) {
    RiskReport rep;
    rep.estimator_id = estimators[e].label();
    rep.selection = to_string(estimators[e].resolved_selection());
    rep.replications = cfg.m;
    rep.config = cfg;
    rep.mean_loss = mean_of(losses[e]);
    rep.stderr_ = stderr_of(losses[e]);
    rep.losses = std::move(losses[e]);
    reports.push_back(std::move(rep));
  }
  return reports;
}

inline RiskReport risk_estimate(const EstimatorConfig& estimator, const RiskConfig& cfg) {
  return run_benchmark({estimator}, cfg).front();
}

// 100 (R - R_est) / R relative to a baseline risk R.
inline double improvement_percent(double baseline_risk, double risk) {
  return 100.0 * (baseline_risk - risk) / baseline_risk;
}

// Paired comparison on common replications: mean and standard error of
// baseline_r - candidate_r.
struct PairedDifference {
  double mean = 0.0;
  double stderr_ = 0.0;
  double z() const { return stderr_ > 0.0 ? mean / stderr_ : (mean > 0.0 ? INFINITY : 0.0); }
};

inline PairedDifference paired_difference(const std::vector<double>& baseline,
                                          const std::vector<double>& candidate) {
  if (baseline.size() != candidate.size() || baseline.size() < 2)
    throw input_error("paired_difference: need two equal-length series of length >= 2");
  std::vector<double> diff(baseline.size());
  for (std::size_t i = 0; i < diff.size(); ++i) diff[i] = baseline[i] - candidate[i];
  return {mean_of(diff), stderr_of(diff)};
}

inline void write_risk_csv_header(std::ostream& out) {
  out << "estimator,n,d,m,seed,mean_loss,stderr\n";
}

inline void write_risk_csv_row(std::ostream& out, const RiskReport& r) {
  const auto old = out.precision(17);
  out << r.estimator_id << ',' << r.config.n << ',' << r.config.d << ',' << r.replications << ','
      << r.config.seed << ',' << r.mean_loss << ',' << r.stderr_ << '\n';
  out.precision(old);
}

}  // namespace kmse
