#pragma once

#include <optional>
#include <string>
#include <vector>

#include "kmse/analytic_risk.hpp"
#include "kmse/errors.hpp"
#include "kmse/estimators.hpp"
#include "kmse/filters.hpp"
#include "kmse/kernels.hpp"
#include "kmse/model_selection.hpp"

namespace kmse {

enum class Estimator { kme, skmse, tikhonov, landweber, nu, itik, tsvd };

// How the shrinkage parameter is chosen.
//   none   - the fixed lambda / iteration count in the config
//   loocv  - leave-one-out (iterations for landweber/nu, lambda grid otherwise)
//   gcv    - generalized cross-validation (tsvd only)
//   oracle - the candidate minimizing the true loss (needs the generating P)
//   automatic - loocv, or gcv for tsvd
enum class Selection { automatic, none, loocv, gcv, oracle };

inline const std::vector<Estimator>& all_estimators() {
  static const std::vector<Estimator> all{Estimator::kme,       Estimator::skmse, Estimator::tikhonov,
                                          Estimator::landweber, Estimator::nu,    Estimator::itik,
                                          Estimator::tsvd};
  return all;
}

inline std::string to_string(Estimator e) {
  switch (e) {
    case Estimator::kme: return "kme";
    case Estimator::skmse: return "skmse";
    case Estimator::tikhonov: return "tikhonov";
    case Estimator::landweber: return "landweber";
    case Estimator::nu: return "nu";
    case Estimator::itik: return "itik";
    case Estimator::tsvd: return "tsvd";
  }
  return "?";
}

inline Estimator parse_estimator(const std::string& name) {
  for (const auto e : all_estimators())
    if (to_string(e) == name) return e;
  throw input_error("unknown filter '" + name + "' (expected kme, skmse, tikhonov, landweber, nu, itik, tsvd)");
}

inline std::string to_string(Selection s) {
  switch (s) {
    case Selection::automatic: return "auto";
    case Selection::none: return "none";
    case Selection::loocv: return "loocv";
    case Selection::gcv: return "gcv";
    case Selection::oracle: return "oracle";
  }
  return "?";
}

inline Selection parse_selection(const std::string& name) {
  for (const auto s : {Selection::automatic, Selection::none, Selection::loocv, Selection::gcv,
                       Selection::oracle})
    if (to_string(s) == name) return s;
  throw input_error("unknown selection method '" + name + "' (expected loocv, gcv, none, oracle)");
}

struct EstimatorConfig {
  Estimator estimator = Estimator::kme;
  Selection selection = Selection::automatic;
  double lambda = 0.1;       // fixed lambda / threshold for Selection::none
  int iters = 10;            // fixed iteration count for landweber / nu
  double nu = 1.0;
  int itik_iters = 3;
  int t_max = 100;           // iteration-path length searched by loocv / oracle
  std::vector<double> lambda_grid = default_lambda_grid();

  Selection resolved_selection() const {
    if (estimator == Estimator::kme) return Selection::none;
    if (selection != Selection::automatic) return selection;
    return estimator == Estimator::tsvd ? Selection::gcv : Selection::loocv;
  }

  std::string label() const {
    const auto s = resolved_selection();
    return s == Selection::none ? to_string(estimator)
                                : to_string(estimator) + "/" + to_string(s);
  }
};

struct FitResult {
  WeightVector beta;
  std::optional<SelectionResult> selection;
};

namespace detail {

inline FilterSpec lambda_filter(const EstimatorConfig& c, double lambda) {
  switch (c.estimator) {
    case Estimator::skmse: return filter::Skmse{lambda};
    case Estimator::tikhonov: return filter::Tikhonov{lambda};
    case Estimator::itik: return filter::IteratedTikhonov{c.itik_iters, lambda};
    case Estimator::tsvd: return filter::TruncatedSvd{lambda};
    default: throw input_error(to_string(c.estimator) + " is not parameterized by lambda");
  }
}

inline bool is_iterative(Estimator e) { return e == Estimator::landweber || e == Estimator::nu; }

inline FitResult oracle_fit(const NormalizedGram& kbar, const EstimatorConfig& c,
                            const LossEvaluator& loss) {
  SelectionResult sel{filter::Tikhonov{1.0}, {}, ScoreKind::loocv, 0};
  std::optional<Vector> best;
  double best_loss = std::numeric_limits<double>::infinity();
  auto consider = [&](double param, const Vector& beta) {
    const double l = loss(beta);
    sel.score_path.emplace_back(param, l);
    if (l < best_loss) {
      best_loss = l;
      best = beta;
      sel.chosen_index = sel.score_path.size() - 1;
    }
  };
  if (is_iterative(c.estimator)) {
    if (c.estimator == Estimator::landweber)
      landweber_path(kbar, c.t_max, 1.0 / kbar.kappa_sq(),
                     [&](int t, const Vector& b) { consider(t, b); });
    else
      nu_method_path(kbar, c.t_max, c.nu, [&](int t, const Vector& b) { consider(t, b); });
    const int t = static_cast<int>(sel.chosen_index) + 1;
    sel.chosen = c.estimator == Estimator::landweber
                     ? FilterSpec(filter::Landweber{t, 1.0 / kbar.kappa_sq()})
                     : FilterSpec(filter::NuMethod{t, c.nu});
  } else {
    std::vector<double> candidates = c.lambda_grid;
    if (c.estimator == Estimator::tsvd) {
      // Every distinct truncation level: thresholds at the positive eigenvalues.
      candidates.clear();
      const Vector gamma = kbar.spectrum().clamped_values();
      for (Eigen::Index i = 0; i < gamma.size(); ++i)
        if (gamma[i] > 0.0) candidates.push_back(gamma[i]);
    }
    for (const double lambda : candidates)
      consider(lambda, spectral_weights(kbar, lambda_filter(c, lambda)).weights);
    sel.chosen = lambda_filter(c, sel.score_path[sel.chosen_index].first);
  }
  WeightVector beta{std::move(*best), to_string(c.estimator), sel.chosen};
  return {std::move(beta), std::move(sel)};
}

}  // namespace detail

// Fits one estimator on `points`, selecting its parameter as configured. The
// loss evaluator is only consulted for Selection::oracle.
inline FitResult fit_estimator(const Dataset& points, const KernelSpec& kernel,
                               const EstimatorConfig& c, const LossEvaluator* oracle = nullptr) {
  const Eigen::Index n = points.size();
  if (c.estimator == Estimator::kme) return {empirical_kme_weights(n), std::nullopt};
  const auto kbar = normalized_gram(points, kernel);
  const Selection s = c.resolved_selection();

  switch (s) {
    case Selection::none: {
      FilterSpec spec = filter::Tikhonov{c.lambda};
      if (c.estimator == Estimator::landweber)
        spec = filter::Landweber{c.iters, 1.0 / kernel.kappa_sq()};
      else if (c.estimator == Estimator::nu)
        spec = filter::NuMethod{c.iters, c.nu};
      else
        spec = detail::lambda_filter(c, c.lambda);
      auto beta = estimate_weights(kbar, spec);
      beta.estimator_id = to_string(c.estimator);
      return {std::move(beta), std::nullopt};
    }
    case Selection::gcv: {
      if (c.estimator != Estimator::tsvd) throw input_error("gcv selection is only defined for tsvd");
      auto sel = gcv_select_tsvd(kbar);
      auto beta = spectral_weights(kbar, sel.chosen);
      return {std::move(beta), std::move(sel)};
    }
    case Selection::loocv: {
      SelectionResult sel =
          detail::is_iterative(c.estimator)
              ? loocv_select_iterations(points, kernel,
                                        c.estimator == Estimator::landweber
                                            ? IterativeAlgorithm::landweber
                                            : IterativeAlgorithm::nu_method,
                                        c.t_max)
              : loocv_select_lambda(points, kernel, c.lambda_grid,
                                    [&](double l) { return detail::lambda_filter(c, l); });
      auto beta = estimate_weights(kbar, sel.chosen);
      beta.estimator_id = to_string(c.estimator);
      return {std::move(beta), std::move(sel)};
    }
    case Selection::oracle:
      if (oracle == nullptr) throw input_error("oracle selection needs the generating distribution");
      return detail::oracle_fit(kbar, c, *oracle);
    case Selection::automatic: break;
  }
  throw input_error("unresolved selection method");
}

}  // namespace kmse
