#pragma once

#include <json.hpp>

#include <fstream>
#include <string>
#include <variant>

#include "kmse/errors.hpp"
#include "kmse/estimators.hpp"
#include "kmse/filters.hpp"
#include "kmse/kmm_density.hpp"
#include "kmse/model_selection.hpp"
#include "kmse/risk.hpp"
#include "kmse/theory_checks.hpp"

namespace kmse {

using json = nlohmann::ordered_json;

inline json vector_json(const Vector& v) {
  json a = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v[i]);
  return a;
}

inline json matrix_json(const Matrix& m) {
  json a = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) a.push_back(vector_json(m.row(i).transpose()));
  return a;
}

inline json filter_json(const FilterSpec& spec) {
  json j{{"name", filter_name(spec)}};
  std::visit(overloaded{
                 [&](const filter::Tikhonov& f) { j["lambda"] = f.lambda; },
                 [&](const filter::Landweber& f) { j["iters"] = f.iters, j["eta"] = f.eta; },
                 [&](const filter::NuMethod& f) {
                   j["iters"] = f.iters, j["nu"] = f.nu;
                   if (f.step > 0.0) j["step"] = f.step;
                 },
                 [&](const filter::IteratedTikhonov& f) { j["iters"] = f.iters, j["lambda"] = f.lambda; },
                 [&](const filter::TruncatedSvd& f) { j["threshold"] = f.threshold; },
                 [&](const filter::Skmse& f) { j["lambda"] = f.lambda; },
             },
             spec);
  const double q = qualification(spec);
  j["qualification"] = std::isinf(q) ? json("inf") : json(q);
  return j;
}

inline json selection_json(const SelectionResult& s) {
  json path = json::array();
  for (const auto& [param, score] : s.score_path) path.push_back({param, score});
  return {{"score_kind", to_string(s.score_kind)},
          {"chosen", filter_json(s.chosen)},
          {"chosen_index", s.chosen_index},
          {"score_path", std::move(path)}};
}

inline json weights_json(const WeightVector& w) {
  json j{{"estimator_id", w.estimator_id}, {"beta", vector_json(w.weights)}};
  if (w.shrinkage) j["filter"] = filter_json(*w.shrinkage);
  return j;
}

inline json kernel_json(const KernelSpec& k) {
  json j{{"kernel", k.name()}, {"kappa_sq", k.kappa_sq()}};
  if (k.kind() == KernelKind::gaussian_rbf) j["sigma_sq"] = k.bandwidth_sq();
  return j;
}

inline json estimator_config_json(const EstimatorConfig& c) {
  return {{"estimator", to_string(c.estimator)},
          {"selection", to_string(c.resolved_selection())},
          {"lambda", c.lambda},
          {"iters", c.iters},
          {"nu", c.nu},
          {"itik_iters", c.itik_iters},
          {"t_max", c.t_max},
          {"lambda_grid", c.lambda_grid == default_lambda_grid()
                              ? json{{"log_lo", 1e-6}, {"log_hi", 1e2}, {"points", 30}}
                              : json(c.lambda_grid)}};
}

inline json risk_config_json(const RiskConfig& c) {
  json j{{"n", c.n},
         {"d", c.d},
         {"m", c.m},
         {"seed", c.seed},
         {"redraw_params", c.redraw_params},
         {"bandwidth", c.bandwidth_sq ? json(*c.bandwidth_sq) : json("median")},
         {"mixture_weights", vector_json(c.design.weights)},
         {"mean_range", {c.design.mean_lo, c.design.mean_hi}},
         {"wishart_scale", c.design.wishart_scale},
         {"wishart_df", c.design.wishart_df},
         {"noise_var", c.design.noise_var}};
  return j;
}

inline json model_json(const MixtureModel& q) {
  return {{"weights", vector_json(q.weights)},
          {"means", matrix_json(q.means)},
          {"variances", vector_json(q.variances)}};
}

inline json admissibility_json(const AdmissibilityReport& r) {
  json eta = json::array();
  for (const auto& [e, v] : r.residual_eta_bounds) eta.push_back({{"eta", e}, {"sup", v}});
  return {{"lambda", r.lambda},
          {"grid_size", r.grid_size},
          {"sup_gamma_g", r.sup_gamma_g},
          {"sup_residual", r.sup_residual},
          {"sup_residual_gamma_eta_over_lambda_eta", std::move(eta)}};
}

inline json verdict_json(const CheckVerdict& v) {
  return {{"check", v.check},
          {"pass", v.pass},
          {"metric", v.metric},
          {"threshold", v.threshold},
          {"detail", v.detail}};
}

inline void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw input_error("cannot open '" + path + "' for writing");
  out << text;
  if (!out) throw input_error("failed writing '" + path + "'");
}

}  // namespace kmse
