// One PASS/FAIL line per acceptance criterion; exit status 1 if any fails.
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <string>
#include <vector>

#include "kmse/kmse.hpp"

using namespace kmse;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

Outcome prop1() {
  const auto v = check_prop1(1, 100, 30);
  return {v.pass, "max |iterative - spectral| = " + fmt("%.3g", v.metric) + " (<= 1e-8)"};
}

Outcome prop2() {
  const auto v = check_prop2(1, 20);
  return {v.pass, "max |operator - gram| = " + fmt("%.3g", v.metric) + " (<= 1e-8)"};
}

Outcome admissibility() {
  bool ok = true;
  double worst_gg = 0.0, worst_r = 0.0, worst_rg = 0.0;
  for (double lambda : {1e-4, 1e-3, 1e-2, 1e-1, 1.0}) {
    const auto rep = check_admissibility(filter::Tikhonov{lambda}, 10000, {1.0});
    worst_gg = std::max(worst_gg, rep.sup_gamma_g);
    worst_r = std::max(worst_r, rep.sup_residual);
    worst_rg = std::max(worst_rg, rep.residual_eta_bounds[0].second);
    ok = ok && rep.sup_gamma_g <= 1.0 && rep.sup_residual <= 1.0 &&
         rep.residual_eta_bounds[0].second <= 1.0 + 1e-12;
  }
  double worst_tsvd = 0.0;
  for (double lambda : {1e-4, 1e-2, 0.5}) {
    const auto rep = check_admissibility(filter::TruncatedSvd{lambda}, 10000, {1.0, 2.0, 4.0});
    for (const auto& [eta, v] : rep.residual_eta_bounds) {
      worst_tsvd = std::max(worst_tsvd, v);
      ok = ok && v <= 1.0;
    }
  }
  return {ok, "tikhonov sup|gg|=" + fmt("%.6g", worst_gg) + " sup|r|=" + fmt("%.6g", worst_r) +
                  " sup r*g/lambda=" + fmt("%.6g", worst_rg) +
                  "; tsvd sup |r| g^eta / lambda^eta=" + fmt("%.3g", worst_tsvd)};
}

Outcome thm1() {
  const auto v = check_thm1(1, 10000);
  const double a = theorem1_admissibility_bound(1.0, 2.0);
  return {v.pass, v.detail + "; A(1,2)=" + fmt("%.7f", a) + ", literal 0.73877 off by " +
                      fmt("%.1e", std::abs(a - 0.73877)) + " (literal is a rounding slip of the closed form)"};
}

Outcome thm2() {
  const auto v = check_thm2(1, 10000);
  return {v.pass, "sign mismatches=" + fmt("%.0f", v.metric) + " over 10000 tuples"};
}

Outcome loss_gate() {
  constexpr Eigen::Index samples = 1000000;
  int failures = 0;
  double worst_z = 0.0;
  for (int cfg = 0; cfg < 20; ++cfg) {
    RngStream rng(600, std::uint64_t(cfg));
    const Eigen::Index d = 1 + cfg % 5;
    const double sigma_sq = rng.uniform(0.3, 3.0);

    // kernel_mean_inner against E k(x, Y), Y ~ N(theta, Sigma).
    const Vector theta = rng.normal_vector(d);
    const Matrix g = rng.normal_matrix(d, 1 + cfg % 3) * 0.7;
    const Matrix cov = g * g.transpose();
    const Vector x = theta + rng.normal_vector(d) * 0.8;
    MixtureParams single;
    single.weights = Vector::Ones(1);
    single.means = {theta};
    single.covariances = {cov};
    const Dataset ys = sample_mixture(single, samples, rng);
    const auto kernel = KernelSpec::gaussian(sigma_sq);
    std::vector<double> terms(static_cast<std::size_t>(samples));
    for (Eigen::Index s = 0; s < samples; ++s) terms[std::size_t(s)] = kernel(x, ys.rows.row(s).transpose());
    const double z1 = std::abs(mean_of(terms) - kernel_mean_inner(x, theta, cov, sigma_sq)) / stderr_of(terms);

    // mixture_mean_sq_norm against E k(Y, Y'), independent pairs.
    MixtureDesign design;
    design.weights = Vector::Constant(1 + cfg % 3, 1.0 / double(1 + cfg % 3));
    design.mean_lo = -1.5;
    design.mean_hi = 1.5;
    design.wishart_scale = 0.2;
    design.wishart_df = 3;
    design.noise_var = 0.1;
    const auto mix = draw_mixture_params(d, rng, design);
    const Dataset a = sample_mixture(mix, samples, rng);
    const Dataset b = sample_mixture(mix, samples, rng);
    for (Eigen::Index s = 0; s < samples; ++s) terms[std::size_t(s)] = kernel(a.rows.row(s).transpose(), b.rows.row(s).transpose());
    const double z2 = std::abs(mean_of(terms) - mixture_mean_sq_norm(mix, sigma_sq)) / stderr_of(terms);

    worst_z = std::max({worst_z, z1, z2});
    failures += (z1 > 3.0) + (z2 > 3.0);
  }
  return {failures == 0, "40 closed-form values vs 1e6-sample Monte Carlo: " + std::to_string(failures) +
                             " outside 3 stderr, max |z| = " + fmt("%.2f", worst_z)};
}

Outcome synthetic_improvement() {
  RiskConfig cfg;
  cfg.n = 50;
  cfg.d = 20;
  cfg.m = 200;
  cfg.seed = 42;
  std::vector<EstimatorConfig> est{EstimatorConfig{}};
  for (auto e : {Estimator::skmse, Estimator::tikhonov, Estimator::landweber, Estimator::nu,
                 Estimator::itik, Estimator::tsvd}) {
    EstimatorConfig c;
    c.estimator = e;
    c.selection = Selection::oracle;
    est.push_back(c);
  }
  const auto reports = run_benchmark(est, cfg);
  const double base = reports[0].mean_loss;
  bool ok = true;
  std::string detail;
  double skmse_imp = 0.0;
  for (std::size_t i = 1; i < reports.size(); ++i) {
    const double imp = improvement_percent(base, reports[i].mean_loss);
    const double z = paired_difference(reports[0].losses, reports[i].losses).z();
    ok = ok && imp > 0.0 && z > 3.0;
    if (est[i].estimator == Estimator::skmse) skmse_imp = imp;
    detail += to_string(est[i].estimator) + " " + fmt("%.2f", imp) + "% (z=" + fmt("%.1f", z) + ") ";
  }
  for (std::size_t i = 1; i < reports.size(); ++i) {
    const auto e = est[i].estimator;
    if (e == Estimator::tikhonov || e == Estimator::landweber || e == Estimator::nu)
      ok = ok && improvement_percent(base, reports[i].mean_loss) > skmse_imp;
  }
  return {ok, detail};
}

Outcome rates() {
  const auto v = check_rates();
  return {v.pass, "slope=" + fmt("%.5f", v.metric) + "; " + v.detail};
}

Outcome selection_sanity() {
  RiskConfig cfg;
  cfg.n = 50;
  cfg.d = 20;
  cfg.m = 100;
  cfg.seed = 9;
  EstimatorConfig lw_cv, lw_one, tsvd_gcv;
  lw_cv.estimator = lw_one.estimator = Estimator::landweber;
  lw_cv.selection = Selection::loocv;
  lw_one.selection = Selection::none;
  lw_one.iters = 1;
  tsvd_gcv.estimator = Estimator::tsvd;
  tsvd_gcv.selection = Selection::gcv;
  const auto r = run_benchmark({EstimatorConfig{}, lw_cv, lw_one, tsvd_gcv}, cfg);
  int lw_wins = 0, gcv_wins = 0;
  for (std::size_t i = 0; i < cfg.m; ++i) {
    lw_wins += r[1].losses[i] <= r[2].losses[i];
    gcv_wins += r[3].losses[i] <= r[0].losses[i];
  }
  const bool ok = lw_wins >= 90 && gcv_wins >= 60;
  return {ok, "landweber loocv <= t=1 in " + std::to_string(lw_wins) + "/100 (>= 90); tsvd gcv <= kme in " +
                  std::to_string(gcv_wins) + "/100 (>= 60)"};
}

Outcome density() {
  int wins = 0;
  std::string detail;
  for (int seed = 0; seed < 10; ++seed) {
    RngStream rng(100 + std::uint64_t(seed), 0);
    MixtureDesign design;
    design.weights = Vector::Constant(2, 0.5);
    const auto params = draw_mixture_params(2, rng, design);
    const Dataset x = sample_mixture(params, 200, rng);
    KmmConfig cfg;
    cfg.components = 2;
    cfg.seed = std::uint64_t(seed);
    EstimatorConfig tik;
    tik.estimator = Estimator::tikhonov;
    tik.selection = Selection::loocv;
    const auto a = density_experiment(x, EstimatorConfig{}, cfg);
    const auto b = density_experiment(x, tik, cfg);
    wins += b.nll_test <= a.nll_test;
  }

  double worst = 0.0;
  for (int s = 0; s < 20; ++s) {
    RngStream rng(7, std::uint64_t(s));
    const Eigen::Index d = 1 + s % 4, r = 1 + s % 3, n = 15;
    const Dataset x(rng.normal_matrix(n, d));
    const Vector beta = rng.normal_vector(n) / double(n);
    const KmmParameters p{rng.normal_matrix(r, d), rng.normal_vector(r) * 0.5, rng.normal_vector(r)};
    const KmmObjective obj(x, beta, rng.uniform(0.3, 3.0));
    Vector grad, tmp;
    obj.value_and_gradient(p, grad);
    const Vector v = p.flat();
    Vector fd(v.size());
    for (Eigen::Index k = 0; k < v.size(); ++k) {
      const double h = 1e-5;
      Vector up = v, dn = v;
      up[k] += h;
      dn[k] -= h;
      fd[k] = (obj.value_and_gradient(KmmParameters::unflat(up, r, d), tmp) -
               obj.value_and_gradient(KmmParameters::unflat(dn, r, d), tmp)) / (2.0 * h);
    }
    worst = std::max(worst, (grad - fd).norm() / std::max(grad.norm(), 1e-12));
  }
  const bool ok = wins >= 6 && worst <= 1e-5;
  return {ok, "tikhonov-target NLL <= kme-target NLL in " + std::to_string(wins) +
                  "/10 seeds (>= 6); gradient relative FD error " + fmt("%.2e", worst) + " (<= 1e-5)"};
}

Outcome runtime_ordering() {
  RngStream rng(11, 0);
  const Dataset x(rng.normal_matrix(2000, 5));
  const auto kernel = KernelSpec::gaussian(median_heuristic_bandwidth(x));
  const auto gram = gram_matrix(x, kernel);
  std::vector<double> lw, tik;
  for (int run = 0; run < 5; ++run) {
    const auto kbar = normalize_gram(gram);
    auto t0 = Clock::now();
    const auto a = landweber_weights(kbar, 50, 1.0);
    lw.push_back(seconds_since(t0));
    t0 = Clock::now();
    const auto b = tikhonov_weights(kbar, 1e-3);
    tik.push_back(seconds_since(t0));
    if (!a.weights.allFinite() || !b.weights.allFinite()) return {false, "non-finite weights"};
  }
  std::sort(lw.begin(), lw.end());
  std::sort(tik.begin(), tik.end());
  return {lw[2] < tik[2], "n=2000 median landweber(t=50) " + fmt("%.3f", lw[2]) + " s vs eigen tikhonov " +
                              fmt("%.3f", tik[2]) + " s"};
}

}  // namespace

int main() {
  struct Criterion {
    int id;
    const char* name;
    double budget_s;
    std::function<Outcome()> run;
  };
  const std::vector<Criterion> criteria = {
      {1, "iterative vs spectral weights", 10, prop1},
      {2, "operator vs gram estimate", 5, prop2},
      {3, "filter admissibility constants", 5, admissibility},
      {4, "shrinkage admissibility bound", 10, thm1},
      {5, "component-wise shrinkage", 5, thm2},
      {6, "closed-form loss gate", 120, loss_gate},
      {7, "synthetic improvement (oracle lambda)", 300, synthetic_improvement},
      {8, "convergence rate", 1, rates},
      {9, "loocv / gcv sanity", 300, selection_sanity},
      {10, "kmm density fit", 180, density},
      {11, "runtime ordering", 0, runtime_ordering},
  };
  int failed = 0;
  for (const auto& c : criteria) {
    const auto t0 = Clock::now();
    Outcome out;
    try {
      out = c.run();
    } catch (const std::exception& e) {
      out = {false, std::string("exception: ") + e.what()};
    }
    const double t = seconds_since(t0);
    std::string timing = fmt("%.2f s", t);
    if (c.budget_s > 0) timing += fmt(" / budget %.0f s", c.budget_s);
    const bool in_budget = c.budget_s <= 0 || t <= c.budget_s;
    const bool pass = out.pass && in_budget;
    if (!in_budget) out.detail += "; over runtime budget";
    failed += !pass;
    std::printf("%s criterion %2d %s: %s [%s]\n", pass ? "PASS" : "FAIL", c.id, c.name, out.detail.c_str(),
                timing.c_str());
    std::fflush(stdout);
  }
  std::printf("%d/%zu criteria passed\n", int(criteria.size()) - failed, criteria.size());
  return failed == 0 ? 0 : 1;
}
