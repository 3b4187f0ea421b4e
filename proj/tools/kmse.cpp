// kmse: command-line front end.
//
//   kmse estimate      --input X.csv --filter tikhonov --select loocv --output w.json
//   kmse benchmark     --n 50 --d 20 --reps 200 --seed 42 --filters all --output risk.csv
//   kmse rates         --kernel linear --c 1 --beta 1 --n-grid 1000,10000,100000
//   kmse admissibility --filter tsvd --lambda 0.01
//   kmse density-fit   --input X.csv --filter tikhonov --components 5
//   kmse verify        --check prop1|prop2|thm1|thm2|rates|all
//
// Exit status: 0 success, 1 input error, 2 internal/convergence error or a
// failed verification.

#include <CLI11.hpp>

#include <cstdint>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "kmse/io.hpp"
#include "kmse/kmse.hpp"

namespace {

using kmse::json;

struct Options {
  std::string input;
  std::string output;
  std::string kernel = "rbf";
  std::string rate_kernel = "linear";
  std::string bandwidth = "median";
  std::string filter = "kme";
  std::string filters = "all";
  std::string select = "auto";
  double lambda = 0.1;
  int iters = 10;
  double nu = 1.0;
  int t_max = 100;
  long n = 50;
  long d = 20;
  long rate_d = 3;
  long density_n = 200;
  long density_d = 2;
  std::size_t reps = 1000;
  std::uint64_t seed = 0;
  double c = 1.0;
  double beta = 1.0;
  std::string n_grid = "1000,10000,100000";
  long components = 5;
  double test_frac = 0.25;
  int restarts = 50;
  bool redraw = false;
  int grid = 10000;
  std::string check = "all";
};

std::optional<double> parse_bandwidth(const std::string& s) {
  if (s == "median") return std::nullopt;
  try {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used != s.size()) throw std::invalid_argument(s);
    if (!(v > 0.0)) throw kmse::input_error("--bandwidth must be 'median' or a positive number");
    return v;
  } catch (const std::logic_error&) {
    throw kmse::input_error("--bandwidth must be 'median' or a positive number, got '" + s + "'");
  }
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ','))
    if (!item.empty()) out.push_back(item);
  return out;
}

kmse::EstimatorConfig estimator_config(const Options& o, const std::string& name) {
  kmse::EstimatorConfig c;
  c.estimator = kmse::parse_estimator(name);
  c.selection = kmse::parse_selection(o.select);
  c.lambda = o.lambda;
  c.iters = o.iters;
  c.nu = o.nu;
  c.t_max = o.t_max;
  return c;
}

kmse::KernelSpec make_kernel(const Options& o, const kmse::Dataset& x) {
  if (o.kernel == "linear") return kmse::KernelSpec::linear_for(x);
  if (o.kernel != "rbf") throw kmse::input_error("--kernel must be rbf or linear");
  const auto bw = parse_bandwidth(o.bandwidth);
  return kmse::KernelSpec::gaussian(bw ? *bw : kmse::median_heuristic_bandwidth(x));
}

void emit(const Options& o, const std::string& text) {
  if (o.output.empty() || o.output == "-")
    std::cout << text;
  else
    kmse::write_text(o.output, text);
}

int run_estimate(const Options& o) {
  if (o.input.empty()) throw kmse::input_error("estimate needs --input");
  const kmse::Dataset x = kmse::load_csv(o.input);
  const auto kernel = make_kernel(o, x);
  const auto cfg = estimator_config(o, o.filter);
  const auto fit = kmse::fit_estimator(x, kernel, cfg);

  json out{{"config",
            {{"subcommand", "estimate"},
             {"input", o.input},
             {"bandwidth", o.bandwidth},
             {"estimator", kmse::estimator_config_json(cfg)}}},
           {"n", x.size()},
           {"d", x.dim()}};
  out.update(kmse::kernel_json(kernel));
  out.update(kmse::weights_json(fit.beta));
  out["estimator_id"] = cfg.label();
  if (fit.selection) out["selection"] = kmse::selection_json(*fit.selection);
  emit(o, out.dump(2) + "\n");
  return 0;
}

int run_benchmark(const Options& o) {
  kmse::RiskConfig rc;
  rc.n = o.n;
  rc.d = o.d;
  rc.m = o.reps;
  rc.seed = o.seed;
  rc.redraw_params = o.redraw;
  rc.bandwidth_sq = parse_bandwidth(o.bandwidth);
  if (rc.n < 3 || rc.d < 1) throw kmse::input_error("benchmark needs --n >= 3 and --d >= 1");

  std::vector<std::string> names =
      o.filters == "all" ? std::vector<std::string>{} : split_list(o.filters);
  if (names.empty())
    for (const auto e : kmse::all_estimators()) names.push_back(kmse::to_string(e));
  std::vector<kmse::EstimatorConfig> cfgs{kmse::EstimatorConfig{}};
  for (const auto& name : names)
    if (name != "kme") cfgs.push_back(estimator_config(o, name));

  const auto reports = kmse::run_benchmark(cfgs, rc);
  json config{{"subcommand", "benchmark"}, {"risk", kmse::risk_config_json(rc)}};
  json ests = json::array();
  for (const auto& c : cfgs) ests.push_back(kmse::estimator_config_json(c));
  config["estimators"] = std::move(ests);

  const std::string& path = o.output;
  if (path.size() > 5 && path.compare(path.size() - 5, 5, ".json") == 0) {
    json rows = json::array();
    for (const auto& r : reports) {
      const auto paired = kmse::paired_difference(reports.front().losses, r.losses);
      rows.push_back({{"estimator_id", r.estimator_id},
                      {"selection", r.selection},
                      {"mean_loss", r.mean_loss},
                      {"stderr", r.stderr_},
                      {"replications", r.replications},
                      {"improvement_pct", kmse::improvement_percent(reports.front().mean_loss, r.mean_loss)},
                      {"paired_z_vs_kme", paired.z()}});
    }
    emit(o, json{{"config", std::move(config)}, {"reports", std::move(rows)}}.dump(2) + "\n");
    return 0;
  }
  std::ostringstream csv;
  csv << "# " << config.dump() << "\n";
  kmse::write_risk_csv_header(csv);
  for (const auto& r : reports) kmse::write_risk_csv_row(csv, r);
  emit(o, csv.str());
  return 0;
}

int run_rates(const Options& o) {
  kmse::RateExperimentConfig cfg;
  cfg.c = o.c;
  cfg.b = o.beta;
  cfg.n_grid.clear();
  for (const auto& item : split_list(o.n_grid)) {
    try {
      cfg.n_grid.push_back(std::stol(item));
    } catch (const std::logic_error&) {
      throw kmse::input_error("--n-grid must be a comma-separated list of integers");
    }
  }
  cfg.m = o.reps;
  cfg.seed = o.seed;
  cfg.d = o.rate_d;
  kmse::MixtureParams params;
  if (o.rate_kernel == "linear") {
    kmse::RngStream prng(o.seed, kmse::params_stream);
    params = kmse::draw_mixture_params(o.rate_d, prng);
    cfg.kernel = kmse::KernelSpec::linear(1.0);
    cfg.moments = kmse::LinearMoments::mixture(params);
  } else if (o.rate_kernel == "rbf") {
    cfg.bandwidth_sq = parse_bandwidth(o.bandwidth);
    cfg.kernel = kmse::KernelSpec::gaussian(cfg.bandwidth_sq.value_or(1.0));
  } else {
    throw kmse::input_error("--kernel must be rbf or linear");
  }
  const auto result = kmse::rate_experiment(cfg);

  json config{{"subcommand", "rates"},
              {"kernel", o.rate_kernel},
              {"c", cfg.c},
              {"beta", cfg.b},
              {"n_grid", cfg.n_grid},
              {"exact", result.exact},
              {"seed", cfg.seed},
              {"d", cfg.d}};
  if (!result.exact) {
    config["reps"] = cfg.m;
    config["bandwidth"] = o.bandwidth;
  } else {
    config["mean_norm_sq"] = cfg.moments->mean_norm_sq;
    config["k_diag_mean"] = cfg.moments->k_diag_mean;
  }
  std::ostringstream csv;
  csv.precision(17);
  csv << "# " << config.dump() << "\n";
  csv << "n,risk,stderr,kme_risk\n";
  for (const auto& r : result.rows) csv << r.n << ',' << r.risk << ',' << r.stderr_ << ',' << r.kme_risk << '\n';
  csv << "# slope=" << result.slope << "\n";
  emit(o, csv.str());
  if (!o.output.empty() && o.output != "-")
    std::cout << json{{"slope", result.slope}, {"exact", result.exact}}.dump() << "\n";
  return 0;
}

int run_admissibility(const Options& o) {
  const auto est = kmse::parse_estimator(o.filter);
  kmse::FilterSpec spec = kmse::filter::Tikhonov{o.lambda};
  switch (est) {
    case kmse::Estimator::landweber: spec = kmse::filter::Landweber{o.iters, 1.0}; break;
    case kmse::Estimator::nu: spec = kmse::filter::NuMethod{o.iters, o.nu}; break;
    case kmse::Estimator::itik: spec = kmse::filter::IteratedTikhonov{3, o.lambda}; break;
    case kmse::Estimator::tsvd: spec = kmse::filter::TruncatedSvd{o.lambda}; break;
    case kmse::Estimator::skmse: spec = kmse::filter::Skmse{o.lambda}; break;
    case kmse::Estimator::tikhonov: break;
    case kmse::Estimator::kme: throw kmse::input_error("kme has no filter function");
  }
  const auto report = kmse::check_admissibility(spec, o.grid, {0.5, 1.0, 2.0, 4.0});
  json out{{"config", {{"subcommand", "admissibility"}, {"kappa_sq", 1.0}}},
           {"filter", kmse::filter_json(spec)}};
  out.update(kmse::admissibility_json(report));
  emit(o, out.dump(2) + "\n");
  return 0;
}

int run_density_fit(const Options& o) {
  kmse::Dataset data;
  std::string dataset = o.input;
  if (o.input.empty()) {
    kmse::RngStream rng(o.seed, kmse::params_stream);
    kmse::MixtureDesign design;
    design.weights = kmse::Vector::Constant(2, 0.5);
    const auto params = kmse::draw_mixture_params(o.density_d, rng, design);
    kmse::RngStream srng(o.seed, 0);
    data = kmse::sample_mixture(params, o.density_n, srng);
    dataset = "synthetic";
  } else {
    data = kmse::load_csv(o.input);
  }
  const auto target = estimator_config(o, o.filter);
  kmse::KmmConfig kc;
  kc.components = o.components;
  kc.restarts = o.restarts;
  kc.seed = o.seed;
  const auto r = kmse::density_experiment(data, target, kc, o.test_frac);

  json config{{"subcommand", "density-fit"},
              {"input", dataset},
              {"components", kc.components},
              {"restarts", kc.restarts},
              {"max_iter", kc.max_iter},
              {"rel_tol", kc.rel_tol},
              {"test_frac", o.test_frac},
              {"target", kmse::estimator_config_json(target)}};
  if (o.input.empty()) config["n"] = o.density_n, config["d"] = o.density_d;
  json out{{"dataset", dataset},
           {"target_estimator", r.target_estimator},
           {"seed", r.seed},
           {"nll_train", r.nll_train},
           {"nll_test", r.nll_test},
           {"sigma_sq", r.bandwidth_sq},
           {"objective_init", r.fit.initial_objective},
           {"objective", r.fit.objective},
           {"iterations", r.fit.iterations},
           {"model", kmse::model_json(r.fit.model)},
           {"config", std::move(config)}};
  if (r.selection) out["selection"] = kmse::selection_json(*r.selection);
  emit(o, out.dump(2) + "\n");
  return 0;
}

int run_verify(const Options& o) {
  std::vector<std::string> checks{o.check};
  if (o.check == "all") checks = {"prop1", "prop2", "thm1", "thm2", "rates"};
  json out = json::array();
  bool ok = true;
  for (const auto& c : checks) {
    kmse::CheckVerdict v;
    if (c == "prop1") v = kmse::check_prop1(o.seed);
    else if (c == "prop2") v = kmse::check_prop2(o.seed);
    else if (c == "thm1") v = kmse::check_thm1(o.seed);
    else if (c == "thm2") v = kmse::check_thm2(o.seed);
    else if (c == "rates") v = kmse::check_rates();
    else throw kmse::input_error("unknown check '" + c + "' (expected prop1, prop2, thm1, thm2, rates, all)");
    ok = ok && v.pass;
    out.push_back(kmse::verdict_json(v));
  }
  emit(o, (checks.size() == 1 ? out.front() : out).dump(2) + "\n");
  return ok ? 0 : 2;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Kernel mean shrinkage estimators via spectral filters", "kmse"};
  app.require_subcommand(1);
  Options o;

  auto* est = app.add_subcommand("estimate", "Estimator weights for a CSV sample");
  auto* bench = app.add_subcommand("benchmark", "Monte-Carlo risk on the synthetic mixture");
  auto* rates = app.add_subcommand("rates", "Risk of mu_hat / (1 + c n^-beta) along an n grid");
  auto* adm = app.add_subcommand("admissibility", "Grid check of the filter admissibility constants");
  auto* dens = app.add_subcommand("density-fit", "Kernel mean matching mixture fit and test NLL");
  auto* ver = app.add_subcommand("verify", "Run a numerical verification");

  for (auto* s : {est, bench, rates, adm, dens, ver}) {
    s->add_option("--output,--out,-o", o.output, "Output path (default stdout)");
    s->add_option("--seed", o.seed, "Random seed");
  }
  for (auto* s : {est, rates, dens}) s->add_option("--input", o.input, "CSV input");
  for (auto* s : {est, bench, rates}) {
    s->add_option("--bandwidth", o.bandwidth, "median or sigma^2");
  }
  est->add_option("--kernel", o.kernel, "rbf or linear");
  rates->add_option("--kernel", o.rate_kernel, "linear (exact risk, default) or rbf (Monte Carlo)");
  for (auto* s : {est, adm, dens}) s->add_option("--filter", o.filter, "kme skmse tikhonov landweber nu itik tsvd");
  bench->add_option("--filters,--filter", o.filters, "Comma-separated estimators or 'all'");
  for (auto* s : {est, bench, adm, dens}) {
    s->add_option("--lambda", o.lambda, "Fixed lambda / threshold");
    s->add_option("--iters", o.iters, "Fixed iteration count");
    s->add_option("--nu", o.nu, "nu-method parameter");
  }
  for (auto* s : {est, bench, dens}) {
    s->add_option("--select", o.select, "auto, loocv, gcv, none (benchmark also: oracle)");
    s->add_option("--t-max", o.t_max, "Longest iteration path searched");
  }
  bench->add_option("--n", o.n, "Sample size");
  bench->add_option("--d", o.d, "Dimension");
  rates->add_option("--d", o.rate_d, "Dimension of the synthetic P");
  dens->add_option("--n", o.density_n, "Synthetic sample size (without --input)");
  dens->add_option("--d", o.density_d, "Synthetic dimension (without --input)");
  for (auto* s : {bench, rates}) s->add_option("--reps", o.reps, "Replications");
  bench->add_flag("--redraw-params", o.redraw, "Draw a new mixture per replication");
  rates->add_option("--c", o.c, "c in lambda = c n^-beta");
  rates->add_option("--beta", o.beta, "beta in lambda = c n^-beta");
  rates->add_option("--n-grid", o.n_grid, "Comma-separated sample sizes");
  dens->add_option("--components", o.components, "Mixture components r");
  dens->add_option("--test-frac", o.test_frac, "Held-out fraction");
  dens->add_option("--restarts", o.restarts, "K-means restarts");
  adm->add_option("--grid", o.grid, "Grid points on [0, kappa^2]");
  ver->add_option("--check", o.check, "prop1, prop2, thm1, thm2, rates or all");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (*est) return run_estimate(o);
    if (*bench) return run_benchmark(o);
    if (*rates) return run_rates(o);
    if (*adm) return run_admissibility(o);
    if (*dens) return run_density_fit(o);
    if (*ver) return run_verify(o);
  } catch (const std::invalid_argument& e) {
    std::cerr << "kmse: error: " << e.what() << "\n";
    return 1;
  } catch (const kmse::unsupported_error& e) {
    std::cerr << "kmse: error: " << e.what() << "\n";
    return 1;
  } catch (const kmse::degenerate_bandwidth_error& e) {
    std::cerr << "kmse: error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "kmse: internal error: " << e.what() << "\n";
    return 2;
  }
  return 1;
}
