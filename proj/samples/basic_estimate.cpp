// Shrinkage weights for a small Gaussian sample, every filter at one lambda.
#include <cstdio>

#include "kmse/kmse.hpp"

int main() {
  kmse::RngStream rng(7, 0);
  const kmse::Dataset x(rng.normal_matrix(30, 2));
  const auto kernel = kmse::KernelSpec::gaussian(kmse::median_heuristic_bandwidth(x));
  const auto kbar = kmse::normalized_gram(x, kernel);

  const std::vector<kmse::FilterSpec> filters = {
      kmse::filter::Skmse{0.1},           kmse::filter::Tikhonov{0.1},
      kmse::filter::IteratedTikhonov{3, 0.1}, kmse::filter::TruncatedSvd{0.1},
      kmse::filter::Landweber{10, 1.0},   kmse::filter::NuMethod{4, 1.0},
  };
  std::printf("sigma^2 = %.4f\n", kernel.bandwidth_sq());
  for (const auto& f : filters) {
    const auto beta = kmse::estimate_weights(kbar, f);
    std::printf("%-10s sum(beta) = %.4f  |beta|_inf = %.4f\n", kmse::filter_name(f).c_str(),
                beta.weights.sum(), beta.weights.cwiseAbs().maxCoeff());
  }

  const auto sel = kmse::loocv_select_lambda_tikhonov(x, kernel, kmse::default_lambda_grid());
  std::printf("loocv lambda = %.3g\n", std::get<kmse::filter::Tikhonov>(sel.chosen).lambda);
}
