// Step-size sweep of the ranking optimizer on f(x) = ||x - x*||^2.
// Prints one JSON line per eta.
#include <CLI11.hpp>
#include <algorithm>
#include <iostream>
#include <json.hpp>

#include "ptdt/zorank/zorank.hpp"

using namespace ptdt;

int main(int argc, char** argv) {
  std::vector<double> etas = {0.02, 0.05, 0.1, 0.2, 0.3, 0.5};
  int dim = 25, seeds = 10, iterations = 200, m = 15;
  double mu = 0.05;
  CLI::App app{"ZO-RankSGD quadratic calibration"};
  app.add_option("--eta", etas, "step sizes to sweep");
  app.add_option("--dim", dim);
  app.add_option("--seeds", seeds);
  app.add_option("--iterations", iterations);
  app.add_option("--m", m, "queries per iteration (k = m)");
  app.add_option("--mu", mu);
  CLI11_PARSE(app, argc, argv);

  for (double eta : etas) {
    int converged = 0, aligned = 0, total = 0;
    double worst = 0.0;
    for (int seed = 0; seed < seeds; ++seed) {
      Rng r(derive_seed(99, {std::uint64_t(seed)}));
      const auto xs = standard_normal(r, dim);
      auto f = [&](const std::vector<double>& x) {
        double s = 0;
        for (int i = 0; i < dim; ++i) s += (x[i] - xs[i]) * (x[i] - xs[i]);
        return s;
      };
      zo::ValueOracle oracle([&](const zo::Candidates& c, int) {
        std::vector<double> v;
        for (const auto& x : c) v.push_back(f(x));
        return v;
      });
      zo::TunerConfig cfg;
      cfg.T = iterations;
      cfg.m = m;
      cfg.k = m;
      cfg.mu = mu;
      cfg.eta = eta;
      cfg.seed = std::uint64_t(seed);
      const std::vector<double> x0(dim, 0.0);
      const auto res = zo::zo_rank_sgd(oracle, x0, cfg);
      const double ratio = f(res.x) / f(x0);
      worst = std::max(worst, ratio);
      converged += ratio < 0.1;
      // The step x_{t-1} - x_t is eta * g_t; its sign against grad f decides descent.
      auto prev = x0;
      for (const auto& row : res.trace.rows) {
        double dot = 0;
        for (int i = 0; i < dim; ++i) dot += 2 * (prev[i] - xs[i]) * (prev[i] - row.x[i]);
        aligned += dot > 0;
        ++total;
        prev = row.x;
      }
    }
    nlohmann::json line = {{"eta", eta},
                           {"converged", converged},
                           {"seeds", seeds},
                           {"worst_ratio", worst},
                           {"descent_fraction", total ? double(aligned) / total : 0.0}};
    std::cout << line.dump() << std::endl;
  }
}
