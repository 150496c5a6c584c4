#pragma once

// Convergence bound for gamma-scaled federated SGD on rho-strongly convex,
// beta-smooth local objectives:
//
//   E[F(w_T)] - F* <= (kappa / T) * (2 (B + C) / rho + rho xi gamma_max M / 2)
//
//   kappa = beta / rho,  xi = max(8 kappa, tau_max),  eta = 2 / (rho xi)
//   B = (1/rho) sum_k p_k^2 gamma_max sigma_k^2 + 6 beta eta^2 + 8 (tau_max - 1)^2 G^2
//   C = (4 / K) tau_max^2 G^2
//   M = E ||w_1 - w*||^2

#include <cstdint>
#include <vector>

namespace flamma::analysis {

struct ConvergenceConstants {
  double rho = 1.0;
  double beta = 1.0;
  double kappa = 1.0;
  double xi = 8.0;
  double eta = 0.25;
  double G2 = 0.0;
  std::vector<double> sigma2;
  int K = 1;
  int tau_max = 1;
  double gamma_max = 1.0;
  double M = 0.0;
  std::vector<double> p;

  // Fills kappa, xi and eta from rho, beta and tau_max.
  static ConvergenceConstants make(double rho, double beta, int tau_max, double gamma_max,
                                   double G2, std::vector<double> sigma2, std::vector<double> p,
                                   int K, double M);

  void validate() const;
};

double bound_B(const ConvergenceConstants& c);
double bound_C(const ConvergenceConstants& c);
double theorem_bound(const ConvergenceConstants& c, int T);

struct BoundCheckOptions {
  int num_clients = 10;
  int clients_per_round = 5;
  int rounds = 100;
  int seeds = 10;
  std::uint64_t seed = 1;
  int dim = 5;
  int tau_max = 10;
  double target_scale = 1.0;  // client anchors b_i ~ N(0, target_scale^2 I)
  double init_scale = 3.0;    // w_1 ~ N(0, init_scale^2 I)
  // Measured G^2 and sigma_k^2 are multiplied by this before evaluating the bound.
  double inflation = 1.1;
  // Testing hook: all anchors equal to this point and w_1 placed on it.
  bool degenerate_at_optimum = false;
  int threads = 1;
};

struct BoundReport {
  double empirical_gap = 0.0;  // mean over seeds of F(w_T) - F*
  double bound = 0.0;
  bool holds = false;
  ConvergenceConstants constants;
  std::vector<double> per_seed_gap;
};

// Runs the game protocol on F_i(w) = 0.5 ||w - b_i||^2 (rho = beta = 1) with
// the step size eta from the bound, measuring G^2, sigma_k^2 and M along the
// way, and compares the seed-averaged optimality gap against the bound.
BoundReport check_bound_quadratic(const BoundCheckOptions& options);

}  // namespace flamma::analysis
