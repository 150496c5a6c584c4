#pragma once

// Leader/follower game between the server (chooses the decay factor gamma)
// and the clients (choose their number of local epochs tau).
//
// Client payoff:  U_i = gamma * omega_i * tau_i - c_i * tau_i^2
// Server payoff:  U_s = sum_i gamma * (omega_i + tau_i) - t * gamma^2
//
// All functions are pure.

#include <map>
#include <span>

namespace flamma::game {

inline constexpr double kDefaultGammaMin = 0.01;
inline constexpr double kEquilibriumSlack = 1e-9;

struct ClientGameParams {
  int client_id = 0;
  double cost_coeff = 1.0;    // c_i > 0
  double contribution = 1.0;  // omega_i in [0, 1]
  int tau_min = 1;
  int tau_max = 10;

  // Throws InvalidArgument if an invariant is broken.
  void validate() const;
};

struct GameState {
  int round = 1;
  double gamma = 1.0;
  std::map<int, int> epochs;
  std::map<int, double> contributions;

  void validate() const;
};

double clamp_contribution(double omega);

double client_utility(double gamma, double contribution, double cost_coeff, double tau);

// Unconstrained real maximizer gamma * omega / (2c) of client_utility.
double best_response_tau(double gamma, double contribution, double cost_coeff);

// Integer epoch choice: the better of floor/ceil of tau_star clamped into
// [tau_min, tau_max] (ties toward the smaller), or 0 when that best choice
// would have negative utility.
int quantize_tau(double tau_star, int tau_min, int tau_max, double gamma, double contribution,
                 double cost_coeff);

// Convenience: best_response_tau followed by quantize_tau.
int choose_epochs(double gamma, const ClientGameParams& client);

// The t * gamma^2 penalty is applied once, not per client.
double server_utility(double gamma, std::span<const ClientGameParams> params,
                      std::span<const int> epochs, int round);

// gamma* = omega c / (2 t c - omega), clamped to [gamma_min, 1]. When
// 2 t c - omega <= 0 the substituted server utility is not concave in gamma
// and its maximum over [0, 1] sits at gamma = 1.
double optimal_gamma(double contribution, double cost_coeff, int round,
                     double gamma_min = kDefaultGammaMin);

bool ir_satisfied(double gamma, double contribution, double cost_coeff, double tau);

// Per-client unilateral-deviation audit. Deviations are drawn from
// {0} plus the grid points {k * grid_step} that lie inside the client's
// [tau_min, tau_max]. Returns false if any deviation improves a client's
// utility by more than `slack`.
bool verify_equilibrium(std::span<const ClientGameParams> params, double gamma,
                        std::span<const int> proposed, double grid_step,
                        double slack = kEquilibriumSlack);

}  // namespace flamma::game
