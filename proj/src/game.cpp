#include "flamma/game.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "flamma/errors.hpp"

namespace flamma::game {
namespace {

void require_finite(double v, const char* name) {
  if (!std::isfinite(v)) throw InvalidArgument(std::string(name) + " must be finite");
}

void require_positive_cost(double c) {
  require_finite(c, "cost_coeff");
  if (c <= 0.0) throw InvalidArgument("cost_coeff must be > 0, got " + std::to_string(c));
}

}  // namespace

void ClientGameParams::validate() const {
  require_positive_cost(cost_coeff);
  if (!(contribution >= 0.0 && contribution <= 1.0))
    throw InvalidArgument("contribution must lie in [0, 1]");
  if (tau_min < 0) throw InvalidArgument("tau_min must be non-negative");
  if (tau_max < 1) throw InvalidArgument("tau_max must be positive");
  if (tau_min > tau_max) throw InvalidArgument("tau_min must not exceed tau_max");
}

void GameState::validate() const {
  if (round < 1) throw InvalidArgument("round must be >= 1");
  if (!(gamma >= 0.0 && gamma <= 1.0)) throw InvalidArgument("gamma must lie in [0, 1]");
}

double clamp_contribution(double omega) {
  if (std::isnan(omega)) return 0.0;
  return std::clamp(omega, 0.0, 1.0);
}

double client_utility(double gamma, double contribution, double cost_coeff, double tau) {
  require_finite(gamma, "gamma");
  require_finite(contribution, "contribution");
  require_finite(cost_coeff, "cost_coeff");
  require_finite(tau, "tau");
  return gamma * contribution * tau - cost_coeff * tau * tau;
}

double best_response_tau(double gamma, double contribution, double cost_coeff) {
  require_finite(gamma, "gamma");
  require_finite(contribution, "contribution");
  require_positive_cost(cost_coeff);
  return gamma * contribution / (2.0 * cost_coeff);
}

int quantize_tau(double tau_star, int tau_min, int tau_max, double gamma, double contribution,
                 double cost_coeff) {
  if (tau_min > tau_max) throw InvalidArgument("tau_min must not exceed tau_max");
  require_finite(tau_star, "tau_star");
  const double clamped = std::clamp(tau_star, static_cast<double>(tau_min),
                                    static_cast<double>(tau_max));
  const int lo = static_cast<int>(std::floor(clamped));
  const int hi = static_cast<int>(std::ceil(clamped));
  const double u_lo = client_utility(gamma, contribution, cost_coeff, lo);
  const double u_hi = client_utility(gamma, contribution, cost_coeff, hi);
  int best = lo;
  double best_u = u_lo;
  if (u_hi > u_lo) {
    best = hi;
    best_u = u_hi;
  }
  // Abstaining always yields zero utility.
  if (best_u < 0.0) return 0;
  return best;
}

int choose_epochs(double gamma, const ClientGameParams& client) {
  const double star = best_response_tau(gamma, client.contribution, client.cost_coeff);
  return quantize_tau(star, client.tau_min, client.tau_max, gamma, client.contribution,
                      client.cost_coeff);
}

double server_utility(double gamma, std::span<const ClientGameParams> params,
                      std::span<const int> epochs, int round) {
  if (params.size() != epochs.size())
    throw InvalidArgument("server_utility: params and epochs differ in length");
  if (round < 1) throw InvalidArgument("server_utility: round must be >= 1");
  require_finite(gamma, "gamma");
  double revenue = 0.0;
  for (std::size_t i = 0; i < params.size(); ++i)
    revenue += gamma * (params[i].contribution + static_cast<double>(epochs[i]));
  return revenue - static_cast<double>(round) * gamma * gamma;
}

double optimal_gamma(double contribution, double cost_coeff, int round, double gamma_min) {
  require_positive_cost(cost_coeff);
  require_finite(contribution, "contribution");
  if (round < 1) throw InvalidArgument("optimal_gamma: round must be >= 1");
  if (!(gamma_min >= 0.0 && gamma_min < 1.0))
    throw InvalidArgument("optimal_gamma: gamma_min must lie in [0, 1)");
  const double denom = 2.0 * round * cost_coeff - contribution;
  if (denom <= 0.0) return 1.0;
  return std::clamp(contribution * cost_coeff / denom, gamma_min, 1.0);
}

bool ir_satisfied(double gamma, double contribution, double cost_coeff, double tau) {
  return client_utility(gamma, contribution, cost_coeff, tau) >= 0.0;
}

bool verify_equilibrium(std::span<const ClientGameParams> params, double gamma,
                        std::span<const int> proposed, double grid_step, double slack) {
  if (!(grid_step > 0.0)) throw InvalidArgument("verify_equilibrium: grid_step must be > 0");
  if (params.size() != proposed.size())
    throw InvalidArgument("verify_equilibrium: params and proposal differ in length");
  for (std::size_t i = 0; i < params.size(); ++i) {
    const auto& p = params[i];
    const double current = client_utility(gamma, p.contribution, p.cost_coeff, proposed[i]);
    if (0.0 > current + slack) return false;
    const auto steps = static_cast<long long>(std::floor(p.tau_max / grid_step + 1e-9));
    for (long long k = 1; k <= steps; ++k) {
      const double tau = static_cast<double>(k) * grid_step;
      if (tau < p.tau_min - 1e-12) continue;
      if (client_utility(gamma, p.contribution, p.cost_coeff, tau) > current + slack) return false;
    }
  }
  return true;
}

}  // namespace flamma::game
