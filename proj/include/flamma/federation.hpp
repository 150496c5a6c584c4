#pragma once

// Round orchestration for the gamma-decay game protocol and the FedAvg,
// FedProx and q-FFL baselines.
//
// One FLamma round t:
//   1. on refresh rounds, snapshot each client's latest observed contribution
//   2. select clients (top-K by contribution, cached between refreshes)
//   3. gamma_t = mean of per-client optimal gamma (1 on round 1)
//   4. each selected client picks tau_k by best response, trains tau_k epochs
//      with gamma-scaled steps
//   5. aggregate with data-share weights renormalised over the selection
//   6. record utilities and metrics

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "flamma/datasets.hpp"
#include "flamma/game.hpp"
#include "flamma/learner.hpp"

namespace flamma::fed {

enum class Algorithm { flamma, fedavg, fedprox, qffl };

std::string to_string(Algorithm algorithm);
Algorithm parse_algorithm(const std::string& name);

struct FederationConfig {
  Algorithm algorithm = Algorithm::flamma;
  int num_clients = 20;
  int clients_per_round = 10;
  int total_rounds = 100;
  double lr = 0.05;
  int tau_fixed = 5;
  int tau_min = 1;
  int tau_max = 10;
  // c_i ~ U[low, high]. Keep high <= 1 / total_rounds so that one epoch stays
  // individually rational at full contribution for the whole run.
  double cost_coeff_low = 0.001;
  double cost_coeff_high = 0.01;
  double gamma_min = game::kDefaultGammaMin;
  int refresh_interval = 10;
  double qffl_q = 1.0;
  double prox_mu = 0.01;
  std::size_t batch_size = 32;
  std::uint64_t seed = 1;
  // Worker threads for local training; results do not depend on it.
  int threads = 1;

  void validate() const;
  bool operator==(const FederationConfig&) const = default;
};

struct RoundRecord {
  std::string algorithm;
  int round = 0;
  double gamma = 1.0;
  std::vector<int> selected;
  std::map<int, int> epochs_chosen;
  double global_accuracy = 0.0;
  std::map<int, double> per_client_accuracy;
  // Population variance of per-client accuracy in percentage points squared.
  double accuracy_variance = 0.0;
  std::map<int, double> client_utilities;
  double server_utility = 0.0;
  double global_loss = 0.0;

  bool operator==(const RoundRecord&) const = default;
};

// Clamped to [0, 1]. A zero global model gives 1 when local is also exactly
// the global model, otherwise 0.
double compute_contribution(const learner::ParameterVector& local,
                            const learner::ParameterVector& global_w);

// Top-k by contribution with ties to the lower id, recomputed when
// (round - 1) % refresh_interval == 0 or no usable cache exists. Returned ids
// are ascending.
std::vector<int> select_clients(const std::map<int, double>& contributions, int k, int round,
                                int refresh_interval,
                                const std::optional<std::vector<int>>& cached = std::nullopt);

// Mean of optimal_gamma over `params`, clamped to [gamma_min, 1]; 1 on round 1.
double update_gamma(const game::GameState& state, std::span<const game::ClientGameParams> params,
                    int round, double gamma_min);

learner::ParameterVector aggregate(std::span<const learner::ParameterVector> locals,
                                   std::span<const double> weights);

// q-FFL step with Lipschitz estimate L = 1/lr:
//   delta_k = (w - local_k) / lr
//   h_k     = q F_k^(q-1) ||delta_k||^2 + L F_k^q
//   w'      = w - sum_k F_k^q delta_k / sum_k h_k
learner::ParameterVector qffl_aggregate(const learner::ParameterVector& global_w,
                                        std::span<const learner::ParameterVector> locals,
                                        std::span<const double> losses, double q, double lr);

struct ClientTask {
  int id = 0;
  learner::ModelSpec spec;  // shared architecture; quadratic clients carry their own target
  learner::Batch train;
  learner::Batch eval;
  double weight = 0.0;  // p_i
};

struct Environment {
  learner::ModelSpec global_spec;
  learner::Batch test;
  std::vector<ClientTask> clients;  // ascending id
  learner::ParameterVector initial_model;  // empty: init_parameters(global_spec, seed)
};

// Splits each client's rows into a training part and an `eval_fraction`
// held-out slice used for per-client accuracy.
Environment make_environment(const FederationConfig& config, const learner::ModelSpec& spec,
                             const data::Dataset& pool, const data::Partition& partition,
                             learner::Batch test, double eval_fraction = 0.2);

class Simulator {
 public:
  Simulator(FederationConfig config, Environment env);

  RoundRecord run_round();

  int round() const noexcept { return state_.round; }
  bool finished() const noexcept { return state_.round > config_.total_rounds; }
  const learner::ParameterVector& global_model() const noexcept { return global_; }
  const game::GameState& state() const noexcept { return state_; }
  const FederationConfig& config() const noexcept { return config_; }
  const Environment& environment() const noexcept { return env_; }

  double cost_coeff(int client_id) const;
  void set_cost_coeff(int client_id, double c);

  // Game parameters a client presents in the current round.
  game::ClientGameParams client_params(int client_id) const;

 private:
  std::size_t index_of(int client_id) const;
  std::vector<int> pick_clients();
  void refresh_contributions();

  FederationConfig config_;
  Environment env_;
  learner::ParameterVector global_;
  game::GameState state_;
  std::vector<double> costs_;
  std::vector<double> observed_contribution_;
  std::optional<std::vector<int>> cached_selection_;
};

std::vector<RoundRecord> run_experiment(const FederationConfig& config, Environment env);

// Builds the environment from a pool/partition/test split and runs it.
std::vector<RoundRecord> run_experiment(const FederationConfig& config,
                                        const learner::ModelSpec& spec, const data::Dataset& pool,
                                        const data::Partition& partition,
                                        const learner::Batch& test);

}  // namespace flamma::fed
