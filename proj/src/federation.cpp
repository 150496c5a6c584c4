#include "flamma/federation.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <thread>

#include "flamma/errors.hpp"
#include "flamma/metrics.hpp"
#include "flamma/rng.hpp"

namespace flamma::fed {

using learner::ParameterVector;

std::string to_string(Algorithm algorithm) {
  switch (algorithm) {
    case Algorithm::flamma: return "flamma";
    case Algorithm::fedavg: return "fedavg";
    case Algorithm::fedprox: return "fedprox";
    case Algorithm::qffl: return "qffl";
  }
  return "unknown";
}

Algorithm parse_algorithm(const std::string& name) {
  if (name == "flamma") return Algorithm::flamma;
  if (name == "fedavg") return Algorithm::fedavg;
  if (name == "fedprox") return Algorithm::fedprox;
  if (name == "qffl") return Algorithm::qffl;
  throw InvalidArgument("unknown algorithm '" + name + "'");
}

void FederationConfig::validate() const {
  if (num_clients < 1) throw InvalidArgument("num_clients must be >= 1");
  if (clients_per_round < 1 || clients_per_round > num_clients)
    throw InvalidArgument("clients_per_round must lie in [1, num_clients]");
  if (total_rounds < 1) throw InvalidArgument("total_rounds must be >= 1");
  if (!(lr > 0.0) || !std::isfinite(lr)) throw InvalidArgument("lr must be positive");
  if (tau_fixed < 0) throw InvalidArgument("tau_fixed must be >= 0");
  if (tau_min < 0) throw InvalidArgument("tau_min must be >= 0");
  if (tau_max < 1) throw InvalidArgument("tau_max must be >= 1");
  if (tau_min > tau_max) throw InvalidArgument("tau_min must not exceed tau_max");
  if (!(cost_coeff_low > 0.0) || !(cost_coeff_high >= cost_coeff_low) ||
      !std::isfinite(cost_coeff_high))
    throw InvalidArgument("cost_coeff range must satisfy 0 < low <= high");
  if (!(gamma_min >= 0.0 && gamma_min < 1.0)) throw InvalidArgument("gamma_min must lie in [0, 1)");
  if (refresh_interval < 1) throw InvalidArgument("refresh_interval must be >= 1");
  if (!(qffl_q >= 0.0)) throw InvalidArgument("qffl_q must be >= 0");
  if (!(prox_mu >= 0.0)) throw InvalidArgument("prox_mu must be >= 0");
  if (batch_size == 0) throw InvalidArgument("batch_size must be >= 1");
  if (threads < 1) throw InvalidArgument("threads must be >= 1");
}

double compute_contribution(const ParameterVector& local, const ParameterVector& global_w) {
  if (local.size() != global_w.size()) throw InvalidArgument("compute_contribution: dimension mismatch");
  const double gnorm = global_w.norm();
  if (gnorm == 0.0) return local == global_w ? 1.0 : 0.0;
  return game::clamp_contribution(1.0 - learner::distance(local, global_w) / gnorm);
}

std::vector<int> select_clients(const std::map<int, double>& contributions, int k, int round,
                                int refresh_interval, const std::optional<std::vector<int>>& cached) {
  if (contributions.empty()) throw InvalidArgument("select_clients: no contributions");
  if (k < 1 || static_cast<std::size_t>(k) > contributions.size())
    throw InvalidArgument("select_clients: k must lie in [1, number of clients]");
  if (refresh_interval < 1) throw InvalidArgument("select_clients: refresh_interval must be >= 1");
  const bool refresh = (round - 1) % refresh_interval == 0;
  if (!refresh && cached && cached->size() == static_cast<std::size_t>(k)) return *cached;

  std::vector<std::pair<int, double>> ranked(contributions.begin(), contributions.end());
  // Map order is ascending id, so a stable sort keeps lower ids first on ties.
  std::stable_sort(ranked.begin(), ranked.end(),
                   [](const auto& a, const auto& b) { return a.second > b.second; });
  std::vector<int> out;
  out.reserve(static_cast<std::size_t>(k));
  for (int i = 0; i < k; ++i) out.push_back(ranked[static_cast<std::size_t>(i)].first);
  std::sort(out.begin(), out.end());
  return out;
}

double update_gamma(const game::GameState& state, std::span<const game::ClientGameParams> params,
                    int round, double gamma_min) {
  (void)state;
  if (round <= 1) return 1.0;
  if (params.empty()) throw InvalidArgument("update_gamma: no selected clients");
  double sum = 0.0;
  for (const auto& p : params) sum += game::optimal_gamma(p.contribution, p.cost_coeff, round, gamma_min);
  return std::clamp(sum / static_cast<double>(params.size()), gamma_min, 1.0);
}

ParameterVector aggregate(std::span<const ParameterVector> locals, std::span<const double> weights) {
  if (locals.empty()) throw InvalidArgument("aggregate: no local models");
  if (locals.size() != weights.size()) throw InvalidArgument("aggregate: weights/locals length mismatch");
  ParameterVector out(locals.front().size());
  for (std::size_t k = 0; k < locals.size(); ++k) {
    if (locals[k].size() != out.size()) throw InvalidArgument("aggregate: dimension mismatch");
    out.axpy(weights[k], locals[k]);
  }
  return out;
}

ParameterVector qffl_aggregate(const ParameterVector& global_w, std::span<const ParameterVector> locals,
                               std::span<const double> losses, double q, double lr) {
  if (locals.empty()) throw InvalidArgument("qffl_aggregate: no local models");
  if (locals.size() != losses.size()) throw InvalidArgument("qffl_aggregate: losses/locals length mismatch");
  if (!(q >= 0.0)) throw InvalidArgument("qffl_aggregate: q must be >= 0");
  if (!(lr > 0.0)) throw InvalidArgument("qffl_aggregate: lr must be positive");
  const double lipschitz = 1.0 / lr;
  ParameterVector numerator(global_w.size());
  double denominator = 0.0;
  for (std::size_t k = 0; k < locals.size(); ++k) {
    if (!(losses[k] > 0.0)) throw InvalidArgument("qffl_aggregate: losses must be positive");
    ParameterVector delta = global_w - locals[k];
    for (std::size_t j = 0; j < delta.size(); ++j) delta[j] *= lipschitz;
    const double fq = std::pow(losses[k], q);
    numerator.axpy(fq, delta);
    denominator += q * std::pow(losses[k], q - 1.0) * delta.squared_norm() + lipschitz * fq;
  }
  ParameterVector out = global_w;
  out.axpy(-1.0 / denominator, numerator);
  return out;
}

Environment make_environment(const FederationConfig& config, const learner::ModelSpec& spec,
                             const data::Dataset& pool, const data::Partition& partition,
                             learner::Batch test, double eval_fraction) {
  partition.validate(pool.size());
  if (partition.num_clients() != static_cast<std::size_t>(config.num_clients))
    throw InvalidArgument("partition has " + std::to_string(partition.num_clients()) +
                          " clients, config expects " + std::to_string(config.num_clients));
  const auto weights = data::client_weights(partition);
  Environment env;
  env.global_spec = spec;
  env.test = std::move(test);
  for (const auto& [id, rows] : partition.assignments) {
    auto [train_rows, eval_rows] =
        data::holdout_split(rows, eval_fraction, derive_seed(config.seed, {0xE7A1, static_cast<std::uint64_t>(id)}));
    ClientTask task;
    task.id = id;
    task.spec = spec;
    task.train = pool.to_batch(train_rows);
    task.eval = pool.to_batch(eval_rows);
    task.weight = weights.at(id);
    env.clients.push_back(std::move(task));
  }
  return env;
}

Simulator::Simulator(FederationConfig config, Environment env)
    : config_(std::move(config)), env_(std::move(env)) {
  config_.validate();
  if (env_.clients.size() != static_cast<std::size_t>(config_.num_clients))
    throw InvalidArgument("environment holds " + std::to_string(env_.clients.size()) +
                          " clients, config expects " + std::to_string(config_.num_clients));
  if (!std::is_sorted(env_.clients.begin(), env_.clients.end(),
                      [](const ClientTask& a, const ClientTask& b) { return a.id < b.id; }))
    throw InvalidArgument("environment clients must be in ascending id order");
  global_ = env_.initial_model.empty() ? learner::init_parameters(env_.global_spec, config_.seed)
                                       : env_.initial_model;
  for (const auto& c : env_.clients)
    if (c.spec.parameter_count() != global_.size())
      throw InvalidArgument("client model size differs from the global model");

  Rng cost_rng(derive_seed(config_.seed, {0xC057}));
  for (const auto& c : env_.clients) {
    costs_.push_back(cost_rng.uniform(config_.cost_coeff_low, config_.cost_coeff_high));
    observed_contribution_.push_back(1.0);
    state_.contributions[c.id] = 1.0;
  }
  state_.round = 1;
  state_.gamma = 1.0;
}

std::size_t Simulator::index_of(int client_id) const {
  auto it = std::lower_bound(env_.clients.begin(), env_.clients.end(), client_id,
                             [](const ClientTask& c, int id) { return c.id < id; });
  if (it == env_.clients.end() || it->id != client_id)
    throw InvalidArgument("unknown client id " + std::to_string(client_id));
  return static_cast<std::size_t>(it - env_.clients.begin());
}

double Simulator::cost_coeff(int client_id) const { return costs_[index_of(client_id)]; }

void Simulator::set_cost_coeff(int client_id, double c) {
  if (!(c > 0.0) || !std::isfinite(c)) throw InvalidArgument("cost coefficient must be positive");
  costs_[index_of(client_id)] = c;
}

game::ClientGameParams Simulator::client_params(int client_id) const {
  game::ClientGameParams p;
  p.client_id = client_id;
  p.cost_coeff = cost_coeff(client_id);
  p.contribution = state_.contributions.at(client_id);
  p.tau_min = config_.tau_min;
  p.tau_max = config_.tau_max;
  return p;
}

void Simulator::refresh_contributions() {
  if ((state_.round - 1) % config_.refresh_interval != 0) return;
  for (std::size_t i = 0; i < env_.clients.size(); ++i)
    state_.contributions[env_.clients[i].id] = observed_contribution_[i];
}

std::vector<int> Simulator::pick_clients() {
  const int k = config_.clients_per_round;
  if (config_.algorithm == Algorithm::flamma) {
    auto sel = select_clients(state_.contributions, k, state_.round, config_.refresh_interval,
                              cached_selection_);
    cached_selection_ = sel;
    return sel;
  }
  std::vector<int> ids;
  for (const auto& c : env_.clients) ids.push_back(c.id);
  Rng rng(derive_seed(config_.seed, {0x5E1E, static_cast<std::uint64_t>(state_.round)}));
  rng.shuffle(ids);
  ids.resize(static_cast<std::size_t>(k));
  std::sort(ids.begin(), ids.end());
  return ids;
}

RoundRecord Simulator::run_round() {
  if (finished()) throw InvalidArgument("run_round: all rounds already executed");
  const int t = state_.round;
  const bool is_flamma = config_.algorithm == Algorithm::flamma;

  refresh_contributions();
  const std::vector<int> selected = pick_clients();

  std::vector<game::ClientGameParams> params;
  params.reserve(selected.size());
  for (int id : selected) params.push_back(client_params(id));

  const double gamma = is_flamma ? update_gamma(state_, params, t, config_.gamma_min) : 1.0;
  state_.gamma = gamma;

  std::vector<int> epochs;
  epochs.reserve(selected.size());
  for (const auto& p : params)
    epochs.push_back(is_flamma ? game::choose_epochs(gamma, p) : config_.tau_fixed);

  // Local training; each slot is written by exactly one worker.
  std::vector<ParameterVector> locals(selected.size());
  auto train_one = [&](std::size_t s) {
    const auto& task = env_.clients[index_of(selected[s])];
    learner::TrainOptions opt;
    opt.epochs = epochs[s];
    opt.lr = config_.lr;
    opt.gamma = gamma;
    opt.batch_size = config_.batch_size;
    if (config_.algorithm == Algorithm::fedprox) {
      opt.prox_mu = config_.prox_mu;
      opt.prox_anchor = global_;
    }
    opt.seed = derive_seed(config_.seed, {0x7A1B, static_cast<std::uint64_t>(task.id),
                                          static_cast<std::uint64_t>(t)});
    locals[s] = learner::local_train(task.spec, global_, task.train, opt);
  };
  const std::size_t workers =
      std::min<std::size_t>(static_cast<std::size_t>(config_.threads), selected.size());
  if (workers <= 1) {
    for (std::size_t s = 0; s < selected.size(); ++s) train_one(s);
  } else {
    std::vector<std::exception_ptr> errors(workers);
    {
      std::vector<std::jthread> pool;
      for (std::size_t w = 0; w < workers; ++w) {
        pool.emplace_back([&, w] {
          try {
            for (std::size_t s = w; s < selected.size(); s += workers) train_one(s);
          } catch (...) {
            errors[w] = std::current_exception();
          }
        });
      }
    }
    for (auto& e : errors)
      if (e) std::rethrow_exception(e);
  }

  for (std::size_t s = 0; s < selected.size(); ++s)
    observed_contribution_[index_of(selected[s])] = compute_contribution(locals[s], global_);

  ParameterVector next;
  if (config_.algorithm == Algorithm::qffl) {
    std::vector<double> losses;
    for (int id : selected) {
      const auto& task = env_.clients[index_of(id)];
      // Cross-entropy can round to zero on a perfectly fit client.
      losses.push_back(std::max(learner::loss(task.spec, global_, task.train), 1e-12));
    }
    next = qffl_aggregate(global_, locals, losses, config_.qffl_q, config_.lr);
  } else {
    std::vector<double> weights;
    double total = 0.0;
    for (int id : selected) {
      weights.push_back(env_.clients[index_of(id)].weight);
      total += weights.back();
    }
    for (double& w : weights) w = total > 0.0 ? w / total : 1.0 / static_cast<double>(weights.size());
    next = aggregate(locals, weights);
  }
  if (!next.all_finite()) throw std::runtime_error("round " + std::to_string(t) + " produced non-finite weights");
  global_ = std::move(next);

  RoundRecord rec;
  rec.algorithm = to_string(config_.algorithm);
  rec.round = t;
  rec.gamma = gamma;
  rec.selected = selected;
  state_.epochs.clear();
  for (std::size_t s = 0; s < selected.size(); ++s) {
    rec.epochs_chosen[selected[s]] = epochs[s];
    state_.epochs[selected[s]] = epochs[s];
    rec.client_utilities[selected[s]] =
        game::client_utility(gamma, params[s].contribution, params[s].cost_coeff, epochs[s]);
  }
  rec.server_utility = game::server_utility(gamma, params, epochs, t);

  const auto& gspec = env_.global_spec;
  if (gspec.is_classifier()) {
    rec.global_accuracy = env_.test.empty() ? 0.0 : analysis::accuracy(gspec, global_, env_.test);
    std::map<int, double> percent;
    for (const auto& c : env_.clients) {
      const double acc = c.eval.empty() ? 0.0 : analysis::accuracy(c.spec, global_, c.eval);
      rec.per_client_accuracy[c.id] = acc;
      percent[c.id] = 100.0 * acc;
    }
    rec.accuracy_variance = analysis::accuracy_variance(percent);
  }
  double objective = 0.0;
  for (const auto& c : env_.clients)
    if (!c.spec.is_classifier() || !c.train.empty()) objective += c.weight * learner::loss(c.spec, global_, c.train);
  rec.global_loss = objective;

  ++state_.round;
  return rec;
}

std::vector<RoundRecord> run_experiment(const FederationConfig& config, Environment env) {
  Simulator sim(config, std::move(env));
  std::vector<RoundRecord> records;
  records.reserve(static_cast<std::size_t>(config.total_rounds));
  while (!sim.finished()) records.push_back(sim.run_round());
  return records;
}

std::vector<RoundRecord> run_experiment(const FederationConfig& config, const learner::ModelSpec& spec,
                                        const data::Dataset& pool, const data::Partition& partition,
                                        const learner::Batch& test) {
  return run_experiment(config, make_environment(config, spec, pool, partition, test));
}

}  // namespace flamma::fed
