#include "flamma/convergence.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <thread>

#include "flamma/errors.hpp"
#include "flamma/federation.hpp"
#include "flamma/rng.hpp"

namespace flamma::analysis {

ConvergenceConstants ConvergenceConstants::make(double rho, double beta, int tau_max,
                                                double gamma_max, double G2,
                                                std::vector<double> sigma2, std::vector<double> p,
                                                int K, double M) {
  ConvergenceConstants c;
  c.rho = rho;
  c.beta = beta;
  c.kappa = beta / rho;
  c.xi = std::max(8.0 * c.kappa, static_cast<double>(tau_max));
  c.eta = 2.0 / (rho * c.xi);
  c.G2 = G2;
  c.sigma2 = std::move(sigma2);
  c.K = K;
  c.tau_max = tau_max;
  c.gamma_max = gamma_max;
  c.M = M;
  c.p = std::move(p);
  c.validate();
  return c;
}

void ConvergenceConstants::validate() const {
  if (!(rho > 0.0)) throw InvalidArgument("rho must be > 0");
  if (!(beta >= rho)) throw InvalidArgument("beta must be >= rho");
  if (std::abs(kappa - beta / rho) > 1e-12 * kappa) throw InvalidArgument("kappa must equal beta / rho");
  if (xi < 8.0 * kappa - 1e-12 || xi < tau_max) throw InvalidArgument("xi must be >= max(8 kappa, tau_max)");
  if (std::abs(eta - 2.0 / (rho * xi)) > 1e-12) throw InvalidArgument("eta must equal 2 / (rho xi)");
  if (sigma2.size() != p.size()) throw InvalidArgument("sigma2 and p must have one entry per client");
  if (tau_max < 1) throw InvalidArgument("tau_max must be >= 1");
  if (G2 < 0.0 || M < 0.0) throw InvalidArgument("G2 and M must be non-negative");
}

double bound_B(const ConvergenceConstants& c) {
  double weighted = 0.0;
  for (std::size_t k = 0; k < c.p.size(); ++k) weighted += c.p[k] * c.p[k] * c.gamma_max * c.sigma2[k];
  const double drift = static_cast<double>(c.tau_max - 1);
  return weighted / c.rho + 6.0 * c.beta * c.eta * c.eta + 8.0 * drift * drift * c.G2;
}

double bound_C(const ConvergenceConstants& c) {
  if (c.K < 1) throw InvalidArgument("bound_C: K must be >= 1");
  const double tau = static_cast<double>(c.tau_max);
  return 4.0 / static_cast<double>(c.K) * tau * tau * c.G2;
}

double theorem_bound(const ConvergenceConstants& c, int T) {
  if (T < 1) throw InvalidArgument("theorem_bound: T must be >= 1");
  const double inner = 2.0 * (bound_B(c) + bound_C(c)) / c.rho + c.rho * c.xi * c.gamma_max / 2.0 * c.M;
  return c.kappa / static_cast<double>(T) * inner;
}

namespace {

struct SeedRun {
  double gap = 0.0;
  double G2 = 0.0;
  double M = 0.0;
  double gamma_max = 0.0;
  std::vector<double> sigma2;
};

SeedRun run_one_seed(const BoundCheckOptions& o, std::uint64_t seed) {
  using learner::ModelSpec;
  using learner::ParameterVector;
  const auto d = static_cast<std::size_t>(o.dim);
  const auto n = static_cast<std::size_t>(o.num_clients);
  Rng rng(derive_seed(seed, {0xB0D5}));

  std::vector<ParameterVector> anchors;
  ParameterVector common(d);
  for (std::size_t j = 0; j < d; ++j) common[j] = o.target_scale * rng.normal();
  for (std::size_t i = 0; i < n; ++i) {
    ParameterVector b(d);
    for (std::size_t j = 0; j < d; ++j) b[j] = o.degenerate_at_optimum ? common[j] : o.target_scale * rng.normal();
    anchors.push_back(std::move(b));
  }
  const double p = 1.0 / static_cast<double>(n);
  ParameterVector optimum(d);
  for (const auto& b : anchors) optimum.axpy(p, b);

  fed::Environment env;
  env.global_spec = ModelSpec::quadratic(optimum);
  for (std::size_t i = 0; i < n; ++i) {
    fed::ClientTask task;
    task.id = static_cast<int>(i);
    task.spec = ModelSpec::quadratic(anchors[i]);
    task.weight = p;
    env.clients.push_back(std::move(task));
  }
  ParameterVector w1(d);
  for (std::size_t j = 0; j < d; ++j) w1[j] = o.degenerate_at_optimum ? optimum[j] : o.init_scale * rng.normal();
  env.initial_model = w1;

  const auto constants = ConvergenceConstants::make(1.0, 1.0, o.tau_max, 1.0, 0.0,
                                                    std::vector<double>(n, 0.0),
                                                    std::vector<double>(n, p), o.clients_per_round, 0.0);
  fed::FederationConfig cfg;
  cfg.algorithm = fed::Algorithm::flamma;
  cfg.num_clients = o.num_clients;
  cfg.clients_per_round = o.clients_per_round;
  cfg.total_rounds = o.rounds;
  cfg.lr = constants.eta;
  cfg.tau_min = 1;
  cfg.tau_max = o.tau_max;
  cfg.seed = seed;

  auto objective = [&](const ParameterVector& w) {
    double f = 0.0;
    for (const auto& b : anchors) f += p * 0.5 * (w - b).squared_norm();
    return f;
  };

  SeedRun out;
  out.M = (w1 - optimum).squared_norm();
  // Full-batch gradients of the quadratic carry no sampling noise.
  out.sigma2.assign(n, 0.0);
  // Local SGD on 0.5||w - b||^2 contracts toward b along a straight line, so
  // the largest local gradient of a round is the one at the broadcast model.
  auto track_gradients = [&](const ParameterVector& w) {
    for (const auto& b : anchors) out.G2 = std::max(out.G2, (w - b).squared_norm());
  };

  fed::Simulator sim(cfg, std::move(env));
  track_gradients(sim.global_model());
  while (!sim.finished()) {
    const auto rec = sim.run_round();
    out.gamma_max = std::max(out.gamma_max, rec.gamma);
    if (!sim.finished()) track_gradients(sim.global_model());
  }
  out.gap = objective(sim.global_model()) - objective(optimum);
  return out;
}

}  // namespace

BoundReport check_bound_quadratic(const BoundCheckOptions& o) {
  if (o.num_clients < 1) throw InvalidArgument("check_bound: num_clients must be >= 1");
  if (o.clients_per_round < 1 || o.clients_per_round > o.num_clients)
    throw InvalidArgument("check_bound: K must lie in [1, num_clients]");
  if (o.rounds < 1) throw InvalidArgument("check_bound: rounds must be >= 1");
  if (o.seeds < 1) throw InvalidArgument("check_bound: seeds must be >= 1");
  if (o.dim < 1) throw InvalidArgument("check_bound: dim must be >= 1");
  if (o.tau_max < 1) throw InvalidArgument("check_bound: tau_max must be >= 1");
  if (!(o.inflation >= 1.0)) throw InvalidArgument("check_bound: inflation must be >= 1");

  std::vector<SeedRun> runs(static_cast<std::size_t>(o.seeds));
  auto run_at = [&](std::size_t s) {
    runs[s] = run_one_seed(o, derive_seed(o.seed, {0x5EED, static_cast<std::uint64_t>(s)}));
  };
  const std::size_t workers = std::min<std::size_t>(static_cast<std::size_t>(std::max(o.threads, 1)), runs.size());
  if (workers <= 1) {
    for (std::size_t s = 0; s < runs.size(); ++s) run_at(s);
  } else {
    std::vector<std::exception_ptr> errors(workers);
    {
      std::vector<std::jthread> pool;
      for (std::size_t w = 0; w < workers; ++w)
        pool.emplace_back([&, w] {
          try {
            for (std::size_t s = w; s < runs.size(); s += workers) run_at(s);
          } catch (...) {
            errors[w] = std::current_exception();
          }
        });
    }
    for (auto& e : errors)
      if (e) std::rethrow_exception(e);
  }

  // Reduce in seed order: worst-case G^2, sigma_k^2 and gamma, mean M and gap.
  BoundReport report;
  const auto n = static_cast<std::size_t>(o.num_clients);
  double G2 = 0.0, M = 0.0, gamma_max = 0.0, gap = 0.0;
  std::vector<double> sigma2(n, 0.0);
  for (const auto& r : runs) {
    G2 = std::max(G2, r.G2);
    M += r.M;
    gamma_max = std::max(gamma_max, r.gamma_max);
    gap += r.gap;
    for (std::size_t k = 0; k < n; ++k) sigma2[k] = std::max(sigma2[k], r.sigma2[k]);
    report.per_seed_gap.push_back(r.gap);
  }
  const double count = static_cast<double>(runs.size());
  for (double& s : sigma2) s *= o.inflation;
  report.constants = ConvergenceConstants::make(
      1.0, 1.0, o.tau_max, gamma_max, o.inflation * G2, std::move(sigma2),
      std::vector<double>(n, 1.0 / static_cast<double>(n)), o.clients_per_round, M / count);
  report.empirical_gap = gap / count;
  report.bound = theorem_bound(report.constants, o.rounds);
  report.holds = report.empirical_gap <= report.bound;
  return report;
}

}  // namespace flamma::analysis
