#include "flamma/commands.hpp"

#include <algorithm>
#include <cstdio>
#include <numeric>
#include <ostream>
#include <set>

#include "flamma/errors.hpp"
#include "flamma/rng.hpp"

namespace flamma::cli {
namespace {

data::Dataset take_rows(const data::Dataset& ds, const std::vector<std::size_t>& rows) {
  data::Dataset out;
  out.dim = ds.dim;
  out.num_classes = ds.num_classes;
  out.features.reserve(rows.size() * ds.dim);
  out.labels.reserve(rows.size());
  for (auto r : rows) {
    auto x = ds.row(r);
    out.features.insert(out.features.end(), x.begin(), x.end());
    out.labels.push_back(ds.labels[r]);
  }
  return out;
}

std::string fixed(double v, int digits) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

analysis::ReportMeta report_meta(const RunManifest& m) {
  auto meta = manifest_meta(m);
  meta.emplace_back("accuracy_variance", "population variance over clients, percentage points squared");
  meta.emplace_back("per_client_accuracy", "global model on each client's held-out eval slice");
  return meta;
}

std::vector<fed::RoundRecord> run_algorithm(const RunManifest& m, const Scenario& s, fed::Algorithm algorithm) {
  auto config = m.config;
  config.algorithm = algorithm;
  return fed::run_experiment(config, fed::make_environment(config, s.spec, s.pool, s.partition, s.test, m.eval_fraction));
}

}  // namespace

Scenario prepare_scenario(const RunManifest& m) {
  m.validate();
  Scenario s;
  const auto seed = m.config.seed;
  data::Dataset full;
  if (m.dataset == DatasetKind::synthetic) {
    full = data::generate_synthetic(m.synthetic.num_classes, m.synthetic.dim, m.synthetic.per_class,
                                    m.synthetic.spread, seed);
  } else {
    full = data::load_idx(m.idx.train_images, m.idx.train_labels);
  }
  if (m.dataset == DatasetKind::idx && !m.idx.test_images.empty()) {
    auto test = data::load_idx(m.idx.test_images, m.idx.test_labels);
    if (test.dim != full.dim) throw FormatError(m.idx.test_images, "image size differs from training images");
    full.num_classes = std::max(full.num_classes, test.num_classes);
    s.pool = std::move(full);
    s.test = test.to_batch();
  } else {
    std::vector<std::size_t> all(full.size());
    std::iota(all.begin(), all.end(), std::size_t{0});
    auto [pool_rows, test_rows] = data::holdout_split(std::move(all), m.test_fraction, derive_seed(seed, {0x7E57}));
    std::sort(pool_rows.begin(), pool_rows.end());
    s.pool = take_rows(full, pool_rows);
    s.test = full.to_batch(test_rows);
  }
  const auto classes = static_cast<std::size_t>(s.pool.num_classes);
  s.spec = m.model == learner::ModelKind::mlp ? learner::ModelSpec::mlp(s.pool.dim, classes, m.hidden_dim)
                                              : learner::ModelSpec::logistic(s.pool.dim, classes);
  s.partition = m.partition == PartitionKind::iid
                    ? data::partition_iid(s.pool, m.config.num_clients, seed)
                    : data::partition_shards(s.pool, m.config.num_clients, m.shards_per_client, seed);
  return s;
}

int cmd_run(const RunManifest& manifest, std::ostream& out, std::ostream& err) {
  try {
    const Scenario s = prepare_scenario(manifest);
    const auto records = run_algorithm(manifest, s, manifest.config.algorithm);
    analysis::export_records(records, manifest.output_path, manifest.output_format, report_meta(manifest));
    const auto& last = records.back();
    out << "algorithm=" << last.algorithm << " round=" << last.round
        << " accuracy=" << fixed(100.0 * last.global_accuracy, 2) << "%"
        << " variance=" << fixed(last.accuracy_variance, 2) << " gamma=" << fixed(last.gamma, 4) << "\n";
    return kExitOk;
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitFailure;
  }
}

int cmd_compare(const RunManifest& manifest, const std::vector<fed::Algorithm>& algorithms,
                std::ostream& out, std::ostream& err) {
  if (algorithms.size() < 2) {
    err << "compare needs at least two algorithms\n";
    return kExitUsage;
  }
  if (std::set<fed::Algorithm>(algorithms.begin(), algorithms.end()).size() != algorithms.size()) {
    err << "compare: algorithms must be distinct\n";
    return kExitUsage;
  }
  try {
    const Scenario s = prepare_scenario(manifest);
    std::vector<fed::RoundRecord> combined;
    std::vector<fed::RoundRecord> finals;
    for (auto algorithm : algorithms) {
      auto records = run_algorithm(manifest, s, algorithm);
      finals.push_back(records.back());
      combined.insert(combined.end(), records.begin(), records.end());
    }
    analysis::export_records(combined, manifest.output_path, manifest.output_format, report_meta(manifest));
    char line[128];
    std::snprintf(line, sizeof line, "%-10s %12s %14s\n", "algorithm", "accuracy(%)", "variance(pp^2)");
    out << line;
    for (const auto& r : finals) {
      std::snprintf(line, sizeof line, "%-10s %12.2f %14.2f\n", r.algorithm.c_str(), 100.0 * r.global_accuracy,
                    r.accuracy_variance);
      out << line;
    }
    return kExitOk;
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitFailure;
  }
}

int cmd_check_bound(const analysis::BoundCheckOptions& options, std::ostream& out, std::ostream& err) {
  if (options.seeds < 1 || options.rounds < 1 || options.num_clients < 1 || options.clients_per_round < 1 ||
      options.clients_per_round > options.num_clients) {
    err << "check-bound: need seeds >= 1, rounds >= 1 and 1 <= k <= clients\n";
    return kExitUsage;
  }
  try {
    const auto report = analysis::check_bound_quadratic(options);
    char line[256];
    std::snprintf(line, sizeof line, "clients=%d k=%d rounds=%d seeds=%d gap=%.6g bound=%.6g %s\n",
                  options.num_clients, options.clients_per_round, options.rounds, options.seeds,
                  report.empirical_gap, report.bound, report.holds ? "PASS" : "FAIL");
    out << line;
    return report.holds ? kExitOk : kExitFailure;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitFailure;
  }
}

}  // namespace flamma::cli
