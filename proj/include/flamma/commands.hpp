#pragma once

#include <iosfwd>
#include <vector>

#include "flamma/config.hpp"
#include "flamma/convergence.hpp"

namespace flamma::cli {

// Stable process exit codes.
inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;
inline constexpr int kExitUsage = 2;

struct Scenario {
  learner::ModelSpec spec;
  data::Dataset pool;  // rows available to clients
  learner::Batch test;
  data::Partition partition;
};

// Builds dataset, global test split and client partition from a manifest.
Scenario prepare_scenario(const RunManifest& manifest);

int cmd_run(const RunManifest& manifest, std::ostream& out, std::ostream& err);
int cmd_compare(const RunManifest& manifest, const std::vector<fed::Algorithm>& algorithms,
                std::ostream& out, std::ostream& err);
int cmd_check_bound(const analysis::BoundCheckOptions& options, std::ostream& out, std::ostream& err);

}  // namespace flamma::cli
