#pragma once

// Run manifests: flat `key=value` text files, one setting per line, `#`
// starts a comment. Every key is optional; see README for the list and
// defaults.

#include <filesystem>
#include <string>

#include "flamma/federation.hpp"
#include "flamma/learner.hpp"
#include "flamma/report.hpp"

namespace flamma::cli {

enum class DatasetKind { synthetic, idx };
enum class PartitionKind { iid, shards };

struct SyntheticSource {
  int num_classes = 10;
  int dim = 20;
  int per_class = 200;
  double spread = 1.5;

  bool operator==(const SyntheticSource&) const = default;
};

struct IdxSource {
  std::string train_images;
  std::string train_labels;
  // Optional; when empty the global test set is held out from the training files.
  std::string test_images;
  std::string test_labels;

  bool operator==(const IdxSource&) const = default;
};

struct RunManifest {
  fed::FederationConfig config;
  learner::ModelKind model = learner::ModelKind::logistic;
  std::size_t hidden_dim = learner::kDefaultHiddenDim;
  DatasetKind dataset = DatasetKind::synthetic;
  SyntheticSource synthetic;
  IdxSource idx;
  PartitionKind partition = PartitionKind::shards;
  int shards_per_client = 2;
  double test_fraction = 0.2;
  double eval_fraction = 0.2;
  std::string output_path = "flamma_report.csv";
  analysis::ReportFormat output_format = analysis::ReportFormat::csv;

  // Throws ConfigError describing the first broken invariant.
  void validate() const;
  bool operator==(const RunManifest&) const = default;
};

RunManifest parse_config_text(const std::string& text);
RunManifest parse_config(const std::filesystem::path& path);

// Fully resolved manifest in the same key=value syntax; parses back to an
// identical manifest.
std::string dump_manifest(const RunManifest& manifest);

// The resolved settings as ordered pairs, for report headers.
analysis::ReportMeta manifest_meta(const RunManifest& manifest);

std::string to_string(DatasetKind kind);
std::string to_string(PartitionKind kind);

}  // namespace flamma::cli
