#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <utility>
#include <vector>

#include "flamma/learner.hpp"

namespace flamma::data {

struct Dataset {
  std::size_t dim = 0;
  std::vector<double> features;  // row-major N x dim
  std::vector<int> labels;
  int num_classes = 0;

  std::size_t size() const noexcept { return labels.size(); }
  std::span<const double> row(std::size_t i) const {
    return std::span<const double>(features).subspan(i * dim, dim);
  }
  void validate() const;

  learner::Batch to_batch() const;
  learner::Batch to_batch(std::span<const std::size_t> rows) const;
};

struct Partition {
  std::map<int, std::vector<std::size_t>> assignments;

  std::size_t num_clients() const noexcept { return assignments.size(); }
  // Throws InvalidArgument on overlapping or out-of-range indices.
  void validate(std::size_t dataset_size) const;
};

// Gaussian blobs. Class means are drawn N(0, I) from the seed; each point is
// its class mean plus N(0, spread^2 I) noise. Rows are grouped by class.
Dataset generate_synthetic(int num_classes, int dim, int per_class, double spread,
                           std::uint64_t seed);

// Reads an IDX image file (magic 0x00000803) and label file (0x00000801).
// Pixels are scaled to [0, 1]; each image is flattened row-major.
Dataset load_idx(const std::filesystem::path& images_path,
                 const std::filesystem::path& labels_path);

Partition partition_iid(const Dataset& dataset, int num_clients, std::uint64_t seed);

// Label-skewed split: stable-sort rows by label, cut into
// num_clients * shards_per_client equal shards (remainder rows dropped), and
// hand each client shards_per_client random shards.
Partition partition_shards(const Dataset& dataset, int num_clients, int shards_per_client,
                           std::uint64_t seed);

// p_i = |D_i| / sum_j |D_j|
std::map<int, double> client_weights(const Partition& partition);

// Seeded permutation of `indices` split into (first, rest) where rest holds
// round(fraction * n) elements, kept to at least one element in `first`
// whenever n > 0. Both halves keep the permuted order.
std::pair<std::vector<std::size_t>, std::vector<std::size_t>> holdout_split(
    std::vector<std::size_t> indices, double fraction, std::uint64_t seed);

}  // namespace flamma::data
