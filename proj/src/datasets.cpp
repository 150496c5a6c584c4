#include "flamma/datasets.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <iterator>
#include <numeric>
#include <set>
#include <string>

#include "flamma/errors.hpp"
#include "flamma/rng.hpp"

namespace flamma::data {

void Dataset::validate() const {
  if (labels.empty()) throw InvalidArgument("dataset is empty");
  if (num_classes < 1) throw InvalidArgument("dataset needs at least one class");
  if (features.size() != labels.size() * dim)
    throw InvalidArgument("dataset feature matrix has the wrong size");
  for (int y : labels)
    if (y < 0 || y >= num_classes) throw InvalidArgument("dataset label out of range");
}

learner::Batch Dataset::to_batch() const {
  learner::Batch b;
  b.dim = dim;
  b.features = features;
  b.labels = labels;
  return b;
}

learner::Batch Dataset::to_batch(std::span<const std::size_t> rows) const {
  learner::Batch b;
  b.dim = dim;
  b.features.reserve(rows.size() * dim);
  b.labels.reserve(rows.size());
  for (auto r : rows) {
    if (r >= size()) throw InvalidArgument("row index out of range");
    auto x = row(r);
    b.features.insert(b.features.end(), x.begin(), x.end());
    b.labels.push_back(labels[r]);
  }
  return b;
}

void Partition::validate(std::size_t dataset_size) const {
  std::vector<bool> seen(dataset_size, false);
  for (const auto& [client, rows] : assignments) {
    for (auto r : rows) {
      if (r >= dataset_size)
        throw InvalidArgument("client " + std::to_string(client) + " holds out-of-range row");
      if (seen[r]) throw InvalidArgument("row " + std::to_string(r) + " assigned twice");
      seen[r] = true;
    }
  }
}

Dataset generate_synthetic(int num_classes, int dim, int per_class, double spread,
                           std::uint64_t seed) {
  if (num_classes < 2) throw InvalidArgument("generate_synthetic: need at least 2 classes");
  if (dim < 1) throw InvalidArgument("generate_synthetic: dim must be >= 1");
  if (per_class < 1) throw InvalidArgument("generate_synthetic: per_class must be >= 1");
  if (!(spread >= 0.0) || !std::isfinite(spread))
    throw InvalidArgument("generate_synthetic: spread must be finite and >= 0");

  const auto d = static_cast<std::size_t>(dim);
  Rng mean_rng(derive_seed(seed, {1}));
  std::vector<double> means(static_cast<std::size_t>(num_classes) * d);
  for (double& m : means) m = mean_rng.normal();

  Rng noise_rng(derive_seed(seed, {2}));
  Dataset ds;
  ds.dim = d;
  ds.num_classes = num_classes;
  ds.features.reserve(static_cast<std::size_t>(num_classes) * per_class * d);
  ds.labels.reserve(static_cast<std::size_t>(num_classes) * per_class);
  for (int c = 0; c < num_classes; ++c) {
    const double* mu = means.data() + static_cast<std::size_t>(c) * d;
    for (int i = 0; i < per_class; ++i) {
      for (std::size_t k = 0; k < d; ++k) ds.features.push_back(mu[k] + spread * noise_rng.normal());
      ds.labels.push_back(c);
    }
  }
  return ds;
}

namespace {

std::vector<unsigned char> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError(path.string(), "cannot open file");
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

std::uint32_t read_be32(const std::vector<unsigned char>& bytes, std::size_t offset) {
  return (static_cast<std::uint32_t>(bytes[offset]) << 24) |
         (static_cast<std::uint32_t>(bytes[offset + 1]) << 16) |
         (static_cast<std::uint32_t>(bytes[offset + 2]) << 8) |
         static_cast<std::uint32_t>(bytes[offset + 3]);
}

constexpr std::uint32_t kImageMagic = 0x00000803;
constexpr std::uint32_t kLabelMagic = 0x00000801;

}  // namespace

Dataset load_idx(const std::filesystem::path& images_path,
                 const std::filesystem::path& labels_path) {
  const auto images = read_file(images_path);
  const auto labels = read_file(labels_path);
  const std::string ipath = images_path.string();
  const std::string lpath = labels_path.string();

  if (images.size() < 16) throw FormatError(ipath, "truncated IDX image header");
  if (read_be32(images, 0) != kImageMagic) throw FormatError(ipath, "bad IDX image magic");
  if (labels.size() < 8) throw FormatError(lpath, "truncated IDX label header");
  if (read_be32(labels, 0) != kLabelMagic) throw FormatError(lpath, "bad IDX label magic");

  const std::size_t count = read_be32(images, 4);
  const std::size_t rows = read_be32(images, 8);
  const std::size_t cols = read_be32(images, 12);
  const std::size_t label_count = read_be32(labels, 4);
  if (count == 0) throw FormatError(ipath, "IDX image file holds no images");
  if (rows == 0 || cols == 0) throw FormatError(ipath, "IDX image dimensions are zero");
  if (label_count != count)
    throw FormatError(lpath, "label count " + std::to_string(label_count) +
                                 " does not match image count " + std::to_string(count) +
                                 " in " + ipath);
  const std::size_t pixels = rows * cols;
  if (images.size() != 16 + count * pixels) throw FormatError(ipath, "IDX image payload size mismatch");
  if (labels.size() != 8 + count) throw FormatError(lpath, "IDX label payload size mismatch");

  Dataset ds;
  ds.dim = pixels;
  ds.features.resize(count * pixels);
  ds.labels.resize(count);
  for (std::size_t i = 0; i < count * pixels; ++i) ds.features[i] = images[16 + i] / 255.0;
  int max_label = 0;
  for (std::size_t i = 0; i < count; ++i) {
    ds.labels[i] = labels[8 + i];
    max_label = std::max(max_label, ds.labels[i]);
  }
  ds.num_classes = max_label + 1;
  return ds;
}

Partition partition_iid(const Dataset& dataset, int num_clients, std::uint64_t seed) {
  const std::size_t n = dataset.size();
  if (num_clients < 1 || static_cast<std::size_t>(num_clients) > n)
    throw InvalidArgument("partition_iid: need 1 <= num_clients <= N");
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng(derive_seed(seed, {0x1D1D}));
  rng.shuffle(order);

  Partition part;
  const std::size_t k = static_cast<std::size_t>(num_clients);
  const std::size_t base = n / k, extra = n % k;
  std::size_t pos = 0;
  for (std::size_t c = 0; c < k; ++c) {
    const std::size_t len = base + (c < extra ? 1 : 0);
    part.assignments[static_cast<int>(c)].assign(order.begin() + pos, order.begin() + pos + len);
    pos += len;
  }
  return part;
}

Partition partition_shards(const Dataset& dataset, int num_clients, int shards_per_client,
                           std::uint64_t seed) {
  if (num_clients < 1) throw InvalidArgument("partition_shards: num_clients must be >= 1");
  if (shards_per_client < 1) throw InvalidArgument("partition_shards: shards_per_client must be >= 1");
  const std::size_t n = dataset.size();
  const std::size_t total_shards =
      static_cast<std::size_t>(num_clients) * static_cast<std::size_t>(shards_per_client);
  if (total_shards > n)
    throw InvalidArgument("partition_shards: " + std::to_string(total_shards) +
                          " shards requested but only " + std::to_string(n) + " rows");

  std::vector<std::size_t> sorted(n);
  std::iota(sorted.begin(), sorted.end(), std::size_t{0});
  std::stable_sort(sorted.begin(), sorted.end(), [&](std::size_t a, std::size_t b) {
    return dataset.labels[a] < dataset.labels[b];
  });
  const std::size_t shard_size = n / total_shards;

  std::vector<std::size_t> shard_ids(total_shards);
  std::iota(shard_ids.begin(), shard_ids.end(), std::size_t{0});
  Rng rng(derive_seed(seed, {0x5A4D}));
  rng.shuffle(shard_ids);

  Partition part;
  std::size_t next = 0;
  for (int c = 0; c < num_clients; ++c) {
    auto& rows = part.assignments[c];
    rows.reserve(shard_size * static_cast<std::size_t>(shards_per_client));
    for (int s = 0; s < shards_per_client; ++s) {
      const std::size_t start = shard_ids[next++] * shard_size;
      rows.insert(rows.end(), sorted.begin() + start, sorted.begin() + start + shard_size);
    }
  }
  return part;
}

std::map<int, double> client_weights(const Partition& partition) {
  if (partition.assignments.empty()) throw InvalidArgument("client_weights: empty partition");
  std::size_t total = 0;
  for (const auto& [id, rows] : partition.assignments) total += rows.size();
  if (total == 0) throw InvalidArgument("client_weights: partition holds no rows");
  std::map<int, double> w;
  for (const auto& [id, rows] : partition.assignments)
    w[id] = static_cast<double>(rows.size()) / static_cast<double>(total);
  return w;
}

std::pair<std::vector<std::size_t>, std::vector<std::size_t>> holdout_split(
    std::vector<std::size_t> indices, double fraction, std::uint64_t seed) {
  if (!(fraction >= 0.0 && fraction < 1.0))
    throw InvalidArgument("holdout_split: fraction must lie in [0, 1)");
  Rng rng(derive_seed(seed, {0x401D}));
  rng.shuffle(indices);
  const std::size_t n = indices.size();
  std::size_t held = static_cast<std::size_t>(std::llround(fraction * static_cast<double>(n)));
  if (fraction > 0.0 && n >= 2) held = std::clamp<std::size_t>(held, 1, n - 1);
  if (n < 2) held = 0;
  std::vector<std::size_t> rest(indices.end() - static_cast<std::ptrdiff_t>(held), indices.end());
  indices.resize(n - held);
  return {std::move(indices), std::move(rest)};
}

}  // namespace flamma::data
