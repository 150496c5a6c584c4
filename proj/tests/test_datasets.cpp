#include <doctest.h>

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <algorithm>
#include <numeric>
#include <set>
#include <string>
#include <vector>

#include "flamma/datasets.hpp"
#include "flamma/errors.hpp"
#include "tests/fixtures.hpp"

using namespace flamma;
using namespace flamma::data;

namespace {

void check_disjoint_valid(const Partition& p, std::size_t n) {
  std::set<std::size_t> seen;
  for (const auto& [id, rows] : p.assignments)
    for (auto r : rows) {
      REQUIRE(r < n);
      REQUIRE(seen.insert(r).second);
    }
}

}  // namespace

TEST_CASE("synthetic generation") {
  auto ds = generate_synthetic(2, 2, 50, 0.1, 4);
  CHECK(ds.size() == 100);
  CHECK(std::count(ds.labels.begin(), ds.labels.end(), 0) == 50);
  CHECK(std::count(ds.labels.begin(), ds.labels.end(), 1) == 50);
  CHECK(ds.num_classes == 2);

  auto flat = generate_synthetic(3, 4, 10, 0.0, 4);
  for (std::size_t i = 0; i < flat.size(); ++i) {
    const std::size_t first = static_cast<std::size_t>(flat.labels[i]) * 10;
    for (std::size_t k = 0; k < 4; ++k) CHECK(flat.row(i)[k] == flat.row(first)[k]);
  }

  auto a = generate_synthetic(10, 20, 100, 1.0, 77);
  auto b = generate_synthetic(10, 20, 100, 1.0, 77);
  CHECK(a.features == b.features);
  CHECK(a.labels == b.labels);
  CHECK_FALSE(generate_synthetic(10, 20, 100, 1.0, 78).features == a.features);

  CHECK_THROWS_AS(generate_synthetic(1, 2, 5, 1.0, 1), InvalidArgument);
  CHECK_THROWS_AS(generate_synthetic(2, 0, 5, 1.0, 1), InvalidArgument);
  CHECK_THROWS_AS(generate_synthetic(2, 2, 0, 1.0, 1), InvalidArgument);
}

TEST_CASE("IDX fixture decodes by hand") {
  fixtures::TempDir dir;
  // 4 images of 2x2 pixels.
  const std::vector<std::uint8_t> pixels{0, 255, 51, 102, 255, 255, 0, 0, 10, 20, 30, 40, 128, 64, 32, 16};
  const std::vector<std::uint8_t> labels{3, 0, 7, 1};
  auto img = dir.path / "img.idx", lab = dir.path / "lab.idx";
  fixtures::write_idx_images(img, 0x803, 4, 2, 2, pixels);
  fixtures::write_idx_labels(lab, 0x801, 4, labels);

  auto ds = load_idx(img, lab);
  REQUIRE(ds.size() == 4);
  REQUIRE(ds.dim == 4);
  const std::vector<double> expected{0.0, 1.0, 0.2, 0.4, 1.0, 1.0, 0.0, 0.0,
                                     10 / 255.0, 20 / 255.0, 30 / 255.0, 40 / 255.0,
                                     128 / 255.0, 64 / 255.0, 32 / 255.0, 16 / 255.0};
  for (std::size_t i = 0; i < expected.size(); ++i) CHECK(ds.features[i] == expected[i]);
  CHECK(ds.labels == std::vector<int>{3, 0, 7, 1});
  CHECK(ds.num_classes == 8);
}

TEST_CASE("IDX format errors name the offending file") {
  fixtures::TempDir dir;
  const std::vector<std::uint8_t> pixels(16, 1);
  auto img = dir.path / "img.idx", lab = dir.path / "lab.idx";
  fixtures::write_idx_images(img, 0x803, 4, 2, 2, pixels);

  fixtures::write_idx_labels(lab, 0x801, 3, {0, 1, 2});
  try {
    load_idx(img, lab);
    FAIL("count mismatch accepted");
  } catch (const FormatError& e) {
    CHECK(e.path() == lab.string());
  }

  auto bad = dir.path / "bad.idx";
  fixtures::write_idx_images(bad, 0x804, 4, 2, 2, pixels);
  fixtures::write_idx_labels(lab, 0x801, 4, {0, 1, 2, 3});
  try {
    load_idx(bad, lab);
    FAIL("bad magic accepted");
  } catch (const FormatError& e) {
    CHECK(e.path() == bad.string());
  }

  auto empty = dir.path / "empty.idx";
  std::ofstream(empty, std::ios::binary).close();
  CHECK_THROWS_AS(load_idx(empty, lab), FormatError);

  auto truncated = dir.path / "trunc.idx";
  fixtures::write_idx_images(truncated, 0x803, 4, 2, 2, std::vector<std::uint8_t>(15, 1));
  CHECK_THROWS_AS(load_idx(truncated, lab), FormatError);
}

TEST_CASE("iid partition") {
  auto ds = generate_synthetic(2, 1, 50, 1.0, 1);
  auto p = partition_iid(ds, 10, 3);
  REQUIRE(p.num_clients() == 10);
  for (const auto& [id, rows] : p.assignments) CHECK(rows.size() == 10);
  check_disjoint_valid(p, ds.size());

  auto ds101 = generate_synthetic(101, 1, 1, 1.0, 1);
  auto q = partition_iid(ds101, 10, 3);
  std::multiset<std::size_t> sizes;
  for (const auto& [id, rows] : q.assignments) sizes.insert(rows.size());
  CHECK(sizes.count(11) == 1);
  CHECK(sizes.count(10) == 9);

  CHECK(partition_iid(ds, 10, 3).assignments == p.assignments);
  CHECK_THROWS_AS(partition_iid(ds, 0, 3), InvalidArgument);
  CHECK_THROWS_AS(partition_iid(ds, 101, 3), InvalidArgument);
}

TEST_CASE("shard partition") {
  auto two = generate_synthetic(2, 1, 50, 1.0, 2);
  auto p = partition_shards(two, 2, 1, 9);
  for (const auto& [id, rows] : p.assignments) {
    REQUIRE(rows.size() == 50);
    std::set<int> labels;
    for (auto r : rows) labels.insert(two.labels[r]);
    CHECK(labels.size() == 1);
  }
  check_disjoint_valid(p, two.size());

  auto ten = generate_synthetic(10, 2, 40, 1.0, 2);
  auto q = partition_shards(ten, 10, 2, 9);
  for (const auto& [id, rows] : q.assignments) {
    std::set<int> labels;
    for (auto r : rows) labels.insert(ten.labels[r]);
    CHECK(labels.size() <= 2);
  }
  CHECK(partition_shards(ten, 10, 2, 9).assignments == q.assignments);
  CHECK_THROWS_AS(partition_shards(two, 60, 2, 1), InvalidArgument);
}

TEST_CASE("property: partitions are disjoint and skewed for all seeds") {
  auto ds = generate_synthetic(10, 2, 30, 1.0, 5);
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    check_disjoint_valid(partition_iid(ds, 7, seed), ds.size());
    for (int s : {1, 2, 3}) {
      auto p = partition_shards(ds, 10, s, seed);
      check_disjoint_valid(p, ds.size());
      // shard size 30/s divides the class size
      for (const auto& [id, rows] : p.assignments) {
        std::set<int> labels;
        for (auto r : rows) labels.insert(ds.labels[r]);
        REQUIRE(labels.size() <= static_cast<std::size_t>(s));
      }
      auto w = client_weights(p);
      double total = 0.0;
      for (const auto& [id, v] : w) {
        REQUIRE(v >= 0.0);
        total += v;
      }
      REQUIRE(std::abs(total - 1.0) < 1e-12);
    }
  }
}

TEST_CASE("client weights") {
  Partition equal;
  for (int c = 0; c < 4; ++c) equal.assignments[c] = std::vector<std::size_t>(5, 0);
  for (const auto& [id, w] : client_weights(equal)) CHECK(w == 0.25);

  Partition skew;
  skew.assignments[0] = std::vector<std::size_t>(30);
  skew.assignments[1] = std::vector<std::size_t>(70);
  auto w = client_weights(skew);
  CHECK(w[0] == doctest::Approx(0.3).epsilon(1e-15));
  CHECK(w[1] == doctest::Approx(0.7).epsilon(1e-15));

  Partition single;
  single.assignments[4] = {1, 2};
  CHECK(client_weights(single).at(4) == 1.0);
  CHECK_THROWS_AS(client_weights(Partition{}), InvalidArgument);
}

TEST_CASE("holdout split") {
  std::vector<std::size_t> idx(50);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  auto [kept, held] = holdout_split(idx, 0.2, 3);
  CHECK(kept.size() == 40);
  CHECK(held.size() == 10);
  std::set<std::size_t> all(kept.begin(), kept.end());
  all.insert(held.begin(), held.end());
  CHECK(all.size() == 50);

  auto [one_kept, one_held] = holdout_split({5, 6}, 0.01, 3);
  CHECK(one_kept.size() == 1);
  CHECK(one_held.size() == 1);
  CHECK(holdout_split(idx, 0.2, 3) == holdout_split(idx, 0.2, 3));
  CHECK_THROWS_AS(holdout_split(idx, 1.0, 3), InvalidArgument);
}
