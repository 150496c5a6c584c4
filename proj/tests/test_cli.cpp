#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "flamma/commands.hpp"
#include "flamma/config.hpp"
#include "flamma/errors.hpp"
#include "flamma/report.hpp"
#include "tests/fixtures.hpp"

using namespace flamma;
using namespace flamma::cli;

namespace {

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

RunManifest small_manifest(const std::filesystem::path& out, int rounds) {
  return parse_config_text("algorithm=flamma\nseed=3\ntotal_rounds=" + std::to_string(rounds) +
                           "\nnum_clients=10\nclients_per_round=5\nsynthetic_per_class=40\noutput=" + out.string() +
                           "\n");
}

int line_of(const std::string& text) {
  try {
    parse_config_text(text);
  } catch (const ConfigError& e) {
    return e.line();
  }
  return -1;
}

}  // namespace

TEST_CASE("config parsing") {
  auto m = parse_config_text("algorithm=flamma\nseed=1\n");
  RunManifest defaults;
  CHECK(m == defaults);

  auto n = parse_config_text("# comment\n  algorithm = fedprox  # trailing\n\nprox_mu=0.1\ncost_coeff_range=0.01, 0.02\n");
  CHECK(n.config.algorithm == fed::Algorithm::fedprox);
  CHECK(n.config.prox_mu == 0.1);
  CHECK(n.config.cost_coeff_low == 0.01);
  CHECK(n.config.cost_coeff_high == 0.02);

  CHECK(line_of("algrithm=flamma\n") == 1);
  CHECK(line_of("seed=1\nlr=abc\n") == 2);
  CHECK(line_of("seed=1\n\nseed=2\n") == 3);
  CHECK(line_of("seed=1\njust words\n") == 2);
  CHECK(line_of("algorithm=fedsgd\n") == 1);
  CHECK(line_of("tau_min=5\ntau_max=3\n") == 0);
  CHECK_THROWS_AS(parse_config_text("tau_min=5\ntau_max=3\n"), ConfigError);
  CHECK_THROWS_AS(parse_config_text("dataset=idx\nidx_train_images=/nonexistent\nidx_train_labels=/nonexistent\n"),
                  ConfigError);
  CHECK_THROWS_AS(parse_config("/nonexistent/flamma.cfg"), ConfigError);
}

TEST_CASE("property: dumped manifest parses back identically") {
  CHECK(parse_config_text(dump_manifest(RunManifest{})) == RunManifest{});
  auto m = parse_config_text(
      "algorithm=qffl\nnum_clients=7\nclients_per_round=3\nlr=0.0123456789012345\nqffl_q=0.3\n"
      "cost_coeff_range=0.1234567,0.7654321\nmodel=mlp\nhidden_dim=9\npartition=iid\n"
      "test_fraction=0.3\noutput=a b.json\noutput_format=json\nseed=18446744073709551615\n");
  CHECK(parse_config_text(dump_manifest(m)) == m);
}

TEST_CASE("run writes a report and is byte-identical across invocations") {
  fixtures::TempDir dir;
  std::ostringstream out, err;
  auto m = small_manifest(dir.path / "a.csv", 5);
  REQUIRE(cmd_run(m, out, err) == kExitOk);
  CHECK(out.str().find("accuracy=") != std::string::npos);
  CHECK(out.str().find("variance=") != std::string::npos);
  CHECK(out.str().find("gamma=") != std::string::npos);
  const auto first = slurp(dir.path / "a.csv");
  std::size_t data_rows = 0;
  std::istringstream lines(first);
  for (std::string line; std::getline(lines, line);)
    if (!line.empty() && line[0] != '#') ++data_rows;
  CHECK(data_rows == 5 + 1);

  REQUIRE(cmd_run(m, out, err) == kExitOk);
  CHECK(slurp(dir.path / "a.csv") == first);

  m.output_format = analysis::ReportFormat::json;
  m.output_path = (dir.path / "a.json").string();
  REQUIRE(cmd_run(m, out, err) == kExitOk);
  CHECK(analysis::read_records_json(dir.path / "a.json").size() == 5);

  m.output_path = (dir.path / "no_such_dir" / "a.csv").string();
  CHECK(cmd_run(m, out, err) == kExitFailure);
}

TEST_CASE("compare shares the partition and reports every algorithm") {
  fixtures::TempDir dir;
  auto m = small_manifest(dir.path / "cmp.json", 4);
  m.output_format = analysis::ReportFormat::json;
  std::ostringstream out, err;
  REQUIRE(cmd_compare(m, {fed::Algorithm::flamma, fed::Algorithm::fedavg}, out, err) == kExitOk);
  auto recs = analysis::read_records_json(dir.path / "cmp.json");
  REQUIRE(recs.size() == 8);
  CHECK(recs[0].algorithm == "flamma");
  CHECK(recs[4].algorithm == "fedavg");
  CHECK(recs[0].per_client_accuracy.size() == recs[4].per_client_accuracy.size());
  CHECK(out.str().find("flamma") != std::string::npos);
  CHECK(out.str().find("fedavg") != std::string::npos);

  // Same scenario as a standalone run.
  auto solo = m;
  solo.config.algorithm = fed::Algorithm::fedavg;
  solo.output_path = (dir.path / "solo.json").string();
  REQUIRE(cmd_run(solo, out, err) == kExitOk);
  auto solo_recs = analysis::read_records_json(dir.path / "solo.json");
  CHECK(std::vector<fed::RoundRecord>(recs.begin() + 4, recs.end()) == solo_recs);

  CHECK(cmd_compare(m, {fed::Algorithm::flamma}, out, err) == kExitUsage);
  CHECK(cmd_compare(m, {fed::Algorithm::flamma, fed::Algorithm::flamma}, out, err) == kExitUsage);
}

TEST_CASE("check-bound exit codes") {
  std::ostringstream out, err;
  analysis::BoundCheckOptions opt;
  opt.seeds = 2;
  CHECK(cmd_check_bound(opt, out, err) == kExitOk);
  CHECK(out.str().find("PASS") != std::string::npos);
  opt.seeds = 0;
  CHECK(cmd_check_bound(opt, out, err) == kExitUsage);
  opt.seeds = 1;
  opt.clients_per_round = 20;
  CHECK(cmd_check_bound(opt, out, err) == kExitUsage);
}

TEST_CASE("idx scenario") {
  fixtures::TempDir dir;
  std::vector<std::uint8_t> pixels, labels;
  for (int i = 0; i < 40; ++i) {
    labels.push_back(static_cast<std::uint8_t>(i % 2));
    for (int k = 0; k < 4; ++k) pixels.push_back(static_cast<std::uint8_t>(i % 2 ? 200 + k : 10 + k));
  }
  fixtures::write_idx_images(dir.path / "i", 0x803, 40, 2, 2, pixels);
  fixtures::write_idx_labels(dir.path / "l", 0x801, 40, labels);
  auto m = parse_config_text("dataset=idx\nidx_train_images=" + (dir.path / "i").string() + "\nidx_train_labels=" +
                             (dir.path / "l").string() + "\nnum_clients=4\nclients_per_round=2\ntotal_rounds=3\n"
                             "output=" + (dir.path / "r.csv").string() + "\n");
  auto s = prepare_scenario(m);
  CHECK(s.pool.dim == 4);
  CHECK(s.pool.size() + s.test.size() == 40);
  std::ostringstream out, err;
  CHECK(cmd_run(m, out, err) == kExitOk);
}
