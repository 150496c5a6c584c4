#include "flamma/config.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <functional>
#include <set>
#include <sstream>
#include <vector>

#include "flamma/errors.hpp"

namespace flamma::cli {

std::string to_string(DatasetKind kind) { return kind == DatasetKind::synthetic ? "synthetic" : "idx"; }
std::string to_string(PartitionKind kind) { return kind == PartitionKind::iid ? "iid" : "shards"; }

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

template <typename T>
T parse_number(const std::string& value) {
  T out{};
  const char* first = value.data();
  const char* last = first + value.size();
  auto [ptr, ec] = std::from_chars(first, last, out);
  if (ec != std::errc() || ptr != last || value.empty())
    throw InvalidArgument("malformed number '" + value + "'");
  return out;
}

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

struct Field {
  const char* key;
  std::function<void(RunManifest&, const std::string&)> set;
  std::function<std::string(const RunManifest&)> get;
};

#define INT_FIELD(name, member)                                                          \
  Field{name, [](RunManifest& m, const std::string& v) { member = parse_number<int>(v); }, \
        [](const RunManifest& m) { return std::to_string(member); }}
#define REAL_FIELD(name, member)                                                            \
  Field{name, [](RunManifest& m, const std::string& v) { member = parse_number<double>(v); }, \
        [](const RunManifest& m) { return fmt(member); }}
#define STRING_FIELD(name, member)                                          \
  Field{name, [](RunManifest& m, const std::string& v) { member = v; }, \
        [](const RunManifest& m) { return member; }}

const std::vector<Field>& fields() {
  static const std::vector<Field> table = {
      Field{"algorithm", [](RunManifest& m, const std::string& v) { m.config.algorithm = fed::parse_algorithm(v); },
            [](const RunManifest& m) { return fed::to_string(m.config.algorithm); }},
      INT_FIELD("num_clients", m.config.num_clients),
      INT_FIELD("clients_per_round", m.config.clients_per_round),
      INT_FIELD("total_rounds", m.config.total_rounds),
      REAL_FIELD("lr", m.config.lr),
      INT_FIELD("tau_fixed", m.config.tau_fixed),
      INT_FIELD("tau_min", m.config.tau_min),
      INT_FIELD("tau_max", m.config.tau_max),
      Field{"cost_coeff_range",
            [](RunManifest& m, const std::string& v) {
              const auto comma = v.find(',');
              if (comma == std::string::npos) throw InvalidArgument("expected 'low,high'");
              m.config.cost_coeff_low = parse_number<double>(trim(v.substr(0, comma)));
              m.config.cost_coeff_high = parse_number<double>(trim(v.substr(comma + 1)));
            },
            [](const RunManifest& m) { return fmt(m.config.cost_coeff_low) + "," + fmt(m.config.cost_coeff_high); }},
      REAL_FIELD("gamma_min", m.config.gamma_min),
      INT_FIELD("refresh_interval", m.config.refresh_interval),
      REAL_FIELD("qffl_q", m.config.qffl_q),
      REAL_FIELD("prox_mu", m.config.prox_mu),
      Field{"batch_size", [](RunManifest& m, const std::string& v) { m.config.batch_size = parse_number<std::size_t>(v); },
            [](const RunManifest& m) { return std::to_string(m.config.batch_size); }},
      Field{"seed", [](RunManifest& m, const std::string& v) { m.config.seed = parse_number<std::uint64_t>(v); },
            [](const RunManifest& m) { return std::to_string(m.config.seed); }},
      INT_FIELD("threads", m.config.threads),
      Field{"model", [](RunManifest& m, const std::string& v) { m.model = learner::parse_model_kind(v); },
            [](const RunManifest& m) { return learner::to_string(m.model); }},
      Field{"hidden_dim", [](RunManifest& m, const std::string& v) { m.hidden_dim = parse_number<std::size_t>(v); },
            [](const RunManifest& m) { return std::to_string(m.hidden_dim); }},
      Field{"dataset",
            [](RunManifest& m, const std::string& v) {
              if (v == "synthetic") m.dataset = DatasetKind::synthetic;
              else if (v == "idx") m.dataset = DatasetKind::idx;
              else throw InvalidArgument("dataset must be 'synthetic' or 'idx'");
            },
            [](const RunManifest& m) { return to_string(m.dataset); }},
      INT_FIELD("synthetic_classes", m.synthetic.num_classes),
      INT_FIELD("synthetic_dim", m.synthetic.dim),
      INT_FIELD("synthetic_per_class", m.synthetic.per_class),
      REAL_FIELD("synthetic_spread", m.synthetic.spread),
      STRING_FIELD("idx_train_images", m.idx.train_images),
      STRING_FIELD("idx_train_labels", m.idx.train_labels),
      STRING_FIELD("idx_test_images", m.idx.test_images),
      STRING_FIELD("idx_test_labels", m.idx.test_labels),
      Field{"partition",
            [](RunManifest& m, const std::string& v) {
              if (v == "iid") m.partition = PartitionKind::iid;
              else if (v == "shards") m.partition = PartitionKind::shards;
              else throw InvalidArgument("partition must be 'iid' or 'shards'");
            },
            [](const RunManifest& m) { return to_string(m.partition); }},
      INT_FIELD("shards_per_client", m.shards_per_client),
      REAL_FIELD("test_fraction", m.test_fraction),
      REAL_FIELD("eval_fraction", m.eval_fraction),
      STRING_FIELD("output", m.output_path),
      Field{"output_format",
            [](RunManifest& m, const std::string& v) { m.output_format = analysis::parse_report_format(v); },
            [](const RunManifest& m) { return analysis::to_string(m.output_format); }},
  };
  return table;
}

#undef INT_FIELD
#undef REAL_FIELD
#undef STRING_FIELD

const Field* find_field(const std::string& key) {
  for (const auto& f : fields())
    if (key == f.key) return &f;
  return nullptr;
}

}  // namespace

void RunManifest::validate() const {
  try {
    config.validate();
  } catch (const InvalidArgument& e) {
    throw ConfigError(e.what());
  }
  if (model == learner::ModelKind::quadratic) throw ConfigError("model must be 'logistic' or 'mlp'");
  if (hidden_dim == 0) throw ConfigError("hidden_dim must be >= 1");
  if (dataset == DatasetKind::synthetic) {
    if (synthetic.num_classes < 2) throw ConfigError("synthetic_classes must be >= 2");
    if (synthetic.dim < 1) throw ConfigError("synthetic_dim must be >= 1");
    if (synthetic.per_class < 1) throw ConfigError("synthetic_per_class must be >= 1");
    if (!(synthetic.spread >= 0.0)) throw ConfigError("synthetic_spread must be >= 0");
  } else {
    if (idx.train_images.empty() || idx.train_labels.empty())
      throw ConfigError("dataset=idx needs idx_train_images and idx_train_labels");
    if (idx.test_images.empty() != idx.test_labels.empty())
      throw ConfigError("idx_test_images and idx_test_labels must be given together");
    for (const auto* p : {&idx.train_images, &idx.train_labels, &idx.test_images, &idx.test_labels})
      if (!p->empty() && !std::filesystem::exists(*p)) throw ConfigError("file not found: " + *p);
  }
  if (shards_per_client < 1) throw ConfigError("shards_per_client must be >= 1");
  if (!(test_fraction > 0.0 && test_fraction < 1.0)) throw ConfigError("test_fraction must lie in (0, 1)");
  if (!(eval_fraction > 0.0 && eval_fraction < 1.0)) throw ConfigError("eval_fraction must lie in (0, 1)");
  if (output_path.empty()) throw ConfigError("output must not be empty");
}

RunManifest parse_config_text(const std::string& text) {
  RunManifest m;
  std::istringstream in(text);
  std::string raw;
  std::set<std::string> seen;
  int line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    std::string line = raw;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError("expected key=value, got '" + line + "'", line_no);
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    const Field* field = find_field(key);
    if (!field) throw ConfigError("unknown key '" + key + "'", line_no);
    if (!seen.insert(key).second) throw ConfigError("duplicate key '" + key + "'", line_no);
    try {
      field->set(m, value);
    } catch (const InvalidArgument& e) {
      throw ConfigError(key + ": " + e.what(), line_no);
    }
  }
  m.validate();
  return m;
}

RunManifest parse_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_config_text(buf.str());
}

std::string dump_manifest(const RunManifest& manifest) {
  std::string out;
  for (const auto& f : fields()) out += std::string(f.key) + "=" + f.get(manifest) + "\n";
  return out;
}

analysis::ReportMeta manifest_meta(const RunManifest& manifest) {
  analysis::ReportMeta meta;
  for (const auto& f : fields()) meta.emplace_back(f.key, f.get(manifest));
  return meta;
}

}  // namespace flamma::cli
