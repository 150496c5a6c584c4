#include "flamma/report.hpp"

#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "flamma/errors.hpp"

namespace flamma::analysis {

using nlohmann::json;

std::string to_string(ReportFormat format) { return format == ReportFormat::csv ? "csv" : "json"; }

ReportFormat parse_report_format(const std::string& name) {
  if (name == "csv") return ReportFormat::csv;
  if (name == "json") return ReportFormat::json;
  throw InvalidArgument("unknown report format '" + name + "'");
}

namespace {

std::string fmt_real(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

template <typename V>
json int_keyed(const std::map<int, V>& m) {
  json out = json::object();
  for (const auto& [k, v] : m) out[std::to_string(k)] = v;
  return out;
}

template <typename V>
std::map<int, V> int_keyed_from(const json& j) {
  std::map<int, V> out;
  for (const auto& [k, v] : j.items()) out[std::stoi(k)] = v.template get<V>();
  return out;
}

json record_to_json(const fed::RoundRecord& r) {
  return json{{"algorithm", r.algorithm},
              {"round", r.round},
              {"gamma", r.gamma},
              {"selected", r.selected},
              {"epochs_chosen", int_keyed(r.epochs_chosen)},
              {"global_accuracy", r.global_accuracy},
              {"per_client_accuracy", int_keyed(r.per_client_accuracy)},
              {"accuracy_variance", r.accuracy_variance},
              {"client_utilities", int_keyed(r.client_utilities)},
              {"server_utility", r.server_utility},
              {"global_loss", r.global_loss}};
}

fed::RoundRecord record_from_json(const json& j) {
  fed::RoundRecord r;
  r.algorithm = j.at("algorithm").get<std::string>();
  r.round = j.at("round").get<int>();
  r.gamma = j.at("gamma").get<double>();
  r.selected = j.at("selected").get<std::vector<int>>();
  r.epochs_chosen = int_keyed_from<int>(j.at("epochs_chosen"));
  r.global_accuracy = j.at("global_accuracy").get<double>();
  r.per_client_accuracy = int_keyed_from<double>(j.at("per_client_accuracy"));
  r.accuracy_variance = j.at("accuracy_variance").get<double>();
  r.client_utilities = int_keyed_from<double>(j.at("client_utilities"));
  r.server_utility = j.at("server_utility").get<double>();
  r.global_loss = j.at("global_loss").get<double>();
  return r;
}

}  // namespace

std::string records_to_csv(const std::vector<fed::RoundRecord>& records, const ReportMeta& meta) {
  std::set<int> ids;
  for (const auto& r : records) {
    for (const auto& [id, v] : r.per_client_accuracy) ids.insert(id);
    for (const auto& [id, v] : r.epochs_chosen) ids.insert(id);
  }
  std::ostringstream out;
  for (const auto& [k, v] : meta) out << "# " << k << "=" << v << "\n";
  out << "round,algorithm,gamma,global_accuracy,accuracy_variance,global_loss,server_utility,selected_ids";
  for (int id : ids) out << ",acc_" << id;
  for (int id : ids) out << ",tau_" << id;
  for (int id : ids) out << ",util_" << id;
  out << "\n";
  for (const auto& r : records) {
    out << r.round << "," << r.algorithm << "," << fmt_real(r.gamma) << "," << fmt_real(r.global_accuracy)
        << "," << fmt_real(r.accuracy_variance) << "," << fmt_real(r.global_loss) << ","
        << fmt_real(r.server_utility) << ",";
    for (std::size_t i = 0; i < r.selected.size(); ++i) out << (i ? ";" : "") << r.selected[i];
    for (int id : ids) {
      out << ",";
      if (auto it = r.per_client_accuracy.find(id); it != r.per_client_accuracy.end()) out << fmt_real(it->second);
    }
    for (int id : ids) {
      out << ",";
      if (auto it = r.epochs_chosen.find(id); it != r.epochs_chosen.end()) out << it->second;
    }
    for (int id : ids) {
      out << ",";
      if (auto it = r.client_utilities.find(id); it != r.client_utilities.end()) out << fmt_real(it->second);
    }
    out << "\n";
  }
  return out.str();
}

std::string records_to_json(const std::vector<fed::RoundRecord>& records, const ReportMeta& meta) {
  json m = json::object();
  for (const auto& [k, v] : meta) m[k] = v;
  json list = json::array();
  for (const auto& r : records) list.push_back(record_to_json(r));
  return json{{"meta", m}, {"records", list}}.dump(2) + "\n";
}

std::vector<fed::RoundRecord> records_from_json(const std::string& text) {
  std::vector<fed::RoundRecord> out;
  const json doc = json::parse(text);
  for (const auto& j : doc.at("records")) out.push_back(record_from_json(j));
  return out;
}

std::vector<fed::RoundRecord> read_records_json(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError(path.string(), "cannot open report");
  std::stringstream buf;
  buf << in.rdbuf();
  try {
    return records_from_json(buf.str());
  } catch (const json::exception& e) {
    throw FormatError(path.string(), e.what());
  }
}

void export_records(const std::vector<fed::RoundRecord>& records, const std::filesystem::path& path,
                    ReportFormat format, const ReportMeta& meta) {
  const std::string body =
      format == ReportFormat::csv ? records_to_csv(records, meta) : records_to_json(records, meta);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError(path.string(), "cannot open for writing");
  out << body;
  out.flush();
  if (!out) throw IoError(path.string(), "write failed");
}

}  // namespace flamma::analysis
