#pragma once

#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "flamma/federation.hpp"

namespace flamma::analysis {

enum class ReportFormat { csv, json };

std::string to_string(ReportFormat format);
ReportFormat parse_report_format(const std::string& name);

// Ordered key/value pairs describing the run (resolved config, conventions).
using ReportMeta = std::vector<std::pair<std::string, std::string>>;

// CSV: optional "# key=value" preamble lines, then the header
//   round,algorithm,gamma,global_accuracy,accuracy_variance,global_loss,
//   server_utility,selected_ids,acc_<id>...,tau_<id>...,util_<id>...
// with one row per record. Reals are printed with 10 significant digits;
// cells for clients that did not train in a round are empty.
// JSON: {"meta": {...}, "records": [...]} with full-precision reals.
void export_records(const std::vector<fed::RoundRecord>& records, const std::filesystem::path& path,
                    ReportFormat format, const ReportMeta& meta = {});

std::string records_to_csv(const std::vector<fed::RoundRecord>& records, const ReportMeta& meta = {});
std::string records_to_json(const std::vector<fed::RoundRecord>& records, const ReportMeta& meta = {});

std::vector<fed::RoundRecord> records_from_json(const std::string& text);
std::vector<fed::RoundRecord> read_records_json(const std::filesystem::path& path);

}  // namespace flamma::analysis
