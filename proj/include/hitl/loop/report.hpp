#pragma once

#include "hitl/loop/loop.hpp"

#include <json.hpp>

#include <string>
#include <string_view>

namespace hitl::loop {

enum class ReportFormat { md, csv, json };

/// Throws configuration on an unknown name.
ReportFormat report_format_from_string(std::string_view text);

/// Canonical report JSON: sorted keys, numbers rounded to 4 decimals.
nlohmann::json to_json(const RunReport& report);
RunReport report_from_json(const nlohmann::json& j);

/// md: per-round table; csv: the same columns with a baseline row 0;
/// json: to_json(report) pretty-printed.
std::string emit_report(const RunReport& report, ReportFormat format);

/// Writes report.json, report.md, rounds.csv and timings.json into `dir`.
void write_report_files(const std::filesystem::path& dir, const RunReport& report);
RunReport read_report(const std::filesystem::path& run_dir);

/// {"per_class": [a, b], "mean": m} with the mean taken over the rounded
/// per-class values so that parsing and re-emitting is lossless.
nlohmann::json to_json(const DiceScore& dice);
DiceScore dice_from_json(const nlohmann::json& j);

/// Rounds to 4 decimals, the precision used by every report format.
double round4(double value);

} // namespace hitl::loop
