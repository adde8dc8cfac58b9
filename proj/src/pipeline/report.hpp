#pragma once

#include <json.hpp>

#include <string>
#include <vector>

namespace valign {

// Writes records as line-delimited JSON (one object per line, sorted keys).
void write_jsonl(const std::string& path, const std::vector<nlohmann::json>& records);

std::vector<nlohmann::json> read_jsonl(const std::string& path);

// Renders JSONL records as an aligned plain-text table. Columns follow first
// appearance order; numbers keep their JSON formatting.
std::string render_table(const std::vector<nlohmann::json>& records);

std::string render_report_file(const std::string& jsonl_path);

}  // namespace valign
