#include "pipeline/report.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "core/error.hpp"

namespace valign {

using nlohmann::json;

void write_jsonl(const std::string& path, const std::vector<json>& records) {
  auto parent = std::filesystem::path(path).parent_path();
  if (!parent.empty()) std::filesystem::create_directories(parent);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::io, "cannot write report " + path);
  for (const auto& r : records) out << r.dump() << '\n';
}

std::vector<json> read_jsonl(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::io, "cannot open report " + path);
  std::vector<json> records;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    try {
      records.push_back(json::parse(line));
    } catch (const json::exception& e) {
      throw Error(ErrorCode::parse,
                  path + ":" + std::to_string(line_no) + ": bad record: " + e.what());
    }
  }
  return records;
}

std::string render_table(const std::vector<json>& records) {
  if (records.empty()) return "(empty report)\n";

  std::vector<std::string> columns;
  for (const auto& r : records)
    for (auto it = r.begin(); it != r.end(); ++it)
      if (std::find(columns.begin(), columns.end(), it.key()) == columns.end())
        columns.push_back(it.key());

  auto cell = [](const json& r, const std::string& key) -> std::string {
    if (!r.contains(key)) return "-";
    const json& v = r.at(key);
    if (v.is_string()) return v.get<std::string>();
    return v.dump();
  };

  std::vector<std::size_t> widths(columns.size());
  for (std::size_t c = 0; c < columns.size(); ++c) {
    widths[c] = columns[c].size();
    for (const auto& r : records) widths[c] = std::max(widths[c], cell(r, columns[c]).size());
  }

  std::ostringstream out;
  auto emit_row = [&](const std::vector<std::string>& cells) {
    for (std::size_t c = 0; c < cells.size(); ++c) {
      out << cells[c];
      if (c + 1 < cells.size()) out << std::string(widths[c] - cells[c].size() + 2, ' ');
    }
    out << '\n';
  };
  emit_row(columns);
  std::vector<std::string> rule;
  for (auto w : widths) rule.push_back(std::string(w, '-'));
  emit_row(rule);
  for (const auto& r : records) {
    std::vector<std::string> cells;
    for (const auto& c : columns) cells.push_back(cell(r, c));
    emit_row(cells);
  }
  return out.str();
}

std::string render_report_file(const std::string& jsonl_path) {
  return render_table(read_jsonl(jsonl_path));
}

}  // namespace valign
