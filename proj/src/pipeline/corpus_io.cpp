#include "pipeline/corpus_io.hpp"

#include <json.hpp>

#include <fstream>
#include <set>

#include "core/error.hpp"

namespace valign {

using nlohmann::json;

IngestResult ingest_corpus(const std::string& path, const GroupId& group, bool enforce_group) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::io, "cannot open corpus " + path);

  IngestResult out;
  out.corpus.group = group;
  std::set<std::string> seen_ids;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::exception& e) {
      throw Error(ErrorCode::parse,
                  path + ":" + std::to_string(line_no) + ": malformed record: " + e.what());
    }
    Document d;
    try {
      d.id = j.at("id").get<std::string>();
      d.topic_id = j.at("topic").get<std::string>();
      d.group = j.at("group").get<std::string>();
      d.text = j.at("text").get<std::string>();
    } catch (const json::exception& e) {
      throw Error(ErrorCode::parse,
                  path + ":" + std::to_string(line_no) + ": missing field: " + e.what());
    }
    std::string origin = j.value("origin", "human");
    if (origin == "human") d.origin = Origin::human;
    else if (origin == "model") d.origin = Origin::model;
    else
      throw Error(ErrorCode::parse,
                  path + ":" + std::to_string(line_no) + ": bad origin '" + origin + "'");
    if (d.text.empty())
      throw Error(ErrorCode::parse, path + ":" + std::to_string(line_no) + ": empty text");
    if (enforce_group && d.group != group) {
      out.warnings.push_back(path + ":" + std::to_string(line_no) + ": record group '" +
                             d.group + "' does not match '" + group + "'; skipped");
      continue;
    }
    if (!seen_ids.insert(d.id).second)
      throw Error(ErrorCode::parse, path + ": duplicate document id '" + d.id + "'");
    out.corpus.documents.push_back(std::move(d));
  }
  if (out.corpus.documents.empty())
    throw Error(ErrorCode::invalid_argument, "corpus " + path + " has no usable records");
  return out;
}

}  // namespace valign
