#pragma once

#include <string>
#include <vector>

#include "core/types.hpp"

namespace valign {

struct IngestResult {
  Corpus corpus;
  std::vector<std::string> warnings;  // e.g. wrong-group records skipped
};

// Line-delimited records {id, topic, group, text, origin}. Malformed lines
// and duplicate ids are errors (with line numbers / the offending id);
// records tagged with another group are skipped with a warning. Examinee
// corpora are ingested with enforce_group = false: their label names the
// model under test, not the records' group tag.
IngestResult ingest_corpus(const std::string& path, const GroupId& group,
                           bool enforce_group = true);

}  // namespace valign
