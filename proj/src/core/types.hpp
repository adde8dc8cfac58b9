#pragma once

// Domain types shared by every module: documents, value expressions,
// codes/codebooks, and histograms over codes.

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

namespace valign {

using GroupId = std::string;

enum class Origin { human, model };

struct Document {
  std::string id;
  std::string topic_id;
  GroupId group;
  std::string text;
  Origin origin = Origin::human;
};

struct Corpus {
  GroupId group;
  std::vector<Document> documents;
  std::size_t size() const { return documents.size(); }
};

struct Embedding {
  std::vector<double> values;
  std::size_t dim() const { return values.size(); }
};

// One-sentence value statement extracted from a document. The hint is the
// extractor's 1-3 word label; the sentence text is what gets embedded.
struct ValueExpression {
  std::string text;
  std::string code_name_hint;
  std::string doc_id;
  std::optional<Embedding> embedding;
};

struct ValueCode {
  int id = 0;
  std::string name;
  Embedding centroid;
  std::vector<ValueExpression> members;
  double usage = 0.0;                      // n_k, accumulated soft counts
  std::vector<double> distortion_history;  // per-iteration mean distortion d(c_k)
};

struct Codebook {
  std::vector<ValueCode> codes;
  int iteration = 0;
  std::vector<double> score_history;
  std::size_t size() const { return codes.size(); }
};

// Length-K non-negative vector summing to 1 over codebook codes.
struct ValueHistogram {
  std::vector<double> mass;
  std::string codebook_ref;
};

// M distinct code indices drawn without replacement. `truncated` is set when
// fewer than M codes were eligible and the set was shortened.
struct CodeIndexSet {
  std::vector<int> indices;
  bool truncated = false;
};

}  // namespace valign
