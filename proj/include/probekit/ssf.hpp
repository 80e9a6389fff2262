#pragma once

// Shakti Standard Format (SSF) document model, parser and serializer.
//
// Canonical grammar, one tab-separated record per line:
//
//   <Sentence id='1'>
//   1      ((      NP      <fs af='raam,n,m,sg,3,d,0,0' name='NP' drel='k1:VGF'>
//   1.1    raam    NNP     <fs af='raam,n,m,sg,3,d,0,0'>
//          ))
//   2      ((      VGF     <fs name='VGF'>
//   2.1    aayaa   VM      <fs af='aa,v,m,sg,3,,yaa,yaa'>
//          ))
//   </Sentence>
//
// Column 1 is the address ("k" on a chunk-open line, "k.j" on a word line,
// empty on a chunk-close line), column 2 the token ("((", "))" or the
// surface form), column 3 the category (chunk tag or POS tag) and column 4
// an optional feature structure. Blank lines and document wrapper tags
// (<document>, <head>, ...) outside sentences are ignored.

#include <array>
#include <cstddef>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace probekit::ssf {

enum class ErrorKind {
  kMalformedLine,
  kUnbalancedChunk,
  kBadAddress,
  kBadFeatureStructure,
  kDanglingDrel,
  kDuplicateSentenceId,
  kBadEncoding,
  kNoRoot,
  kMultipleRoots,
  kCycleDetected,
};

const char* error_kind_name(ErrorKind kind);

class SsfError : public std::runtime_error {
 public:
  SsfError(ErrorKind kind, std::string message, size_t line = 0,
           size_t column = 0, std::string sentence_id = {});

  ErrorKind kind() const { return kind_; }
  size_t line() const { return line_; }
  size_t column() const { return column_; }
  const std::string& sentence_id() const { return sentence_id_; }
  // The message without the kind/location prefix.
  const std::string& detail() const { return detail_; }

 private:
  ErrorKind kind_;
  std::string detail_;
  size_t line_;
  size_t column_;
  std::string sentence_id_;
};

struct Address {
  int chunk_index = 1;
  int word_index = 1;

  bool operator==(const Address&) const = default;
};

// Positional `af` slots.
enum AfSlot : size_t {
  kRoot = 0,
  kCategory,
  kGender,
  kNumber,
  kPerson,
  kCase,
  kVibhaktiOrTam,
  kSuffix,
  kAfSlotCount,
};

struct FeatureStructure {
  std::array<std::string, kAfSlotCount> af;
  // Whether an `af` attribute was written at all; an af of eight empty slots
  // and no af are different documents.
  bool has_af = false;
  // Every other attribute (drel, name, head, ...), kept verbatim.
  std::map<std::string, std::string> extra;

  const std::string& root() const { return af[kRoot]; }
  const std::string& category() const { return af[kCategory]; }
  const std::string& gender() const { return af[kGender]; }
  const std::string& number() const { return af[kNumber]; }
  const std::string& person() const { return af[kPerson]; }
  const std::string& case_marker() const { return af[kCase]; }
  const std::string& vibhakti_or_tam() const { return af[kVibhaktiOrTam]; }
  const std::string& suffix() const { return af[kSuffix]; }

  const std::string* attribute(std::string_view name) const;
  bool empty() const { return !has_af && extra.empty(); }

  bool operator==(const FeatureStructure&) const = default;
};

struct WordNode {
  Address address;
  std::string surface;
  std::string pos_tag;
  FeatureStructure features;

  bool operator==(const WordNode&) const = default;
};

struct Chunk {
  int index = 1;
  std::string chunk_tag;
  std::vector<WordNode> words;
  FeatureStructure features;

  const std::string* name() const { return features.attribute("name"); }
  const std::string* drel() const { return features.attribute("drel"); }

  bool operator==(const Chunk&) const = default;
};

struct SsfSentence {
  std::string id;
  std::vector<Chunk> chunks;

  bool operator==(const SsfSentence&) const = default;
};

struct SsfDocument {
  std::vector<SsfSentence> sentences;
  std::string source_path;

  // Structural equality ignores where the document was read from.
  bool operator==(const SsfDocument& other) const {
    return sentences == other.sentences;
  }
};

// Strict parse: throws SsfError at the first problem, with its line/column.
SsfDocument parse_document(std::string_view text, std::string source_path = {});

// Lenient parse used by validation: a bad sentence is recorded and skipped,
// parsing resumes after its closing </Sentence>.
struct ParseReport {
  SsfDocument document;
  std::vector<SsfError> errors;
};
ParseReport parse_document_lenient(std::string_view text,
                                   std::string source_path = {});

std::string serialize(const SsfDocument& doc);
std::string serialize_sentence(const SsfSentence& sentence);
std::string serialize_features(const FeatureStructure& fs);

// Throws SsfError(kBadFeatureStructure) on malformed input.
FeatureStructure parse_features(std::string_view text);

// Checks every type invariant of a sentence; throws SsfError on violation.
void check_sentence(const SsfSentence& sentence);

size_t word_count(const SsfSentence& sentence);

struct DependencyEdge {
  int child_chunk_index = 0;
  int parent_chunk_index = 0;
  std::string relation;

  bool operator==(const DependencyEdge&) const = default;
};

struct DependencyTree {
  std::vector<DependencyEdge> edges;
  int root_chunk_index = 0;
};

// A drel "relation:target" whose relation is "root" or whose target is
// "ROOT" or "0" marks the root, as does a chunk carrying no drel at all.
bool is_root_drel(std::string_view drel);

// Splits "k1:VGF" into {"k1", "VGF"}; the target is empty when no colon.
std::pair<std::string_view, std::string_view> split_drel(std::string_view drel);

// Throws SsfError with kNoRoot, kMultipleRoots, kCycleDetected or
// kDanglingDrel.
DependencyTree dependency_edges(const SsfSentence& sentence);

inline constexpr std::string_view kFiniteVerbGroupTag = "VGF";

// First chunk (by index) tagged with the finite verb group tag.
const Chunk* main_verb_chunk(const SsfSentence& sentence,
                             std::string_view verb_chunk_tag = kFiniteVerbGroupTag);

// Head word of a chunk: the word whose `name` equals the chunk's `head`
// attribute if there is one, else the last word.
const WordNode* chunk_head(const Chunk& chunk);

bool is_valid_utf8(std::string_view text);

}  // namespace probekit::ssf
