#pragma once

// Rule-based text perturbations over POS-tagged token sequences.

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "probekit/labels.hpp"

namespace probekit {

enum class PerturbationKind {
  kAppendR,
  kDropNV,
  kDropN,
  kDropV,
  kDropRN,
  kDropRV,
  kKeepNV,
  kKeepN,
  kKeepV,
  kDropF,
  kDropL,
  kDropFL,
  kShuffle,
};

inline constexpr std::array<PerturbationKind, 13> kAllPerturbations = {
    PerturbationKind::kAppendR, PerturbationKind::kDropNV, PerturbationKind::kDropN,
    PerturbationKind::kDropV,   PerturbationKind::kDropRN, PerturbationKind::kDropRV,
    PerturbationKind::kKeepNV,  PerturbationKind::kKeepN,  PerturbationKind::kKeepV,
    PerturbationKind::kDropF,   PerturbationKind::kDropL,  PerturbationKind::kDropFL,
    PerturbationKind::kShuffle,
};

const char* perturbation_name(PerturbationKind kind);
std::optional<PerturbationKind> perturbation_from_name(std::string_view name);

class PosClassifier {
 public:
  PosClassifier();
  // Throws std::invalid_argument if the tag sets overlap.
  PosClassifier(std::set<std::string> noun_tags, std::set<std::string> verb_tags);

  bool is_noun(const Token& t) const { return noun_tags_.contains(t.pos_tag); }
  bool is_verb(const Token& t) const { return verb_tags_.contains(t.pos_tag); }

  const std::set<std::string>& noun_tags() const { return noun_tags_; }
  const std::set<std::string>& verb_tags() const { return verb_tags_; }

 private:
  std::set<std::string> noun_tags_;
  std::set<std::string> verb_tags_;
};

enum class EmptyPolicy { kSkip, kPlaceholder };

struct PerturbConfig {
  PosClassifier pos;
  EmptyPolicy empty_policy = EmptyPolicy::kSkip;
  std::string unk_token = "[UNK]";
  std::string unk_tag = "UNK";
};

enum class PerturbStatus {
  kOk,
  // DropRN/DropRV on a sentence without a noun/verb; tokens are unchanged.
  kNothingToDrop,
  // A Drop/Keep variant removed every token; tokens are empty.
  kEmptyResult,
};

struct PerturbOutcome {
  TokenSentence tokens;
  PerturbStatus status = PerturbStatus::kOk;
};

// Applies one perturbation. `phrase_pool` is only read by AppendR, which
// appends a uniformly chosen entry. Throws std::invalid_argument when the
// sentence is empty or AppendR gets an empty pool.
PerturbOutcome perturb(const TokenSentence& sentence, PerturbationKind kind,
                       const PerturbConfig& cfg,
                       std::span<const TokenSentence> phrase_pool, uint64_t seed);

// A chunk-sized token span with the id of the sentence it came from.
struct Phrase {
  std::string source_id;
  TokenSentence tokens;
};

std::vector<Phrase> phrases_from(const ssf::SsfDocument& doc);
std::string phrases_to_jsonl(const std::vector<Phrase>& phrases);
std::vector<Phrase> phrases_from_jsonl(std::string_view text);

struct PerturbStats {
  size_t attempted = 0;
  size_t produced = 0;
  size_t skipped_empty = 0;
  size_t placeholders = 0;
  size_t nothing_to_drop = 0;
  size_t not_applicable = 0;  // BShift examples

  bool operator==(const PerturbStats&) const = default;
};

struct PerturbedDataset {
  std::map<PerturbationKind, std::vector<ProbingExample>> examples;
  std::map<PerturbationKind, PerturbStats> stats;
};

// Per-example seeds come from (seed, kind, example_id), so the result does
// not depend on example order. AppendR draws its phrase uniformly from the
// pool entries of other sentences. BShift examples are passed over.
PerturbedDataset perturb_dataset(const std::vector<ProbingExample>& examples,
                                 const std::set<PerturbationKind>& kinds,
                                 const PerturbConfig& cfg,
                                 const std::vector<Phrase>& phrases, uint64_t seed);

std::string perturb_stats_to_json(PerturbationKind kind, TaskKind task,
                                  const PerturbStats& stats);

}  // namespace probekit
