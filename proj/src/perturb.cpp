#include "probekit/perturb.hpp"

#include <algorithm>
#include <stdexcept>

#include "json.hpp"
#include "probekit/rng.hpp"

namespace probekit {

const char* perturbation_name(PerturbationKind kind) {
  switch (kind) {
    case PerturbationKind::kAppendR: return "AppendR";
    case PerturbationKind::kDropNV: return "DropNV";
    case PerturbationKind::kDropN: return "DropN";
    case PerturbationKind::kDropV: return "DropV";
    case PerturbationKind::kDropRN: return "DropRN";
    case PerturbationKind::kDropRV: return "DropRV";
    case PerturbationKind::kKeepNV: return "KeepNV";
    case PerturbationKind::kKeepN: return "KeepN";
    case PerturbationKind::kKeepV: return "KeepV";
    case PerturbationKind::kDropF: return "DropF";
    case PerturbationKind::kDropL: return "DropL";
    case PerturbationKind::kDropFL: return "DropFL";
    case PerturbationKind::kShuffle: return "Shuffle";
  }
  return "?";
}

std::optional<PerturbationKind> perturbation_from_name(std::string_view name) {
  for (PerturbationKind k : kAllPerturbations) {
    if (name == perturbation_name(k)) return k;
  }
  return std::nullopt;
}

PosClassifier::PosClassifier()
    : PosClassifier({"NN", "NNS", "NNP", "NNPC", "NNC"}, {"VM", "VAUX"}) {}

PosClassifier::PosClassifier(std::set<std::string> noun_tags,
                             std::set<std::string> verb_tags)
    : noun_tags_(std::move(noun_tags)), verb_tags_(std::move(verb_tags)) {
  for (const std::string& t : noun_tags_) {
    if (verb_tags_.contains(t)) {
      throw std::invalid_argument("POS tag '" + t + "' is both a noun and a verb tag");
    }
  }
}

namespace {

template <typename Pred>
TokenSentence keep_if(const TokenSentence& s, Pred pred) {
  TokenSentence out;
  for (const Token& t : s) {
    if (pred(t)) out.push_back(t);
  }
  return out;
}

PerturbOutcome drop_random(const TokenSentence& s, bool nouns, const PosClassifier& pos,
                           Rng& rng) {
  std::vector<size_t> candidates;
  for (size_t i = 0; i < s.size(); ++i) {
    if (nouns ? pos.is_noun(s[i]) : pos.is_verb(s[i])) candidates.push_back(i);
  }
  if (candidates.empty()) return {s, PerturbStatus::kNothingToDrop};
  TokenSentence out = s;
  out.erase(out.begin() + static_cast<std::ptrdiff_t>(candidates[rng.below(candidates.size())]));
  const PerturbStatus st = out.empty() ? PerturbStatus::kEmptyResult : PerturbStatus::kOk;
  return {std::move(out), st};
}

}  // namespace

PerturbOutcome perturb(const TokenSentence& sentence, PerturbationKind kind,
                       const PerturbConfig& cfg,
                       std::span<const TokenSentence> phrase_pool, uint64_t seed) {
  if (sentence.empty()) throw std::invalid_argument("cannot perturb an empty sentence");
  const PosClassifier& pos = cfg.pos;
  Rng rng(seed);
  auto filtered = [](TokenSentence out) {
    const PerturbStatus st = out.empty() ? PerturbStatus::kEmptyResult : PerturbStatus::kOk;
    return PerturbOutcome{std::move(out), st};
  };
  const Token unk{cfg.unk_token, cfg.unk_tag};

  switch (kind) {
    case PerturbationKind::kAppendR: {
      if (phrase_pool.empty()) {
        throw std::invalid_argument("AppendR needs a non-empty phrase pool");
      }
      TokenSentence out = sentence;
      const TokenSentence& phrase = phrase_pool[rng.below(phrase_pool.size())];
      out.insert(out.end(), phrase.begin(), phrase.end());
      return {std::move(out), PerturbStatus::kOk};
    }
    case PerturbationKind::kDropNV:
      return filtered(keep_if(sentence, [&](const Token& t) {
        return !pos.is_noun(t) && !pos.is_verb(t);
      }));
    case PerturbationKind::kDropN:
      return filtered(keep_if(sentence, [&](const Token& t) { return !pos.is_noun(t); }));
    case PerturbationKind::kDropV:
      return filtered(keep_if(sentence, [&](const Token& t) { return !pos.is_verb(t); }));
    case PerturbationKind::kDropRN: return drop_random(sentence, true, pos, rng);
    case PerturbationKind::kDropRV: return drop_random(sentence, false, pos, rng);
    case PerturbationKind::kKeepNV:
      return filtered(keep_if(sentence, [&](const Token& t) {
        return pos.is_noun(t) || pos.is_verb(t);
      }));
    case PerturbationKind::kKeepN:
      return filtered(keep_if(sentence, [&](const Token& t) { return pos.is_noun(t); }));
    case PerturbationKind::kKeepV:
      return filtered(keep_if(sentence, [&](const Token& t) { return pos.is_verb(t); }));
    case PerturbationKind::kDropF: {
      TokenSentence out = sentence;
      out.front() = unk;
      return {std::move(out), PerturbStatus::kOk};
    }
    case PerturbationKind::kDropL: {
      TokenSentence out = sentence;
      out.back() = unk;
      return {std::move(out), PerturbStatus::kOk};
    }
    case PerturbationKind::kDropFL: {
      TokenSentence out = sentence;
      out.front() = unk;
      out.back() = unk;
      return {std::move(out), PerturbStatus::kOk};
    }
    case PerturbationKind::kShuffle: {
      TokenSentence out = sentence;
      rng.shuffle(out);
      return {std::move(out), PerturbStatus::kOk};
    }
  }
  throw std::logic_error("unknown perturbation kind");
}

std::vector<Phrase> phrases_from(const ssf::SsfDocument& doc) {
  std::vector<Phrase> out;
  for (const ssf::SsfSentence& s : doc.sentences) {
    const std::string id = example_id_for(doc, s);
    for (const ssf::Chunk& c : s.chunks) {
      Phrase p;
      p.source_id = id;
      for (const ssf::WordNode& w : c.words) p.tokens.push_back({w.surface, w.pos_tag});
      out.push_back(std::move(p));
    }
  }
  return out;
}

std::string phrases_to_jsonl(const std::vector<Phrase>& phrases) {
  std::string out;
  for (const Phrase& p : phrases) {
    nlohmann::ordered_json j;
    j["source"] = p.source_id;
    nlohmann::ordered_json toks = nlohmann::ordered_json::array();
    for (const Token& t : p.tokens) toks.push_back({t.surface, t.pos_tag});
    j["tokens"] = std::move(toks);
    out += j.dump();
    out += '\n';
  }
  return out;
}

std::vector<Phrase> phrases_from_jsonl(std::string_view text) {
  std::vector<Phrase> out;
  size_t start = 0;
  while (start < text.size()) {
    size_t nl = text.find('\n', start);
    if (nl == std::string_view::npos) nl = text.size();
    std::string_view line = text.substr(start, nl - start);
    start = nl + 1;
    if (line.find_first_not_of(" \t\r") == std::string_view::npos) continue;
    const auto j = nlohmann::json::parse(line);
    Phrase p;
    p.source_id = j.at("source").get<std::string>();
    for (const auto& tok : j.at("tokens")) {
      p.tokens.push_back({tok.at(0).get<std::string>(), tok.at(1).get<std::string>()});
    }
    if (!p.tokens.empty()) out.push_back(std::move(p));
  }
  return out;
}

namespace {

// Phrases grouped by source so one sentence's own phrases can be excluded in
// O(log n) while still sampling uniformly from everything else.
class PhraseSampler {
 public:
  explicit PhraseSampler(const std::vector<Phrase>& phrases) {
    order_.reserve(phrases.size());
    for (const Phrase& p : phrases) order_.push_back(&p);
    std::stable_sort(order_.begin(), order_.end(), [](const Phrase* a, const Phrase* b) {
      return a->source_id < b->source_id;
    });
  }

  bool empty() const { return order_.empty(); }

  const TokenSentence& sample(const std::string& exclude_source, Rng& rng) const {
    auto lo = std::lower_bound(order_.begin(), order_.end(), exclude_source,
                               [](const Phrase* p, const std::string& s) {
                                 return p->source_id < s;
                               });
    auto hi = std::upper_bound(lo, order_.end(), exclude_source,
                               [](const std::string& s, const Phrase* p) {
                                 return s < p->source_id;
                               });
    const size_t own = static_cast<size_t>(hi - lo);
    const size_t others = order_.size() - own;
    if (others == 0) {
      // Only the sentence's own phrases exist; fall back to the whole pool.
      return order_[rng.below(order_.size())]->tokens;
    }
    size_t k = rng.below(others);
    const size_t gap_start = static_cast<size_t>(lo - order_.begin());
    if (k >= gap_start) k += own;
    return order_[k]->tokens;
  }

 private:
  std::vector<const Phrase*> order_;
};

}  // namespace

PerturbedDataset perturb_dataset(const std::vector<ProbingExample>& examples,
                                 const std::set<PerturbationKind>& kinds,
                                 const PerturbConfig& cfg,
                                 const std::vector<Phrase>& phrases, uint64_t seed) {
  PerturbedDataset out;
  const PhraseSampler sampler(phrases);
  for (PerturbationKind kind : kinds) {
    if (kind == PerturbationKind::kAppendR && sampler.empty()) {
      throw std::invalid_argument("AppendR requested without a phrase pool");
    }
    auto& dest = out.examples[kind];
    PerturbStats& st = out.stats[kind];
    const uint64_t kind_seed = derive_seed(seed, perturbation_name(kind));
    for (const ProbingExample& ex : examples) {
      if (ex.task == TaskKind::kBShift) {
        ++st.not_applicable;
        continue;
      }
      ++st.attempted;
      const uint64_t ex_seed = derive_seed(kind_seed, ex.example_id);
      PerturbOutcome res;
      if (kind == PerturbationKind::kAppendR) {
        Rng pick(derive_seed(ex_seed, "phrase"));
        const TokenSentence& phrase = sampler.sample(ex.example_id, pick);
        res = perturb(ex.tokens, kind, cfg, std::span(&phrase, 1), ex_seed);
      } else {
        res = perturb(ex.tokens, kind, cfg, {}, ex_seed);
      }
      if (res.status == PerturbStatus::kEmptyResult) {
        if (cfg.empty_policy == EmptyPolicy::kSkip) {
          ++st.skipped_empty;
          continue;
        }
        res.tokens = {{cfg.unk_token, cfg.unk_tag}};
        ++st.placeholders;
      } else if (res.status == PerturbStatus::kNothingToDrop) {
        ++st.nothing_to_drop;
      }
      ProbingExample copy = ex;
      copy.tokens = std::move(res.tokens);
      copy.perturbation = perturbation_name(kind);
      dest.push_back(std::move(copy));
      ++st.produced;
    }
  }
  return out;
}

std::string perturb_stats_to_json(PerturbationKind kind, TaskKind task,
                                  const PerturbStats& stats) {
  nlohmann::ordered_json j;
  j["perturbation"] = perturbation_name(kind);
  j["task"] = task_name(task);
  j["attempted"] = stats.attempted;
  j["produced"] = stats.produced;
  j["skipped_empty"] = stats.skipped_empty;
  j["placeholders"] = stats.placeholders;
  j["nothing_to_drop"] = stats.nothing_to_drop;
  j["not_applicable"] = stats.not_applicable;
  return j.dump(2) + "\n";
}

}  // namespace probekit
