#include "probekit/ssf.hpp"

#include <algorithm>
#include <charconv>
#include <deque>
#include <set>
#include <unordered_map>

namespace probekit::ssf {

const char* error_kind_name(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kMalformedLine: return "MalformedLine";
    case ErrorKind::kUnbalancedChunk: return "UnbalancedChunk";
    case ErrorKind::kBadAddress: return "BadAddress";
    case ErrorKind::kBadFeatureStructure: return "BadFeatureStructure";
    case ErrorKind::kDanglingDrel: return "DanglingDrel";
    case ErrorKind::kDuplicateSentenceId: return "DuplicateSentenceId";
    case ErrorKind::kBadEncoding: return "BadEncoding";
    case ErrorKind::kNoRoot: return "NoRoot";
    case ErrorKind::kMultipleRoots: return "MultipleRoots";
    case ErrorKind::kCycleDetected: return "CycleDetected";
  }
  return "Unknown";
}

namespace {

std::string format_message(ErrorKind kind, const std::string& message,
                           size_t line, size_t column) {
  std::string out = error_kind_name(kind);
  if (line > 0) {
    out += " at line " + std::to_string(line);
    if (column > 0) out += ", column " + std::to_string(column);
  }
  out += ": " + message;
  return out;
}

}  // namespace

SsfError::SsfError(ErrorKind kind, std::string message, size_t line,
                   size_t column, std::string sentence_id)
    : std::runtime_error(format_message(kind, message, line, column)),
      kind_(kind),
      detail_(std::move(message)),
      line_(line),
      column_(column),
      sentence_id_(std::move(sentence_id)) {}

const std::string* FeatureStructure::attribute(std::string_view name) const {
  auto it = extra.find(std::string(name));
  return it == extra.end() ? nullptr : &it->second;
}

bool is_valid_utf8(std::string_view text) {
  const auto* s = reinterpret_cast<const unsigned char*>(text.data());
  const size_t n = text.size();
  size_t i = 0;
  while (i < n) {
    const unsigned char c = s[i];
    if (c < 0x80) {
      ++i;
      continue;
    }
    size_t len;
    uint32_t cp;
    if ((c & 0xE0) == 0xC0) {
      len = 2;
      cp = c & 0x1F;
    } else if ((c & 0xF0) == 0xE0) {
      len = 3;
      cp = c & 0x0F;
    } else if ((c & 0xF8) == 0xF0) {
      len = 4;
      cp = c & 0x07;
    } else {
      return false;
    }
    if (i + len > n) return false;
    for (size_t k = 1; k < len; ++k) {
      if ((s[i + k] & 0xC0) != 0x80) return false;
      cp = (cp << 6) | (s[i + k] & 0x3F);
    }
    if ((len == 2 && cp < 0x80) || (len == 3 && cp < 0x800) ||
        (len == 4 && cp < 0x10000) || cp > 0x10FFFF ||
        (cp >= 0xD800 && cp <= 0xDFFF)) {
      return false;
    }
    i += len;
  }
  return true;
}

// ---------------------------------------------------------------------------
// Feature structures

namespace {

bool is_attr_name_char(char c) {
  return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') ||
         (c >= '0' && c <= '9') || c == '_' || c == '-' || c == '.';
}

bool is_space(char c) { return c == ' ' || c == '\t'; }

[[noreturn]] void fs_error(const std::string& message, size_t offset) {
  // Column is relative to the feature-structure text; callers rebase it.
  throw SsfError(ErrorKind::kBadFeatureStructure, message, 0, offset + 1);
}

}  // namespace

FeatureStructure parse_features(std::string_view text) {
  FeatureStructure fs;
  if (text.empty()) return fs;
  if (text.substr(0, 3) != "<fs") fs_error("expected '<fs'", 0);
  size_t i = 3;
  std::set<std::string> seen;
  while (true) {
    const size_t before_space = i;
    while (i < text.size() && is_space(text[i])) ++i;
    if (i >= text.size()) fs_error("missing closing '>'", i);
    if (text[i] == '>') {
      ++i;
      break;
    }
    if (i == before_space) fs_error("expected whitespace before attribute", i);
    const size_t name_start = i;
    while (i < text.size() && is_attr_name_char(text[i])) ++i;
    if (i == name_start) fs_error("expected attribute name", i);
    std::string name(text.substr(name_start, i - name_start));
    while (i < text.size() && is_space(text[i])) ++i;
    if (i >= text.size() || text[i] != '=') fs_error("expected '='", i);
    ++i;
    while (i < text.size() && is_space(text[i])) ++i;
    if (i >= text.size() || (text[i] != '\'' && text[i] != '"')) {
      fs_error("expected quoted value", i);
    }
    const char quote = text[i++];
    const size_t value_start = i;
    while (i < text.size() && text[i] != quote) ++i;
    if (i >= text.size()) fs_error("unterminated attribute value", value_start);
    std::string value(text.substr(value_start, i - value_start));
    ++i;
    if (!seen.insert(name).second) {
      fs_error("duplicate attribute '" + name + "'", name_start);
    }
    if (name == "af") {
      size_t slot = 0;
      size_t start = 0;
      while (true) {
        const size_t comma = value.find(',', start);
        if (slot >= kAfSlotCount) {
          fs_error("af has more than 8 slots", value_start);
        }
        fs.af[slot++] = value.substr(start, comma == std::string::npos
                                                ? std::string::npos
                                                : comma - start);
        if (comma == std::string::npos) break;
        start = comma + 1;
      }
      fs.has_af = true;
    } else {
      fs.extra.emplace(std::move(name), std::move(value));
    }
  }
  while (i < text.size() && is_space(text[i])) ++i;
  if (i != text.size()) fs_error("trailing characters after '>'", i);
  return fs;
}

std::string serialize_features(const FeatureStructure& fs) {
  if (fs.empty()) return {};
  auto quoted = [](const std::string& v) {
    const char q = v.find('\'') == std::string::npos ? '\'' : '"';
    return std::string(1, q) + v + q;
  };
  std::string out = "<fs";
  if (fs.has_af) {
    std::string af;
    for (size_t k = 0; k < kAfSlotCount; ++k) {
      if (k) af.push_back(',');
      af += fs.af[k];
    }
    out += " af=" + quoted(af);
  }
  for (const auto& [name, value] : fs.extra) {
    out += " " + name + "=" + quoted(value);
  }
  out += ">";
  return out;
}

// ---------------------------------------------------------------------------
// Drel helpers

std::pair<std::string_view, std::string_view> split_drel(std::string_view drel) {
  const size_t colon = drel.find(':');
  if (colon == std::string_view::npos) return {drel, {}};
  return {drel.substr(0, colon), drel.substr(colon + 1)};
}

bool is_root_drel(std::string_view drel) {
  auto [relation, target] = split_drel(drel);
  return relation == "root" || target == "ROOT" || target == "0";
}

namespace {

// Returns the index into sentence.chunks of the first dangling drel, or -1.
int find_dangling_drel(const SsfSentence& sentence) {
  std::set<std::string_view> names;
  for (const Chunk& c : sentence.chunks) {
    if (const std::string* n = c.name()) names.insert(*n);
  }
  for (size_t i = 0; i < sentence.chunks.size(); ++i) {
    const std::string* drel = sentence.chunks[i].drel();
    if (!drel || is_root_drel(*drel)) continue;
    if (!names.contains(split_drel(*drel).second)) return static_cast<int>(i);
  }
  return -1;
}

}  // namespace

void check_sentence(const SsfSentence& sentence) {
  const std::string& sid = sentence.id;
  for (size_t ci = 0; ci < sentence.chunks.size(); ++ci) {
    const Chunk& chunk = sentence.chunks[ci];
    if (chunk.index != static_cast<int>(ci) + 1) {
      throw SsfError(ErrorKind::kBadAddress,
                     "chunk indices must run 1,2,3,...", 0, 0, sid);
    }
    if (chunk.words.empty()) {
      throw SsfError(ErrorKind::kMalformedLine,
                     "chunk " + std::to_string(chunk.index) + " has no words",
                     0, 0, sid);
    }
    for (size_t wi = 0; wi < chunk.words.size(); ++wi) {
      const WordNode& w = chunk.words[wi];
      if (w.address.chunk_index != chunk.index ||
          w.address.word_index != static_cast<int>(wi) + 1) {
        throw SsfError(ErrorKind::kBadAddress,
                       "word address does not match its position", 0, 0, sid);
      }
      if (w.surface.empty() || w.pos_tag.empty()) {
        throw SsfError(ErrorKind::kMalformedLine,
                       "word with empty surface or POS tag", 0, 0, sid);
      }
    }
  }
  if (int bad = find_dangling_drel(sentence); bad >= 0) {
    throw SsfError(ErrorKind::kDanglingDrel,
                   "drel '" + *sentence.chunks[bad].drel() +
                       "' names no chunk in the sentence",
                   0, 0, sid);
  }
}

// ---------------------------------------------------------------------------
// Parsing

namespace {

std::vector<std::string_view> split_tabs(std::string_view line) {
  std::vector<std::string_view> cols;
  size_t start = 0;
  while (true) {
    const size_t tab = line.find('\t', start);
    if (tab == std::string_view::npos) {
      cols.push_back(line.substr(start));
      return cols;
    }
    cols.push_back(line.substr(start, tab - start));
    start = tab + 1;
  }
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t')) s.remove_suffix(1);
  return s;
}

std::optional<int> parse_positive(std::string_view s) {
  int value = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
  if (ec != std::errc() || ptr != s.data() + s.size() || value < 1) {
    return std::nullopt;
  }
  return value;
}

// Extracts id='...' from a <Sentence ...> tag.
std::optional<std::string> sentence_id_from_tag(std::string_view tag) {
  if (tag.size() < 2 || tag.back() != '>') return std::nullopt;
  const size_t pos = tag.find("id=");
  if (pos == std::string_view::npos) return std::nullopt;
  size_t i = pos + 3;
  if (i >= tag.size() || (tag[i] != '\'' && tag[i] != '"')) return std::nullopt;
  const char quote = tag[i++];
  const size_t end = tag.find(quote, i);
  if (end == std::string_view::npos) return std::nullopt;
  return std::string(tag.substr(i, end - i));
}

class Parser {
 public:
  Parser(std::string_view text, bool lenient) : text_(text), lenient_(lenient) {}

  ParseReport run(std::string source_path) {
    report_.document.source_path = std::move(source_path);
    if (!is_valid_utf8(text_)) {
      fail_document(SsfError(ErrorKind::kBadEncoding,
                             "input is not valid UTF-8", first_bad_utf8_line(), 0));
      return std::move(report_);
    }
    std::string_view rest = text_;
    if (rest.starts_with("\xEF\xBB\xBF")) rest.remove_prefix(3);
    size_t line_no = 0;
    while (!rest.empty()) {
      const size_t nl = rest.find('\n');
      std::string_view line = rest.substr(0, nl);
      rest = nl == std::string_view::npos ? std::string_view{} : rest.substr(nl + 1);
      ++line_no;
      if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
      try {
        handle_line(line, line_no);
      } catch (const SsfError& e) {
        if (!lenient_) throw;
        report_.errors.push_back(e);
        // A failure on the closing tag already ends the sentence.
        if (in_sentence_ && !trim(line).starts_with("</Sentence")) skipping_ = true;
        in_sentence_ = false;
        chunk_open_ = false;
      }
    }
    if (in_sentence_) {
      SsfError e(chunk_open_ ? ErrorKind::kUnbalancedChunk : ErrorKind::kMalformedLine,
                 chunk_open_ ? "input ends inside a chunk"
                             : "input ends inside a sentence",
                 line_no, 1, current_.id);
      if (!lenient_) throw e;
      report_.errors.push_back(e);
    }
    return std::move(report_);
  }

 private:
  size_t first_bad_utf8_line() const {
    size_t line = 1, start = 0;
    while (start < text_.size()) {
      size_t nl = text_.find('\n', start);
      if (nl == std::string_view::npos) nl = text_.size();
      if (!is_valid_utf8(text_.substr(start, nl - start))) return line;
      start = nl + 1;
      ++line;
    }
    return line;
  }

  void fail_document(SsfError e) {
    if (!lenient_) throw e;
    report_.errors.push_back(std::move(e));
  }

  [[noreturn]] void fail(ErrorKind kind, const std::string& message,
                         size_t line, size_t column) const {
    throw SsfError(kind, message, line, column, in_sentence_ ? current_.id : "");
  }

  void handle_line(std::string_view line, size_t line_no) {
    const std::string_view trimmed = trim(line);
    if (skipping_) {
      if (trimmed.starts_with("</Sentence")) skipping_ = false;
      return;
    }
    if (!in_sentence_) {
      if (trimmed.empty()) return;
      if (trimmed.starts_with("<Sentence")) {
        open_sentence(trimmed, line_no);
        return;
      }
      if (trimmed.starts_with("</Sentence")) {
        fail(ErrorKind::kMalformedLine, "</Sentence> without <Sentence>", line_no, 1);
      }
      if (trimmed.starts_with("<")) return;  // document wrapper tags
      fail(ErrorKind::kMalformedLine, "content outside a <Sentence> block", line_no, 1);
    }
    if (trimmed.starts_with("</Sentence")) {
      close_sentence(line_no);
      return;
    }
    if (trimmed.starts_with("<Sentence")) {
      fail(ErrorKind::kMalformedLine, "nested <Sentence>", line_no, 1);
    }
    if (trimmed.empty()) return;
    handle_record(line, line_no);
  }

  void open_sentence(std::string_view tag, size_t line_no) {
    auto id = sentence_id_from_tag(tag);
    if (!id) fail(ErrorKind::kMalformedLine, "sentence tag without id", line_no, 1);
    if (!ids_.insert(*id).second) {
      throw SsfError(ErrorKind::kDuplicateSentenceId,
                     "sentence id '" + *id + "' repeated", line_no, 1, *id);
    }
    current_ = SsfSentence{};
    current_.id = *id;
    chunk_lines_.clear();
    in_sentence_ = true;
    chunk_open_ = false;
  }

  void close_sentence(size_t line_no) {
    if (chunk_open_) {
      fail(ErrorKind::kUnbalancedChunk, "'((' without matching '))'",
           chunk_lines_.back(), 2);
    }
    if (int bad = find_dangling_drel(current_); bad >= 0) {
      fail(ErrorKind::kDanglingDrel,
           "drel '" + *current_.chunks[bad].drel() + "' names no chunk in the sentence",
           chunk_lines_[bad], 4);
    }
    (void)line_no;
    report_.document.sentences.push_back(std::move(current_));
    current_ = SsfSentence{};
    in_sentence_ = false;
  }

  FeatureStructure features_at(std::string_view col, size_t line_no,
                               size_t col_offset) const {
    try {
      return parse_features(trim(col));
    } catch (const SsfError& e) {
      fail(ErrorKind::kBadFeatureStructure, e.detail(), line_no,
           col_offset + e.column());
    }
  }

  void handle_record(std::string_view line, size_t line_no) {
    const auto cols = split_tabs(line);
    if (cols.size() < 2 || cols.size() > 4) {
      fail(ErrorKind::kMalformedLine,
           "expected 2 to 4 tab-separated columns, found " + std::to_string(cols.size()),
           line_no, 1);
    }
    std::vector<size_t> offsets(cols.size());
    for (size_t k = 1; k < cols.size(); ++k) {
      offsets[k] = offsets[k - 1] + cols[k - 1].size() + 1;
    }
    const std::string_view address = cols[0];
    const std::string_view token = cols[1];
    const std::string_view category = cols.size() > 2 ? cols[2] : std::string_view{};
    const std::string_view fs_text = cols.size() > 3 ? cols[3] : std::string_view{};

    if (token == "((") {
      if (chunk_open_) {
        fail(ErrorKind::kUnbalancedChunk, "'((' inside an open chunk", line_no, offsets[1] + 1);
      }
      const int expected = static_cast<int>(current_.chunks.size()) + 1;
      auto index = parse_positive(address);
      if (!index || *index != expected) {
        fail(ErrorKind::kBadAddress,
             "chunk address '" + std::string(address) + "', expected " +
                 std::to_string(expected),
             line_no, 1);
      }
      if (category.empty()) {
        fail(ErrorKind::kMalformedLine, "chunk without a chunk tag", line_no,
             cols.size() > 2 ? offsets[2] + 1 : line.size() + 1);
      }
      Chunk chunk;
      chunk.index = expected;
      chunk.chunk_tag = std::string(category);
      chunk.features = features_at(fs_text, line_no, cols.size() > 3 ? offsets[3] : 0);
      current_.chunks.push_back(std::move(chunk));
      chunk_lines_.push_back(line_no);
      chunk_open_ = true;
      return;
    }
    if (token == "))") {
      if (!chunk_open_) {
        fail(ErrorKind::kUnbalancedChunk, "'))' without an open chunk", line_no, offsets[1] + 1);
      }
      if (!address.empty() || !category.empty() || !fs_text.empty()) {
        fail(ErrorKind::kMalformedLine, "chunk-close line carries data", line_no, 1);
      }
      if (current_.chunks.back().words.empty()) {
        fail(ErrorKind::kMalformedLine, "empty chunk", line_no, 1);
      }
      chunk_open_ = false;
      return;
    }
    if (!chunk_open_) {
      fail(ErrorKind::kMalformedLine, "word outside a chunk", line_no, 1);
    }
    if (cols.size() < 3) {
      fail(ErrorKind::kMalformedLine, "word line without a POS column", line_no,
           line.size() + 1);
    }
    Chunk& chunk = current_.chunks.back();
    const size_t dot = address.find('.');
    std::optional<int> ci, wi;
    if (dot != std::string_view::npos) {
      ci = parse_positive(address.substr(0, dot));
      wi = parse_positive(address.substr(dot + 1));
    }
    const int expected_word = static_cast<int>(chunk.words.size()) + 1;
    if (!ci || !wi || *ci != chunk.index || *wi != expected_word) {
      fail(ErrorKind::kBadAddress,
           "word address '" + std::string(address) + "', expected " +
               std::to_string(chunk.index) + "." + std::to_string(expected_word),
           line_no, 1);
    }
    if (token.empty()) {
      fail(ErrorKind::kMalformedLine, "empty word token", line_no, offsets[1] + 1);
    }
    if (category.empty()) {
      fail(ErrorKind::kMalformedLine, "word without a POS tag", line_no, offsets[2] + 1);
    }
    WordNode word;
    word.address = {chunk.index, expected_word};
    word.surface = std::string(token);
    word.pos_tag = std::string(category);
    word.features = features_at(fs_text, line_no, cols.size() > 3 ? offsets[3] : 0);
    chunk.words.push_back(std::move(word));
  }

  std::string_view text_;
  bool lenient_;
  ParseReport report_;
  SsfSentence current_;
  std::vector<size_t> chunk_lines_;
  std::set<std::string> ids_;
  bool in_sentence_ = false;
  bool chunk_open_ = false;
  bool skipping_ = false;
};

}  // namespace

SsfDocument parse_document(std::string_view text, std::string source_path) {
  return Parser(text, /*lenient=*/false).run(std::move(source_path)).document;
}

ParseReport parse_document_lenient(std::string_view text, std::string source_path) {
  return Parser(text, /*lenient=*/true).run(std::move(source_path));
}

// ---------------------------------------------------------------------------
// Serialization

std::string serialize_sentence(const SsfSentence& sentence) {
  std::string out;
  const char q = sentence.id.find('\'') == std::string::npos ? '\'' : '"';
  out += "<Sentence id=";
  out += q;
  out += sentence.id;
  out += q;
  out += ">\n";
  for (const Chunk& chunk : sentence.chunks) {
    out += std::to_string(chunk.index) + "\t((\t" + chunk.chunk_tag + "\t" +
           serialize_features(chunk.features) + "\n";
    for (const WordNode& w : chunk.words) {
      out += std::to_string(w.address.chunk_index) + "." +
             std::to_string(w.address.word_index) + "\t" + w.surface + "\t" +
             w.pos_tag + "\t" + serialize_features(w.features) + "\n";
    }
    out += "\t))\t\t\n";
  }
  out += "</Sentence>\n";
  return out;
}

std::string serialize(const SsfDocument& doc) {
  std::string out;
  for (size_t i = 0; i < doc.sentences.size(); ++i) {
    if (i) out += "\n";
    out += serialize_sentence(doc.sentences[i]);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Queries

size_t word_count(const SsfSentence& sentence) {
  size_t n = 0;
  for (const Chunk& c : sentence.chunks) n += c.words.size();
  return n;
}

DependencyTree dependency_edges(const SsfSentence& sentence) {
  const std::string& sid = sentence.id;
  if (sentence.chunks.empty()) {
    throw SsfError(ErrorKind::kNoRoot, "sentence has no chunks", 0, 0, sid);
  }
  std::unordered_map<std::string_view, int> by_name;
  for (const Chunk& c : sentence.chunks) {
    if (const std::string* n = c.name()) by_name.emplace(*n, c.index);
  }
  DependencyTree tree;
  std::vector<int> roots;
  for (const Chunk& c : sentence.chunks) {
    const std::string* drel = c.drel();
    if (!drel || is_root_drel(*drel)) {
      roots.push_back(c.index);
      continue;
    }
    auto [relation, target] = split_drel(*drel);
    auto it = by_name.find(target);
    if (it == by_name.end()) {
      throw SsfError(ErrorKind::kDanglingDrel,
                     "drel '" + *drel + "' names no chunk in the sentence", 0, 0, sid);
    }
    tree.edges.push_back({c.index, it->second, std::string(relation)});
  }
  if (roots.empty()) {
    throw SsfError(ErrorKind::kCycleDetected,
                   "every chunk has a parent, so the drels form a cycle", 0, 0, sid);
  }
  if (roots.size() > 1) {
    throw SsfError(ErrorKind::kMultipleRoots,
                   std::to_string(roots.size()) + " chunks have no parent", 0, 0, sid);
  }
  tree.root_chunk_index = roots.front();

  // Every chunk must hang off the root; anything unreachable sits on a cycle.
  std::vector<std::vector<int>> children(sentence.chunks.size() + 1);
  for (const DependencyEdge& e : tree.edges) {
    children[e.parent_chunk_index].push_back(e.child_chunk_index);
  }
  std::vector<bool> seen(sentence.chunks.size() + 1, false);
  std::deque<int> queue{tree.root_chunk_index};
  seen[tree.root_chunk_index] = true;
  size_t reached = 0;
  while (!queue.empty()) {
    const int node = queue.front();
    queue.pop_front();
    ++reached;
    for (int child : children[node]) {
      if (!seen[child]) {
        seen[child] = true;
        queue.push_back(child);
      }
    }
  }
  if (reached != sentence.chunks.size()) {
    throw SsfError(ErrorKind::kCycleDetected,
                   std::to_string(sentence.chunks.size() - reached) +
                       " chunk(s) unreachable from the root",
                   0, 0, sid);
  }
  return tree;
}

const Chunk* main_verb_chunk(const SsfSentence& sentence,
                             std::string_view verb_chunk_tag) {
  for (const Chunk& c : sentence.chunks) {
    if (c.chunk_tag == verb_chunk_tag) return &c;
  }
  return nullptr;
}

const WordNode* chunk_head(const Chunk& chunk) {
  if (chunk.words.empty()) return nullptr;
  if (const std::string* head = chunk.features.attribute("head")) {
    for (const WordNode& w : chunk.words) {
      const std::string* name = w.features.attribute("name");
      if (name && *name == *head) return &w;
    }
  }
  return &chunk.words.back();
}

}  // namespace probekit::ssf
