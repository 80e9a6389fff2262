#include "probekit/embedding.hpp"

#include <bit>
#include <charconv>
#include <cmath>
#include <cstring>
#include <unordered_set>

#include "json.hpp"
#include "probekit/rng.hpp"

namespace probekit {

const char* embedding_error_name(EmbeddingErrorKind kind) {
  switch (kind) {
    case EmbeddingErrorKind::kBadMagic: return "BadMagic";
    case EmbeddingErrorKind::kTruncatedFile: return "TruncatedFile";
    case EmbeddingErrorKind::kTrailingBytes: return "TrailingBytes";
    case EmbeddingErrorKind::kDigestMismatch: return "DigestMismatch";
    case EmbeddingErrorKind::kNonFiniteValue: return "NonFiniteValue";
    case EmbeddingErrorKind::kInvalidHeader: return "InvalidHeader";
    case EmbeddingErrorKind::kAlignmentMismatch: return "AlignmentMismatch";
  }
  return "Unknown";
}

EmbeddingSet::EmbeddingSet(EmbeddingHeader header, std::vector<std::string> index,
                           std::vector<float> data)
    : header_(std::move(header)), index_(std::move(index)), data_(std::move(data)) {
  validate();
}

std::optional<size_t> EmbeddingSet::row_of(const std::string& example_id) const {
  for (size_t i = 0; i < index_.size(); ++i) {
    if (index_[i] == example_id) return i;
  }
  return std::nullopt;
}

void EmbeddingSet::validate() const {
  using K = EmbeddingErrorKind;
  if (header_.n_sentences == 0 || header_.n_layers == 0 || header_.dim == 0) {
    throw EmbeddingError(K::kInvalidHeader, "n_sentences, n_layers and dim must be >= 1");
  }
  if (header_.model_name.size() > UINT16_MAX) {
    throw EmbeddingError(K::kInvalidHeader, "model name too long");
  }
  if (index_.size() != header_.n_sentences) {
    throw EmbeddingError(K::kInvalidHeader, "index length differs from n_sentences");
  }
  std::unordered_set<std::string_view> seen;
  for (const std::string& id : index_) {
    if (id.size() > UINT16_MAX) throw EmbeddingError(K::kInvalidHeader, "example id too long");
    if (!seen.insert(id).second) {
      throw EmbeddingError(K::kInvalidHeader, "duplicate example id '" + id + "'");
    }
  }
  const size_t expected = size_t{header_.n_sentences} * header_.n_layers * header_.dim;
  if (data_.size() != expected) {
    throw EmbeddingError(K::kInvalidHeader, "data length " + std::to_string(data_.size()) +
                                                " != " + std::to_string(expected));
  }
  for (size_t i = 0; i < data_.size(); ++i) {
    if (!std::isfinite(data_[i])) {
      const size_t per_sentence = size_t{header_.n_layers} * header_.dim;
      throw EmbeddingError(K::kNonFiniteValue,
                           "sentence " + std::to_string(i / per_sentence) + ", layer " +
                               std::to_string((i % per_sentence) / header_.dim));
    }
  }
}

bool EmbeddingSet::operator==(const EmbeddingSet& other) const {
  if (header_ != other.header_ || index_ != other.index_ ||
      data_.size() != other.data_.size()) {
    return false;
  }
  // Bitwise, so -0.0 and 0.0 differ.
  return std::memcmp(data_.data(), other.data_.data(), data_.size() * sizeof(float)) == 0;
}

namespace {

void put_u16(std::string& out, uint16_t v) {
  out.push_back(static_cast<char>(v & 0xFF));
  out.push_back(static_cast<char>(v >> 8));
}

void put_u32(std::string& out, uint32_t v) {
  for (int k = 0; k < 4; ++k) out.push_back(static_cast<char>((v >> (8 * k)) & 0xFF));
}

class Reader {
 public:
  explicit Reader(std::string_view bytes) : bytes_(bytes) {}

  std::string_view take(size_t n, const char* what) {
    if (bytes_.size() - pos_ < n) {
      throw EmbeddingError(EmbeddingErrorKind::kTruncatedFile,
                           std::string("file ends inside ") + what);
    }
    std::string_view s = bytes_.substr(pos_, n);
    pos_ += n;
    return s;
  }
  uint16_t u16(const char* what) {
    auto s = take(2, what);
    return static_cast<uint16_t>(static_cast<uint8_t>(s[0]) |
                                 (static_cast<uint8_t>(s[1]) << 8));
  }
  uint32_t u32(const char* what) {
    auto s = take(4, what);
    uint32_t v = 0;
    for (int k = 0; k < 4; ++k) v |= uint32_t{static_cast<uint8_t>(s[k])} << (8 * k);
    return v;
  }
  size_t remaining() const { return bytes_.size() - pos_; }

 private:
  std::string_view bytes_;
  size_t pos_ = 0;
};

}  // namespace

std::string encode_embeddings(const EmbeddingSet& set) {
  set.validate();
  const EmbeddingHeader& h = set.header();
  std::string out;
  out.reserve(18 + h.model_name.size() + 32 + set.data().size() * 4 + set.index().size() * 16);
  out += kEmbeddingMagic;
  put_u32(out, h.n_sentences);
  put_u16(out, h.n_layers);
  put_u16(out, h.dim);
  put_u16(out, static_cast<uint16_t>(h.model_name.size()));
  out += h.model_name;
  out.append(reinterpret_cast<const char*>(h.dataset_digest.data()), h.dataset_digest.size());
  for (const std::string& id : set.index()) {
    put_u16(out, static_cast<uint16_t>(id.size()));
    out += id;
  }
  for (float f : set.data()) put_u32(out, std::bit_cast<uint32_t>(f));
  return out;
}

EmbeddingSet decode_embeddings(std::string_view bytes,
                               const std::optional<Sha256>& expected_digest) {
  if (bytes.size() < kEmbeddingMagic.size() ||
      bytes.substr(0, kEmbeddingMagic.size()) != kEmbeddingMagic) {
    if (bytes.size() < kEmbeddingMagic.size() &&
        kEmbeddingMagic.substr(0, bytes.size()) == bytes) {
      throw EmbeddingError(EmbeddingErrorKind::kTruncatedFile, "file ends inside magic");
    }
    throw EmbeddingError(EmbeddingErrorKind::kBadMagic, "not a PRBEMB01 file");
  }
  Reader r(bytes.substr(kEmbeddingMagic.size()));
  EmbeddingHeader h;
  h.n_sentences = r.u32("header");
  h.n_layers = r.u16("header");
  h.dim = r.u16("header");
  const uint16_t name_len = r.u16("header");
  h.model_name = std::string(r.take(name_len, "model name"));
  auto digest = r.take(32, "dataset digest");
  std::memcpy(h.dataset_digest.data(), digest.data(), 32);
  if (h.n_sentences == 0 || h.n_layers == 0 || h.dim == 0) {
    throw EmbeddingError(EmbeddingErrorKind::kInvalidHeader,
                         "n_sentences, n_layers and dim must be >= 1");
  }
  if (expected_digest && *expected_digest != h.dataset_digest) {
    throw EmbeddingError(EmbeddingErrorKind::kDigestMismatch,
                         "file was computed from dataset " + to_hex(h.dataset_digest) +
                             ", expected " + to_hex(*expected_digest));
  }
  std::vector<std::string> index;
  index.reserve(h.n_sentences);
  for (uint32_t i = 0; i < h.n_sentences; ++i) {
    const uint16_t len = r.u16("index");
    index.emplace_back(r.take(len, "index"));
  }
  const size_t count = size_t{h.n_sentences} * h.n_layers * h.dim;
  if (r.remaining() < count * 4) {
    throw EmbeddingError(EmbeddingErrorKind::kTruncatedFile,
                         "data block holds " + std::to_string(r.remaining()) + " of " +
                             std::to_string(count * 4) + " bytes");
  }
  std::vector<float> data(count);
  auto raw = r.take(count * 4, "data");
  for (size_t i = 0; i < count; ++i) {
    uint32_t v = 0;
    for (int k = 0; k < 4; ++k) {
      v |= uint32_t{static_cast<uint8_t>(raw[i * 4 + k])} << (8 * k);
    }
    data[i] = std::bit_cast<float>(v);
  }
  if (r.remaining() != 0) {
    throw EmbeddingError(EmbeddingErrorKind::kTrailingBytes,
                         std::to_string(r.remaining()) + " bytes after the data block");
  }
  return EmbeddingSet(std::move(h), std::move(index), std::move(data));
}

void write_embeddings(const EmbeddingSet& set, const std::filesystem::path& path) {
  write_file(path, encode_embeddings(set));
}

EmbeddingSet read_embeddings(const std::filesystem::path& path,
                             const std::optional<Sha256>& expected_digest) {
  return decode_embeddings(read_file(path), expected_digest);
}

std::string embedding_meta_json(const EmbeddingSet& set, bool include_special_tokens,
                                std::string_view generator) {
  nlohmann::ordered_json j;
  const EmbeddingHeader& h = set.header();
  j["format"] = std::string(kEmbeddingMagic);
  j["n_sentences"] = h.n_sentences;
  j["n_layers"] = h.n_layers;
  j["dim"] = h.dim;
  j["model_name"] = h.model_name;
  j["dataset_digest"] = to_hex(h.dataset_digest);
  j["dtype"] = "float32-le";
  j["layout"] = "[sentence][layer][dim]";
  j["pooling"] = "mean";
  j["include_special_tokens"] = include_special_tokens;
  j["generator"] = std::string(generator);
  return j.dump(2) + "\n";
}

SignalSpec parse_signal_spec(std::string_view text) {
  SignalSpec spec;
  bool have_layers = false, have_strength = false;
  auto bad = [&](const std::string& why) {
    return std::invalid_argument("signal spec '" + std::string(text) + "': " + why);
  };
  size_t start = 0;
  while (start <= text.size()) {
    size_t end = text.find(';', start);
    if (end == std::string_view::npos) end = text.size();
    std::string_view part = text.substr(start, end - start);
    start = end + 1;
    if (part.empty()) {
      if (end == text.size()) break;
      continue;
    }
    const size_t eq = part.find('=');
    if (eq == std::string_view::npos) throw bad("expected key=value");
    std::string_view key = part.substr(0, eq);
    std::string_view value = part.substr(eq + 1);
    if (key == "layers") {
      size_t s = 0;
      while (s <= value.size()) {
        size_t e = value.find(',', s);
        if (e == std::string_view::npos) e = value.size();
        int layer = -1;
        auto [p, ec] = std::from_chars(value.data() + s, value.data() + e, layer);
        if (ec != std::errc() || p != value.data() + e || layer < 0) {
          throw bad("bad layer list");
        }
        spec.layers.insert(layer);
        s = e + 1;
        if (e == value.size()) break;
      }
      have_layers = true;
    } else if (key == "strength") {
      try {
        size_t used = 0;
        spec.strength = std::stod(std::string(value), &used);
        if (used != value.size()) throw bad("bad strength");
      } catch (const std::logic_error&) {
        throw bad("bad strength");
      }
      have_strength = true;
    } else {
      throw bad("unknown key '" + std::string(key) + "'");
    }
  }
  if (!have_layers || !have_strength) throw bad("needs both layers= and strength=");
  return spec;
}

EmbeddingSet generate_fixture(const std::vector<ProbingExample>& examples,
                              uint16_t n_layers, uint16_t dim, uint64_t seed,
                              const std::optional<SignalSpec>& signal,
                              std::string model_name, const Sha256& dataset_digest,
                              std::string_view stream) {
  if (examples.empty()) {
    throw std::invalid_argument("cannot generate embeddings for an empty dataset");
  }
  if (signal) {
    for (const ProbingExample& ex : examples) {
      if (class_count(ex.task) > dim) {
        throw std::invalid_argument("dim must be at least the class count to plant a signal");
      }
    }
    for (int layer : signal->layers) {
      if (layer >= n_layers) throw std::invalid_argument("signal layer out of range");
    }
  }
  EmbeddingHeader h;
  h.n_sentences = static_cast<uint32_t>(examples.size());
  h.n_layers = n_layers;
  h.dim = dim;
  h.model_name = std::move(model_name);
  h.dataset_digest = dataset_digest;

  std::vector<std::string> index;
  index.reserve(examples.size());
  std::vector<float> data(examples.size() * n_layers * dim);
  const uint64_t stream_seed = derive_seed(seed, stream);
  for (size_t i = 0; i < examples.size(); ++i) {
    const ProbingExample& ex = examples[i];
    index.push_back(ex.example_id);
    Rng rng(derive_seed(stream_seed, ex.example_id));
    for (uint16_t layer = 0; layer < n_layers; ++layer) {
      float* v = data.data() + (i * n_layers + layer) * dim;
      for (uint16_t d = 0; d < dim; ++d) v[d] = static_cast<float>(rng.normal());
      if (signal && signal->layers.contains(layer)) {
        v[ex.label] += static_cast<float>(signal->strength);
      }
    }
  }
  return EmbeddingSet(std::move(h), std::move(index), std::move(data));
}

}  // namespace probekit
