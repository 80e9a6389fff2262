#pragma once

// `.prbemb` interchange format for layer-wise sentence embeddings.
//
// All integers and floats are little-endian.
//
//   offset  size  field
//   0       8     magic "PRBEMB01" (the trailing "01" is the format version)
//   8       4     n_sentences   u32, >= 1
//   12      2     n_layers      u16, >= 1
//   14      2     dim           u16, >= 1
//   16      2     model name length L, u16
//   18      L     model name, UTF-8
//   18+L    32    SHA-256 of the dataset JSONL the rows were computed from
//   ...           index: n_sentences x (u16 length + UTF-8 example id)
//   ...           data: n_sentences x n_layers x dim float32, row-major
//                 [sentence][layer][dim]
//
// Nothing may follow the data block.
//
// Fixture vectors are drawn from SplitMix64 (see rng.hpp) seeded per example
// with derive_seed(derive_seed(seed, stream), example_id); coordinates are
// standard normals from Box-Muller, generated layer by layer.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <set>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "probekit/digest.hpp"
#include "probekit/labels.hpp"

namespace probekit {

inline constexpr std::string_view kEmbeddingMagic = "PRBEMB01";

enum class EmbeddingErrorKind {
  kBadMagic,
  kTruncatedFile,
  kTrailingBytes,
  kDigestMismatch,
  kNonFiniteValue,
  kInvalidHeader,
  kAlignmentMismatch,
};

const char* embedding_error_name(EmbeddingErrorKind kind);

class EmbeddingError : public std::runtime_error {
 public:
  EmbeddingError(EmbeddingErrorKind kind, const std::string& message)
      : std::runtime_error(std::string(embedding_error_name(kind)) + ": " + message),
        kind_(kind) {}
  EmbeddingErrorKind kind() const { return kind_; }

 private:
  EmbeddingErrorKind kind_;
};

struct EmbeddingHeader {
  uint32_t n_sentences = 0;
  uint16_t n_layers = 0;
  uint16_t dim = 0;
  std::string model_name;
  Sha256 dataset_digest{};

  bool operator==(const EmbeddingHeader&) const = default;
};

class EmbeddingSet {
 public:
  EmbeddingSet() = default;
  EmbeddingSet(EmbeddingHeader header, std::vector<std::string> index,
               std::vector<float> data);

  const EmbeddingHeader& header() const { return header_; }
  const std::vector<std::string>& index() const { return index_; }
  const std::vector<float>& data() const { return data_; }

  size_t n_sentences() const { return header_.n_sentences; }
  size_t n_layers() const { return header_.n_layers; }
  size_t dim() const { return header_.dim; }

  std::span<const float> vector(size_t sentence, size_t layer) const {
    return {data_.data() + (sentence * n_layers() + layer) * dim(), dim()};
  }

  // Row of an example id; nullopt when absent.
  std::optional<size_t> row_of(const std::string& example_id) const;

  // Throws EmbeddingError on any invariant violation.
  void validate() const;

  bool operator==(const EmbeddingSet& other) const;

 private:
  EmbeddingHeader header_;
  std::vector<std::string> index_;
  std::vector<float> data_;
};

std::string encode_embeddings(const EmbeddingSet& set);
// `expected_digest` cross-checks the header against the caller's dataset.
EmbeddingSet decode_embeddings(std::string_view bytes,
                               const std::optional<Sha256>& expected_digest = std::nullopt);

void write_embeddings(const EmbeddingSet& set, const std::filesystem::path& path);
EmbeddingSet read_embeddings(const std::filesystem::path& path,
                             const std::optional<Sha256>& expected_digest = std::nullopt);

// Companion `<file>.meta.json` duplicating the header.
std::string embedding_meta_json(const EmbeddingSet& set, bool include_special_tokens,
                                std::string_view generator);

struct SignalSpec {
  std::set<int> layers;  // 0-based layer indices
  double strength = 0.0;
};

// "layers=7;strength=5" or "layers=3,7;strength=2.5". Throws on bad syntax.
SignalSpec parse_signal_spec(std::string_view text);

// Unit-variance Gaussian vectors per (example, layer). With a signal, the
// listed layers get `strength` added on coordinate `label`, which makes the
// labels linearly decodable there and nowhere else.
EmbeddingSet generate_fixture(const std::vector<ProbingExample>& examples,
                              uint16_t n_layers, uint16_t dim, uint64_t seed,
                              const std::optional<SignalSpec>& signal,
                              std::string model_name = "fixture",
                              const Sha256& dataset_digest = {},
                              std::string_view stream = {});

}  // namespace probekit
