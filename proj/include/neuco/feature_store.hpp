#pragma once

// SSL feature sequences, matching pools and exact cosine kNN replacement.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace neuco::features {

inline constexpr float kSslFramePeriodMs = 20.0f;

/// Row-major float matrix. Rows are frames.
struct Matrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<float> data;

  Matrix() = default;
  Matrix(std::size_t r, std::size_t c) : rows(r), cols(c), data(r * c, 0.0f) {}

  std::span<float> row(std::size_t i) { return {data.data() + i * cols, cols}; }
  std::span<const float> row(std::size_t i) const {
    return {data.data() + i * cols, cols};
  }
  bool operator==(const Matrix&) const = default;
};

/// Per-frame paired features: keys drive the similarity search, values are
/// what gets averaged and handed to synthesis.
struct SslFrameSequence {
  Matrix keys;
  Matrix values;
  float frame_period_ms = kSslFramePeriodMs;
  std::string utterance_id;
  std::string speaker_id;

  std::size_t n_frames() const { return keys.rows; }
  std::size_t key_dim() const { return keys.cols; }
  std::size_t value_dim() const { return values.cols; }
  bool operator==(const SslFrameSequence&) const = default;
};

/// Throws ValidationError if any SslFrameSequence invariant is violated.
void validate(const SslFrameSequence& seq);

struct FrameOrigin {
  std::string utterance_id;
  std::uint32_t frame_index = 0;
  bool operator==(const FrameOrigin&) const = default;
};

/// Immutable once built. Safe for concurrent knn_match calls.
class MatchingPool {
 public:
  std::size_t size() const { return keys_.rows; }
  std::size_t key_dim() const { return keys_.cols; }
  std::size_t value_dim() const { return values_.cols; }
  const std::string& speaker_id() const { return speaker_id_; }
  const Matrix& keys() const { return keys_; }
  const Matrix& values() const { return values_; }
  const std::vector<FrameOrigin>& origins() const { return origins_; }
  /// L2 norm of every key row, accumulated in double.
  const std::vector<double>& key_norms() const { return key_norms_; }

  /// First `n` frames of this pool as a new pool.
  MatchingPool prefix(std::size_t n) const;

 private:
  friend MatchingPool build_pool(std::span<const SslFrameSequence>);
  friend MatchingPool make_pool(Matrix, Matrix, std::vector<FrameOrigin>, std::string);

  Matrix keys_;
  Matrix values_;
  std::vector<FrameOrigin> origins_;
  std::vector<double> key_norms_;
  std::string speaker_id_;
};

/// Concatenates frames of every sequence in input order.
MatchingPool build_pool(std::span<const SslFrameSequence> sequences);

/// Assembles a pool from already-concatenated frames (e.g. a pool file).
MatchingPool make_pool(Matrix keys, Matrix values, std::vector<FrameOrigin> origins,
                       std::string speaker_id);

struct Neighbor {
  std::size_t pool_index = 0;
  double similarity = 0.0;
  bool operator==(const Neighbor&) const = default;
};

struct MatchResult {
  Matrix matched_values;
  /// Per query frame, k neighbors sorted by similarity (descending), ties by
  /// ascending pool index.
  std::vector<std::vector<Neighbor>> neighbors;
  bool operator==(const MatchResult&) const = default;
};

enum class Metric { kCosine };

struct KnnOptions {
  std::size_t k = 4;
  Metric metric = Metric::kCosine;
  /// Worker threads for the query loop; 0 picks hardware concurrency.
  /// Results do not depend on this value.
  unsigned threads = 1;
};

double cosine_similarity(std::span<const float> a, double norm_a,
                         std::span<const float> b, double norm_b);
double l2_norm(std::span<const float> v);

MatchResult knn_match(const SslFrameSequence& query, const MatchingPool& pool,
                      const KnnOptions& options);

/// Replaces the values of `target` with kNN averages over a same-speaker pool
/// that must not contain any of the target utterance's own frames. Keys are
/// left untouched.
SslFrameSequence prematch_training_features(const SslFrameSequence& target,
                                            const MatchingPool& same_speaker_pool,
                                            std::size_t k);

SslFrameSequence load_feature_file(const std::filesystem::path& path);
void save_feature_file(const SslFrameSequence& seq, const std::filesystem::path& path);

/// In-memory NCSF codec used by the file functions.
std::string encode_ncsf(const SslFrameSequence& seq);
SslFrameSequence decode_ncsf(std::string_view bytes);

/// Size of the fixed part of an NCSF header plus both id strings.
std::size_t ncsf_header_size(const SslFrameSequence& seq);

}  // namespace neuco::features
