#include "neuco/feature_store.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <thread>
#include <unordered_set>

#include "neuco/binary_io.hpp"
#include "neuco/error.hpp"

namespace neuco::features {

namespace {

constexpr std::string_view kMagic = "NCSF";
constexpr std::uint16_t kVersion = 1;

bool is_zero_row(std::span<const float> row) {
  return std::all_of(row.begin(), row.end(), [](float v) { return v == 0.0f; });
}

// Orders neighbors best-first: higher similarity, then lower pool index.
bool better(const Neighbor& a, const Neighbor& b) {
  if (a.similarity != b.similarity) return a.similarity > b.similarity;
  return a.pool_index < b.pool_index;
}

void match_range(const SslFrameSequence& query, const MatchingPool& pool,
                 std::size_t k, std::size_t begin, std::size_t end,
                 MatchResult& out) {
  const auto& pool_keys = pool.keys();
  const auto& norms = pool.key_norms();
  std::vector<Neighbor> best;
  best.reserve(k + 1);
  std::vector<double> acc(pool.value_dim());
  for (std::size_t q = begin; q < end; ++q) {
    auto qkey = query.keys.row(q);
    const double qnorm = l2_norm(qkey);
    best.clear();
    for (std::size_t j = 0; j < pool.size(); ++j) {
      Neighbor cand{j, cosine_similarity(qkey, qnorm, pool_keys.row(j), norms[j])};
      if (best.size() == k && !better(cand, best.back())) continue;
      auto pos = std::upper_bound(best.begin(), best.end(), cand, better);
      best.insert(pos, cand);
      if (best.size() > k) best.pop_back();
    }
    std::fill(acc.begin(), acc.end(), 0.0);
    for (const auto& nb : best) {
      auto v = pool.values().row(nb.pool_index);
      for (std::size_t d = 0; d < acc.size(); ++d) acc[d] += v[d];
    }
    auto dst = out.matched_values.row(q);
    for (std::size_t d = 0; d < acc.size(); ++d) {
      dst[d] = static_cast<float>(acc[d] / static_cast<double>(best.size()));
    }
    out.neighbors[q] = best;
  }
}

}  // namespace

void validate(const SslFrameSequence& seq) {
  if (seq.keys.rows != seq.values.rows) {
    throw ValidationError("keys and values frame counts differ");
  }
  if (seq.keys.rows == 0) throw ValidationError("sequence has no frames");
  if (seq.keys.cols == 0 || seq.values.cols == 0) {
    throw ValidationError("key_dim and value_dim must be positive");
  }
  if (seq.frame_period_ms != kSslFramePeriodMs) {
    throw ValidationError("frame period must be 20 ms, got " +
                          std::to_string(seq.frame_period_ms));
  }
  if (seq.keys.data.size() != seq.keys.rows * seq.keys.cols ||
      seq.values.data.size() != seq.values.rows * seq.values.cols) {
    throw ValidationError("matrix storage does not match its shape");
  }
  for (std::size_t i = 0; i < seq.keys.rows; ++i) {
    if (is_zero_row(seq.keys.row(i))) {
      throw ValidationError("key row " + std::to_string(i) + " is all zeros");
    }
  }
}

double l2_norm(std::span<const float> v) {
  double s = 0.0;
  for (float x : v) s += static_cast<double>(x) * x;
  return std::sqrt(s);
}

double cosine_similarity(std::span<const float> a, double norm_a,
                         std::span<const float> b, double norm_b) {
  double dot = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) dot += static_cast<double>(a[i]) * b[i];
  return dot / (norm_a * norm_b);
}

MatchingPool make_pool(Matrix keys, Matrix values, std::vector<FrameOrigin> origins,
                       std::string speaker_id) {
  if (keys.rows == 0) throw ValidationError("pool must contain at least one frame");
  if (keys.rows != values.rows || origins.size() != keys.rows) {
    throw ValidationError("pool keys, values and origins disagree in length");
  }
  MatchingPool pool;
  pool.key_norms_.resize(keys.rows);
  for (std::size_t i = 0; i < keys.rows; ++i) {
    pool.key_norms_[i] = l2_norm(keys.row(i));
    if (pool.key_norms_[i] == 0.0) {
      throw ValidationError("pool key row " + std::to_string(i) + " is all zeros");
    }
  }
  pool.keys_ = std::move(keys);
  pool.values_ = std::move(values);
  pool.origins_ = std::move(origins);
  pool.speaker_id_ = std::move(speaker_id);
  return pool;
}

MatchingPool build_pool(std::span<const SslFrameSequence> sequences) {
  if (sequences.empty()) throw ValidationError("build_pool: no input sequences");
  const std::size_t kd = sequences.front().key_dim();
  const std::size_t vd = sequences.front().value_dim();
  std::size_t total = 0;
  for (const auto& s : sequences) {
    if (s.key_dim() != kd || s.value_dim() != vd) {
      std::ostringstream msg;
      msg << "build_pool: dimension mismatch in '" << s.utterance_id << "' (key_dim "
          << s.key_dim() << " vs " << kd << ", value_dim " << s.value_dim() << " vs "
          << vd << ")";
      throw ValidationError(msg.str());
    }
    total += s.n_frames();
  }
  if (total == 0) throw ValidationError("build_pool: combined frame count is zero");

  Matrix keys(total, kd);
  Matrix values(total, vd);
  std::vector<FrameOrigin> origins;
  origins.reserve(total);
  std::size_t row = 0;
  for (const auto& s : sequences) {
    std::copy(s.keys.data.begin(), s.keys.data.end(), keys.data.begin() + row * kd);
    std::copy(s.values.data.begin(), s.values.data.end(),
              values.data.begin() + row * vd);
    for (std::size_t i = 0; i < s.n_frames(); ++i) {
      origins.push_back({s.utterance_id, static_cast<std::uint32_t>(i)});
    }
    row += s.n_frames();
  }
  return make_pool(std::move(keys), std::move(values), std::move(origins),
                   sequences.front().speaker_id);
}

MatchingPool MatchingPool::prefix(std::size_t n) const {
  if (n == 0 || n > size()) {
    throw ValidationError("pool prefix of " + std::to_string(n) +
                          " frames requested from a pool of " + std::to_string(size()));
  }
  Matrix k(n, key_dim());
  Matrix v(n, value_dim());
  std::copy_n(keys_.data.begin(), n * key_dim(), k.data.begin());
  std::copy_n(values_.data.begin(), n * value_dim(), v.data.begin());
  std::vector<FrameOrigin> o(origins_.begin(), origins_.begin() + static_cast<long>(n));
  return make_pool(std::move(k), std::move(v), std::move(o), speaker_id_);
}

MatchResult knn_match(const SslFrameSequence& query, const MatchingPool& pool,
                      const KnnOptions& options) {
  const std::size_t k = options.k;
  if (k < 1) throw ValidationError("k must be at least 1");
  if (k > pool.size()) {
    throw ValidationError("k=" + std::to_string(k) + " exceeds pool size " +
                          std::to_string(pool.size()));
  }
  if (query.key_dim() != pool.key_dim()) {
    throw ValidationError("query key_dim " + std::to_string(query.key_dim()) +
                          " != pool key_dim " + std::to_string(pool.key_dim()));
  }
  for (std::size_t i = 0; i < query.n_frames(); ++i) {
    if (is_zero_row(query.keys.row(i))) {
      throw ValidationError("query key row " + std::to_string(i) + " is all zeros");
    }
  }

  MatchResult out;
  out.matched_values = Matrix(query.n_frames(), pool.value_dim());
  out.neighbors.resize(query.n_frames());

  unsigned threads = options.threads == 0 ? std::thread::hardware_concurrency()
                                          : options.threads;
  threads = std::max(1u, std::min<unsigned>(threads, query.n_frames()));
  if (threads == 1) {
    match_range(query, pool, k, 0, query.n_frames(), out);
    return out;
  }
  // Each worker owns a disjoint block of query rows.
  std::vector<std::jthread> workers;
  const std::size_t block = (query.n_frames() + threads - 1) / threads;
  for (unsigned t = 0; t < threads; ++t) {
    const std::size_t b = t * block;
    const std::size_t e = std::min(query.n_frames(), b + block);
    if (b >= e) break;
    workers.emplace_back([&, b, e] { match_range(query, pool, k, b, e, out); });
  }
  return out;
}

SslFrameSequence prematch_training_features(const SslFrameSequence& target,
                                            const MatchingPool& same_speaker_pool,
                                            std::size_t k) {
  for (const auto& o : same_speaker_pool.origins()) {
    if (o.utterance_id == target.utterance_id) {
      throw ValidationError("pre-match pool contains frames of the target utterance '" +
                            target.utterance_id + "'");
    }
  }
  if (!same_speaker_pool.speaker_id().empty() && !target.speaker_id.empty() &&
      same_speaker_pool.speaker_id() != target.speaker_id) {
    throw ValidationError("pre-match pool speaker '" + same_speaker_pool.speaker_id() +
                          "' differs from target speaker '" + target.speaker_id + "'");
  }
  auto match = knn_match(target, same_speaker_pool, {.k = k});
  SslFrameSequence out = target;
  out.values = std::move(match.matched_values);
  return out;
}

std::size_t ncsf_header_size(const SslFrameSequence& seq) {
  return 4 + 2 + 2 + 4 + 4 + 4 + 4 + 2 + seq.utterance_id.size() + 2 +
         seq.speaker_id.size();
}

std::string encode_ncsf(const SslFrameSequence& seq) {
  validate(seq);
  io::ByteWriter w;
  w.bytes(kMagic);
  w.u16(kVersion);
  w.u16(0);
  w.u32(static_cast<std::uint32_t>(seq.n_frames()));
  w.u32(static_cast<std::uint32_t>(seq.key_dim()));
  w.u32(static_cast<std::uint32_t>(seq.value_dim()));
  w.f32(seq.frame_period_ms);
  w.short_string(seq.utterance_id);
  w.short_string(seq.speaker_id);
  w.f32s(seq.keys.data);
  w.f32s(seq.values.data);
  return w.data();
}

SslFrameSequence decode_ncsf(std::string_view bytes) {
  io::ByteReader r(bytes);
  if (bytes.size() < 4 || r.bytes(4, "magic") != kMagic) {
    throw FormatError("bad NCSF magic");
  }
  const auto version = r.u16("version");
  if (version != kVersion) {
    throw FormatError("unsupported NCSF version " + std::to_string(version));
  }
  const auto flags = r.u16("flags");
  if (flags != 0) throw FormatError("unsupported NCSF flags " + std::to_string(flags));
  const std::size_t n = r.u32("n_frames");
  const std::size_t kd = r.u32("key_dim");
  const std::size_t vd = r.u32("value_dim");
  SslFrameSequence seq;
  seq.frame_period_ms = r.f32("frame_period_ms");
  seq.utterance_id = r.short_string("utterance_id");
  seq.speaker_id = r.short_string("speaker_id");
  if (n == 0 || kd == 0 || vd == 0) {
    throw ValidationError("NCSF header has a zero dimension");
  }
  const std::size_t expected = n * (kd + vd) * sizeof(float);
  if (r.remaining() < expected) {
    throw CorruptionError("truncated NCSF payload: expected " + std::to_string(expected) +
                          " bytes, found " + std::to_string(r.remaining()));
  }
  if (r.remaining() > expected) {
    throw CorruptionError("trailing bytes after NCSF payload");
  }
  seq.keys = Matrix(n, kd);
  seq.values = Matrix(n, vd);
  r.f32s(seq.keys.data, "keys");
  r.f32s(seq.values.data, "values");
  validate(seq);
  return seq;
}

SslFrameSequence load_feature_file(const std::filesystem::path& path) {
  try {
    return decode_ncsf(io::read_file(path));
  } catch (const ValidationError& e) {
    throw ValidationError(path.string() + ": " + e.what());
  } catch (const FormatError& e) {
    throw FormatError(path.string() + ": " + e.what());
  } catch (const CorruptionError& e) {
    throw CorruptionError(path.string() + ": " + e.what());
  }
}

void save_feature_file(const SslFrameSequence& seq, const std::filesystem::path& path) {
  io::write_file_atomic(path, encode_ncsf(seq));
}

}  // namespace neuco::features
