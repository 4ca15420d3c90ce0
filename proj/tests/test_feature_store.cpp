#include <doctest.h>

#include <cmath>
#include <cstring>
#include <fstream>

#include "fixtures.hpp"
#include "knn_oracle.hpp"
#include "neuco/binary_io.hpp"
#include "neuco/error.hpp"
#include "neuco/feature_store.hpp"

using namespace neuco;
using namespace neuco::features;

namespace {

// Hand-assembled NCSF bytes, independent of encode_ncsf.
std::string handmade_ncsf(std::uint32_t n, std::uint32_t kd, std::uint32_t vd,
                          const std::vector<float>& payload) {
  io::ByteWriter w;
  w.bytes("NCSF");
  w.u16(1);
  w.u16(0);
  w.u32(n);
  w.u32(kd);
  w.u32(vd);
  w.f32(20.0f);
  w.short_string("u1");
  w.short_string("s1");
  w.f32s(payload);
  return w.data();
}

}  // namespace

TEST_CASE("decode a hand-written two-frame file") {
  std::vector<float> payload(12);
  for (int i = 0; i < 12; ++i) payload[i] = 0.5f * i;
  const auto seq = decode_ncsf(handmade_ncsf(2, 3, 3, payload));
  CHECK(seq.n_frames() == 2);
  CHECK(seq.keys.row(1)[2] == 2.5f);
  CHECK(seq.values.row(0)[0] == 3.0f);
  CHECK(seq.values.row(1)[2] == 5.5f);
  CHECK(seq.utterance_id == "u1");
  CHECK(seq.speaker_id == "s1");
}

TEST_CASE("decoder rejects damaged files") {
  const auto good = handmade_ncsf(2, 3, 3, std::vector<float>(12, 1.0f));

  auto bad_magic = good;
  bad_magic[0] = 'X';
  CHECK_THROWS_AS(decode_ncsf(bad_magic), FormatError);

  auto bad_version = good;
  bad_version[4] = 2;
  CHECK_THROWS_AS(decode_ncsf(bad_version), FormatError);

  CHECK_THROWS_AS(decode_ncsf(good.substr(0, good.size() - 1)), CorruptionError);
  CHECK_THROWS_AS(decode_ncsf(good + "x"), CorruptionError);
  CHECK_THROWS_AS(decode_ncsf(good.substr(0, 10)), CorruptionError);
}

TEST_CASE("file size for one frame is header plus payload") {
  fixtures::TempDir dir("ncsf");
  const auto seq = fixtures::random_sequence(1, 7, 5, 3, "utt-ä", "spk");
  save_feature_file(seq, dir / "one.ncsf");
  CHECK(std::filesystem::file_size(dir / "one.ncsf") == ncsf_header_size(seq) + (7 + 5) * 4);
  CHECK(ncsf_header_size(seq) == 4 + 2 + 2 + 12 + 4 + 2 + seq.utterance_id.size() + 2 + 3);
  CHECK(load_feature_file(dir / "one.ncsf") == seq);
}

TEST_CASE("randomized save/load round trips are bit exact") {
  fixtures::TempDir dir("ncsf-rt");
  std::mt19937_64 rng(11);
  for (int i = 0; i < 25; ++i) {
    auto seq = fixtures::random_sequence(1 + rng() % 40, 1 + rng() % 16, 1 + rng() % 16, rng(),
                                         "u" + std::to_string(i), "s");
    seq.values.data[0] = -0.0f;
    save_feature_file(seq, dir / "x.ncsf");
    const auto back = load_feature_file(dir / "x.ncsf");
    REQUIRE(back.values.data.size() == seq.values.data.size());
    CHECK(std::memcmp(back.values.data.data(), seq.values.data.data(), seq.values.data.size() * 4) == 0);
    CHECK(back == seq);
  }
}

TEST_CASE("save to an unwritable path is an I/O error") {
  const auto seq = fixtures::random_sequence(2, 3, 3, 1);
  CHECK_THROWS_AS(save_feature_file(seq, "/nonexistent-dir/x/y.ncsf"), IoError);
  CHECK_THROWS_AS(load_feature_file("/nonexistent-dir/none.ncsf"), IoError);
}

TEST_CASE("validation") {
  auto seq = fixtures::random_sequence(3, 4, 4, 1);
  CHECK_NOTHROW(validate(seq));
  seq.frame_period_ms = 10.0f;
  CHECK_THROWS_AS(validate(seq), ValidationError);
  auto mismatched = fixtures::random_sequence(3, 4, 4, 1);
  mismatched.values = Matrix(2, 4);
  CHECK_THROWS_AS(validate(mismatched), ValidationError);
}

TEST_CASE("build_pool concatenates in input order") {
  std::vector<SslFrameSequence> seqs{fixtures::random_sequence(10, 6, 3, 1, "a"),
                                     fixtures::random_sequence(15, 6, 3, 2, "b")};
  const auto pool = build_pool(seqs);
  CHECK(pool.size() == 25);
  CHECK(pool.origins()[10] == FrameOrigin{"b", 0});
  CHECK(pool.origins()[24] == FrameOrigin{"b", 14});
  for (std::size_t d = 0; d < 6; ++d) CHECK(pool.keys().row(12)[d] == seqs[1].keys.row(2)[d]);

  const auto single = build_pool(std::span(seqs.data(), 1));
  CHECK(single.keys() == seqs[0].keys);
  CHECK(single.values() == seqs[0].values);

  std::vector<SslFrameSequence> mixed{fixtures::random_sequence(2, 1024, 3, 1),
                                      fixtures::random_sequence(2, 768, 3, 2)};
  CHECK_THROWS_AS(build_pool(mixed), ValidationError);
}

TEST_CASE("single-frame pool answers every query with its value") {
  const auto ref = fixtures::random_sequence(1, 8, 4, 5);
  const auto pool = build_pool(std::span(&ref, 1));
  const auto q = fixtures::random_sequence(6, 8, 4, 6);
  const auto r = knn_match(q, pool, {.k = 1});
  for (std::size_t i = 0; i < 6; ++i) CHECK(r.matched_values.row(i)[2] == ref.values.row(0)[2]);
}

TEST_CASE("exact key match picks that frame") {
  const auto ref = fixtures::random_sequence(50, 8, 4, 5);
  const auto pool = build_pool(std::span(&ref, 1));
  SslFrameSequence q;
  q.keys = Matrix(1, 8);
  std::copy(ref.keys.row(17).begin(), ref.keys.row(17).end(), q.keys.row(0).begin());
  q.values = Matrix(1, 4);
  const auto r = knn_match(q, pool, {.k = 1});
  CHECK(r.neighbors[0][0].pool_index == 17);
  CHECK(r.neighbors[0][0].similarity == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(r.matched_values.row(0)[3] == ref.values.row(17)[3]);
}

TEST_CASE("ties resolve to the lower pool index") {
  SslFrameSequence ref;
  ref.keys = Matrix(5, 2);
  ref.values = Matrix(5, 1);
  for (std::size_t i = 0; i < 5; ++i) {
    ref.keys.row(i)[0] = 1.0f;
    ref.keys.row(i)[1] = 2.0f;
    ref.values.row(i)[0] = static_cast<float>(i);
  }
  const auto pool = build_pool(std::span(&ref, 1));
  const auto r = knn_match(ref, pool, {.k = 2});
  for (const auto& nbs : r.neighbors) {
    CHECK(nbs[0].pool_index == 0);
    CHECK(nbs[1].pool_index == 1);
  }
  CHECK(r.matched_values.row(3)[0] == 0.5f);
}

TEST_CASE("knn_match equals the exhaustive oracle") {
  for (std::size_t k : {1u, 4u, 8u}) {
    const auto ref = fixtures::random_sequence(1000, 32, 8, 100 + k);
    const auto q = fixtures::random_sequence(40, 32, 8, 200 + k);
    const auto pool = build_pool(std::span(&ref, 1));
    const auto got = knn_match(q, pool, {.k = k});
    const auto want = fixtures::brute_force_knn(q, ref.keys, ref.values, k);
    for (std::size_t i = 0; i < q.n_frames(); ++i) {
      for (std::size_t j = 0; j < k; ++j) {
        CHECK(got.neighbors[i][j].pool_index == want.neighbors[i][j].pool_index);
      }
    }
    for (std::size_t i = 0; i < got.matched_values.data.size(); ++i) {
      CHECK(got.matched_values.data[i] ==
            doctest::Approx(want.matched_values.data[i]).epsilon(1e-6));
    }
  }
}

TEST_CASE("thread count does not change results") {
  const auto ref = fixtures::random_sequence(500, 16, 4, 1);
  const auto q = fixtures::random_sequence(97, 16, 4, 2);
  const auto pool = build_pool(std::span(&ref, 1));
  const auto one = knn_match(q, pool, {.k = 4, .threads = 1});
  const auto four = knn_match(q, pool, {.k = 4, .threads = 4});
  CHECK(one == four);
}

TEST_CASE("knn_match argument checks") {
  const auto ref = fixtures::random_sequence(3, 8, 4, 1);
  const auto pool = build_pool(std::span(&ref, 1));
  CHECK_THROWS_AS(knn_match(fixtures::random_sequence(2, 8, 4, 2), pool, {.k = 4}),
                  ValidationError);
  CHECK_THROWS_AS(knn_match(fixtures::random_sequence(2, 8, 4, 2), pool, {.k = 0}),
                  ValidationError);
  CHECK_THROWS_AS(knn_match(fixtures::random_sequence(2, 7, 4, 2), pool, {.k = 1}),
                  ValidationError);
}

TEST_CASE("matched values are a convex combination of pool values") {
  const auto ref = fixtures::random_sequence(200, 8, 3, 9);
  const auto pool = build_pool(std::span(&ref, 1));
  const auto r = knn_match(fixtures::random_sequence(30, 8, 3, 10), pool, {.k = 4});
  for (std::size_t d = 0; d < 3; ++d) {
    float lo = 1e9f, hi = -1e9f;
    for (std::size_t j = 0; j < ref.n_frames(); ++j) {
      lo = std::min(lo, ref.values.row(j)[d]);
      hi = std::max(hi, ref.values.row(j)[d]);
    }
    for (std::size_t i = 0; i < 30; ++i) {
      CHECK(r.matched_values.row(i)[d] >= lo - 1e-6f);
      CHECK(r.matched_values.row(i)[d] <= hi + 1e-6f);
    }
  }
}

TEST_CASE("prematch against a single foreign frame") {
  const auto target = fixtures::random_sequence(12, 8, 4, 1, "t", "spk");
  const auto other = fixtures::random_sequence(1, 8, 4, 2, "o", "spk");
  const auto out = prematch_training_features(target, build_pool(std::span(&other, 1)), 1);
  CHECK(out.keys == target.keys);
  for (std::size_t i = 0; i < 12; ++i) CHECK(out.values.row(i)[1] == other.values.row(0)[1]);
}

TEST_CASE("prematch with k equal to the pool size gives the pool mean") {
  const auto target = fixtures::random_sequence(5, 8, 4, 1, "t", "spk");
  const auto other = fixtures::random_sequence(9, 8, 4, 2, "o", "spk");
  const auto out = prematch_training_features(target, build_pool(std::span(&other, 1)), 9);
  for (std::size_t d = 0; d < 4; ++d) {
    double mean = 0;
    for (std::size_t j = 0; j < 9; ++j) mean += other.values.row(j)[d];
    mean /= 9;
    for (std::size_t i = 0; i < 5; ++i) CHECK(out.values.row(i)[d] == doctest::Approx(mean).epsilon(1e-6));
  }
}

TEST_CASE("prematch equals the oracle restricted to other utterances") {
  std::vector<SslFrameSequence> speaker;
  for (int u = 0; u < 4; ++u) {
    speaker.push_back(fixtures::random_sequence(60, 16, 4, 50 + u, "u" + std::to_string(u), "spk"));
  }
  const auto target = speaker[2];
  std::vector<SslFrameSequence> others{speaker[0], speaker[1], speaker[3]};
  const auto pool = build_pool(others);
  const auto got = prematch_training_features(target, pool, 4);
  const auto want = fixtures::brute_force_knn(target, pool.keys(), pool.values(), 4);
  for (std::size_t i = 0; i < got.values.data.size(); ++i) {
    CHECK(got.values.data[i] == doctest::Approx(want.matched_values.data[i]).epsilon(1e-6));
  }
}

TEST_CASE("prematch refuses leaks and foreign speakers") {
  std::vector<SslFrameSequence> seqs{fixtures::random_sequence(20, 8, 4, 1, "t", "spk"),
                                     fixtures::random_sequence(20, 8, 4, 2, "o", "spk")};
  CHECK_THROWS_AS(prematch_training_features(seqs[0], build_pool(seqs), 4), ValidationError);

  const auto foreign = fixtures::random_sequence(20, 8, 4, 3, "f", "other");
  CHECK_THROWS_AS(prematch_training_features(seqs[0], build_pool(std::span(&foreign, 1)), 4),
                  ValidationError);
}
