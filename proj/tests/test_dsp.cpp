#include <doctest.h>

#include <cmath>
#include <fstream>
#include <random>

#include "fixtures.hpp"
#include "neuco/audio.hpp"
#include "neuco/binary_io.hpp"
#include "neuco/dsp.hpp"
#include "neuco/error.hpp"

using namespace neuco;
using namespace neuco::dsp;

namespace {

std::vector<double> interior(const std::vector<double>& v, std::size_t margin) {
  return {v.begin() + margin, v.end() - margin};
}

}  // namespace

TEST_CASE("hop sizes") {
  CHECK(hop_samples(24000, 10.0) == 240);
  CHECK(hop_samples(16000, 10.0) == 160);
  CHECK_THROWS_AS(hop_samples(22050, 10.0 / 3), ValidationError);
}

TEST_CASE("median pitch ensemble") {
  std::vector<std::vector<double>> three{{100}, {102}, {250}};
  CHECK(median_pitch_ensemble(three)[0] == 102);
  std::vector<std::vector<double>> unvoiced{{0}, {0}, {220}};
  CHECK(median_pitch_ensemble(unvoiced)[0] == 0);
  std::vector<std::vector<double>> one{{0, 110, 220.5}};
  CHECK(median_pitch_ensemble(one) == one[0]);
  std::vector<std::vector<double>> two_voiced{{0}, {200}, {220}};
  CHECK(median_pitch_ensemble(two_voiced)[0] == 210);
  std::vector<std::vector<double>> ragged{{1, 2}, {1}};
  CHECK_THROWS_AS(median_pitch_ensemble(ragged), ValidationError);
}

TEST_CASE("ensemble output is bounded by its inputs") {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> f(80, 800);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<std::vector<double>> t(3, std::vector<double>(20));
    for (auto& track : t) {
      for (auto& v : track) v = rng() % 4 == 0 ? 0.0 : f(rng);
    }
    const auto m = median_pitch_ensemble(t);
    for (std::size_t i = 0; i < 20; ++i) {
      if (m[i] == 0) continue;
      double lo = 1e9, hi = 0;
      for (const auto& track : t) {
        if (track[i] > 0) lo = std::min(lo, track[i]), hi = std::max(hi, track[i]);
      }
      CHECK(m[i] >= lo);
      CHECK(m[i] <= hi);
    }
  }
}

TEST_CASE("pitch of a pure 220 Hz tone") {
  const auto tone = fixtures::sine(2.0, 24000, 220.0, 0.5);
  const auto f0 = detect_pitch(tone, 24000);
  CHECK(f0.size() == 200);
  const auto mid = interior(f0, 5);
  std::size_t close = 0;
  for (double v : mid) close += std::abs(v - 220.0) <= 3.0;
  CHECK(static_cast<double>(close) / mid.size() >= 0.95);
}

TEST_CASE("pitch follows different tones") {
  for (double hz : {110.0, 330.0, 587.0}) {
    const auto f0 = detect_pitch(fixtures::sine(1.0, 24000, hz, 0.3), 24000);
    CHECK(f0[50] == doctest::Approx(hz).epsilon(0.01));
  }
}

TEST_CASE("silence and noise are unvoiced") {
  std::vector<float> silence(24000, 0.0f);
  for (double v : detect_pitch(silence, 24000)) CHECK(v == 0.0);

  std::mt19937_64 rng(5);
  std::normal_distribution<float> g(0.0f, 0.3f);
  std::vector<float> noise(48000);
  for (auto& v : noise) v = g(rng);
  const auto f0 = detect_pitch(noise, 24000);
  std::size_t unvoiced = 0;
  for (double v : f0) unvoiced += v == 0.0;
  CHECK(static_cast<double>(unvoiced) / f0.size() >= 0.8);
}

TEST_CASE("A-weighting curve") {
  CHECK(a_weighting_db(1000.0) == doctest::Approx(0.0).epsilon(0.01));
  CHECK(a_weighting_db(100.0) == doctest::Approx(-19.1).epsilon(0.01));
  CHECK(a_weighting_db(10000.0) == doctest::Approx(-2.5).epsilon(0.02));
}

TEST_CASE("loudness of silence sits at the floor") {
  std::vector<float> silence(24000, 0.0f);
  for (double v : a_weighted_loudness(silence, 24000, 10.0, 960)) CHECK(v == kLoudnessFloor);
}

TEST_CASE("doubling amplitude adds log10(4)") {
  const auto a = a_weighted_loudness(fixtures::sine(1.0, 24000, 1000.0, 0.1), 24000, 10.0, 960);
  const auto b = a_weighted_loudness(fixtures::sine(1.0, 24000, 1000.0, 0.2), 24000, 10.0, 960);
  for (std::size_t i = 5; i + 5 < a.size(); ++i) {
    CHECK(b[i] - a[i] == doctest::Approx(std::log10(4.0)).epsilon(1e-3));
  }
}

TEST_CASE("1 kHz is louder than 100 Hz at equal amplitude") {
  const auto hi = a_weighted_loudness(fixtures::sine(1.0, 24000, 1000.0, 0.3), 24000, 10.0, 960);
  const auto lo = a_weighted_loudness(fixtures::sine(1.0, 24000, 100.0, 0.3), 24000, 10.0, 960);
  for (std::size_t i = 5; i + 5 < hi.size(); ++i) {
    CHECK(std::abs(hi[i] - lo[i] - 1.91) <= 0.3);
  }
}

TEST_CASE("analyze rounds to float and has matching lengths") {
  const auto tone = fixtures::sung_tone(1.0, 24000, 200.0, 1);
  const auto t = analyze(tone, 24000);
  CHECK(t.n_frames() == 100);
  CHECK(t.loudness.size() == 100);
  CHECK(t.sample_rate == 24000);
  CHECK_NOTHROW(validate(t));
}

TEST_CASE("stream alignment") {
  features::Matrix ssl(50, 3);
  for (std::size_t i = 0; i < ssl.data.size(); ++i) ssl.data[i] = static_cast<float>(i);
  DspTrack t;
  t.sample_rate = 24000;
  t.f0.assign(100, 150.0f);
  t.loudness.assign(100, -3.0f);

  const auto a = align_streams(ssl, t);
  CHECK(a.n_frames() == 100);
  for (std::size_t i = 0; i < 50; ++i) {
    for (std::size_t d = 0; d < 3; ++d) {
      CHECK(a.values.row(2 * i)[d] == ssl.row(i)[d]);
      CHECK(a.values.row(2 * i + 1)[d] == ssl.row(i)[d]);
    }
  }

  t.f0.resize(97);
  t.loudness.resize(97);
  CHECK(align_streams(ssl, t).n_frames() == 97);

  features::Matrix one(1, 3);
  t.f0.resize(1);
  t.loudness.resize(1);
  CHECK(align_streams(one, t).n_frames() == 1);
}

TEST_CASE("pitch shift factor") {
  std::vector<double> s{100, 0, 300};
  std::vector<double> g{150, 0, 450};
  CHECK(pitch_shift_factor(s, s) == 1.0);
  CHECK(pitch_shift_factor(s, g) == doctest::Approx(1.5));
  std::vector<double> hundred(10, 100.0), two_hundred(7, 200.0);
  CHECK(pitch_shift_factor(hundred, two_hundred) == 2.0);
  std::vector<double> geo_s{100, 400}, geo_t{200, 800};
  CHECK(pitch_shift_factor(geo_s, geo_t, MeanKind::kGeometric) == doctest::Approx(2.0));
  std::vector<double> silent{0, 0};
  CHECK_THROWS_AS(pitch_shift_factor(silent, s), ValidationError);
}

TEST_CASE("shifting maps the source voiced mean to the target's") {
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> f(80, 900);
  for (int trial = 0; trial < 30; ++trial) {
    std::vector<double> src(40), tgt(55);
    for (auto& v : src) v = rng() % 3 == 0 ? 0.0 : f(rng);
    for (auto& v : tgt) v = rng() % 3 == 0 ? 0.0 : f(rng);
    src[0] = tgt[0] = 200.0;
    const auto shifted = apply_pitch_shift(src, pitch_shift_factor(src, tgt));
    CHECK(pitch_shift_factor(shifted, tgt) == doctest::Approx(1.0).epsilon(1e-12));
    for (std::size_t i = 0; i < src.size(); ++i) CHECK((shifted[i] == 0.0) == (src[i] == 0.0));
  }
}

TEST_CASE("NCDT round trips and rejects damage") {
  fixtures::TempDir dir("ncdt");
  DspTrack t;
  t.sample_rate = 24000;
  t.f0 = {0.0f, 220.25f, 221.5f};
  t.loudness = {-10.0f, -2.5f, -2.25f};
  save_dsp_file(t, dir / "t.ncdt");
  CHECK(load_dsp_file(dir / "t.ncdt") == t);

  auto bytes = encode_ncdt(t);
  CHECK(bytes.size() == 4 + 2 + 4 + 4 + 4 + 3 * 8);
  auto bad = bytes;
  bad[1] = 'x';
  CHECK_THROWS_AS(decode_ncdt(bad), FormatError);
  CHECK_THROWS_AS(decode_ncdt(bytes.substr(0, bytes.size() - 2)), CorruptionError);

  t.loudness.pop_back();
  CHECK_THROWS_AS(encode_ncdt(t), ValidationError);
}

TEST_CASE("pitch track text format") {
  fixtures::TempDir dir("track");
  {
    std::ofstream out(dir / "t.txt");
    out << "0\n220.5\n\n221\n";
  }
  CHECK(load_pitch_track(dir / "t.txt") == std::vector<double>{0, 220.5, 221});
  {
    std::ofstream out(dir / "bad.txt");
    out << "1\n-4\n";
  }
  CHECK_THROWS_AS(load_pitch_track(dir / "bad.txt"), FormatError);
}

TEST_CASE("WAV: float round trip and 16-bit PCM input") {
  fixtures::TempDir dir("wav");
  const auto tone = fixtures::sine(0.1, 16000, 440.0, 0.5);
  fixtures::write_mono(dir / "f.wav", tone, 16000);
  const auto back = audio::read_mono_wav(dir / "f.wav");
  CHECK(back.sample_rate == 16000);
  CHECK(back.samples == tone);

  io::ByteWriter w;
  const std::vector<std::int16_t> pcm{0, 16384, -32768, 32767};
  w.bytes("RIFF");
  w.u32(36 + 8);
  w.bytes("WAVE");
  w.bytes("fmt ");
  w.u32(16);
  w.u16(1);
  w.u16(1);
  w.u32(8000);
  w.u32(16000);
  w.u16(2);
  w.u16(16);
  w.bytes("data");
  w.u32(8);
  for (auto v : pcm) w.u16(static_cast<std::uint16_t>(v));
  io::write_file_atomic(dir / "p.wav", w.data());
  const auto pw = audio::read_mono_wav(dir / "p.wav");
  CHECK(pw.sample_rate == 8000);
  REQUIRE(pw.samples.size() == 4);
  CHECK(pw.samples[1] == 0.5f);
  CHECK(pw.samples[2] == -1.0f);

  audio::Wav stereo{24000, 2, {0.1f, 0.2f}};
  audio::write_wav(dir / "s.wav", stereo);
  CHECK_THROWS_AS(audio::read_mono_wav(dir / "s.wav"), ValidationError);
  io::write_file_atomic(dir / "junk.wav", "not a wav at all");
  CHECK_THROWS_AS(audio::read_wav(dir / "junk.wav"), FormatError);
}

TEST_CASE("resampling preserves a low tone") {
  const auto in = fixtures::sine(0.5, 16000, 440.0, 0.5);
  const auto out = audio::resample(in, 16000, 24000);
  CHECK(out.size() == 12000);
  const auto ref = fixtures::sine(0.5, 24000, 440.0, 0.5);
  double err = 0;
  for (std::size_t i = 500; i + 500 < out.size(); ++i) err = std::max(err, double(std::abs(out[i] - ref[i])));
  CHECK(err < 1e-3);
  CHECK(audio::resample(in, 16000, 16000) == in);
}
