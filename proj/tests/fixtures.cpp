#include "fixtures.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <sstream>

#include "neuco/audio.hpp"
#include "neuco/harmonics.hpp"
#include "neuco/synth/checkpoint.hpp"

namespace fixtures {

using neuco::features::Matrix;
using neuco::features::SslFrameSequence;

SslFrameSequence random_sequence(std::size_t frames, std::size_t key_dim, std::size_t value_dim,
                                 std::uint64_t seed, const std::string& utt,
                                 const std::string& spk) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<float> g(0.0f, 1.0f);
  SslFrameSequence s;
  s.keys = Matrix(frames, key_dim);
  s.values = Matrix(frames, value_dim);
  for (auto& v : s.keys.data) v = g(rng);
  for (auto& v : s.values.data) v = g(rng);
  s.utterance_id = utt;
  s.speaker_id = spk;
  return s;
}

std::vector<float> sung_tone(double seconds, std::uint32_t sample_rate, double f0_hz,
                             std::uint64_t seed) {
  const auto n = static_cast<std::size_t>(std::llround(seconds * sample_rate));
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const double vib_phase = 2 * std::numbers::pi * u(rng);
  std::normal_distribution<double> breath(0.0, 0.003);

  std::vector<float> out(n);
  double phase = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double t = static_cast<double>(i) / sample_rate;
    const double frac = t / seconds;
    const bool gap = frac > 0.45 && frac < 0.55;
    const double f0 = f0_hz * (1.0 + 0.02 * std::sin(2 * std::numbers::pi * 5.5 * t + vib_phase));
    phase += f0 / sample_rate;
    phase -= std::floor(phase);
    double v = 0.0;
    if (!gap) {
      for (int h = 1; h <= 8 && h * f0 < 0.45 * sample_rate; ++h) {
        v += std::sin(2 * std::numbers::pi * h * phase) / h;
      }
      v *= 0.25 * (0.6 + 0.4 * std::sin(std::numbers::pi * frac));
    }
    out[i] = static_cast<float>(v + breath(rng));
  }
  return out;
}

std::vector<float> sine(double seconds, std::uint32_t sample_rate, double freq, double amp) {
  const auto n = static_cast<std::size_t>(std::llround(seconds * sample_rate));
  std::vector<float> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    out[i] = static_cast<float>(amp * std::sin(2 * std::numbers::pi * freq * i / sample_rate));
  }
  return out;
}

void write_mono(const fs::path& path, const std::vector<float>& samples, std::uint32_t rate) {
  neuco::audio::Wav wav;
  wav.sample_rate = rate;
  wav.samples = samples;
  neuco::audio::write_wav(path, wav);
}

neuco::synth::SynthConfig tiny_config(std::uint32_t value_dim) {
  neuco::synth::SynthConfig c;
  c.value_dim = value_dim;
  c.base_channels = 4;
  c.cond_channels = 2;
  c.ltv_taps = 4;
  c.estimator_hidden = 4;
  return c;
}

neuco::synth::SynthConfig toy_config(std::uint32_t value_dim) {
  neuco::synth::SynthConfig c;
  c.value_dim = value_dim;
  return c;
}

neuco::synth::TrainBatch synthetic_batch(const neuco::synth::SynthConfig& cfg, double seconds,
                                         std::uint64_t seed) {
  const std::uint32_t fs = cfg.sample_rate_out;
  const auto audio = sung_tone(seconds, fs, 220.0, seed);
  const auto track = neuco::dsp::analyze(audio, fs);
  const auto feats = random_sequence((track.n_frames() + 1) / 2, 8, cfg.value_dim, seed + 1);
  const auto aligned = neuco::dsp::align_streams(feats.values, track);
  const std::size_t n = std::size_t{cfg.samples_per_frame()} * aligned.n_frames();

  neuco::synth::TrainBatch b;
  b.values = aligned.values;
  b.loudness = aligned.loudness;
  b.p = neuco::harmonics::sine_excitation(neuco::harmonics::upsample_f0(aligned.f0, fs));
  b.z = neuco::harmonics::sample_noise(n, seed + 2);
  b.target.assign(n, 0.0);
  std::copy_n(audio.begin(), std::min(n, audio.size()), b.target.begin());
  return b;
}

std::vector<neuco::synth::StftResolution> small_resolutions() {
  return {{64, 16, 64}, {128, 32, 96}, {32, 8, 32}};
}

ClusteredCoverage clustered_coverage(std::size_t k, std::uint64_t seed) {
  constexpr std::size_t kKeyDim = 16;
  constexpr std::size_t kValueDim = 4;
  const std::vector<std::size_t> bounds{250, 500, 1500, 3000, 4500};  // frames at 50 Hz
  const std::vector<std::size_t> new_clusters{20, 10, 8, 4, 2};
  std::size_t n_clusters = 0;
  for (auto c : new_clusters) n_clusters += c;

  std::mt19937_64 rng(seed);
  std::normal_distribution<float> g(0.0f, 1.0f);
  std::vector<std::vector<float>> centroids(n_clusters, std::vector<float>(kKeyDim));
  for (auto& c : centroids) {
    for (auto& v : c) v = g(rng);
  }

  // Planned start frame of every cluster's first segment.
  std::vector<std::size_t> intro_at;
  std::size_t start = 0;
  for (std::size_t i = 0; i < bounds.size(); ++i) {
    const double step = static_cast<double>(bounds[i] - start) / new_clusters[i];
    for (std::size_t j = 0; j < new_clusters[i]; ++j) {
      intro_at.push_back(start + static_cast<std::size_t>(j * step));
    }
    start = bounds[i];
  }

  std::vector<std::size_t> labels;
  std::size_t introduced = 0;
  std::uniform_int_distribution<std::size_t> seg_len(std::max<std::size_t>(k, 4), 10);
  while (labels.size() < bounds.back()) {
    const std::size_t pos = labels.size();
    std::size_t len = seg_len(rng);
    std::size_t cluster;
    if (introduced < n_clusters && pos >= intro_at[introduced]) {
      cluster = introduced++;
    } else {
      cluster = std::uniform_int_distribution<std::size_t>(0, introduced - 1)(rng);
      if (introduced < n_clusters) len = std::min(len, intro_at[introduced] - pos);
    }
    len = std::min(len, bounds.back() - pos);
    labels.insert(labels.end(), len, cluster);
  }

  ClusteredCoverage out;
  // Three reference utterances of 30 s each.
  for (std::size_t u = 0; u < 3; ++u) {
    SslFrameSequence s;
    s.keys = Matrix(1500, kKeyDim);
    s.values = Matrix(1500, kValueDim);
    for (std::size_t i = 0; i < 1500; ++i) {
      const auto& c = centroids[labels[u * 1500 + i]];
      std::copy(c.begin(), c.end(), s.keys.row(i).begin());
      for (auto& v : s.values.row(i)) v = g(rng);
    }
    s.utterance_id = "ref" + std::to_string(u);
    s.speaker_id = "target";
    out.references.push_back(std::move(s));
  }

  std::vector<std::size_t> order;
  for (std::size_t c = 0; c < n_clusters; ++c) order.insert(order.end(), 3, c);
  std::shuffle(order.begin(), order.end(), rng);
  std::normal_distribution<float> jitter(0.0f, 0.02f);
  out.query.keys = Matrix(order.size(), kKeyDim);
  out.query.values = Matrix(order.size(), kValueDim);
  for (std::size_t i = 0; i < order.size(); ++i) {
    const auto& c = centroids[order[i]];
    auto row = out.query.keys.row(i);
    for (std::size_t d = 0; d < kKeyDim; ++d) row[d] = c[d] + jitter(rng);
    for (auto& v : out.query.values.row(i)) v = g(rng);
  }
  out.query.utterance_id = "query";
  out.query.speaker_id = "source";

  out.durations = {5, 10, 30, 60, 90};
  std::size_t acc = 0;
  for (auto c : new_clusters) out.clusters_present.push_back(acc += c);
  return out;
}

TempDir::TempDir(const std::string& tag) {
  std::random_device rd;
  std::ostringstream name;
  name << "neuco-" << tag << '-' << std::hex << rd() << rd();
  path = fs::temp_directory_path() / name.str();
  fs::create_directories(path);
}

TempDir::~TempDir() {
  std::error_code ec;
  fs::remove_all(path, ec);
}

ConversionFixture write_conversion_fixture(const fs::path& dir, std::uint64_t seed) {
  ConversionFixture f;
  f.source_audio = dir / "source.wav";
  f.source_features = dir / "source.ncsf";
  f.reference_audio = dir / "reference.wav";
  f.reference_features = dir / "reference.ncsf";
  f.model = dir / "model.ncsm";

  write_mono(f.source_audio, sung_tone(2.0, 24000, 220.0, seed), 24000);
  write_mono(f.reference_audio, sung_tone(2.0, 24000, 330.0, seed + 1), 24000);
  neuco::features::save_feature_file(random_sequence(100, 8, 4, seed + 2, "source", "src"),
                                     f.source_features);
  neuco::features::save_feature_file(random_sequence(100, 8, 4, seed + 3, "reference", "tgt"),
                                     f.reference_features);
  neuco::synth::save_checkpoint(neuco::synth::build_model(tiny_config(4), seed + 4), f.model);
  return f;
}

std::string slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace fixtures
