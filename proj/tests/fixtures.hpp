#pragma once

// Synthetic data shared by the unit tests and the acceptance run.

#include <cstdint>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "neuco/dsp.hpp"
#include "neuco/feature_store.hpp"
#include "neuco/synth/model.hpp"
#include "neuco/synth/train.hpp"

namespace fixtures {

namespace fs = std::filesystem;

/// Gaussian keys/values, deterministic in seed.
neuco::features::SslFrameSequence random_sequence(std::size_t frames, std::size_t key_dim,
                                                  std::size_t value_dim, std::uint64_t seed,
                                                  const std::string& utt = "utt",
                                                  const std::string& spk = "spk");

/// Harmonic tone with a slow vibrato and a short unvoiced gap, in [-0.5, 0.5].
std::vector<float> sung_tone(double seconds, std::uint32_t sample_rate, double f0_hz,
                             std::uint64_t seed);

std::vector<float> sine(double seconds, std::uint32_t sample_rate, double freq, double amp);

void write_mono(const fs::path& path, const std::vector<float>& samples, std::uint32_t rate);

/// Small generator for fast tests; parameters well under 5k.
neuco::synth::SynthConfig tiny_config(std::uint32_t value_dim = 4);

/// Toy-scale model used by the overfit run: the library default widths.
neuco::synth::SynthConfig toy_config(std::uint32_t value_dim = 16);

/// One training example of `seconds` length built from a synthetic tone.
neuco::synth::TrainBatch synthetic_batch(const neuco::synth::SynthConfig& cfg, double seconds,
                                         std::uint64_t seed);

/// Short STFT resolutions for tiny signals.
std::vector<neuco::synth::StftResolution> small_resolutions();

/// Reference frames drawn from clusters that first appear on a fixed
/// schedule, plus a query that visits every cluster. Keys within a cluster
/// are identical, so each present cluster contributes exactly k matched
/// frames (its first k occurrences under the low-index tie-break).
struct ClusteredCoverage {
  neuco::features::SslFrameSequence query;
  std::vector<neuco::features::SslFrameSequence> references;
  std::vector<double> durations;
  std::vector<std::size_t> clusters_present;
};

ClusteredCoverage clustered_coverage(std::size_t k, std::uint64_t seed);

/// Temporary directory removed on destruction.
struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& tag);
  ~TempDir();
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  fs::path operator/(const std::string& name) const { return path / name; }
};

/// Writes the 2-second conversion fixture (audio, features, references,
/// model) and returns the directory layout.
struct ConversionFixture {
  fs::path source_audio;
  fs::path source_features;
  fs::path reference_audio;
  fs::path reference_features;
  fs::path model;
};

ConversionFixture write_conversion_fixture(const fs::path& dir, std::uint64_t seed);

std::string slurp(const fs::path& path);

}  // namespace fixtures
