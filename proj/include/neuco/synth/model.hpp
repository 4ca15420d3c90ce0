#pragma once

// Up/down-sampling waveform generator. Five up-sampling blocks turn 10 ms
// frames of SSL values into 24 kHz samples; two down-sampling streams (one
// for the harmonic stack s[n], one for loudness) produce FiLM conditioning
// at each up block's resolution. A small per-frame network estimates the
// LTV filter taps that shape the excitation.

#include <array>
#include <cstdint>
#include <span>
#include <vector>

#include "neuco/feature_store.hpp"
#include "neuco/harmonics.hpp"
#include "neuco/synth/layers.hpp"

namespace neuco::synth {

inline constexpr std::size_t kUpBlocks = 5;
inline constexpr std::size_t kDownBlocks = 4;

struct SynthConfig {
  std::uint32_t value_dim = 16;
  std::uint32_t base_channels = 8;
  std::uint32_t cond_channels = 4;
  std::array<std::uint32_t, kUpBlocks> up_factors{2, 2, 4, 5, 3};
  std::array<std::uint32_t, kDownBlocks> down_factors{3, 5, 4, 2};
  std::uint32_t harmonic_channels = 2;
  std::uint32_t loudness_channels = 1;
  std::uint32_t ltv_taps = 64;
  std::uint32_t estimator_hidden = 16;
  std::uint32_t sample_rate_out = 24000;
  /// 1.0 turns every activation into the identity (used by gradient checks).
  double leaky_slope = 0.2;

  /// Output samples per 10 ms frame.
  std::uint32_t samples_per_frame() const { return sample_rate_out / 100; }
  bool operator==(const SynthConfig&) const = default;
};

/// Throws ValidationError unless the factors multiply to samples_per_frame()
/// and the down factors mirror up_factors[1..4].
void validate(const SynthConfig& config);

struct UpBlock {
  ConvTranspose1d upsample;
  Conv1d film;  // cond (2 * cond_channels) -> [gamma - 1; beta]
  Conv1d residual;
};

struct DownStream {
  Conv1d input;
  std::array<Conv1d, kDownBlocks> blocks;
};

struct SynthModel {
  SynthConfig config;
  ParamSet params;
  Conv1d input;
  std::array<UpBlock, kUpBlocks> up;
  DownStream harmonic_stream;
  DownStream loudness_stream;
  Conv1d output;
  Conv1d estimator_hidden;
  Conv1d estimator_out;

  std::size_t parameter_count() const { return params.scalar_count(); }
};

/// Deterministic in `seed`. Parameter shapes depend on the config only.
SynthModel build_model(const SynthConfig& config, std::uint64_t seed);

/// Empty model with registered (zero) parameters; used by checkpoint loading.
SynthModel build_model_shapes(const SynthConfig& config);

struct FilmParams {
  Tensor gamma;
  Tensor beta;
};

/// gamma * x + beta, elementwise.
Tensor film(const Tensor& x, const FilmParams& cond);

struct LtvFilters {
  harmonics::LtvFilterBank h1;
  harmonics::LtvFilterBank h2;
};

/// Per 10 ms frame, 2 * ltv_taps coefficients from [values, loudness].
LtvFilters estimate_ltv_filters(const features::Matrix& values,
                                std::span<const double> loudness, const SynthModel& model);

/// Network only: audio of length samples_per_frame() * T from aligned values
/// [T x value_dim], the harmonic stack (channel-major, 2 x 240T) and loudness [T].
std::vector<double> forward(const SynthModel& model, const features::Matrix& values,
                            std::span<const double> harmonics, std::span<const double> loudness);

/// Intermediate activations kept for the backward pass.
struct ForwardCache {
  struct Stream {
    Tensor input;
    std::array<Tensor, kDownBlocks + 1> pre;
    std::array<Tensor, kDownBlocks + 1> level;
  };
  struct Up {
    Tensor in;
    Tensor pre;
    Tensor act;
    Tensor cond;
    Tensor film_out;
    Tensor modulated;
    Tensor modulated_act;
  };
  Tensor x;
  Stream harmonic;
  Stream loudness;
  std::array<Up, kUpBlocks> up;
  Tensor last;
  Tensor last_act;
  Tensor out;
};

std::vector<double> forward(const SynthModel& model, const features::Matrix& values,
                            std::span<const double> harmonics, std::span<const double> loudness,
                            ForwardCache& cache);

/// Accumulates parameter grads; returns dL/d(harmonic stack), channel-major.
std::vector<double> backward(SynthModel& model, const ForwardCache& cache,
                             std::span<const double> grad_audio);

/// Full generator path used for training: estimate filters, build p~ from
/// (p, z), stack s = [p, p~], run the network.
struct GeneratorCache {
  Tensor estimator_in;
  Tensor estimator_pre;
  Tensor estimator_act;
  LtvFilters filters;
  std::vector<double> p;
  std::vector<double> z;
  std::vector<double> p_filtered;
  ForwardCache net;
};

std::vector<double> generate(const SynthModel& model, const features::Matrix& values,
                             std::span<const double> loudness, std::span<const double> p,
                             std::span<const double> z, GeneratorCache& cache);

void generate_backward(SynthModel& model, const GeneratorCache& cache,
                       std::span<const double> grad_audio);

}  // namespace neuco::synth
