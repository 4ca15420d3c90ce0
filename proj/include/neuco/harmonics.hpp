#pragma once

// Sample-level pitch excitation: sine excitation p[n], Gaussian noise z[n],
// linear time-varying FIR shaping and the two-channel stack s = [p, p~].

#include <cstdint>
#include <span>
#include <vector>

namespace neuco::harmonics {

inline constexpr double kNoiseStd = 0.03;

struct SampleF0 {
  std::vector<double> f0;  // Hz per sample, 0 = unvoiced
  std::uint32_t sample_rate = 0;
};

/// Frame-level f0 (10 ms hop by default) to one value per output sample.
/// Voiced runs are interpolated linearly between frame centers; at a voicing
/// boundary the voiced frame holds its own value; unvoiced frames give 0.
SampleF0 upsample_f0(std::span<const double> frame_f0, std::uint32_t sample_rate,
                     double hop_ms = 10.0);

/// floor(fs / (2 f0)).
int max_harmonics(double f0, double sample_rate);

enum class Normalization {
  kPerHarmonicCount,  // divide the harmonic sum by K[n]; |p| <= 1
  kNone,              // literal sum of K[n] unit cosines
};

/// Running phase Phi[n]/fs in cycles, wrapped to [0, 1). Includes f0[n]
/// itself, so the first sample already carries one step of phase.
std::vector<double> phase_cycles(const SampleF0& f0s);

std::vector<double> sine_excitation(const SampleF0& f0s,
                                    Normalization norm = Normalization::kPerHarmonicCount);

/// z ~ N(0, 0.03^2), deterministic in `seed`.
std::vector<double> sample_noise(std::size_t n, std::uint64_t seed);

/// Per-frame FIR taps. Row m applies around frame center m * hop + (hop-1)/2;
/// taps are cross-faded linearly between adjacent centers.
struct LtvFilterBank {
  std::size_t frame_hop = 0;
  std::size_t taps = 0;
  std::vector<double> coeffs;  // n_frames x taps, row-major

  std::size_t n_frames() const { return taps ? coeffs.size() / taps : 0; }
  std::span<const double> frame(std::size_t m) const {
    return {coeffs.data() + m * taps, taps};
  }
};

/// Causal time-varying convolution; output length equals input length.
/// Requires n_frames == ceil(signal.size() / frame_hop).
std::vector<double> apply_ltv(std::span<const double> signal, const LtvFilterBank& filters);

/// Gradient of sum(grad_out * apply_ltv(signal, filters)) with respect to the
/// filter taps, laid out like LtvFilterBank::coeffs.
std::vector<double> apply_ltv_tap_gradient(std::span<const double> signal,
                                           std::span<const double> grad_out,
                                           std::size_t frame_hop, std::size_t taps);

/// p~ = h1 * p + h2 * z.
std::vector<double> filtered_excitation(std::span<const double> p, std::span<const double> z,
                                        const LtvFilterBank& h1, const LtvFilterBank& h2);

struct HarmonicSignals {
  std::vector<float> p;
  std::vector<float> p_filtered;
  std::vector<float> z;
  /// Channel-major stack: s[0..n) = p, s[n..2n) = p_filtered.
  std::vector<float> s;
  std::uint64_t rng_seed = 0;

  std::size_t n_samples() const { return p.size(); }
  std::span<const float> channel(std::size_t c) const {
    return {s.data() + c * p.size(), p.size()};
  }
};

HarmonicSignals assemble_harmonics(std::span<const float> p, std::span<const float> p_filtered);

/// Splits a channel-major two-channel stack back into (p, p~).
std::pair<std::vector<float>, std::vector<float>> split_harmonics(std::span<const float> s);

}  // namespace neuco::harmonics
