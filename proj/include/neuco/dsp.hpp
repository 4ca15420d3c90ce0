#pragma once

// Frame-level pitch and loudness analysis on a 10 ms grid, stream alignment
// and the conversion pitch-shift factor.

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "neuco/feature_store.hpp"

namespace neuco::dsp {

inline constexpr double kHopMs = 10.0;
inline constexpr double kLoudnessFloor = -10.0;

/// Number of samples in one hop. Throws if it is not a whole number.
std::size_t hop_samples(std::uint32_t sample_rate, double hop_ms);

/// Per-frame f0 (Hz, 0 = unvoiced) and loudness (log10 of A-weighted power).
struct DspTrack {
  double hop_ms = kHopMs;
  std::uint32_t sample_rate = 0;
  std::vector<float> f0;
  std::vector<float> loudness;

  std::size_t n_frames() const { return f0.size(); }
  bool operator==(const DspTrack&) const = default;
};

void validate(const DspTrack& track);

/// Per-frame majority vote on voicing, then median of the voiced values.
std::vector<double> median_pitch_ensemble(std::span<const std::vector<double>> tracks);

struct PitchOptions {
  double hop_ms = kHopMs;
  double f0_min = 50.0;
  double f0_max = 1000.0;
  /// Cumulative-mean-normalized difference threshold.
  double threshold = 0.1;
};

/// YIN pitch estimate, one value per hop (ceil(n / hop) frames).
std::vector<double> detect_pitch(std::span<const float> audio, std::uint32_t sample_rate,
                                 const PitchOptions& options = {});

/// Standard analog A-weighting gain in dB (about 0 dB at 1 kHz).
double a_weighting_db(double freq_hz);

/// log10 of the A-weighted mean power of a centered Hann window per hop,
/// clamped at kLoudnessFloor.
std::vector<double> a_weighted_loudness(std::span<const float> audio,
                                        std::uint32_t sample_rate, double hop_ms,
                                        std::size_t window);

/// Pitch + loudness with the default 40 ms loudness window. Values are
/// rounded to float so that a track written to disk and re-read is identical
/// to the in-memory one.
DspTrack analyze(std::span<const float> audio, std::uint32_t sample_rate,
                 const PitchOptions& options = {});

/// Frame-aligned streams on the 10 ms grid.
struct AlignedFeatures {
  features::Matrix values;
  std::vector<double> f0;
  std::vector<double> loudness;

  std::size_t n_frames() const { return values.rows; }
};

/// Repeats every 20 ms SSL frame twice and truncates all streams to the
/// shortest one.
AlignedFeatures align_streams(const features::Matrix& ssl_values, const DspTrack& dsp);

enum class MeanKind { kArithmetic, kGeometric };

/// mean(target voiced f0) / mean(source voiced f0).
double pitch_shift_factor(std::span<const double> source_f0, std::span<const double> target_f0,
                          MeanKind kind = MeanKind::kArithmetic);

/// Multiplies every voiced frame by `factor`; unvoiced frames stay 0.
std::vector<double> apply_pitch_shift(std::span<const double> f0, double factor);

std::vector<double> to_double(std::span<const float> v);

std::string encode_ncdt(const DspTrack& track);
DspTrack decode_ncdt(std::string_view bytes);
DspTrack load_dsp_file(const std::filesystem::path& path);
void save_dsp_file(const DspTrack& track, const std::filesystem::path& path);

/// Plain-text pitch track: one decimal f0 per line, 0 for unvoiced.
std::vector<double> load_pitch_track(const std::filesystem::path& path);

}  // namespace neuco::dsp
