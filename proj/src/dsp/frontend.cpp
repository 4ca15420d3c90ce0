#include <algorithm>
#include <cmath>
#include <complex>
#include <fstream>
#include <limits>
#include <numbers>
#include <numeric>
#include <sstream>

#include "neuco/binary_io.hpp"
#include "neuco/dsp.hpp"
#include "neuco/error.hpp"
#include "neuco/fft.hpp"

namespace neuco::dsp {

namespace {

constexpr std::string_view kMagic = "NCDT";
constexpr std::uint16_t kVersion = 1;

double voiced_mean(std::span<const double> f0, MeanKind kind, const char* which) {
  double acc = 0.0;
  std::size_t n = 0;
  for (double v : f0) {
    if (v > 0.0) {
      acc += kind == MeanKind::kArithmetic ? v : std::log(v);
      ++n;
    }
  }
  if (n == 0) throw ValidationError(std::string(which) + " pitch has no voiced frames");
  acc /= static_cast<double>(n);
  return kind == MeanKind::kArithmetic ? acc : std::exp(acc);
}

}  // namespace

std::size_t hop_samples(std::uint32_t sample_rate, double hop_ms) {
  const double exact = sample_rate * hop_ms / 1000.0;
  const auto hop = static_cast<std::size_t>(std::llround(exact));
  if (hop == 0 || std::abs(exact - static_cast<double>(hop)) > 1e-9) {
    throw ValidationError("hop of " + std::to_string(hop_ms) + " ms is not a whole number of samples at " +
                          std::to_string(sample_rate) + " Hz");
  }
  return hop;
}

void validate(const DspTrack& track) {
  if (track.f0.empty()) throw ValidationError("DSP track has no frames");
  if (track.f0.size() != track.loudness.size()) {
    throw ValidationError("DSP track f0 and loudness lengths differ");
  }
  const double nyquist = track.sample_rate / 2.0;
  for (std::size_t i = 0; i < track.f0.size(); ++i) {
    const float v = track.f0[i];
    if (!(v >= 0.0f) || (v > 0.0f && (v < 20.0f || v > nyquist))) {
      throw ValidationError("f0 out of range at frame " + std::to_string(i));
    }
    if (!std::isfinite(track.loudness[i])) {
      throw ValidationError("non-finite loudness at frame " + std::to_string(i));
    }
  }
}

std::vector<double> median_pitch_ensemble(std::span<const std::vector<double>> tracks) {
  if (tracks.empty()) throw ValidationError("pitch ensemble needs at least one track");
  if (tracks.size() > 3) throw ValidationError("pitch ensemble takes at most three tracks");
  const std::size_t n = tracks.front().size();
  for (const auto& t : tracks) {
    if (t.size() != n) throw ValidationError("pitch tracks differ in length");
  }
  // Majority: 1 of 1, 2 of 2, 2 of 3.
  const std::size_t needed = tracks.size() / 2 + 1;
  std::vector<double> out(n, 0.0);
  std::vector<double> voiced;
  for (std::size_t i = 0; i < n; ++i) {
    voiced.clear();
    for (const auto& t : tracks) {
      if (t[i] < 0.0) throw ValidationError("negative f0 at frame " + std::to_string(i));
      if (t[i] > 0.0) voiced.push_back(t[i]);
    }
    if (voiced.size() < needed) continue;
    std::sort(voiced.begin(), voiced.end());
    const std::size_t m = voiced.size();
    out[i] = m % 2 ? voiced[m / 2] : 0.5 * (voiced[m / 2 - 1] + voiced[m / 2]);
  }
  return out;
}

std::vector<double> detect_pitch(std::span<const float> audio, std::uint32_t sample_rate,
                                 const PitchOptions& options) {
  if (audio.empty()) throw ValidationError("detect_pitch: empty audio");
  if (!(options.f0_min >= 20.0) || !(options.f0_min < options.f0_max) ||
      options.f0_max > sample_rate / 2.0) {
    throw ValidationError("detect_pitch: invalid f0 range");
  }
  const std::size_t hop = hop_samples(sample_rate, options.hop_ms);
  const std::size_t n_frames = (audio.size() + hop - 1) / hop;
  const auto tau_min = std::max<std::size_t>(2, static_cast<std::size_t>(std::floor(sample_rate / options.f0_max)));
  const auto tau_max = static_cast<std::size_t>(std::ceil(sample_rate / options.f0_min));
  const std::size_t window = tau_max;
  const std::size_t span_len = window + tau_max + 1;

  std::vector<double> frame(span_len);
  std::vector<double> diff(tau_max + 2);
  std::vector<double> cmnd(tau_max + 2);
  std::vector<double> f0(n_frames, 0.0);
  const auto n = static_cast<long>(audio.size());

  for (std::size_t m = 0; m < n_frames; ++m) {
    const long center = static_cast<long>(m * hop + hop / 2);
    const long start = center - static_cast<long>(span_len / 2);
    double energy = 0.0;
    for (std::size_t j = 0; j < span_len; ++j) {
      const long idx = start + static_cast<long>(j);
      frame[j] = (idx >= 0 && idx < n) ? audio[static_cast<std::size_t>(idx)] : 0.0;
      if (j < window) energy += frame[j] * frame[j];
    }
    if (energy < 1e-10 * static_cast<double>(window)) continue;

    for (std::size_t tau = 1; tau <= tau_max; ++tau) {
      double d = 0.0;
      for (std::size_t j = 0; j < window; ++j) {
        const double e = frame[j] - frame[j + tau];
        d += e * e;
      }
      diff[tau] = d;
    }
    cmnd[0] = 1.0;
    double running = 0.0;
    for (std::size_t tau = 1; tau <= tau_max; ++tau) {
      running += diff[tau];
      cmnd[tau] = running > 0.0 ? diff[tau] * static_cast<double>(tau) / running : 1.0;
    }

    std::size_t best = 0;
    for (std::size_t tau = tau_min; tau <= tau_max; ++tau) {
      if (cmnd[tau] < options.threshold) {
        while (tau + 1 <= tau_max && cmnd[tau + 1] < cmnd[tau]) ++tau;
        best = tau;
        break;
      }
    }
    if (best == 0) continue;

    double refined = static_cast<double>(best);
    if (best > 1 && best < tau_max) {
      const double a = cmnd[best - 1], b = cmnd[best], c = cmnd[best + 1];
      const double denom = a - 2.0 * b + c;
      if (denom > 0.0) refined += 0.5 * (a - c) / denom;
    }
    const double hz = sample_rate / refined;
    if (hz >= options.f0_min && hz <= options.f0_max) f0[m] = hz;
  }
  return f0;
}

double a_weighting_db(double freq_hz) {
  const double f2 = freq_hz * freq_hz;
  const double num = 12194.0 * 12194.0 * f2 * f2;
  const double den = (f2 + 20.6 * 20.6) *
                     std::sqrt((f2 + 107.7 * 107.7) * (f2 + 737.9 * 737.9)) *
                     (f2 + 12194.0 * 12194.0);
  if (num == 0.0) return -std::numeric_limits<double>::infinity();
  return 20.0 * std::log10(num / den) + 2.0;
}

std::vector<double> a_weighted_loudness(std::span<const float> audio,
                                        std::uint32_t sample_rate, double hop_ms,
                                        std::size_t window) {
  if (window < 2) throw ValidationError("loudness window must be at least 2 samples");
  if (audio.empty()) throw ValidationError("a_weighted_loudness: empty audio");
  const std::size_t hop = hop_samples(sample_rate, hop_ms);
  if (window < hop) throw ValidationError("loudness window shorter than one hop");
  const std::size_t n_frames = (audio.size() + hop - 1) / hop;

  std::vector<double> hann(window);
  double win_energy = 0.0;
  for (std::size_t i = 0; i < window; ++i) {
    hann[i] = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * static_cast<double>(i) / static_cast<double>(window));
    win_energy += hann[i] * hann[i];
  }
  RealFft fft(window);
  std::vector<double> weight(fft.bins());
  for (std::size_t k = 0; k < weight.size(); ++k) {
    const double f = static_cast<double>(k) * sample_rate / static_cast<double>(window);
    const double g = k == 0 ? 0.0 : std::pow(10.0, a_weighting_db(f) / 10.0);
    const bool edge = k == 0 || (window % 2 == 0 && k == window / 2);
    weight[k] = g * (edge ? 1.0 : 2.0);
  }
  const double norm = static_cast<double>(window) * win_energy;

  std::vector<double> frame(window);
  std::vector<std::complex<double>> spec(fft.bins());
  std::vector<double> out(n_frames);
  const auto n = static_cast<long>(audio.size());
  for (std::size_t m = 0; m < n_frames; ++m) {
    const long start = static_cast<long>(m * hop + hop / 2) - static_cast<long>(window / 2);
    for (std::size_t j = 0; j < window; ++j) {
      const long idx = start + static_cast<long>(j);
      const double x = (idx >= 0 && idx < n) ? audio[static_cast<std::size_t>(idx)] : 0.0;
      frame[j] = x * hann[j];
    }
    fft.forward(frame, spec);
    double power = 0.0;
    for (std::size_t k = 0; k < spec.size(); ++k) power += std::norm(spec[k]) * weight[k];
    power /= norm;
    out[m] = power > 0.0 ? std::max(kLoudnessFloor, std::log10(power)) : kLoudnessFloor;
  }
  return out;
}

DspTrack analyze(std::span<const float> audio, std::uint32_t sample_rate,
                 const PitchOptions& options) {
  DspTrack track;
  track.hop_ms = options.hop_ms;
  track.sample_rate = sample_rate;
  const auto f0 = detect_pitch(audio, sample_rate, options);
  const auto loud = a_weighted_loudness(audio, sample_rate, options.hop_ms,
                                        4 * hop_samples(sample_rate, options.hop_ms));
  track.f0.assign(f0.begin(), f0.end());
  track.loudness.assign(loud.begin(), loud.end());
  return track;
}

AlignedFeatures align_streams(const features::Matrix& ssl_values, const DspTrack& dsp) {
  const std::size_t n = std::min(2 * ssl_values.rows, dsp.n_frames());
  if (n == 0) throw ValidationError("aligned streams would be empty");
  if (dsp.loudness.size() != dsp.f0.size()) {
    throw ValidationError("DSP track f0 and loudness lengths differ");
  }
  AlignedFeatures out;
  out.values = features::Matrix(n, ssl_values.cols);
  for (std::size_t i = 0; i < n; ++i) {
    auto src = ssl_values.row(i / 2);
    std::copy(src.begin(), src.end(), out.values.row(i).begin());
  }
  out.f0.assign(dsp.f0.begin(), dsp.f0.begin() + static_cast<long>(n));
  out.loudness.assign(dsp.loudness.begin(), dsp.loudness.begin() + static_cast<long>(n));
  return out;
}

double pitch_shift_factor(std::span<const double> source_f0, std::span<const double> target_f0,
                          MeanKind kind) {
  const double src = voiced_mean(source_f0, kind, "source");
  const double tgt = voiced_mean(target_f0, kind, "target");
  return tgt / src;
}

std::vector<double> apply_pitch_shift(std::span<const double> f0, double factor) {
  if (!(factor > 0.0) || !std::isfinite(factor)) {
    throw ValidationError("pitch shift factor must be positive and finite");
  }
  std::vector<double> out(f0.begin(), f0.end());
  for (auto& v : out) {
    if (v > 0.0) v *= factor;
  }
  return out;
}

std::vector<double> to_double(std::span<const float> v) { return {v.begin(), v.end()}; }

std::string encode_ncdt(const DspTrack& track) {
  validate(track);
  io::ByteWriter w;
  w.bytes(kMagic);
  w.u16(kVersion);
  w.u32(static_cast<std::uint32_t>(track.n_frames()));
  w.f32(static_cast<float>(track.hop_ms));
  w.u32(track.sample_rate);
  w.f32s(track.f0);
  w.f32s(track.loudness);
  return w.data();
}

DspTrack decode_ncdt(std::string_view bytes) {
  io::ByteReader r(bytes);
  if (bytes.size() < 4 || r.bytes(4, "magic") != kMagic) throw FormatError("bad NCDT magic");
  const auto version = r.u16("version");
  if (version != kVersion) throw FormatError("unsupported NCDT version " + std::to_string(version));
  const std::size_t n = r.u32("n_frames");
  DspTrack t;
  t.hop_ms = r.f32("hop_ms");
  t.sample_rate = r.u32("sample_rate");
  if (r.remaining() != 2 * n * sizeof(float)) {
    throw CorruptionError("NCDT payload size does not match n_frames");
  }
  t.f0.resize(n);
  t.loudness.resize(n);
  r.f32s(t.f0, "f0");
  r.f32s(t.loudness, "loudness");
  validate(t);
  return t;
}

DspTrack load_dsp_file(const std::filesystem::path& path) {
  return decode_ncdt(io::read_file(path));
}

void save_dsp_file(const DspTrack& track, const std::filesystem::path& path) {
  io::write_file_atomic(path, encode_ncdt(track));
}

std::vector<double> load_pitch_track(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open pitch track " + path.string());
  std::vector<double> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    std::istringstream ls(line);
    double v = 0.0;
    if (!(ls >> v) || v < 0.0 || !std::isfinite(v)) {
      throw FormatError(path.string() + ":" + std::to_string(lineno) + ": bad f0 value");
    }
    out.push_back(v);
  }
  if (out.empty()) throw ValidationError(path.string() + ": empty pitch track");
  return out;
}

}  // namespace neuco::dsp
