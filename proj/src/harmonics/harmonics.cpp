#include "neuco/harmonics.hpp"

#include <cmath>
#include <numbers>
#include <random>
#include <string>

#include "neuco/dsp.hpp"
#include "neuco/error.hpp"

namespace neuco::harmonics {

namespace {

struct Blend {
  std::size_t a = 0;
  std::size_t b = 0;
  double t = 0.0;
};

// Frame pair and weight for sample n when frames are centered at
// m * hop + (hop - 1) / 2.
Blend blend_at(std::size_t n, std::size_t hop, std::size_t n_frames) {
  const double u = (static_cast<double>(n) - (static_cast<double>(hop) - 1.0) / 2.0) /
                   static_cast<double>(hop);
  if (u <= 0.0) return {0, 0, 0.0};
  const double last = static_cast<double>(n_frames - 1);
  if (u >= last) return {n_frames - 1, n_frames - 1, 0.0};
  const auto a = static_cast<std::size_t>(std::floor(u));
  return {a, a + 1, u - static_cast<double>(a)};
}

double fir_at(std::span<const double> x, std::span<const double> h, std::size_t n) {
  double acc = 0.0;
  const std::size_t top = std::min(h.size(), n + 1);
  for (std::size_t j = 0; j < top; ++j) acc += h[j] * x[n - j];
  return acc;
}

void check_bank(std::size_t n_samples, const LtvFilterBank& f) {
  if (f.frame_hop == 0 || f.taps == 0) throw ValidationError("LTV filter hop and taps must be positive");
  if (f.coeffs.size() % f.taps != 0) throw ValidationError("LTV coefficient storage is not a whole number of frames");
  const std::size_t expected = (n_samples + f.frame_hop - 1) / f.frame_hop;
  if (f.n_frames() != expected) {
    throw ValidationError("LTV filter has " + std::to_string(f.n_frames()) + " frames, signal of " +
                          std::to_string(n_samples) + " samples needs " + std::to_string(expected));
  }
}

}  // namespace

SampleF0 upsample_f0(std::span<const double> frame_f0, std::uint32_t sample_rate, double hop_ms) {
  if (frame_f0.empty()) throw ValidationError("upsample_f0: no frames");
  if (sample_rate == 0) throw ValidationError("upsample_f0: sample rate must be positive");
  const std::size_t hop = dsp::hop_samples(sample_rate, hop_ms);
  const std::size_t m_count = frame_f0.size();
  const double nyquist = sample_rate / 2.0;
  for (std::size_t m = 0; m < m_count; ++m) {
    if (!(frame_f0[m] >= 0.0) || frame_f0[m] > nyquist) {
      throw ValidationError("upsample_f0: f0 out of range at frame " + std::to_string(m));
    }
  }

  SampleF0 out;
  out.sample_rate = sample_rate;
  out.f0.assign(m_count * hop, 0.0);
  const double half = (static_cast<double>(hop) - 1.0) / 2.0;
  for (std::size_t m = 0; m < m_count; ++m) {
    const double here = frame_f0[m];
    if (here == 0.0) continue;
    const double center = static_cast<double>(m * hop) + half;
    for (std::size_t i = 0; i < hop; ++i) {
      const std::size_t n = m * hop + i;
      const double pos = static_cast<double>(n);
      double v = here;
      if (pos < center && m > 0 && frame_f0[m - 1] > 0.0) {
        const double t = (pos - (center - static_cast<double>(hop))) / static_cast<double>(hop);
        v = frame_f0[m - 1] + t * (here - frame_f0[m - 1]);
      } else if (pos > center && m + 1 < m_count && frame_f0[m + 1] > 0.0) {
        const double t = (pos - center) / static_cast<double>(hop);
        v = here + t * (frame_f0[m + 1] - here);
      }
      out.f0[n] = v;
    }
  }
  return out;
}

int max_harmonics(double f0, double sample_rate) {
  if (!(f0 > 0.0)) throw ValidationError("max_harmonics: f0 must be positive");
  if (!(sample_rate > 0.0)) throw ValidationError("max_harmonics: sample rate must be positive");
  return static_cast<int>(std::floor(sample_rate / (2.0 * f0)));
}

std::vector<double> phase_cycles(const SampleF0& f0s) {
  const double fs = f0s.sample_rate;
  std::vector<double> out(f0s.f0.size());
  double cycles = 0.0;
  for (std::size_t n = 0; n < out.size(); ++n) {
    cycles += f0s.f0[n] / fs;
    cycles -= std::floor(cycles);
    out[n] = cycles;
  }
  return out;
}

std::vector<double> sine_excitation(const SampleF0& f0s, Normalization norm) {
  if (f0s.sample_rate == 0) throw ValidationError("sine_excitation: sample rate must be positive");
  const double fs = f0s.sample_rate;
  for (std::size_t n = 0; n < f0s.f0.size(); ++n) {
    if (!(f0s.f0[n] >= 0.0) || f0s.f0[n] > fs / 2.0) {
      throw ValidationError("sine_excitation: f0 out of range at sample " + std::to_string(n));
    }
  }
  const auto phase = phase_cycles(f0s);
  std::vector<double> p(f0s.f0.size(), 0.0);
  for (std::size_t n = 0; n < p.size(); ++n) {
    if (f0s.f0[n] == 0.0) continue;
    const int harmonics = max_harmonics(f0s.f0[n], fs);
    const double w = 2.0 * std::numbers::pi * phase[n];
    double acc = 0.0;
    for (int k = 1; k <= harmonics; ++k) acc += std::cos(w * k);
    p[n] = norm == Normalization::kPerHarmonicCount ? acc / harmonics : acc;
  }
  return p;
}

std::vector<double> sample_noise(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> dist(0.0, kNoiseStd);
  std::vector<double> z(n);
  for (auto& v : z) v = dist(rng);
  return z;
}

std::vector<double> apply_ltv(std::span<const double> signal, const LtvFilterBank& filters) {
  check_bank(signal.size(), filters);
  const std::size_t frames = filters.n_frames();
  std::vector<double> out(signal.size());
  for (std::size_t n = 0; n < signal.size(); ++n) {
    const auto bl = blend_at(n, filters.frame_hop, frames);
    const double ya = fir_at(signal, filters.frame(bl.a), n);
    if (bl.a == bl.b) {
      out[n] = ya;
    } else {
      const double yb = fir_at(signal, filters.frame(bl.b), n);
      out[n] = ya + bl.t * (yb - ya);
    }
  }
  return out;
}

std::vector<double> apply_ltv_tap_gradient(std::span<const double> signal,
                                           std::span<const double> grad_out,
                                           std::size_t frame_hop, std::size_t taps) {
  if (signal.size() != grad_out.size()) throw ValidationError("LTV gradient length mismatch");
  const std::size_t frames = (signal.size() + frame_hop - 1) / frame_hop;
  std::vector<double> grad(frames * taps, 0.0);
  for (std::size_t n = 0; n < signal.size(); ++n) {
    const double g = grad_out[n];
    if (g == 0.0) continue;
    const auto bl = blend_at(n, frame_hop, frames);
    const double wa = bl.a == bl.b ? g : g * (1.0 - bl.t);
    const double wb = g * bl.t;
    const std::size_t top = std::min(taps, n + 1);
    double* ga = grad.data() + bl.a * taps;
    for (std::size_t j = 0; j < top; ++j) ga[j] += wa * signal[n - j];
    if (bl.a != bl.b) {
      double* gb = grad.data() + bl.b * taps;
      for (std::size_t j = 0; j < top; ++j) gb[j] += wb * signal[n - j];
    }
  }
  return grad;
}

std::vector<double> filtered_excitation(std::span<const double> p, std::span<const double> z,
                                        const LtvFilterBank& h1, const LtvFilterBank& h2) {
  if (p.size() != z.size()) throw ValidationError("filtered_excitation: p and z lengths differ");
  auto out = apply_ltv(p, h1);
  const auto noise = apply_ltv(z, h2);
  for (std::size_t n = 0; n < out.size(); ++n) out[n] += noise[n];
  return out;
}

HarmonicSignals assemble_harmonics(std::span<const float> p, std::span<const float> p_filtered) {
  if (p.size() != p_filtered.size()) throw ValidationError("assemble_harmonics: length mismatch");
  HarmonicSignals h;
  h.p.assign(p.begin(), p.end());
  h.p_filtered.assign(p_filtered.begin(), p_filtered.end());
  h.s.reserve(2 * p.size());
  h.s.insert(h.s.end(), p.begin(), p.end());
  h.s.insert(h.s.end(), p_filtered.begin(), p_filtered.end());
  return h;
}

std::pair<std::vector<float>, std::vector<float>> split_harmonics(std::span<const float> s) {
  if (s.size() % 2 != 0) throw ValidationError("harmonic stack has an odd number of samples");
  const std::size_t n = s.size() / 2;
  return {{s.begin(), s.begin() + static_cast<long>(n)}, {s.begin() + static_cast<long>(n), s.end()}};
}

}  // namespace neuco::harmonics
