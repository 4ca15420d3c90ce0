#include "neuco/synth/losses.hpp"

#include <cmath>
#include <complex>
#include <numbers>

#include "neuco/error.hpp"
#include "neuco/fft.hpp"

namespace neuco::synth {

namespace {
constexpr double kMagEps = 1e-7;
}

std::vector<StftResolution> default_stft_resolutions() {
  return {{1024, 120, 600}, {2048, 240, 1200}, {512, 50, 240}};
}

std::size_t stft_frame_count(std::size_t n_samples, const StftResolution& res) {
  if (n_samples <= res.fft_size) return 1;
  return 1 + (n_samples - res.fft_size + res.hop - 1) / res.hop;
}

StftTerms stft_loss_terms(std::span<const double> predicted, std::span<const double> reference,
                          const StftResolution& res, std::vector<double>* grad,
                          std::vector<bool>* log_signs) {
  if (predicted.size() != reference.size()) throw ValidationError("STFT loss: length mismatch");
  if (res.window == 0 || res.window > res.fft_size || res.hop == 0) {
    throw ValidationError("STFT loss: invalid resolution");
  }
  const std::size_t n = res.fft_size;
  const std::size_t frames = stft_frame_count(predicted.size(), res);
  const std::size_t offset = (n - res.window) / 2;
  std::vector<double> win(n, 0.0);
  for (std::size_t i = 0; i < res.window; ++i) {
    win[offset + i] = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * static_cast<double>(i) /
                                           static_cast<double>(res.window));
  }

  dsp::RealFft fft(n);
  const std::size_t bins = fft.bins();
  std::vector<std::complex<double>> spec_p(frames * bins), spec_r(frames * bins);
  std::vector<double> buf(n);
  auto analyze = [&](std::span<const double> x, std::vector<std::complex<double>>& out) {
    for (std::size_t f = 0; f < frames; ++f) {
      const std::size_t start = f * res.hop;
      for (std::size_t i = 0; i < n; ++i) {
        const std::size_t idx = start + i;
        buf[i] = idx < x.size() ? x[idx] * win[i] : 0.0;
      }
      fft.forward(buf, std::span(out).subspan(f * bins, bins));
    }
  };
  analyze(predicted, spec_p);
  analyze(reference, spec_r);

  std::vector<double> mag_p(frames * bins), mag_r(frames * bins);
  double diff_sq = 0.0, ref_sq = 0.0, log_abs = 0.0;
  for (std::size_t i = 0; i < mag_p.size(); ++i) {
    mag_p[i] = std::sqrt(std::norm(spec_p[i]) + kMagEps);
    mag_r[i] = std::sqrt(std::norm(spec_r[i]) + kMagEps);
    const double d = mag_r[i] - mag_p[i];
    diff_sq += d * d;
    ref_sq += mag_r[i] * mag_r[i];
    const double lr = std::log(mag_r[i]) - std::log(mag_p[i]);
    log_abs += std::abs(lr);
    if (log_signs) log_signs->push_back(lr < 0.0);
  }
  const double count = static_cast<double>(mag_p.size());
  StftTerms terms;
  const double diff_norm = std::sqrt(diff_sq);
  const double ref_norm = std::sqrt(ref_sq);
  terms.spectral_convergence = diff_norm / ref_norm;
  terms.log_magnitude = log_abs / count;
  if (!grad) return terms;

  if (grad->size() != predicted.size()) grad->assign(predicted.size(), 0.0);
  std::vector<std::complex<double>> g_spec(bins);
  std::vector<double> g_frame(n);
  for (std::size_t f = 0; f < frames; ++f) {
    for (std::size_t k = 0; k < bins; ++k) {
      const std::size_t i = f * bins + k;
      double g_mag = 0.0;
      if (diff_norm > 0.0) g_mag += (mag_p[i] - mag_r[i]) / (diff_norm * ref_norm);
      const double lr = std::log(mag_r[i]) - std::log(mag_p[i]);
      if (lr != 0.0) g_mag += (lr > 0.0 ? -1.0 : 1.0) / (count * mag_p[i]);
      // d|X|/dRe = Re/|X|, d|X|/dIm = Im/|X|
      std::complex<double> g = spec_p[i] * (g_mag / mag_p[i]);
      const bool edge = k == 0 || (n % 2 == 0 && k == n / 2);
      g_spec[k] = edge ? g : 0.5 * g;
    }
    // dL/dx[j] = Re sum_k g_k exp(+i 2 pi k j / n); the Hermitian inverse
    // doubles the interior bins, which the halving above cancels.
    fft.inverse(g_spec, g_frame);
    const std::size_t start = f * res.hop;
    for (std::size_t j = 0; j < n; ++j) {
      const std::size_t idx = start + j;
      if (idx < grad->size()) (*grad)[idx] += g_frame[j] * win[j];
    }
  }
  return terms;
}

double multiscale_stft_loss(std::span<const double> predicted, std::span<const double> reference,
                            std::span<const StftResolution> resolutions, std::vector<double>* grad,
                            std::vector<bool>* log_signs) {
  if (resolutions.empty()) throw ValidationError("STFT loss needs at least one resolution");
  if (grad) grad->assign(predicted.size(), 0.0);
  double total = 0.0;
  for (const auto& r : resolutions) {
    const auto t = stft_loss_terms(predicted, reference, r, grad, log_signs);
    total += t.spectral_convergence + t.log_magnitude;
  }
  return total;
}

LsganLosses lsgan_losses(std::span<const double> disc_real, std::span<const double> disc_fake) {
  if (disc_real.empty() || disc_fake.empty()) throw ValidationError("LSGAN: empty discriminator output");
  double real_term = 0.0, fake_term = 0.0, g_term = 0.0;
  for (double r : disc_real) real_term += (r - 1.0) * (r - 1.0);
  for (double f : disc_fake) {
    fake_term += f * f;
    g_term += (f - 1.0) * (f - 1.0);
  }
  const double nr = static_cast<double>(disc_real.size());
  const double nf = static_cast<double>(disc_fake.size());
  return {real_term / nr + fake_term / nf, g_term / nf};
}

}  // namespace neuco::synth
