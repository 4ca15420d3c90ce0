#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace neuco::synth {

struct StftResolution {
  std::size_t fft_size = 1024;
  std::size_t hop = 120;
  std::size_t window = 600;
};

std::vector<StftResolution> default_stft_resolutions();

/// Spectral convergence and mean absolute log-magnitude difference at one
/// resolution. Magnitudes are sqrt(|X|^2 + 1e-7).
struct StftTerms {
  double spectral_convergence = 0.0;
  double log_magnitude = 0.0;
};

/// Frames start at multiples of hop; the Hann window of length `window` is
/// centered in fft_size; samples past the end are zero.
std::size_t stft_frame_count(std::size_t n_samples, const StftResolution& res);

/// `predicted` against `reference`. When grad is non-null it receives
/// d(sc + log_mag)/d(predicted), accumulated. When log_signs is non-null one
/// entry per bin is appended: whether log|ref| - log|pred| is negative.
StftTerms stft_loss_terms(std::span<const double> predicted, std::span<const double> reference,
                          const StftResolution& res, std::vector<double>* grad = nullptr,
                          std::vector<bool>* log_signs = nullptr);

/// Sum over resolutions of both terms.
double multiscale_stft_loss(std::span<const double> predicted, std::span<const double> reference,
                            std::span<const StftResolution> resolutions,
                            std::vector<double>* grad = nullptr,
                            std::vector<bool>* log_signs = nullptr);

struct LsganLosses {
  double d_loss = 0.0;
  double g_loss = 0.0;
};

/// d = mean((real - 1)^2) + mean(fake^2); g = mean((fake - 1)^2).
LsganLosses lsgan_losses(std::span<const double> disc_real, std::span<const double> disc_fake);

}  // namespace neuco::synth
