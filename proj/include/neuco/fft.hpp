#pragma once

#include <complex>
#include <cstddef>
#include <span>

namespace neuco::dsp {

/// Real-input DFT of a fixed size backed by FFTW (double precision).
/// forward(): X[k] = sum_n x[n] exp(-2 pi i k n / N), k = 0..N/2.
/// inverse(): unnormalized Hermitian inverse, y[n] = sum_{k=0}^{N-1} Y[k] exp(+2 pi i k n / N).
/// Not safe to share one instance between threads; separate instances are.
class RealFft {
 public:
  explicit RealFft(std::size_t n);
  ~RealFft();
  RealFft(const RealFft&) = delete;
  RealFft& operator=(const RealFft&) = delete;
  RealFft(RealFft&&) noexcept;
  RealFft& operator=(RealFft&&) noexcept;

  std::size_t size() const { return n_; }
  std::size_t bins() const { return n_ / 2 + 1; }

  void forward(std::span<const double> in, std::span<std::complex<double>> out);
  void inverse(std::span<const std::complex<double>> in, std::span<double> out);

 private:
  void release();

  std::size_t n_ = 0;
  double* real_ = nullptr;
  void* spec_ = nullptr;
  void* fwd_ = nullptr;
  void* inv_ = nullptr;
};

}  // namespace neuco::dsp
