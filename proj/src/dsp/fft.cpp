#include "neuco/fft.hpp"

#include <fftw3.h>

#include <algorithm>
#include <cstring>
#include <mutex>
#include <utility>

#include "neuco/error.hpp"

namespace neuco::dsp {

namespace {
// The FFTW planner is not re-entrant.
std::mutex& planner_mutex() {
  static std::mutex m;
  return m;
}
}  // namespace

RealFft::RealFft(std::size_t n) : n_(n) {
  if (n < 2) throw ValidationError("FFT size must be at least 2");
  std::lock_guard lock(planner_mutex());
  real_ = fftw_alloc_real(n);
  auto* spec = fftw_alloc_complex(n / 2 + 1);
  spec_ = spec;
  const int ni = static_cast<int>(n);
  fwd_ = fftw_plan_dft_r2c_1d(ni, real_, spec, FFTW_ESTIMATE);
  inv_ = fftw_plan_dft_c2r_1d(ni, spec, real_, FFTW_ESTIMATE);
}

RealFft::~RealFft() { release(); }

RealFft::RealFft(RealFft&& o) noexcept
    : n_(std::exchange(o.n_, 0)),
      real_(std::exchange(o.real_, nullptr)),
      spec_(std::exchange(o.spec_, nullptr)),
      fwd_(std::exchange(o.fwd_, nullptr)),
      inv_(std::exchange(o.inv_, nullptr)) {}

RealFft& RealFft::operator=(RealFft&& o) noexcept {
  if (this != &o) {
    release();
    n_ = std::exchange(o.n_, 0);
    real_ = std::exchange(o.real_, nullptr);
    spec_ = std::exchange(o.spec_, nullptr);
    fwd_ = std::exchange(o.fwd_, nullptr);
    inv_ = std::exchange(o.inv_, nullptr);
  }
  return *this;
}

void RealFft::release() {
  if (!real_) return;
  std::lock_guard lock(planner_mutex());
  fftw_destroy_plan(static_cast<fftw_plan>(fwd_));
  fftw_destroy_plan(static_cast<fftw_plan>(inv_));
  fftw_free(real_);
  fftw_free(spec_);
  real_ = nullptr;
  spec_ = nullptr;
}

void RealFft::forward(std::span<const double> in, std::span<std::complex<double>> out) {
  std::copy(in.begin(), in.begin() + static_cast<long>(n_), real_);
  fftw_execute(static_cast<fftw_plan>(fwd_));
  std::memcpy(static_cast<void*>(out.data()), spec_, bins() * sizeof(fftw_complex));
}

void RealFft::inverse(std::span<const std::complex<double>> in, std::span<double> out) {
  // c2r destroys its input, so it always runs on the internal buffer.
  std::memcpy(spec_, static_cast<const void*>(in.data()), bins() * sizeof(fftw_complex));
  fftw_execute(static_cast<fftw_plan>(inv_));
  std::copy(real_, real_ + n_, out.begin());
}

}  // namespace neuco::dsp
