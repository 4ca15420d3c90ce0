#include "neuco/synth/layers.hpp"

#include <algorithm>
#include <cmath>

#include "neuco/error.hpp"

namespace neuco::synth {

namespace {

// Range of output positions t for which t*stride + offset lies in [0, len).
std::pair<long, long> valid_range(long offset, long stride, long len, long out_len) {
  long lo = offset >= 0 ? 0 : (-offset + stride - 1) / stride;
  long hi = (len - 1 - offset) < 0 ? -1 : (len - 1 - offset) / stride;
  return {lo, std::min(hi, out_len - 1)};
}

}  // namespace

std::size_t ParamSet::add(std::string name, std::vector<std::uint32_t> shape,
                          std::size_t fan_in) {
  std::size_t count = 1;
  for (auto d : shape) count *= d;
  if (index_.count(name)) throw ValidationError("duplicate parameter name " + name);
  index_[name] = params_.size();
  params_.push_back({std::move(name), std::move(shape), std::vector<double>(count, 0.0),
                     std::vector<double>(count, 0.0), fan_in});
  return params_.size() - 1;
}

std::size_t ParamSet::find(const std::string& name) const {
  auto it = index_.find(name);
  return it == index_.end() ? params_.size() : it->second;
}

std::size_t ParamSet::scalar_count() const {
  std::size_t n = 0;
  for (const auto& p : params_) n += p.value.size();
  return n;
}

void ParamSet::zero_grad() {
  for (auto& p : params_) std::fill(p.grad.begin(), p.grad.end(), 0.0);
}

bool ParamSet::operator==(const ParamSet& o) const {
  if (params_.size() != o.params_.size()) return false;
  for (std::size_t i = 0; i < params_.size(); ++i) {
    const auto& a = params_[i];
    const auto& b = o.params_[i];
    if (a.name != b.name || a.shape != b.shape || a.value != b.value) return false;
  }
  return true;
}

Conv1d Conv1d::create(ParamSet& ps, const std::string& name, std::size_t in_ch,
                      std::size_t out_ch, std::size_t kernel, std::size_t stride,
                      std::size_t pad) {
  Conv1d c;
  c.in_ch = in_ch;
  c.out_ch = out_ch;
  c.kernel = kernel;
  c.stride = stride;
  c.pad = pad;
  c.weight = ps.add(name + ".weight", {static_cast<std::uint32_t>(out_ch),
                                        static_cast<std::uint32_t>(in_ch),
                                        static_cast<std::uint32_t>(kernel)},
                   in_ch * kernel);
  c.bias = ps.add(name + ".bias", {static_cast<std::uint32_t>(out_ch)});
  return c;
}

Tensor Conv1d::forward(const ParamSet& ps, const Tensor& x) const {
  if (x.channels != in_ch) throw ValidationError("conv input channel mismatch");
  if (x.length % stride != 0) throw ValidationError("conv input length not divisible by stride");
  const std::size_t out_len = x.length / stride;
  Tensor y(out_ch, out_len);
  const auto& w = ps[weight].value;
  const auto& b = ps[bias].value;
  const long s = static_cast<long>(stride);
  for (std::size_t o = 0; o < out_ch; ++o) {
    auto yo = y.row(o);
    std::fill(yo.begin(), yo.end(), b[o]);
    for (std::size_t c = 0; c < in_ch; ++c) {
      auto xc = x.row(c);
      for (std::size_t j = 0; j < kernel; ++j) {
        const double wv = w[(o * in_ch + c) * kernel + j];
        const long off = static_cast<long>(j) - static_cast<long>(pad);
        auto [lo, hi] = valid_range(off, s, static_cast<long>(x.length), static_cast<long>(out_len));
        for (long t = lo; t <= hi; ++t) yo[t] += wv * xc[t * s + off];
      }
    }
  }
  return y;
}

Tensor Conv1d::backward(ParamSet& ps, const Tensor& x, const Tensor& grad_out,
                        bool need_input_grad) const {
  const std::size_t out_len = grad_out.length;
  auto& w = ps[weight].value;
  auto& gw = ps[weight].grad;
  auto& gb = ps[bias].grad;
  Tensor gx = need_input_grad ? Tensor(in_ch, x.length) : Tensor();
  const long s = static_cast<long>(stride);
  for (std::size_t o = 0; o < out_ch; ++o) {
    auto go = grad_out.row(o);
    double bsum = 0.0;
    for (double g : go) bsum += g;
    gb[o] += bsum;
    for (std::size_t c = 0; c < in_ch; ++c) {
      auto xc = x.row(c);
      for (std::size_t j = 0; j < kernel; ++j) {
        const std::size_t wi = (o * in_ch + c) * kernel + j;
        const long off = static_cast<long>(j) - static_cast<long>(pad);
        auto [lo, hi] = valid_range(off, s, static_cast<long>(x.length), static_cast<long>(out_len));
        double acc = 0.0;
        for (long t = lo; t <= hi; ++t) acc += go[t] * xc[t * s + off];
        gw[wi] += acc;
        if (need_input_grad) {
          auto gxc = gx.row(c);
          const double wv = w[wi];
          for (long t = lo; t <= hi; ++t) gxc[t * s + off] += wv * go[t];
        }
      }
    }
  }
  return gx;
}

ConvTranspose1d ConvTranspose1d::create(ParamSet& ps, const std::string& name,
                                        std::size_t in_ch, std::size_t out_ch,
                                        std::size_t stride) {
  ConvTranspose1d c;
  c.in_ch = in_ch;
  c.out_ch = out_ch;
  c.stride = stride;
  c.kernel = 2 * stride;
  c.crop = stride / 2;
  c.weight = ps.add(name + ".weight", {static_cast<std::uint32_t>(in_ch),
                                        static_cast<std::uint32_t>(out_ch),
                                        static_cast<std::uint32_t>(c.kernel)},
                   in_ch * 2);
  c.bias = ps.add(name + ".bias", {static_cast<std::uint32_t>(out_ch)});
  return c;
}

Tensor ConvTranspose1d::forward(const ParamSet& ps, const Tensor& x) const {
  if (x.channels != in_ch) throw ValidationError("transposed conv input channel mismatch");
  const std::size_t out_len = x.length * stride;
  Tensor y(out_ch, out_len);
  const auto& w = ps[weight].value;
  const auto& b = ps[bias].value;
  const long s = static_cast<long>(stride);
  const long len = static_cast<long>(out_len);
  for (std::size_t o = 0; o < out_ch; ++o) {
    auto yo = y.row(o);
    std::fill(yo.begin(), yo.end(), b[o]);
    for (std::size_t c = 0; c < in_ch; ++c) {
      auto xc = x.row(c);
      for (std::size_t j = 0; j < kernel; ++j) {
        const double wv = w[(c * out_ch + o) * kernel + j];
        const long off = static_cast<long>(j) - static_cast<long>(crop);
        auto [lo, hi] = valid_range(off, s, len, static_cast<long>(x.length));
        for (long t = lo; t <= hi; ++t) yo[t * s + off] += wv * xc[t];
      }
    }
  }
  return y;
}

Tensor ConvTranspose1d::backward(ParamSet& ps, const Tensor& x, const Tensor& grad_out,
                                 bool need_input_grad) const {
  auto& w = ps[weight].value;
  auto& gw = ps[weight].grad;
  auto& gb = ps[bias].grad;
  Tensor gx = need_input_grad ? Tensor(in_ch, x.length) : Tensor();
  const long s = static_cast<long>(stride);
  const long len = static_cast<long>(grad_out.length);
  for (std::size_t o = 0; o < out_ch; ++o) {
    auto go = grad_out.row(o);
    double bsum = 0.0;
    for (double g : go) bsum += g;
    gb[o] += bsum;
    for (std::size_t c = 0; c < in_ch; ++c) {
      auto xc = x.row(c);
      for (std::size_t j = 0; j < kernel; ++j) {
        const std::size_t wi = (c * out_ch + o) * kernel + j;
        const long off = static_cast<long>(j) - static_cast<long>(crop);
        auto [lo, hi] = valid_range(off, s, len, static_cast<long>(x.length));
        double acc = 0.0;
        for (long t = lo; t <= hi; ++t) acc += go[t * s + off] * xc[t];
        gw[wi] += acc;
        if (need_input_grad) {
          auto gxc = gx.row(c);
          const double wv = w[wi];
          for (long t = lo; t <= hi; ++t) gxc[t] += wv * go[t * s + off];
        }
      }
    }
  }
  return gx;
}

Tensor leaky_relu(const Tensor& x, double slope) {
  Tensor y = x;
  for (auto& v : y.data) {
    if (v < 0.0) v *= slope;
  }
  return y;
}

Tensor leaky_relu_backward(const Tensor& x, const Tensor& grad_out, double slope) {
  Tensor g = grad_out;
  for (std::size_t i = 0; i < g.data.size(); ++i) {
    if (x.data[i] < 0.0) g.data[i] *= slope;
  }
  return g;
}

void init_uniform_fan_in(ParamSet& ps, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  for (auto& p : ps.all()) {
    if (p.fan_in == 0) {
      std::fill(p.value.begin(), p.value.end(), 0.0);
      continue;
    }
    const double bound = 1.0 / std::sqrt(static_cast<double>(p.fan_in));
    std::uniform_real_distribution<double> dist(-bound, bound);
    for (auto& v : p.value) v = static_cast<float>(dist(rng));
  }
}

}  // namespace neuco::synth
