#pragma once

// Minimal channel-major tensors, named parameter storage and 1-D
// convolution layers with hand-written backward passes (64-bit).

#include <cstddef>
#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

namespace neuco::synth {

/// [channels x length], channel-major.
struct Tensor {
  std::size_t channels = 0;
  std::size_t length = 0;
  std::vector<double> data;

  Tensor() = default;
  Tensor(std::size_t c, std::size_t l) : channels(c), length(l), data(c * l, 0.0) {}

  double& at(std::size_t c, std::size_t t) { return data[c * length + t]; }
  double at(std::size_t c, std::size_t t) const { return data[c * length + t]; }
  std::span<double> row(std::size_t c) { return {data.data() + c * length, length}; }
  std::span<const double> row(std::size_t c) const { return {data.data() + c * length, length}; }
};

struct Param {
  std::string name;
  std::vector<std::uint32_t> shape;
  std::vector<double> value;
  std::vector<double> grad;
  /// Inputs contributing to one output; 0 for biases.
  std::size_t fan_in = 0;
};

/// Ordered, name-addressable parameters. Shapes are fixed at registration.
class ParamSet {
 public:
  std::size_t add(std::string name, std::vector<std::uint32_t> shape, std::size_t fan_in = 0);

  std::size_t size() const { return params_.size(); }
  Param& operator[](std::size_t i) { return params_[i]; }
  const Param& operator[](std::size_t i) const { return params_[i]; }
  std::vector<Param>& all() { return params_; }
  const std::vector<Param>& all() const { return params_; }

  /// Index of a parameter by name, or size() if absent.
  std::size_t find(const std::string& name) const;
  std::size_t scalar_count() const;
  void zero_grad();

  bool operator==(const ParamSet& o) const;

 private:
  std::vector<Param> params_;
  std::unordered_map<std::string, std::size_t> index_;
};

/// y[o][t] = b[o] + sum_{c,j} W[o][c][j] x[c][t*stride + j - pad].
/// Output length is length / stride (length must divide).
struct Conv1d {
  std::size_t weight = 0;
  std::size_t bias = 0;
  std::size_t in_ch = 0;
  std::size_t out_ch = 0;
  std::size_t kernel = 0;
  std::size_t stride = 1;
  std::size_t pad = 0;

  static Conv1d create(ParamSet& ps, const std::string& name, std::size_t in_ch,
                       std::size_t out_ch, std::size_t kernel, std::size_t stride,
                       std::size_t pad);
  Tensor forward(const ParamSet& ps, const Tensor& x) const;
  /// Accumulates into the parameter grads; returns dL/dx when need_input_grad.
  Tensor backward(ParamSet& ps, const Tensor& x, const Tensor& grad_out,
                  bool need_input_grad) const;
};

/// Transposed convolution with kernel 2*stride, cropped so that the output
/// length is exactly length * stride.
struct ConvTranspose1d {
  std::size_t weight = 0;
  std::size_t bias = 0;
  std::size_t in_ch = 0;
  std::size_t out_ch = 0;
  std::size_t kernel = 0;
  std::size_t stride = 1;
  std::size_t crop = 0;

  static ConvTranspose1d create(ParamSet& ps, const std::string& name, std::size_t in_ch,
                                std::size_t out_ch, std::size_t stride);
  Tensor forward(const ParamSet& ps, const Tensor& x) const;
  Tensor backward(ParamSet& ps, const Tensor& x, const Tensor& grad_out,
                  bool need_input_grad) const;
};

Tensor leaky_relu(const Tensor& x, double slope);
/// dL/dx given the pre-activation x.
Tensor leaky_relu_backward(const Tensor& x, const Tensor& grad_out, double slope);

/// Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) weights rounded to float
/// precision; biases zero.
void init_uniform_fan_in(ParamSet& ps, std::uint64_t seed);

}  // namespace neuco::synth
