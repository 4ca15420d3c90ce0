#pragma once

// Toy-scale adversarial training: discriminator, Adam, one training step,
// and a finite-difference gradient checker.

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "neuco/feature_store.hpp"
#include "neuco/synth/losses.hpp"
#include "neuco/synth/model.hpp"

namespace neuco::synth {

/// Small strided-conv discriminator producing a score map over time.
struct Discriminator {
  ParamSet params;
  std::vector<Conv1d> layers;
  double leaky_slope = 0.2;

  struct Cache {
    std::vector<Tensor> inputs;  // input to each layer
    std::vector<Tensor> pre;     // pre-activation outputs
  };

  /// Input length must be divisible by 16.
  std::vector<double> forward(std::span<const double> audio, Cache* cache = nullptr) const;
  /// Accumulates parameter grads; returns dL/d(audio).
  std::vector<double> backward(const Cache& cache, std::span<const double> grad_out);
};

Discriminator build_discriminator(std::uint32_t channels, std::uint64_t seed);

struct Adam {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  std::vector<std::vector<double>> m;
  std::vector<std::vector<double>> v;
  std::uint64_t t = 0;

  void step(ParamSet& params);
};

/// One training example on the 10 ms grid.
struct TrainBatch {
  features::Matrix values;       // [T x value_dim]
  std::vector<double> loudness;  // [T]
  std::vector<double> p;         // [240 T] raw excitation
  std::vector<double> z;         // [240 T] noise
  std::vector<double> target;    // [240 T] reference audio
};

enum class GeneratorLossKind {
  kStftPlusAdversarial,
  /// Mean squared error to the target; with leaky_slope = 1 the model is
  /// linear in each parameter and this loss is exactly quadratic.
  kMeanSquared,
};

struct LossOptions {
  GeneratorLossKind kind = GeneratorLossKind::kStftPlusAdversarial;
  std::vector<StftResolution> resolutions = default_stft_resolutions();
  double adversarial_weight = 1.0;
};

struct GeneratorLoss {
  double total = 0.0;
  double stft = 0.0;
  double adversarial = 0.0;
};

/// Generator loss for a batch. When `with_grad` is set, parameter grads of
/// the model are zeroed and filled. The discriminator is read-only here.
GeneratorLoss generator_loss(SynthModel& model, const Discriminator& disc, const TrainBatch& batch,
                             const LossOptions& options, bool with_grad);

struct TrainOptions {
  double learning_rate = 1e-3;
  std::uint64_t seed = 0;
  std::uint32_t disc_channels = 8;
  LossOptions loss;
};

struct LossReport {
  std::uint64_t step = 0;
  double generator_total = 0.0;
  double stft = 0.0;
  double adversarial = 0.0;
  double discriminator = 0.0;
};

/// Holds the discriminator and both optimizer states. Single-threaded; it
/// mutates the model it was constructed with.
class Trainer {
 public:
  Trainer(SynthModel& model, const TrainOptions& options);

  /// Discriminator update followed by one generator update. The report holds
  /// losses evaluated before the generator update.
  LossReport step(const TrainBatch& batch);

  const Discriminator& discriminator() const { return disc_; }

 private:
  SynthModel& model_;
  TrainOptions options_;
  Discriminator disc_;
  Adam gen_opt_;
  Adam disc_opt_;
  std::uint64_t steps_ = 0;
};

/// One line of the plain-text training log.
std::string format_report(const LossReport& r);

struct GradCheckOptions {
  std::size_t n_params = 128;
  double epsilon = 1e-4;
  std::uint64_t seed = 0;
  /// Relative error is |a - n| / max(|a|, |n|, floor).
  double floor = 1e-7;
  LossOptions loss;
  /// Test hook: may alter the analytic gradients before comparison.
  std::function<void(ParamSet&)> tamper;
};

struct GradCheckReport {
  std::size_t checked = 0;
  /// Samples dropped because a rectifier input or an STFT log ratio crossed
  /// zero within +-epsilon.
  std::size_t skipped_kinks = 0;
  double max_relative_error = 0.0;
  std::string worst_param;
  std::size_t worst_index = 0;
  double worst_analytic = 0.0;
  double worst_numeric = 0.0;
};

/// Central differences on a seeded random sample of parameters until
/// n_params of them have been compared.
GradCheckReport gradient_check(SynthModel& model, const Discriminator& disc,
                               const TrainBatch& batch, const GradCheckOptions& options);

}  // namespace neuco::synth
