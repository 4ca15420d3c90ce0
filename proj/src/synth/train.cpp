#include "neuco/synth/train.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <sstream>

#include "neuco/error.hpp"

namespace neuco::synth {

namespace {

bool all_finite(std::span<const double> v) {
  return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
}

}  // namespace

Discriminator build_discriminator(std::uint32_t channels, std::uint64_t seed) {
  Discriminator d;
  d.layers.push_back(Conv1d::create(d.params, "disc.0", 1, channels, 7, 1, 3));
  d.layers.push_back(Conv1d::create(d.params, "disc.1", channels, channels, 8, 4, 2));
  d.layers.push_back(Conv1d::create(d.params, "disc.2", channels, channels, 8, 4, 2));
  d.layers.push_back(Conv1d::create(d.params, "disc.3", channels, 1, 3, 1, 1));
  init_uniform_fan_in(d.params, seed);
  return d;
}

std::vector<double> Discriminator::forward(std::span<const double> audio, Cache* cache) const {
  if (audio.size() % 16 != 0) throw ValidationError("discriminator input length must divide by 16");
  Tensor x(1, audio.size());
  std::copy(audio.begin(), audio.end(), x.data.begin());
  if (cache) {
    cache->inputs.clear();
    cache->pre.clear();
  }
  for (std::size_t i = 0; i < layers.size(); ++i) {
    Tensor y = layers[i].forward(params, x);
    if (cache) {
      cache->inputs.push_back(x);
      cache->pre.push_back(y);
    }
    x = i + 1 < layers.size() ? leaky_relu(y, leaky_slope) : std::move(y);
  }
  return x.data;
}

std::vector<double> Discriminator::backward(const Cache& cache, std::span<const double> grad_out) {
  Tensor g(1, grad_out.size());
  std::copy(grad_out.begin(), grad_out.end(), g.data.begin());
  for (std::size_t i = layers.size(); i-- > 0;) {
    if (i + 1 < layers.size()) g = leaky_relu_backward(cache.pre[i], g, leaky_slope);
    g = layers[i].backward(params, cache.inputs[i], g, true);
  }
  return g.data;
}

void Adam::step(ParamSet& params) {
  if (m.size() != params.size()) {
    m.assign(params.size(), {});
    v.assign(params.size(), {});
    for (std::size_t i = 0; i < params.size(); ++i) {
      m[i].assign(params[i].value.size(), 0.0);
      v[i].assign(params[i].value.size(), 0.0);
    }
  }
  ++t;
  const double c1 = 1.0 - std::pow(beta1, static_cast<double>(t));
  const double c2 = 1.0 - std::pow(beta2, static_cast<double>(t));
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto& p = params[i];
    for (std::size_t j = 0; j < p.value.size(); ++j) {
      const double g = p.grad[j];
      m[i][j] = beta1 * m[i][j] + (1.0 - beta1) * g;
      v[i][j] = beta2 * v[i][j] + (1.0 - beta2) * g * g;
      const double mhat = m[i][j] / c1;
      const double vhat = v[i][j] / c2;
      p.value[j] -= lr * mhat / (std::sqrt(vhat) + eps);
    }
  }
}

namespace {

// Loss of an already generated waveform. When grad is set it receives
// dLoss/d(audio); the adversarial term needs disc_cache in that case.
GeneratorLoss loss_on_audio(const std::vector<double>& audio, const Discriminator& disc,
                            const TrainBatch& batch, const LossOptions& options,
                            std::vector<double>* grad, Discriminator::Cache* disc_cache,
                            std::vector<bool>* log_signs = nullptr) {
  if (audio.size() != batch.target.size()) {
    throw ValidationError("target audio has " + std::to_string(batch.target.size()) +
                          " samples, generator produced " + std::to_string(audio.size()));
  }
  GeneratorLoss loss;
  if (grad) grad->assign(audio.size(), 0.0);

  if (options.kind == GeneratorLossKind::kMeanSquared) {
    // Compensated sum: the loss is mostly constant target energy, and plain
    // accumulation noise would swamp small finite differences.
    const double n = static_cast<double>(audio.size());
    double sum = 0.0, carry = 0.0;
    for (std::size_t i = 0; i < audio.size(); ++i) {
      const double d = audio[i] - batch.target[i];
      const double term = d * d;
      const double t = sum + term;
      carry += std::abs(sum) >= std::abs(term) ? (sum - t) + term : (term - t) + sum;
      sum = t;
      if (grad) (*grad)[i] = 2.0 * d / n;
    }
    loss.total = (sum + carry) / n;
  } else {
    loss.stft = multiscale_stft_loss(audio, batch.target, options.resolutions, grad, log_signs);
    const auto fake = disc.forward(audio, disc_cache);
    double g = 0.0;
    std::vector<double> g_fake(fake.size());
    for (std::size_t i = 0; i < fake.size(); ++i) {
      g += (fake[i] - 1.0) * (fake[i] - 1.0);
      g_fake[i] = options.adversarial_weight * 2.0 * (fake[i] - 1.0) / static_cast<double>(fake.size());
    }
    loss.adversarial = g / static_cast<double>(fake.size());
    loss.total = loss.stft + options.adversarial_weight * loss.adversarial;
    if (grad) {
      // The discriminator is a const input; its grads go to a scratch copy.
      Discriminator scratch = disc;
      const auto g_audio = scratch.backward(*disc_cache, g_fake);
      for (std::size_t i = 0; i < grad->size(); ++i) (*grad)[i] += g_audio[i];
    }
  }
  if (!std::isfinite(loss.total)) {
    std::ostringstream msg;
    msg << "non-finite generator loss (stft=" << loss.stft << ", adversarial=" << loss.adversarial
        << ")";
    throw TrainingError(msg.str());
  }
  return loss;
}

// Which side of zero every leaky-rectifier input sits on.
std::vector<bool> activation_signs(const GeneratorCache& g, const Discriminator::Cache* d) {
  std::vector<bool> out;
  const auto add = [&](const Tensor& t) {
    for (double v : t.data) out.push_back(v < 0.0);
  };
  for (const auto* stream : {&g.net.harmonic, &g.net.loudness}) {
    for (const auto& t : stream->pre) add(t);
  }
  for (const auto& u : g.net.up) {
    add(u.pre);
    add(u.modulated);
  }
  add(g.net.last);
  add(g.estimator_pre);
  if (d) {
    for (std::size_t i = 0; i + 1 < d->pre.size(); ++i) add(d->pre[i]);
  }
  return out;
}

}  // namespace

GeneratorLoss generator_loss(SynthModel& model, const Discriminator& disc, const TrainBatch& batch,
                             const LossOptions& options, bool with_grad) {
  GeneratorCache cache;
  const auto audio = generate(model, batch.values, batch.loudness, batch.p, batch.z, cache);
  std::vector<double> grad;
  Discriminator::Cache dc;
  const auto loss = loss_on_audio(audio, disc, batch, options, with_grad ? &grad : nullptr,
                                  with_grad ? &dc : nullptr);
  if (with_grad) {
    model.params.zero_grad();
    generate_backward(model, cache, grad);
  }
  return loss;
}

Trainer::Trainer(SynthModel& model, const TrainOptions& options)
    : model_(model),
      options_(options),
      disc_(build_discriminator(options.disc_channels, options.seed ^ 0x9E3779B97F4A7C15ull)) {
  gen_opt_.lr = options.learning_rate;
  disc_opt_.lr = options.learning_rate;
}

LossReport Trainer::step(const TrainBatch& batch) {
  LossReport report;
  report.step = ++steps_;

  // Discriminator update on the current generator output.
  {
    GeneratorCache cache;
    const auto fake_audio = generate(model_, batch.values, batch.loudness, batch.p, batch.z, cache);
    if (!all_finite(fake_audio)) {
      throw TrainingError("non-finite generator output at step " + std::to_string(report.step));
    }
    Discriminator::Cache real_cache, fake_cache;
    const auto real = disc_.forward(batch.target, &real_cache);
    const auto fake = disc_.forward(fake_audio, &fake_cache);
    const auto d = lsgan_losses(real, fake);
    report.discriminator = d.d_loss;
    if (!std::isfinite(d.d_loss)) {
      throw TrainingError("non-finite discriminator loss at step " + std::to_string(report.step));
    }
    std::vector<double> g_real(real.size()), g_fake(fake.size());
    for (std::size_t i = 0; i < real.size(); ++i) g_real[i] = 2.0 * (real[i] - 1.0) / static_cast<double>(real.size());
    for (std::size_t i = 0; i < fake.size(); ++i) g_fake[i] = 2.0 * fake[i] / static_cast<double>(fake.size());
    disc_.params.zero_grad();
    disc_.backward(real_cache, g_real);
    disc_.backward(fake_cache, g_fake);
    disc_opt_.step(disc_.params);
  }

  const auto g = generator_loss(model_, disc_, batch, options_.loss, true);
  report.generator_total = g.total;
  report.stft = g.stft;
  report.adversarial = g.adversarial;
  gen_opt_.step(model_.params);
  return report;
}

std::string format_report(const LossReport& r) {
  std::ostringstream s;
  s.precision(8);
  s << "step=" << r.step << " generator=" << r.generator_total << " stft=" << r.stft
    << " adversarial=" << r.adversarial << " discriminator=" << r.discriminator;
  return s.str();
}

GradCheckReport gradient_check(SynthModel& model, const Discriminator& disc,
                               const TrainBatch& batch, const GradCheckOptions& options) {
  generator_loss(model, disc, batch, options.loss, true);
  if (options.tamper) options.tamper(model.params);

  // Flattened (param, element) pairs, visited in a seeded random order.
  std::vector<std::pair<std::size_t, std::size_t>> all;
  for (std::size_t i = 0; i < model.params.size(); ++i) {
    for (std::size_t j = 0; j < model.params[i].value.size(); ++j) all.emplace_back(i, j);
  }
  std::mt19937_64 rng(options.seed);
  std::shuffle(all.begin(), all.end(), rng);

  const bool mse = options.loss.kind == GeneratorLossKind::kMeanSquared;
  // The STFT term's absolute log difference is a kink of its own.
  const bool has_kinks = !mse || model.config.leaky_slope != 1.0;

  struct Probe {
    std::vector<double> audio;
    double loss = 0.0;
    std::vector<bool> signs;
  };
  const auto probe = [&]() {
    Probe p;
    GeneratorCache gc;
    p.audio = generate(model, batch.values, batch.loudness, batch.p, batch.z, gc);
    Discriminator::Cache dc;
    std::vector<bool> log_signs;
    if (!mse) {
      p.loss = loss_on_audio(p.audio, disc, batch, options.loss, nullptr, &dc, &log_signs).total;
    }
    if (has_kinks) {
      p.signs = activation_signs(gc, mse ? nullptr : &dc);
      p.signs.insert(p.signs.end(), log_signs.begin(), log_signs.end());
    }
    return p;
  };

  GradCheckReport report;
  for (auto [pi, ej] : all) {
    if (report.checked >= options.n_params) break;
    auto& param = model.params[pi];
    const double analytic = param.grad[ej];
    const double saved = param.value[ej];
    param.value[ej] = saved + options.epsilon;
    const Probe up = probe();
    param.value[ej] = saved - options.epsilon;
    const Probe down = probe();
    param.value[ej] = saved;

    // A rectifier input (or STFT log ratio) changing sign inside [theta - eps, theta + eps]
    // means the loss is not differentiable there; the difference quotient
    // says nothing about the gradient at theta.
    if (up.signs != down.signs) {
      ++report.skipped_kinks;
      continue;
    }

    double numeric = 0.0;
    if (mse) {
      // Same central difference, evaluated as sum (y+ - y-)(y+ + y- - 2t) / n
      // so the constant target energy does not cancel in the subtraction.
      double acc = 0.0;
      for (std::size_t i = 0; i < up.audio.size(); ++i) {
        acc += (up.audio[i] - down.audio[i]) * (up.audio[i] + down.audio[i] - 2.0 * batch.target[i]);
      }
      numeric = acc / static_cast<double>(up.audio.size()) / (2.0 * options.epsilon);
    } else {
      numeric = (up.loss - down.loss) / (2.0 * options.epsilon);
    }

    const double denom = std::max({std::abs(analytic), std::abs(numeric), options.floor});
    const double rel = std::abs(analytic - numeric) / denom;
    ++report.checked;
    if (rel >= report.max_relative_error) {
      report.max_relative_error = rel;
      report.worst_param = param.name;
      report.worst_index = ej;
      report.worst_analytic = analytic;
      report.worst_numeric = numeric;
    }
  }
  return report;
}

}  // namespace neuco::synth
