#include "neuco/synth/model.hpp"

#include <algorithm>
#include <numeric>
#include <string>

#include "neuco/error.hpp"

namespace neuco::synth {

namespace {

Tensor values_to_tensor(const features::Matrix& values) {
  Tensor x(values.cols, values.rows);
  for (std::size_t t = 0; t < values.rows; ++t) {
    auto r = values.row(t);
    for (std::size_t c = 0; c < values.cols; ++c) x.at(c, t) = r[c];
  }
  return x;
}

Tensor concat_channels(const Tensor& a, const Tensor& b) {
  Tensor out(a.channels + b.channels, a.length);
  std::copy(a.data.begin(), a.data.end(), out.data.begin());
  std::copy(b.data.begin(), b.data.end(), out.data.begin() + static_cast<long>(a.data.size()));
  return out;
}

void add_into(Tensor& dst, const Tensor& src) {
  for (std::size_t i = 0; i < dst.data.size(); ++i) dst.data[i] += src.data[i];
}

DownStream make_stream(ParamSet& ps, const std::string& name, const SynthConfig& cfg,
                       std::size_t in_ch) {
  DownStream s;
  s.input = Conv1d::create(ps, name + ".input", in_ch, cfg.cond_channels, 3, 1, 1);
  for (std::size_t d = 0; d < kDownBlocks; ++d) {
    const std::size_t f = cfg.down_factors[d];
    s.blocks[d] = Conv1d::create(ps, name + "." + std::to_string(d), cfg.cond_channels,
                                 cfg.cond_channels, 2 * f, f, f / 2);
  }
  return s;
}

void stream_forward(const SynthModel& m, const DownStream& s, Tensor input,
                    ForwardCache::Stream& c) {
  const double slope = m.config.leaky_slope;
  c.input = std::move(input);
  c.pre[0] = s.input.forward(m.params, c.input);
  c.level[0] = leaky_relu(c.pre[0], slope);
  for (std::size_t d = 0; d < kDownBlocks; ++d) {
    c.pre[d + 1] = s.blocks[d].forward(m.params, c.level[d]);
    c.level[d + 1] = leaky_relu(c.pre[d + 1], slope);
  }
}

// grad_levels[d] holds dL/d(level d); returns dL/d(stream input).
Tensor stream_backward(SynthModel& m, const DownStream& s, const ForwardCache::Stream& c,
                       std::array<Tensor, kDownBlocks + 1> grad_levels, bool need_input_grad) {
  const double slope = m.config.leaky_slope;
  for (std::size_t d = kDownBlocks; d >= 1; --d) {
    Tensor g_pre = leaky_relu_backward(c.pre[d], grad_levels[d], slope);
    add_into(grad_levels[d - 1], s.blocks[d - 1].backward(m.params, c.level[d - 1], g_pre, true));
  }
  Tensor g_pre0 = leaky_relu_backward(c.pre[0], grad_levels[0], slope);
  return s.input.backward(m.params, c.input, g_pre0, need_input_grad);
}

FilmParams split_film(const Tensor& film_out, std::size_t channels) {
  FilmParams fp{Tensor(channels, film_out.length), Tensor(channels, film_out.length)};
  for (std::size_t c = 0; c < channels; ++c) {
    auto g = film_out.row(c);
    auto b = film_out.row(channels + c);
    auto dg = fp.gamma.row(c);
    auto db = fp.beta.row(c);
    for (std::size_t t = 0; t < film_out.length; ++t) {
      dg[t] = 1.0 + g[t];
      db[t] = b[t];
    }
  }
  return fp;
}

Tensor estimator_input(const features::Matrix& values, std::span<const double> loudness) {
  Tensor e(values.cols + 1, values.rows);
  for (std::size_t t = 0; t < values.rows; ++t) {
    auto r = values.row(t);
    for (std::size_t c = 0; c < values.cols; ++c) e.at(c, t) = r[c];
    e.at(values.cols, t) = loudness[t];
  }
  return e;
}

LtvFilters filters_from(const Tensor& out, std::size_t taps, std::size_t hop) {
  LtvFilters f;
  f.h1 = {hop, taps, std::vector<double>(out.length * taps)};
  f.h2 = {hop, taps, std::vector<double>(out.length * taps)};
  for (std::size_t m = 0; m < out.length; ++m) {
    for (std::size_t j = 0; j < taps; ++j) {
      f.h1.coeffs[m * taps + j] = out.at(j, m);
      f.h2.coeffs[m * taps + j] = out.at(taps + j, m);
    }
  }
  return f;
}

void check_inputs(const SynthModel& model, const features::Matrix& values,
                  std::size_t n_loudness) {
  if (values.rows == 0) throw ValidationError("synthesizer input has no frames");
  if (values.cols != model.config.value_dim) {
    throw ValidationError("value_dim " + std::to_string(values.cols) +
                          " does not match model value_dim " +
                          std::to_string(model.config.value_dim));
  }
  if (n_loudness != values.rows) {
    throw ValidationError("loudness has " + std::to_string(n_loudness) + " frames, values have " +
                          std::to_string(values.rows));
  }
}

}  // namespace

void validate(const SynthConfig& cfg) {
  if (cfg.sample_rate_out != 24000) throw ValidationError("output sample rate must be 24000 Hz");
  const auto prod = std::accumulate(cfg.up_factors.begin(), cfg.up_factors.end(), 1u,
                                    std::multiplies<>());
  if (prod != cfg.samples_per_frame()) {
    throw ValidationError("up_factors multiply to " + std::to_string(prod) + ", expected " +
                          std::to_string(cfg.samples_per_frame()));
  }
  for (std::size_t d = 0; d < kDownBlocks; ++d) {
    if (cfg.down_factors[d] != cfg.up_factors[kUpBlocks - 1 - d]) {
      throw ValidationError("down_factors must mirror up_factors[1..4] in reverse");
    }
  }
  if (std::find(cfg.up_factors.begin(), cfg.up_factors.end(), 0u) != cfg.up_factors.end()) {
    throw ValidationError("zero up-sampling factor");
  }
  if (cfg.value_dim == 0 || cfg.base_channels == 0 || cfg.cond_channels == 0 ||
      cfg.ltv_taps == 0 || cfg.estimator_hidden == 0) {
    throw ValidationError("synthesizer widths must be positive");
  }
  if (cfg.harmonic_channels != 2 || cfg.loudness_channels != 1) {
    throw ValidationError("harmonic_channels must be 2 and loudness_channels 1");
  }
  if (!(cfg.leaky_slope >= 0.0 && cfg.leaky_slope <= 1.0)) {
    throw ValidationError("leaky_slope must lie in [0, 1]");
  }
}

SynthModel build_model_shapes(const SynthConfig& config) {
  validate(config);
  SynthModel m;
  m.config = config;
  auto& ps = m.params;
  const std::size_t c = config.base_channels;
  m.input = Conv1d::create(ps, "input", config.value_dim, c, 3, 1, 1);
  for (std::size_t i = 0; i < kUpBlocks; ++i) {
    const std::string name = "up." + std::to_string(i);
    m.up[i].upsample = ConvTranspose1d::create(ps, name + ".upsample", c, c, config.up_factors[i]);
    m.up[i].film = Conv1d::create(ps, name + ".film", 2 * config.cond_channels, 2 * c, 1, 1, 0);
    m.up[i].residual = Conv1d::create(ps, name + ".residual", c, c, 3, 1, 1);
  }
  m.harmonic_stream = make_stream(ps, "down.harmonic", config, config.harmonic_channels);
  m.loudness_stream = make_stream(ps, "down.loudness", config, config.loudness_channels);
  m.output = Conv1d::create(ps, "output", c, 1, 3, 1, 1);
  m.estimator_hidden = Conv1d::create(ps, "ltv.hidden", config.value_dim + 1,
                                      config.estimator_hidden, 1, 1, 0);
  m.estimator_out = Conv1d::create(ps, "ltv.out", config.estimator_hidden,
                                   2 * config.ltv_taps, 1, 1, 0);
  return m;
}

SynthModel build_model(const SynthConfig& config, std::uint64_t seed) {
  SynthModel m = build_model_shapes(config);
  init_uniform_fan_in(m.params, seed);
  return m;
}

Tensor film(const Tensor& x, const FilmParams& cond) {
  if (cond.gamma.channels != x.channels || cond.gamma.length != x.length ||
      cond.beta.channels != x.channels || cond.beta.length != x.length) {
    throw ValidationError("FiLM parameter shape does not match the feature map");
  }
  Tensor y(x.channels, x.length);
  for (std::size_t i = 0; i < x.data.size(); ++i) {
    y.data[i] = cond.gamma.data[i] * x.data[i] + cond.beta.data[i];
  }
  return y;
}

LtvFilters estimate_ltv_filters(const features::Matrix& values, std::span<const double> loudness,
                                const SynthModel& model) {
  check_inputs(model, values, loudness.size());
  const Tensor e = estimator_input(values, loudness);
  const Tensor h = leaky_relu(model.estimator_hidden.forward(model.params, e), model.config.leaky_slope);
  return filters_from(model.estimator_out.forward(model.params, h), model.config.ltv_taps,
                      model.config.samples_per_frame());
}

std::vector<double> forward(const SynthModel& model, const features::Matrix& values,
                            std::span<const double> harmonics, std::span<const double> loudness) {
  ForwardCache cache;
  return forward(model, values, harmonics, loudness, cache);
}

std::vector<double> forward(const SynthModel& model, const features::Matrix& values,
                            std::span<const double> harmonics, std::span<const double> loudness,
                            ForwardCache& cache) {
  check_inputs(model, values, loudness.size());
  const auto& cfg = model.config;
  const std::size_t frames = values.rows;
  const std::size_t spf = cfg.samples_per_frame();
  const std::size_t n = frames * spf;
  if (harmonics.size() != cfg.harmonic_channels * n) {
    throw ValidationError("harmonic stack has " + std::to_string(harmonics.size()) +
                          " samples, expected " + std::to_string(cfg.harmonic_channels * n));
  }
  const double slope = cfg.leaky_slope;

  Tensor harm(cfg.harmonic_channels, n);
  std::copy(harmonics.begin(), harmonics.end(), harm.data.begin());
  Tensor loud(1, n);
  for (std::size_t t = 0; t < frames; ++t) {
    std::fill_n(loud.data.begin() + static_cast<long>(t * spf), spf, loudness[t]);
  }
  stream_forward(model, model.harmonic_stream, std::move(harm), cache.harmonic);
  stream_forward(model, model.loudness_stream, std::move(loud), cache.loudness);

  cache.x = values_to_tensor(values);
  Tensor h = model.input.forward(model.params, cache.x);
  for (std::size_t i = 0; i < kUpBlocks; ++i) {
    auto& uc = cache.up[i];
    const auto& blk = model.up[i];
    const std::size_t level = kDownBlocks - i;
    uc.in = std::move(h);
    uc.pre = blk.upsample.forward(model.params, uc.in);
    uc.act = leaky_relu(uc.pre, slope);
    uc.cond = concat_channels(cache.harmonic.level[level], cache.loudness.level[level]);
    uc.film_out = blk.film.forward(model.params, uc.cond);
    uc.modulated = film(uc.act, split_film(uc.film_out, cfg.base_channels));
    uc.modulated_act = leaky_relu(uc.modulated, slope);
    h = blk.residual.forward(model.params, uc.modulated_act);
    add_into(h, uc.modulated);
  }
  cache.last = std::move(h);
  cache.last_act = leaky_relu(cache.last, slope);
  cache.out = model.output.forward(model.params, cache.last_act);
  return cache.out.data;
}

std::vector<double> backward(SynthModel& model, const ForwardCache& cache,
                             std::span<const double> grad_audio) {
  const auto& cfg = model.config;
  const double slope = cfg.leaky_slope;
  const std::size_t c = cfg.base_channels;
  Tensor g_out(1, grad_audio.size());
  std::copy(grad_audio.begin(), grad_audio.end(), g_out.data.begin());

  Tensor g_last_act = model.output.backward(model.params, cache.last_act, g_out, true);
  Tensor g_h = leaky_relu_backward(cache.last, g_last_act, slope);

  std::array<Tensor, kDownBlocks + 1> g_harm_levels;
  std::array<Tensor, kDownBlocks + 1> g_loud_levels;
  for (std::size_t d = 0; d <= kDownBlocks; ++d) {
    g_harm_levels[d] = Tensor(cfg.cond_channels, cache.harmonic.level[d].length);
    g_loud_levels[d] = Tensor(cfg.cond_channels, cache.loudness.level[d].length);
  }

  for (std::size_t bi = kUpBlocks; bi-- > 0;) {
    const auto& uc = cache.up[bi];
    const auto& blk = model.up[bi];
    // h_out = modulated + residual(lrelu(modulated))
    Tensor g_mod = g_h;
    Tensor g_mod_act = blk.residual.backward(model.params, uc.modulated_act, g_h, true);
    add_into(g_mod, leaky_relu_backward(uc.modulated, g_mod_act, slope));

    // modulated = (1 + film_g) * act + film_b
    Tensor g_act(c, uc.act.length);
    Tensor g_film(2 * c, uc.act.length);
    for (std::size_t ch = 0; ch < c; ++ch) {
      for (std::size_t t = 0; t < uc.act.length; ++t) {
        const double g = g_mod.at(ch, t);
        g_act.at(ch, t) = g * (1.0 + uc.film_out.at(ch, t));
        g_film.at(ch, t) = g * uc.act.at(ch, t);
        g_film.at(c + ch, t) = g;
      }
    }
    Tensor g_cond = blk.film.backward(model.params, uc.cond, g_film, true);
    const std::size_t level = kDownBlocks - bi;
    const std::size_t half = cfg.cond_channels * uc.act.length;
    for (std::size_t i = 0; i < half; ++i) {
      g_harm_levels[level].data[i] += g_cond.data[i];
      g_loud_levels[level].data[i] += g_cond.data[half + i];
    }
    Tensor g_pre = leaky_relu_backward(uc.pre, g_act, slope);
    g_h = blk.upsample.backward(model.params, uc.in, g_pre, true);
  }
  model.input.backward(model.params, cache.x, g_h, false);

  stream_backward(model, model.loudness_stream, cache.loudness, std::move(g_loud_levels), false);
  Tensor g_harm = stream_backward(model, model.harmonic_stream, cache.harmonic,
                                  std::move(g_harm_levels), true);
  return g_harm.data;
}

std::vector<double> generate(const SynthModel& model, const features::Matrix& values,
                             std::span<const double> loudness, std::span<const double> p,
                             std::span<const double> z, GeneratorCache& cache) {
  check_inputs(model, values, loudness.size());
  const std::size_t n = values.rows * model.config.samples_per_frame();
  if (p.size() != n || z.size() != n) {
    throw ValidationError("excitation length does not match " + std::to_string(values.rows) +
                          " frames");
  }
  const double slope = model.config.leaky_slope;
  cache.estimator_in = estimator_input(values, loudness);
  cache.estimator_pre = model.estimator_hidden.forward(model.params, cache.estimator_in);
  cache.estimator_act = leaky_relu(cache.estimator_pre, slope);
  cache.filters = filters_from(model.estimator_out.forward(model.params, cache.estimator_act),
                               model.config.ltv_taps, model.config.samples_per_frame());
  cache.p.assign(p.begin(), p.end());
  cache.z.assign(z.begin(), z.end());
  cache.p_filtered = harmonics::filtered_excitation(p, z, cache.filters.h1, cache.filters.h2);

  std::vector<double> stack(2 * n);
  std::copy(p.begin(), p.end(), stack.begin());
  std::copy(cache.p_filtered.begin(), cache.p_filtered.end(), stack.begin() + static_cast<long>(n));
  return forward(model, values, stack, loudness, cache.net);
}

void generate_backward(SynthModel& model, const GeneratorCache& cache,
                       std::span<const double> grad_audio) {
  const auto g_stack = backward(model, cache.net, grad_audio);
  const std::size_t n = cache.p.size();
  std::span<const double> g_pf(g_stack.data() + n, n);
  const std::size_t taps = model.config.ltv_taps;
  const std::size_t hop = model.config.samples_per_frame();
  const auto g_h1 = harmonics::apply_ltv_tap_gradient(cache.p, g_pf, hop, taps);
  const auto g_h2 = harmonics::apply_ltv_tap_gradient(cache.z, g_pf, hop, taps);

  const std::size_t frames = cache.estimator_act.length;
  Tensor g_est(2 * taps, frames);
  for (std::size_t m = 0; m < frames; ++m) {
    for (std::size_t j = 0; j < taps; ++j) {
      g_est.at(j, m) = g_h1[m * taps + j];
      g_est.at(taps + j, m) = g_h2[m * taps + j];
    }
  }
  Tensor g_act = model.estimator_out.backward(model.params, cache.estimator_act, g_est, true);
  Tensor g_pre = leaky_relu_backward(cache.estimator_pre, g_act, model.config.leaky_slope);
  model.estimator_hidden.backward(model.params, cache.estimator_in, g_pre, false);
}

}  // namespace neuco::synth
