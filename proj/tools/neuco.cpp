// neuco: command-line front end. One subcommand per pipeline stage plus the
// end-to-end `convert`. Failures print a single line
//   error: stage=<stage> kind=<kind> msg=<message>
// and exit 1 (2 for usage errors).

#include <algorithm>
#include <cstdio>
#include <functional>
#include <iostream>
#include <optional>
#include <sstream>

#include <CLI11.hpp>

#include "neuco/audio.hpp"
#include "neuco/binary_io.hpp"
#include "neuco/pipeline.hpp"
#include "neuco/synth/checkpoint.hpp"
#include "neuco/synth/train.hpp"

namespace fs = std::filesystem;
using namespace neuco;
using pipeline::run_stage;

namespace {

std::string one_line(std::string s) {
  std::replace(s.begin(), s.end(), '\n', ' ');
  std::replace(s.begin(), s.end(), '\r', ' ');
  return s;
}

void print_error(const std::string& stage, const std::string& kind, const std::string& msg) {
  std::cerr << "error: stage=" << stage << " kind=" << kind << " msg=" << one_line(msg) << '\n';
}

dsp::MeanKind parse_mean(const std::string& s) {
  if (s == "geometric") return dsp::MeanKind::kGeometric;
  return dsp::MeanKind::kArithmetic;
}

void add_model_shape_flags(CLI::App* sub, synth::SynthConfig& cfg) {
  sub->add_option("--base-channels", cfg.base_channels, "Channels after the input conv");
  sub->add_option("--cond-channels", cfg.cond_channels, "Channels per conditioning stream");
  sub->add_option("--ltv-taps", cfg.ltv_taps, "FIR taps per LTV filter");
  sub->add_option("--estimator-hidden", cfg.estimator_hidden, "Hidden width of the filter estimator");
}

synth::TrainBatch make_batch(const features::SslFrameSequence& feats, const fs::path& audio_path,
                             std::uint64_t seed) {
  const auto samples = pipeline::load_audio_24k(audio_path);
  const auto track = dsp::analyze(samples, pipeline::kAnalysisRate);
  const auto aligned = dsp::align_streams(feats.values, track);
  const std::size_t n = 240 * aligned.n_frames();

  synth::TrainBatch batch;
  batch.values = aligned.values;
  batch.loudness = aligned.loudness;
  batch.p = harmonics::sine_excitation(harmonics::upsample_f0(aligned.f0, pipeline::kAnalysisRate));
  batch.z = harmonics::sample_noise(n, seed);
  batch.target.assign(n, 0.0);
  std::copy_n(samples.begin(), std::min(n, samples.size()), batch.target.begin());
  return batch;
}

}  // namespace

int main(int argc, char** argv) {
  pipeline::setup_logging();

  CLI::App app{"Neural concatenative singing voice conversion"};
  app.require_subcommand(1);
  std::string stage = "cli";
  std::function<void()> action;

  // extract-dsp
  fs::path dsp_audio, dsp_out;
  std::vector<fs::path> dsp_tracks;
  dsp::PitchOptions pitch_opts;
  auto* extract = app.add_subcommand("extract-dsp", "Pitch and loudness track (NCDT) from a WAV");
  extract->add_option("--audio", dsp_audio, "Input mono WAV")->required();
  extract->add_option("--pitch-track", dsp_tracks, "External f0 text track (up to 3)");
  extract->add_option("--f0-min", pitch_opts.f0_min, "Lowest detectable f0 in Hz");
  extract->add_option("--f0-max", pitch_opts.f0_max, "Highest detectable f0 in Hz");
  extract->add_option("--out", dsp_out, "Output NCDT file")->required();
  extract->callback([&] {
    action = [&] {
      stage = "extract-dsp";
      dsp::save_dsp_file(pipeline::extract_dsp(dsp_audio, dsp_tracks, pitch_opts), dsp_out);
    };
  });

  // build-pool
  std::vector<fs::path> pool_inputs;
  fs::path pool_out;
  auto* build = app.add_subcommand("build-pool", "Concatenate reference NCSF files into a pool");
  build->add_option("--features", pool_inputs, "Reference NCSF files")->required();
  build->add_option("--out", pool_out, "Output pool file (NCSF + .origins)")->required();
  build->callback([&] {
    action = [&] {
      stage = "build-pool";
      pipeline::save_pool_file(pipeline::load_pool_from_features(pool_inputs), pool_out);
    };
  });

  // match
  fs::path match_query, match_pool, match_out, match_neighbors;
  features::KnnOptions knn;
  auto* match = app.add_subcommand("match", "Replace query values by kNN averages from a pool");
  match->add_option("--query", match_query, "Source NCSF")->required();
  match->add_option("--pool", match_pool, "Pool file from build-pool")->required();
  match->add_option("--k", knn.k, "Neighbors per frame")->capture_default_str();
  match->add_option("--threads", knn.threads, "Worker threads (0 = all cores)");
  match->add_option("--out", match_out, "Matched NCSF")->required();
  match->add_option("--neighbors", match_neighbors, "Optional per-frame neighbor listing");
  match->callback([&] {
    action = [&] {
      stage = "match";
      const auto query = features::load_feature_file(match_query);
      const auto pool = pipeline::load_pool_file(match_pool);
      const auto result = features::knn_match(query, pool, knn);
      features::save_feature_file(pipeline::matched_sequence(query, result), match_out);
      if (!match_neighbors.empty()) {
        io::write_file_atomic(match_neighbors, pipeline::format_neighbors(result, pool));
      }
    };
  });

  // prematch
  fs::path pre_target, pre_pool, pre_out;
  std::size_t pre_k = 4;
  auto* prematch = app.add_subcommand("prematch", "Training-time value replacement from a same-speaker pool");
  prematch->add_option("--target", pre_target, "Training utterance NCSF")->required();
  prematch->add_option("--pool", pre_pool, "Same-speaker pool without the target")->required();
  prematch->add_option("--k", pre_k, "Neighbors per frame")->capture_default_str();
  prematch->add_option("--out", pre_out, "Output NCSF")->required();
  prematch->callback([&] {
    action = [&] {
      stage = "prematch";
      const auto target = features::load_feature_file(pre_target);
      const auto pool = pipeline::load_pool_file(pre_pool);
      features::save_feature_file(features::prematch_training_features(target, pool, pre_k),
                                  pre_out);
    };
  });

  // harmonics
  fs::path harm_dsp, harm_features, harm_model, harm_out;
  std::vector<fs::path> harm_ref_dsp;
  std::string harm_shift = "auto", harm_mean = "arithmetic";
  std::uint64_t harm_seed = 0;
  auto* harm = app.add_subcommand("harmonics", "Excitation stack [p, filtered p] as a stereo WAV");
  harm->add_option("--dsp", harm_dsp, "Source NCDT")->required();
  harm->add_option("--features", harm_features, "Matched NCSF")->required();
  harm->add_option("--model", harm_model, "Checkpoint (filter estimator)")->required();
  harm->add_option("--pitch-shift", harm_shift, "auto, off or a factor")->capture_default_str();
  harm->add_option("--shift-mean", harm_mean, "arithmetic or geometric")
      ->check(CLI::IsMember({"arithmetic", "geometric"}));
  harm->add_option("--ref-dsp", harm_ref_dsp, "Reference NCDT tracks for pitch-shift=auto");
  harm->add_option("--seed", harm_seed, "Noise seed");
  harm->add_option("--out", harm_out, "Output 2-channel float WAV")->required();
  harm->callback([&] {
    action = [&] {
      stage = "harmonics";
      const auto source = dsp::load_dsp_file(harm_dsp);
      const auto feats = features::load_feature_file(harm_features);
      const auto model = synth::load_checkpoint(harm_model);
      std::vector<dsp::DspTrack> refs;
      for (const auto& r : harm_ref_dsp) refs.push_back(dsp::load_dsp_file(r));
      auto shift = pipeline::parse_pitch_shift(harm_shift);
      shift.mean = parse_mean(harm_mean);
      const double factor = pipeline::resolve_shift(shift, source, refs);
      const auto aligned = pipeline::prepare_aligned(feats.values, source, factor);
      pipeline::save_harmonics_wav(pipeline::build_harmonics(model, aligned, harm_seed), harm_out);
    };
  });

  // synthesize
  fs::path syn_dsp, syn_features, syn_harm, syn_model, syn_out;
  auto* syn = app.add_subcommand("synthesize", "Run the synthesizer on matched features");
  syn->add_option("--dsp", syn_dsp, "Source NCDT (loudness)")->required();
  syn->add_option("--features", syn_features, "Matched NCSF")->required();
  syn->add_option("--harmonics", syn_harm, "Stereo WAV from the harmonics stage")->required();
  syn->add_option("--model", syn_model, "Checkpoint")->required();
  syn->add_option("--out", syn_out, "Output 24 kHz float WAV")->required();
  syn->callback([&] {
    action = [&] {
      stage = "synthesize";
      const auto source = dsp::load_dsp_file(syn_dsp);
      const auto feats = features::load_feature_file(syn_features);
      const auto model = synth::load_checkpoint(syn_model);
      const auto h = pipeline::load_harmonics_wav(syn_harm);
      const auto aligned = pipeline::prepare_aligned(feats.values, source, 1.0);
      audio::Wav wav;
      wav.sample_rate = pipeline::kAnalysisRate;
      wav.samples = pipeline::synthesize(model, aligned, h);
      audio::write_wav(syn_out, wav);
    };
  });

  // init-model
  synth::SynthConfig init_cfg;
  std::uint64_t init_seed = 0;
  fs::path init_out;
  auto* init = app.add_subcommand("init-model", "Write a randomly initialised checkpoint");
  init->add_option("--value-dim", init_cfg.value_dim, "Feature value dimension")->required();
  add_model_shape_flags(init, init_cfg);
  init->add_option("--seed", init_seed, "Initialisation seed");
  init->add_option("--out", init_out, "Output checkpoint")->required();
  init->callback([&] {
    action = [&] {
      stage = "init-model";
      synth::save_checkpoint(synth::build_model(init_cfg, init_seed), init_out);
    };
  });

  // train-toy
  fs::path train_features, train_audio, train_init, train_out, train_log;
  synth::SynthConfig train_cfg;
  synth::TrainOptions train_opts;
  std::size_t train_steps = 200;
  auto* train = app.add_subcommand("train-toy", "Short adversarial training run on one utterance");
  train->add_option("--features", train_features, "Training NCSF (usually prematched)")->required();
  train->add_option("--audio", train_audio, "Matching training WAV")->required();
  train->add_option("--init", train_init, "Start from this checkpoint instead of a fresh model");
  add_model_shape_flags(train, train_cfg);
  train->add_option("--steps", train_steps, "Training steps")->capture_default_str();
  train->add_option("--lr", train_opts.learning_rate, "Adam learning rate")->capture_default_str();
  train->add_option("--seed", train_opts.seed, "Seed for init, noise and discriminator");
  train->add_option("--adv-weight", train_opts.loss.adversarial_weight, "Weight of the LSGAN term");
  train->add_option("--out", train_out, "Output checkpoint")->required();
  train->add_option("--log", train_log, "Loss log (one line per step)");
  train->callback([&] {
    action = [&] {
      stage = "train-toy";
      const auto feats = features::load_feature_file(train_features);
      synth::SynthModel model;
      if (!train_init.empty()) {
        model = synth::load_checkpoint(train_init);
      } else {
        train_cfg.value_dim = static_cast<std::uint32_t>(feats.value_dim());
        model = synth::build_model(train_cfg, train_opts.seed);
      }
      const auto batch = make_batch(feats, train_audio, train_opts.seed);
      synth::Trainer trainer(model, train_opts);
      std::ostringstream log;
      for (std::size_t i = 0; i < train_steps; ++i) {
        log << synth::format_report(trainer.step(batch)) << '\n';
      }
      synth::save_checkpoint(model, train_out);
      if (!train_log.empty()) io::write_file_atomic(train_log, log.str());
    };
  });

  // coverage
  fs::path cov_source, cov_out;
  std::vector<fs::path> cov_refs;
  std::vector<double> cov_durations{5, 10, 30, 60, 90};
  std::size_t cov_k = 4;
  auto* cov = app.add_subcommand("coverage", "Pool-usage report over nested reference prefixes");
  cov->add_option("--source", cov_source, "Query NCSF")->required();
  cov->add_option("--references", cov_refs, "Reference NCSF files, concatenated in order")->required();
  cov->add_option("--durations", cov_durations, "Prefix lengths in seconds")->delimiter(',');
  cov->add_option("--k", cov_k, "Neighbors per frame")->capture_default_str();
  cov->add_option("--out", cov_out, "Write the report here instead of stdout");
  cov->callback([&] {
    action = [&] {
      stage = "coverage";
      const auto source = features::load_feature_file(cov_source);
      std::vector<features::SslFrameSequence> refs;
      for (const auto& r : cov_refs) refs.push_back(features::load_feature_file(r));
      const auto text =
          pipeline::format_coverage(pipeline::coverage_study(source, refs, cov_durations, cov_k));
      if (cov_out.empty()) {
        std::cout << text;
      } else {
        io::write_file_atomic(cov_out, text);
      }
    };
  });

  // convert
  pipeline::ConversionJob job;
  fs::path job_config;
  std::string conv_shift = "auto", conv_mean = "arithmetic";
  auto* conv = app.add_subcommand("convert", "End-to-end conversion");
  conv->add_option("--config", job_config, "key=value file; flags override it");
  conv->add_option("--source-audio", job.source_audio, "Source WAV");
  conv->add_option("--source-features", job.source_features, "Source NCSF");
  conv->add_option("--reference-features", job.reference_features, "Reference NCSF files");
  conv->add_option("--reference-audio", job.reference_audio, "Reference WAVs (pitch-shift=auto)");
  conv->add_option("--pitch-track", job.pitch_tracks, "External f0 text tracks (up to 3)");
  conv->add_option("--model", job.model, "Checkpoint");
  conv->add_option("--output", job.output, "Output WAV");
  conv->add_option("--provenance", job.provenance, "Provenance report path");
  conv->add_option("--k", job.k, "Neighbors per frame")->capture_default_str();
  conv->add_option("--seed", job.seed, "Noise seed");
  conv->add_option("--pitch-shift", conv_shift, "auto, off or a factor")->capture_default_str();
  conv->add_option("--shift-mean", conv_mean, "arithmetic or geometric")
      ->check(CLI::IsMember({"arithmetic", "geometric"}));
  conv->callback([&] {
    action = [&] {
      stage = "config";
      std::vector<std::string> given;
      for (const auto* opt : conv->get_options()) {
        if (opt->count() > 0) given.push_back(opt->get_name().substr(2));
      }
      const auto is_given = [&](const char* key) {
        return std::find(given.begin(), given.end(), key) != given.end();
      };
      if (is_given("pitch-shift")) job.pitch_shift = pipeline::parse_pitch_shift(conv_shift);
      if (is_given("shift-mean")) job.pitch_shift.mean = parse_mean(conv_mean);
      if (!job_config.empty()) {
        pipeline::apply_job_config(pipeline::read_job_config(job_config), given, job);
      }
      stage = "convert";
      pipeline::convert(job);
    };
  });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);
    print_error("cli", "usage", e.what());
    return 2;
  }

  try {
    action();
  } catch (const pipeline::StageError& e) {
    print_error(e.stage(), to_string(e.kind()), e.what());
    return 1;
  } catch (const Error& e) {
    print_error(stage, to_string(e.kind()), e.what());
    return 1;
  } catch (const std::exception& e) {
    print_error(stage, "internal", e.what());
    return 3;
  }
  return 0;
}
