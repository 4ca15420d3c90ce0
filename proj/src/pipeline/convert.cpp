#include <algorithm>
#include <fstream>
#include <iomanip>
#include <sstream>

#include <spdlog/spdlog.h>

#include "neuco/audio.hpp"
#include "neuco/binary_io.hpp"
#include "neuco/pipeline.hpp"
#include "neuco/synth/checkpoint.hpp"

namespace neuco::pipeline {

std::vector<float> load_audio_24k(const fs::path& path) {
  auto wav = audio::read_mono_wav(path);
  if (wav.sample_rate == kAnalysisRate) return std::move(wav.samples);
  spdlog::debug("resampling {} from {} Hz", path.string(), wav.sample_rate);
  return audio::resample(wav.samples, wav.sample_rate, kAnalysisRate);
}

dsp::DspTrack extract_dsp(const fs::path& audio_path, const std::vector<fs::path>& pitch_tracks,
                          const dsp::PitchOptions& options) {
  const auto samples = load_audio_24k(audio_path);
  auto track = dsp::analyze(samples, kAnalysisRate, options);
  if (pitch_tracks.empty()) return track;
  if (pitch_tracks.size() > 3) throw ValidationError("at most three external pitch tracks");

  // External trackers often disagree by a frame or two at the end; keep the
  // common prefix of every stream.
  std::vector<std::vector<double>> tracks;
  std::size_t n = track.n_frames();
  for (const auto& p : pitch_tracks) {
    tracks.push_back(dsp::load_pitch_track(p));
    n = std::min(n, tracks.back().size());
  }
  if (n == 0) throw ValidationError("external pitch tracks are empty");
  for (auto& t : tracks) t.resize(n);
  const auto f0 = dsp::median_pitch_ensemble(tracks);
  track.f0.assign(f0.begin(), f0.end());
  track.loudness.resize(n);
  return track;
}

features::MatchingPool load_pool_from_features(const std::vector<fs::path>& paths) {
  if (paths.empty()) throw ValidationError("no reference feature files given");
  std::vector<features::SslFrameSequence> seqs;
  seqs.reserve(paths.size());
  for (const auto& p : paths) seqs.push_back(features::load_feature_file(p));
  return features::build_pool(seqs);
}

namespace {

fs::path origins_path(const fs::path& pool_path) {
  return fs::path(pool_path.string() + ".origins");
}

}  // namespace

void save_pool_file(const features::MatchingPool& pool, const fs::path& path) {
  features::SslFrameSequence seq;
  seq.keys = pool.keys();
  seq.values = pool.values();
  seq.utterance_id = "pool";
  seq.speaker_id = pool.speaker_id();
  features::save_feature_file(seq, path);

  std::ostringstream out;
  for (const auto& o : pool.origins()) out << o.frame_index << '\t' << o.utterance_id << '\n';
  io::write_file_atomic(origins_path(path), out.str());
}

features::MatchingPool load_pool_file(const fs::path& path) {
  auto seq = features::load_feature_file(path);
  const auto sidecar = origins_path(path);
  std::ifstream in(sidecar);
  if (!in) throw IoError("missing pool origins file " + sidecar.string());
  std::vector<features::FrameOrigin> origins;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto tab = line.find('\t');
    if (tab == std::string::npos) throw CorruptionError("malformed origins line: " + line);
    features::FrameOrigin o;
    try {
      o.frame_index = static_cast<std::uint32_t>(std::stoul(line.substr(0, tab)));
    } catch (const std::exception&) {
      throw CorruptionError("malformed origins line: " + line);
    }
    o.utterance_id = line.substr(tab + 1);
    origins.push_back(std::move(o));
  }
  if (origins.size() != seq.n_frames()) {
    throw CorruptionError("pool has " + std::to_string(seq.n_frames()) + " frames but " +
                          std::to_string(origins.size()) + " origins");
  }
  return features::make_pool(std::move(seq.keys), std::move(seq.values), std::move(origins),
                             seq.speaker_id);
}

features::SslFrameSequence matched_sequence(const features::SslFrameSequence& query,
                                            const features::MatchResult& match) {
  features::SslFrameSequence out;
  out.keys = query.keys;
  out.values = match.matched_values;
  out.frame_period_ms = query.frame_period_ms;
  out.utterance_id = query.utterance_id;
  out.speaker_id = query.speaker_id;
  return out;
}

std::string format_neighbors(const features::MatchResult& match,
                             const features::MatchingPool& pool) {
  std::ostringstream out;
  out << std::fixed << std::setprecision(6);
  for (std::size_t i = 0; i < match.neighbors.size(); ++i) {
    out << i;
    for (const auto& nb : match.neighbors[i]) {
      const auto& o = pool.origins()[nb.pool_index];
      out << ' ' << o.utterance_id << ':' << o.frame_index << '@' << nb.similarity;
    }
    out << '\n';
  }
  return out.str();
}

double resolve_shift(const PitchShift& shift, const dsp::DspTrack& source,
                     const std::vector<dsp::DspTrack>& references) {
  switch (shift.mode) {
    case ShiftMode::kOff:
      return 1.0;
    case ShiftMode::kFixed:
      if (!(shift.value > 0.0) || !std::isfinite(shift.value)) {
        throw ValidationError("fixed pitch shift must be positive");
      }
      return shift.value;
    case ShiftMode::kAuto:
      break;
  }
  if (references.empty()) {
    throw ValidationError("automatic pitch shift needs reference audio");
  }
  std::vector<double> target;
  for (const auto& r : references) target.insert(target.end(), r.f0.begin(), r.f0.end());
  return dsp::pitch_shift_factor(dsp::to_double(source.f0), target, shift.mean);
}

dsp::AlignedFeatures prepare_aligned(const features::Matrix& matched_values,
                                     const dsp::DspTrack& source, double shift_factor) {
  dsp::validate(source);
  if (source.sample_rate != kAnalysisRate) {
    throw ValidationError("DSP track must be analysed at 24000 Hz, got " +
                          std::to_string(source.sample_rate));
  }
  auto aligned = dsp::align_streams(matched_values, source);
  aligned.f0 = dsp::apply_pitch_shift(aligned.f0, shift_factor);
  return aligned;
}

namespace {

void check_model_fit(const synth::SynthModel& model, const dsp::AlignedFeatures& aligned) {
  if (aligned.values.cols != model.config.value_dim) {
    throw ValidationError("feature value_dim " + std::to_string(aligned.values.cols) +
                          " does not match model value_dim " +
                          std::to_string(model.config.value_dim));
  }
  if (model.config.sample_rate_out != kAnalysisRate) {
    throw ValidationError("model output rate must be 24000 Hz");
  }
}

std::vector<float> to_float(const std::vector<double>& v) { return {v.begin(), v.end()}; }

}  // namespace

harmonics::HarmonicSignals build_harmonics(const synth::SynthModel& model,
                                           const dsp::AlignedFeatures& aligned,
                                           std::uint64_t seed) {
  check_model_fit(model, aligned);
  const auto f0s = harmonics::upsample_f0(aligned.f0, model.config.sample_rate_out, dsp::kHopMs);
  const auto p = harmonics::sine_excitation(f0s);
  const auto z = harmonics::sample_noise(p.size(), seed);
  const auto filters = synth::estimate_ltv_filters(aligned.values, aligned.loudness, model);
  const auto pf = harmonics::filtered_excitation(p, z, filters.h1, filters.h2);

  const auto p32 = to_float(p);
  const auto pf32 = to_float(pf);
  auto h = harmonics::assemble_harmonics(p32, pf32);
  h.z = to_float(z);
  h.rng_seed = seed;
  return h;
}

std::vector<float> synthesize(const synth::SynthModel& model, const dsp::AlignedFeatures& aligned,
                              const harmonics::HarmonicSignals& h) {
  check_model_fit(model, aligned);
  const std::size_t expected = std::size_t{model.config.samples_per_frame()} * aligned.n_frames();
  if (h.n_samples() != expected) {
    throw ValidationError("harmonic stack has " + std::to_string(h.n_samples()) +
                          " samples, expected " + std::to_string(expected));
  }
  const std::vector<double> s(h.s.begin(), h.s.end());
  return to_float(synth::forward(model, aligned.values, s, aligned.loudness));
}

void save_harmonics_wav(const harmonics::HarmonicSignals& h, const fs::path& path) {
  audio::Wav wav;
  wav.sample_rate = kAnalysisRate;
  wav.channels = 2;
  wav.samples.resize(2 * h.n_samples());
  for (std::size_t i = 0; i < h.n_samples(); ++i) {
    wav.samples[2 * i] = h.p[i];
    wav.samples[2 * i + 1] = h.p_filtered[i];
  }
  audio::write_wav(path, wav);
}

harmonics::HarmonicSignals load_harmonics_wav(const fs::path& path) {
  const auto wav = audio::read_wav(path);
  if (wav.channels != 2 || wav.sample_rate != kAnalysisRate) {
    throw FormatError("harmonics file must be 2-channel 24000 Hz: " + path.string());
  }
  std::vector<float> p(wav.frames()), pf(wav.frames());
  for (std::size_t i = 0; i < wav.frames(); ++i) {
    p[i] = wav.samples[2 * i];
    pf[i] = wav.samples[2 * i + 1];
  }
  return harmonics::assemble_harmonics(p, pf);
}

void validate(const ConversionJob& job) {
  const auto need = [](const fs::path& p, const char* what) {
    if (p.empty()) throw ValidationError(std::string("missing ") + what);
  };
  need(job.source_audio, "source audio");
  need(job.source_features, "source features");
  need(job.model, "model checkpoint");
  need(job.output, "output path");
  if (job.reference_features.empty()) throw ValidationError("missing reference features");
  if (job.k == 0) throw ValidationError("k must be at least 1");
  if (job.pitch_tracks.size() > 3) throw ValidationError("at most three external pitch tracks");
  if (job.pitch_shift.mode == ShiftMode::kAuto && job.reference_audio.empty()) {
    throw ValidationError("pitch-shift=auto needs reference audio");
  }
}

ConversionResult convert(const ConversionJob& job) {
  run_stage("validate", [&] { validate(job); });
  ConversionResult result;

  const auto model = run_stage("load-model", [&] { return synth::load_checkpoint(job.model); });
  const auto query = run_stage("load-features", [&] {
    auto q = features::load_feature_file(job.source_features);
    features::validate(q);
    return q;
  });
  result.pool = run_stage("build-pool", [&] { return load_pool_from_features(job.reference_features); });
  spdlog::info("pool: {} frames from {} files", result.pool.size(), job.reference_features.size());

  result.match = run_stage("match", [&] {
    features::KnnOptions opts;
    opts.k = job.k;
    return features::knn_match(query, result.pool, opts);
  });

  const auto source = run_stage("extract-dsp", [&] { return extract_dsp(job.source_audio, job.pitch_tracks); });
  result.shift_factor = run_stage("pitch-shift", [&] {
    std::vector<dsp::DspTrack> refs;
    if (job.pitch_shift.mode == ShiftMode::kAuto) {
      for (const auto& r : job.reference_audio) refs.push_back(extract_dsp(r));
    }
    return resolve_shift(job.pitch_shift, source, refs);
  });
  spdlog::info("pitch shift factor {:.6f}", result.shift_factor);

  const auto aligned = run_stage("align", [&] {
    return prepare_aligned(result.match.matched_values, source, result.shift_factor);
  });
  result.aligned_frames = aligned.n_frames();

  const auto h = run_stage("harmonics", [&] { return build_harmonics(model, aligned, job.seed); });
  result.audio = run_stage("synthesize", [&] { return synthesize(model, aligned, h); });

  run_stage("write", [&] {
    audio::Wav wav;
    wav.sample_rate = kAnalysisRate;
    wav.samples = result.audio;
    audio::write_wav(job.output, wav);
    const fs::path prov =
        job.provenance.empty() ? fs::path(job.output.string() + ".provenance.txt") : job.provenance;
    io::write_file_atomic(prov, format_provenance(result, job.k));
  });
  return result;
}

std::string format_provenance(const ConversionResult& result, std::size_t k) {
  std::ostringstream out;
  out << std::setprecision(9);
  out << "shift_factor=" << result.shift_factor << '\n';
  out << "k=" << k << '\n';
  out << "pool_frames=" << result.pool.size() << '\n';
  out << "query_frames=" << result.match.neighbors.size() << '\n';
  out << "aligned_frames=" << result.aligned_frames << '\n';
  out << "output_samples=" << result.audio.size() << '\n';
  out << "# frame neighbors (utterance:frame@cosine)\n";
  out << format_neighbors(result.match, result.pool);
  return out.str();
}

}  // namespace neuco::pipeline
