#pragma once

// End-to-end conversion and the individual stages behind each CLI
// subcommand. Every stage has a file-level entry point so that running the
// stages one by one produces the same bytes as convert().

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "neuco/dsp.hpp"
#include "neuco/error.hpp"
#include "neuco/feature_store.hpp"
#include "neuco/harmonics.hpp"
#include "neuco/synth/model.hpp"

namespace neuco::pipeline {

namespace fs = std::filesystem;

inline constexpr std::uint32_t kAnalysisRate = 24000;

/// An Error tagged with the pipeline stage that raised it.
class StageError : public Error {
 public:
  StageError(std::string stage, const Error& cause)
      : Error(cause.kind(), cause.what()), stage_(std::move(stage)) {}
  const std::string& stage() const { return stage_; }

 private:
  std::string stage_;
};

/// Runs fn, re-throwing any neuco::Error as a StageError for `stage`.
template <typename Fn>
auto run_stage(const std::string& stage, Fn&& fn) -> decltype(fn()) {
  try {
    return fn();
  } catch (const StageError&) {
    throw;
  } catch (const Error& e) {
    throw StageError(stage, e);
  }
}

/// Reads NEUCO_LOG (error|info|debug) and configures the default logger.
void setup_logging();

// ---------------------------------------------------------------- stages

/// Mono WAV -> 24 kHz -> pitch + loudness. With external tracks (1 to 3),
/// f0 is their median ensemble instead of the built-in detector.
dsp::DspTrack extract_dsp(const fs::path& audio_path, const std::vector<fs::path>& pitch_tracks = {},
                          const dsp::PitchOptions& options = {});

/// Reads a mono WAV and resamples it to the analysis rate.
std::vector<float> load_audio_24k(const fs::path& path);

features::MatchingPool load_pool_from_features(const std::vector<fs::path>& paths);

/// Pool file: a concatenated NCSF plus "<path>.origins" (utterance_id and
/// frame_index per line).
void save_pool_file(const features::MatchingPool& pool, const fs::path& path);
features::MatchingPool load_pool_file(const fs::path& path);

/// Query keys paired with the matched values.
features::SslFrameSequence matched_sequence(const features::SslFrameSequence& query,
                                            const features::MatchResult& match);

/// One line per query frame: "<frame> <utt>:<index>@<similarity> ...".
std::string format_neighbors(const features::MatchResult& match, const features::MatchingPool& pool);

enum class ShiftMode { kAuto, kFixed, kOff };

struct PitchShift {
  ShiftMode mode = ShiftMode::kAuto;
  double value = 1.0;
  dsp::MeanKind mean = dsp::MeanKind::kArithmetic;
};

/// Parses "auto", "off" or a positive decimal factor.
PitchShift parse_pitch_shift(const std::string& text);

/// Factor to apply to the source f0. kAuto needs at least one reference track.
double resolve_shift(const PitchShift& shift, const dsp::DspTrack& source,
                     const std::vector<dsp::DspTrack>& references);

/// Aligns matched values with the source track and applies the shift to f0.
dsp::AlignedFeatures prepare_aligned(const features::Matrix& matched_values,
                                     const dsp::DspTrack& source, double shift_factor);

harmonics::HarmonicSignals build_harmonics(const synth::SynthModel& model,
                                           const dsp::AlignedFeatures& aligned, std::uint64_t seed);

std::vector<float> synthesize(const synth::SynthModel& model, const dsp::AlignedFeatures& aligned,
                              const harmonics::HarmonicSignals& harmonics);

/// Debug dump of s[n] as a two-channel float WAV (channel 0 = p, 1 = p~).
void save_harmonics_wav(const harmonics::HarmonicSignals& h, const fs::path& path);
harmonics::HarmonicSignals load_harmonics_wav(const fs::path& path);

// ---------------------------------------------------------------- convert

struct ConversionJob {
  fs::path source_audio;
  fs::path source_features;
  std::vector<fs::path> reference_features;
  /// Needed only for pitch_shift = auto.
  std::vector<fs::path> reference_audio;
  std::vector<fs::path> pitch_tracks;
  fs::path model;
  fs::path output;
  /// Defaults to "<output>.provenance.txt".
  fs::path provenance;
  std::size_t k = 4;
  std::uint64_t seed = 0;
  PitchShift pitch_shift;
};

void validate(const ConversionJob& job);

struct ConversionResult {
  features::MatchResult match;
  features::MatchingPool pool;
  double shift_factor = 1.0;
  std::size_t aligned_frames = 0;
  std::vector<float> audio;
};

/// Runs the whole chain and writes the WAV and provenance files.
ConversionResult convert(const ConversionJob& job);

std::string format_provenance(const ConversionResult& result, std::size_t k);

/// key=value lines (# comments). Keys are the convert flag names.
std::map<std::string, std::string> read_job_config(const fs::path& path);

/// Fills job fields from config entries whose keys are not in `set_on_command_line`.
void apply_job_config(const std::map<std::string, std::string>& config,
                      const std::vector<std::string>& set_on_command_line, ConversionJob& job);

// ---------------------------------------------------------------- coverage

struct CoverageReport {
  double pool_duration_s = 0.0;
  std::size_t pool_frames = 0;
  std::size_t distinct_matched_frames = 0;
  double coverage_ratio = 0.0;
  double mean_top1_similarity = 0.0;
};

/// For each duration, matches `source` against the leading prefix of the
/// concatenated reference frames covering that many seconds.
std::vector<CoverageReport> coverage_study(const features::SslFrameSequence& source,
                                           const std::vector<features::SslFrameSequence>& references,
                                           const std::vector<double>& durations_s, std::size_t k);

std::string format_coverage(const std::vector<CoverageReport>& reports);

}  // namespace neuco::pipeline
