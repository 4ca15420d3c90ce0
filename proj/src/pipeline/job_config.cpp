#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include "neuco/pipeline.hpp"

namespace neuco::pipeline {

namespace {

std::string trim(std::string s) {
  const auto not_space = [](unsigned char c) { return !std::isspace(c); };
  s.erase(s.begin(), std::find_if(s.begin(), s.end(), not_space));
  s.erase(std::find_if(s.rbegin(), s.rend(), not_space).base(), s.end());
  return s;
}

std::vector<fs::path> split_paths(const std::string& value) {
  std::vector<fs::path> out;
  std::stringstream ss(value);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.emplace_back(item);
  }
  return out;
}

template <typename T>
T parse_integer(const std::string& key, const std::string& value) {
  T out{};
  auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), out);
  if (ec != std::errc() || ptr != value.data() + value.size()) {
    throw ValidationError("config key '" + key + "' expects an integer, got '" + value + "'");
  }
  return out;
}

}  // namespace

PitchShift parse_pitch_shift(const std::string& text) {
  PitchShift shift;
  if (text == "auto") {
    shift.mode = ShiftMode::kAuto;
  } else if (text == "off") {
    shift.mode = ShiftMode::kOff;
  } else {
    double v = 0.0;
    auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
    if (ec != std::errc() || ptr != text.data() + text.size() || !(v > 0.0) ||
        !std::isfinite(v)) {
      throw ValidationError("pitch shift must be 'auto', 'off' or a positive factor, got '" +
                            text + "'");
    }
    shift.mode = ShiftMode::kFixed;
    shift.value = v;
  }
  return shift;
}

std::map<std::string, std::string> read_job_config(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config " + path.string());
  std::map<std::string, std::string> out;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    line = trim(line);
    if (line.empty() || line[0] == '#') continue;
    auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ValidationError(path.string() + ":" + std::to_string(line_no) +
                            ": expected key=value");
    }
    out[trim(line.substr(0, eq))] = trim(line.substr(eq + 1));
  }
  return out;
}

void apply_job_config(const std::map<std::string, std::string>& config,
                      const std::vector<std::string>& set_on_command_line, ConversionJob& job) {
  for (const auto& [key, value] : config) {
    if (std::find(set_on_command_line.begin(), set_on_command_line.end(), key) !=
        set_on_command_line.end()) {
      continue;
    }
    if (key == "source-audio") {
      job.source_audio = value;
    } else if (key == "source-features") {
      job.source_features = value;
    } else if (key == "reference-features") {
      job.reference_features = split_paths(value);
    } else if (key == "reference-audio") {
      job.reference_audio = split_paths(value);
    } else if (key == "pitch-track") {
      job.pitch_tracks = split_paths(value);
    } else if (key == "model") {
      job.model = value;
    } else if (key == "output") {
      job.output = value;
    } else if (key == "provenance") {
      job.provenance = value;
    } else if (key == "k") {
      job.k = parse_integer<std::size_t>(key, value);
    } else if (key == "seed") {
      job.seed = parse_integer<std::uint64_t>(key, value);
    } else if (key == "pitch-shift") {
      auto mean = job.pitch_shift.mean;
      job.pitch_shift = parse_pitch_shift(value);
      job.pitch_shift.mean = mean;
    } else if (key == "shift-mean") {
      if (value == "arithmetic") {
        job.pitch_shift.mean = dsp::MeanKind::kArithmetic;
      } else if (value == "geometric") {
        job.pitch_shift.mean = dsp::MeanKind::kGeometric;
      } else {
        throw ValidationError("shift-mean must be arithmetic or geometric");
      }
    } else {
      throw ValidationError("unknown config key '" + key + "'");
    }
  }
}

}  // namespace neuco::pipeline
