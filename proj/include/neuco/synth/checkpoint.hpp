#pragma once

#include <filesystem>
#include <string>
#include <string_view>

#include "neuco/synth/model.hpp"

namespace neuco::synth {

/// NCSM: magic, u16 version, field-tagged config, then named f32 tensors.
/// Parameters are stored as f32; loading widens them back to double.
std::string encode_checkpoint(const SynthModel& model);
SynthModel decode_checkpoint(std::string_view bytes);

void save_checkpoint(const SynthModel& model, const std::filesystem::path& path);
SynthModel load_checkpoint(const std::filesystem::path& path);

}  // namespace neuco::synth
