#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

namespace neuco::audio {

/// Interleaved samples in [-1, 1].
struct Wav {
  std::uint32_t sample_rate = 0;
  std::uint16_t channels = 1;
  std::vector<float> samples;

  std::size_t frames() const { return channels ? samples.size() / channels : 0; }
};

/// Reads 16-bit PCM or 32-bit IEEE float RIFF/WAVE (format auto-detected).
Wav read_wav(const std::filesystem::path& path);

/// Same as read_wav but rejects anything other than one channel.
Wav read_mono_wav(const std::filesystem::path& path);

/// Writes 32-bit float WAVE atomically.
void write_wav(const std::filesystem::path& path, const Wav& wav);

/// Windowed-sinc (Kaiser) sample-rate conversion. Output length is
/// round(n * out_rate / in_rate).
std::vector<float> resample(std::span<const float> in, std::uint32_t in_rate,
                            std::uint32_t out_rate);

}  // namespace neuco::audio
