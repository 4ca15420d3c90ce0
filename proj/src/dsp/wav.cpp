#include <algorithm>
#include <cmath>
#include <numbers>

#include "neuco/audio.hpp"
#include "neuco/binary_io.hpp"
#include "neuco/error.hpp"

namespace neuco::audio {

namespace {
constexpr std::uint16_t kFormatPcm = 1;
constexpr std::uint16_t kFormatFloat = 3;
constexpr std::uint16_t kFormatExtensible = 0xFFFE;
}  // namespace

Wav read_wav(const std::filesystem::path& path) {
  const std::string bytes = io::read_file(path);
  io::ByteReader r(bytes);
  if (bytes.size() < 12 || r.bytes(4, "riff") != "RIFF") {
    throw FormatError(path.string() + ": not a RIFF file");
  }
  r.u32("riff size");
  if (r.bytes(4, "wave") != "WAVE") throw FormatError(path.string() + ": not WAVE");

  std::uint16_t format = 0, channels = 0, bits = 0;
  std::uint32_t rate = 0;
  bool have_fmt = false;
  while (r.remaining() >= 8) {
    const auto id = r.bytes(4, "chunk id");
    const std::uint32_t size = r.u32("chunk size");
    if (id == "fmt ") {
      io::ByteReader f(r.bytes(size, "fmt chunk"));
      format = f.u16("format");
      channels = f.u16("channels");
      rate = f.u32("sample rate");
      f.u32("byte rate");
      f.u16("block align");
      bits = f.u16("bits per sample");
      if (format == kFormatExtensible && f.remaining() >= 10) {
        f.u16("cb size");
        f.u16("valid bits");
        f.u32("channel mask");
        format = f.u16("sub format");
      }
      have_fmt = true;
    } else if (id == "data") {
      if (!have_fmt) throw FormatError(path.string() + ": data chunk before fmt");
      if (channels == 0 || rate == 0) throw FormatError(path.string() + ": bad fmt chunk");
      const auto payload = r.bytes(std::min<std::size_t>(size, r.remaining()), "data");
      Wav wav;
      wav.sample_rate = rate;
      wav.channels = channels;
      io::ByteReader d(payload);
      if (format == kFormatPcm && bits == 16) {
        wav.samples.resize(payload.size() / 2);
        for (auto& s : wav.samples) {
          s = static_cast<float>(static_cast<std::int16_t>(d.u16("pcm"))) / 32768.0f;
        }
      } else if (format == kFormatFloat && bits == 32) {
        wav.samples.resize(payload.size() / 4);
        d.f32s(wav.samples, "float samples");
      } else {
        throw FormatError(path.string() + ": unsupported WAV encoding (format " +
                          std::to_string(format) + ", " + std::to_string(bits) + " bits)");
      }
      wav.samples.resize(wav.samples.size() - wav.samples.size() % channels);
      return wav;
    } else {
      r.bytes(std::min<std::size_t>(size + (size & 1u), r.remaining()), "chunk");
    }
  }
  throw FormatError(path.string() + ": no data chunk");
}

Wav read_mono_wav(const std::filesystem::path& path) {
  auto wav = read_wav(path);
  if (wav.channels != 1) {
    throw ValidationError(path.string() + ": expected mono audio, found " +
                          std::to_string(wav.channels) + " channels");
  }
  return wav;
}

void write_wav(const std::filesystem::path& path, const Wav& wav) {
  if (wav.channels == 0) throw ValidationError("WAV needs at least one channel");
  const auto data_bytes = static_cast<std::uint32_t>(wav.samples.size() * 4);
  io::ByteWriter w;
  w.bytes("RIFF");
  w.u32(36 + data_bytes);
  w.bytes("WAVE");
  w.bytes("fmt ");
  w.u32(16);
  w.u16(kFormatFloat);
  w.u16(wav.channels);
  w.u32(wav.sample_rate);
  w.u32(wav.sample_rate * wav.channels * 4);
  w.u16(static_cast<std::uint16_t>(wav.channels * 4));
  w.u16(32);
  w.bytes("data");
  w.u32(data_bytes);
  w.f32s(wav.samples);
  io::write_file_atomic(path, w.data());
}

std::vector<float> resample(std::span<const float> in, std::uint32_t in_rate,
                            std::uint32_t out_rate) {
  if (in_rate == 0 || out_rate == 0) throw ValidationError("sample rate must be positive");
  if (in_rate == out_rate) return {in.begin(), in.end()};

  constexpr int kHalfTaps = 32;
  constexpr double kBeta = 8.6;
  const double ratio = static_cast<double>(out_rate) / in_rate;
  const double cutoff = std::min(1.0, ratio) * 0.97;
  const double half_width = kHalfTaps / cutoff;
  const double i0_beta = std::cyl_bessel_i(0.0, kBeta);
  const auto n_out = static_cast<std::size_t>(std::llround(in.size() * ratio));

  std::vector<float> out(n_out);
  const auto n_in = static_cast<long>(in.size());
  for (std::size_t i = 0; i < n_out; ++i) {
    const double t = static_cast<double>(i) / ratio;
    const long lo = static_cast<long>(std::ceil(t - half_width));
    const long hi = static_cast<long>(std::floor(t + half_width));
    double acc = 0.0;
    for (long j = std::max(0L, lo); j <= std::min(n_in - 1, hi); ++j) {
      const double x = t - static_cast<double>(j);
      const double u = x / half_width;
      const double win = std::cyl_bessel_i(0.0, kBeta * std::sqrt(std::max(0.0, 1.0 - u * u))) / i0_beta;
      const double arg = std::numbers::pi * cutoff * x;
      const double sinc = x == 0.0 ? 1.0 : std::sin(arg) / arg;
      acc += in[static_cast<std::size_t>(j)] * cutoff * sinc * win;
    }
    out[i] = static_cast<float>(acc);
  }
  return out;
}

}  // namespace neuco::audio
