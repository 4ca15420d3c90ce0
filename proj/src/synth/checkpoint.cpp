#include "neuco/synth/checkpoint.hpp"

#include <map>
#include <vector>

#include "neuco/binary_io.hpp"
#include "neuco/error.hpp"

namespace neuco::synth {

namespace {

constexpr std::string_view kMagic = "NCSM";
constexpr std::uint16_t kVersion = 1;
constexpr std::uint8_t kTypeU32 = 0;
constexpr std::uint8_t kTypeF64 = 1;

struct Field {
  std::uint8_t type = kTypeU32;
  std::vector<std::uint32_t> ints;
  double real = 0.0;
};

std::map<std::string, Field> config_fields(const SynthConfig& c) {
  std::map<std::string, Field> f;
  auto u = [&](const char* name, std::vector<std::uint32_t> v) { f[name] = {kTypeU32, std::move(v), 0.0}; };
  u("value_dim", {c.value_dim});
  u("base_channels", {c.base_channels});
  u("cond_channels", {c.cond_channels});
  u("up_factors", {c.up_factors.begin(), c.up_factors.end()});
  u("down_factors", {c.down_factors.begin(), c.down_factors.end()});
  u("harmonic_channels", {c.harmonic_channels});
  u("loudness_channels", {c.loudness_channels});
  u("ltv_taps", {c.ltv_taps});
  u("estimator_hidden", {c.estimator_hidden});
  u("sample_rate_out", {c.sample_rate_out});
  f["leaky_slope"] = {kTypeF64, {}, c.leaky_slope};
  return f;
}

std::uint32_t scalar(const std::map<std::string, Field>& f, const std::string& name) {
  auto it = f.find(name);
  if (it == f.end() || it->second.type != kTypeU32 || it->second.ints.size() != 1) {
    throw FormatError("checkpoint config field '" + name + "' missing or malformed");
  }
  return it->second.ints[0];
}

template <std::size_t N>
std::array<std::uint32_t, N> list(const std::map<std::string, Field>& f, const std::string& name) {
  auto it = f.find(name);
  if (it == f.end() || it->second.type != kTypeU32 || it->second.ints.size() != N) {
    throw FormatError("checkpoint config field '" + name + "' missing or malformed");
  }
  std::array<std::uint32_t, N> out{};
  std::copy(it->second.ints.begin(), it->second.ints.end(), out.begin());
  return out;
}

}  // namespace

std::string encode_checkpoint(const SynthModel& model) {
  io::ByteWriter w;
  w.bytes(kMagic);
  w.u16(kVersion);
  const auto fields = config_fields(model.config);
  w.u16(static_cast<std::uint16_t>(fields.size()));
  for (const auto& [name, field] : fields) {
    w.short_string(name);
    w.u8(field.type);
    if (field.type == kTypeU32) {
      w.u32(static_cast<std::uint32_t>(field.ints.size()));
      for (auto v : field.ints) w.u32(v);
    } else {
      w.u32(1);
      w.f64(field.real);
    }
  }
  const auto& params = model.params.all();
  w.u32(static_cast<std::uint32_t>(params.size()));
  std::vector<float> buf;
  for (const auto& p : params) {
    w.short_string(p.name);
    w.u32(static_cast<std::uint32_t>(p.shape.size()));
    for (auto d : p.shape) w.u32(d);
    buf.assign(p.value.begin(), p.value.end());
    w.f32s(buf);
  }
  return w.data();
}

SynthModel decode_checkpoint(std::string_view bytes) {
  io::ByteReader r(bytes);
  if (bytes.size() < 4 || r.bytes(4, "magic") != kMagic) throw FormatError("bad NCSM magic");
  const auto version = r.u16("version");
  if (version != kVersion) throw FormatError("unsupported NCSM version " + std::to_string(version));

  std::map<std::string, Field> fields;
  const auto n_fields = r.u16("field count");
  for (std::uint16_t i = 0; i < n_fields; ++i) {
    auto name = r.short_string("field name");
    Field f;
    f.type = r.u8("field type");
    const auto count = r.u32("field count");
    if (f.type == kTypeU32) {
      for (std::uint32_t k = 0; k < count; ++k) f.ints.push_back(r.u32("field value"));
    } else if (f.type == kTypeF64 && count == 1) {
      f.real = r.f64("field value");
    } else {
      throw FormatError("unknown config field type in '" + name + "'");
    }
    fields[std::move(name)] = std::move(f);
  }

  SynthConfig cfg;
  cfg.value_dim = scalar(fields, "value_dim");
  cfg.base_channels = scalar(fields, "base_channels");
  cfg.cond_channels = scalar(fields, "cond_channels");
  cfg.up_factors = list<kUpBlocks>(fields, "up_factors");
  cfg.down_factors = list<kDownBlocks>(fields, "down_factors");
  cfg.harmonic_channels = scalar(fields, "harmonic_channels");
  cfg.loudness_channels = scalar(fields, "loudness_channels");
  cfg.ltv_taps = scalar(fields, "ltv_taps");
  cfg.estimator_hidden = scalar(fields, "estimator_hidden");
  cfg.sample_rate_out = scalar(fields, "sample_rate_out");
  auto slope = fields.find("leaky_slope");
  if (slope == fields.end() || slope->second.type != kTypeF64) {
    throw FormatError("checkpoint config field 'leaky_slope' missing or malformed");
  }
  cfg.leaky_slope = slope->second.real;

  SynthModel model = build_model_shapes(cfg);
  const auto n_tensors = r.u32("tensor count");
  if (n_tensors != model.params.size()) {
    throw FormatError("checkpoint holds " + std::to_string(n_tensors) + " tensors, config implies " +
                      std::to_string(model.params.size()));
  }
  std::vector<bool> seen(model.params.size(), false);
  std::vector<float> buf;
  for (std::uint32_t i = 0; i < n_tensors; ++i) {
    const auto name = r.short_string("tensor name");
    const auto idx = model.params.find(name);
    if (idx == model.params.size()) throw FormatError("unexpected tensor '" + name + "'");
    if (seen[idx]) throw FormatError("duplicate tensor '" + name + "'");
    seen[idx] = true;
    auto& p = model.params[idx];
    const auto rank = r.u32("tensor rank");
    std::vector<std::uint32_t> dims(rank);
    for (auto& d : dims) d = r.u32("tensor dim");
    if (dims != p.shape) throw FormatError("tensor '" + name + "' has the wrong shape");
    buf.resize(p.value.size());
    r.f32s(buf, "tensor data");
    p.value.assign(buf.begin(), buf.end());
  }
  if (r.remaining() != 0) throw CorruptionError("trailing bytes after NCSM tensors");
  return model;
}

void save_checkpoint(const SynthModel& model, const std::filesystem::path& path) {
  io::write_file_atomic(path, encode_checkpoint(model));
}

SynthModel load_checkpoint(const std::filesystem::path& path) {
  return decode_checkpoint(io::read_file(path));
}

}  // namespace neuco::synth
