#include "ccqt/nn/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <sstream>

#include "ccqt/errors.hpp"

namespace ccqt::nn {

namespace {

constexpr std::size_t kMagicLen = 8;

void put_f32(std::vector<std::uint8_t>& out, double v) {
  const auto bits = std::bit_cast<std::uint32_t>(static_cast<float>(v));
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(bits >> (8 * i)));
}

double get_f32(const std::uint8_t* p) {
  const std::uint32_t bits = static_cast<std::uint32_t>(p[0]) |
                             (static_cast<std::uint32_t>(p[1]) << 8) |
                             (static_cast<std::uint32_t>(p[2]) << 16) |
                             (static_cast<std::uint32_t>(p[3]) << 24);
  return static_cast<double>(std::bit_cast<float>(bits));
}

std::string shape_text(const Shape& s) {
  std::string out;
  for (std::size_t i = 0; i < s.size(); ++i) out += (i ? "x" : "") + std::to_string(s[i]);
  return out;
}

Shape parse_shape(const std::string& text, const std::string& name) {
  Shape s;
  std::stringstream ss(text);
  std::string part;
  while (std::getline(ss, part, 'x')) {
    try {
      const auto v = parse_int(part, "tensor." + name + " shape");
      if (v < 0) throw ConfigError("negative");
      s.push_back(static_cast<std::size_t>(v));
    } catch (const ConfigError&) {
      throw MalformedFileError("checkpoint: bad shape '" + text + "' for tensor '" + name + "'");
    }
  }
  if (s.empty()) throw MalformedFileError("checkpoint: empty shape for tensor '" + name + "'");
  return s;
}

}  // namespace

std::vector<std::uint8_t> serialize_checkpoint(const Model& model) {
  KeyValues kv;
  kv.set("checkpoint.version", "1");
  model.config().to_kv(kv);
  model.features().to_kv(kv);
  kv.set("state.bn_stats", model.has_bn_stats() ? "true" : "false");
  const auto tensors = model.state();
  std::size_t offset = 0;
  for (const auto& t : tensors) {
    kv.set("tensor." + t.name, shape_text(t.tensor.shape()) + " @ " + std::to_string(offset));
    offset += 8 * t.tensor.size();
  }
  kv.set("payload.bytes", std::to_string(offset));
  const std::string manifest = kv.to_text();

  std::vector<std::uint8_t> out(kCheckpointMagic, kCheckpointMagic + kMagicLen);
  const auto len = static_cast<std::uint32_t>(manifest.size());
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(len >> (8 * i)));
  out.insert(out.end(), manifest.begin(), manifest.end());
  out.reserve(out.size() + offset);
  for (const auto& t : tensors) {
    for (double v : t.tensor.real()) put_f32(out, v);
    for (double v : t.tensor.imag()) put_f32(out, v);
  }
  return out;
}

Model deserialize_checkpoint(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < kMagicLen + 4 || std::memcmp(bytes.data(), "CCQT", 4) != 0)
    throw MalformedFileError("checkpoint: bad magic");
  if (std::memcmp(bytes.data(), kCheckpointMagic, kMagicLen) != 0)
    throw UnsupportedFormatError(
        "checkpoint: version mismatch (file '" +
        std::string(reinterpret_cast<const char*>(bytes.data()), kMagicLen) + "', expected '" +
        kCheckpointMagic + "')");
  const std::uint8_t* p = bytes.data() + kMagicLen;
  const std::uint32_t len = static_cast<std::uint32_t>(p[0]) |
                            (static_cast<std::uint32_t>(p[1]) << 8) |
                            (static_cast<std::uint32_t>(p[2]) << 16) |
                            (static_cast<std::uint32_t>(p[3]) << 24);
  const std::size_t payload_start = kMagicLen + 4 + len;
  if (payload_start > bytes.size())
    throw MalformedFileError("checkpoint: manifest length exceeds file size");
  const std::string manifest(reinterpret_cast<const char*>(bytes.data() + kMagicLen + 4), len);

  KeyValues kv;
  std::istringstream lines(manifest);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(lines, line)) {
    ++lineno;
    if (trim(line).empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw MalformedFileError("checkpoint manifest line " + std::to_string(lineno) +
                               ": expected 'key = value'");
    kv.set(std::string(trim(std::string_view(line).substr(0, eq))),
           std::string(trim(std::string_view(line).substr(eq + 1))));
  }

  try {
    if (kv.get("checkpoint.version") != "1")
      throw UnsupportedFormatError("checkpoint: manifest version " + kv.get("checkpoint.version"));
    const auto config = ModelConfig::from_kv(kv);
    const auto features = dsp::CqtConfig::from_kv(kv);
    const bool bn_stats = kv.get_bool("state.bn_stats");
    const auto declared_payload = static_cast<std::size_t>(kv.get_int("payload.bytes"));
    if (declared_payload != bytes.size() - payload_start)
      throw MalformedFileError("checkpoint: manifest declares " + std::to_string(declared_payload) +
                               " payload bytes, file holds " +
                               std::to_string(bytes.size() - payload_start));

    std::vector<NamedTensor> tensors;
    std::size_t expected_offset = 0;
    for (const auto& [key, value] : kv.entries()) {
      if (key.rfind("tensor.", 0) != 0) continue;
      const std::string name = key.substr(7);
      const auto at = value.find('@');
      if (at == std::string::npos)
        throw MalformedFileError("checkpoint: tensor entry '" + name + "' lacks an offset");
      const Shape shape = parse_shape(std::string(trim(std::string_view(value).substr(0, at))), name);
      const auto offset =
          static_cast<std::size_t>(parse_int(trim(std::string_view(value).substr(at + 1)), key));
      const std::size_t n = numel(shape);
      if (offset != expected_offset || offset + 8 * n > declared_payload)
        throw MalformedFileError("checkpoint: tensor '" + name + "' with shape " +
                                 shape_string(shape) + " at offset " + std::to_string(offset) +
                                 " does not fit the payload layout");
      std::vector<double> re(n), im(n);
      const std::uint8_t* base = bytes.data() + payload_start + offset;
      for (std::size_t i = 0; i < n; ++i) {
        re[i] = get_f32(base + 4 * i);
        im[i] = get_f32(base + 4 * (n + i));
      }
      tensors.push_back({name, ComplexTensor::from_planes(shape, std::move(re), std::move(im))});
      expected_offset = offset + 8 * n;
    }
    if (expected_offset != declared_payload)
      throw MalformedFileError("checkpoint: tensor table covers " + std::to_string(expected_offset) +
                               " of " + std::to_string(declared_payload) + " payload bytes");

    Model model(config, features, 0);
    model.load_state(tensors, bn_stats);
    return model;
  } catch (const FormatError&) {
    throw;
  } catch (const Error& e) {
    throw MalformedFileError(std::string("checkpoint: ") + e.what());
  }
}

void save_checkpoint(const Model& model, const std::string& path) {
  const auto bytes = serialize_checkpoint(model);
  std::ofstream f(path, std::ios::binary);
  if (!f) throw FormatError("cannot write checkpoint '" + path + "'");
  f.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!f) throw FormatError("write failed for checkpoint '" + path + "'");
}

Model load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open checkpoint '" + path + "'");
  const std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                        std::istreambuf_iterator<char>());
  return deserialize_checkpoint(bytes);
}

}  // namespace ccqt::nn
