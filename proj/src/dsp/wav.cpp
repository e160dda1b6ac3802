#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iterator>

#include "ccqt/dsp/audio.hpp"
#include "ccqt/errors.hpp"

namespace ccqt::dsp {

namespace {

std::uint32_t read_u32(const std::uint8_t* p) {
  return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) |
         (static_cast<std::uint32_t>(p[3]) << 24);
}

std::uint16_t read_u16(const std::uint8_t* p) {
  return static_cast<std::uint16_t>(p[0] | (p[1] << 8));
}

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

void put_u16(std::vector<std::uint8_t>& out, std::uint16_t v) {
  out.push_back(static_cast<std::uint8_t>(v));
  out.push_back(static_cast<std::uint8_t>(v >> 8));
}

void put_tag(std::vector<std::uint8_t>& out, const char* tag) {
  out.insert(out.end(), tag, tag + 4);
}

}  // namespace

void AudioClip::validate() const {
  if (!(sample_rate > 0.0) || !std::isfinite(sample_rate))
    throw FormatError("sample rate must be positive");
  for (std::size_t i = 0; i < samples.size(); ++i) {
    if (!(samples[i] >= -1.0 && samples[i] <= 1.0))
      throw FormatError("sample " + std::to_string(i) + " outside [-1, 1]");
  }
}

AudioClip load_wav(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open '" + path + "'");
  const std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                        std::istreambuf_iterator<char>());
  if (bytes.size() < 12 || std::memcmp(bytes.data(), "RIFF", 4) != 0 ||
      std::memcmp(bytes.data() + 8, "WAVE", 4) != 0)
    throw MalformedFileError("'" + path + "' is not a RIFF/WAVE file");

  bool have_fmt = false;
  std::uint16_t format = 0, channels = 0, bits = 0;
  std::uint32_t rate = 0;
  std::size_t pos = 12;
  while (pos + 8 <= bytes.size()) {
    const std::uint8_t* hdr = bytes.data() + pos;
    const std::uint32_t chunk_size = read_u32(hdr + 4);
    const std::size_t body = pos + 8;
    if (std::memcmp(hdr, "fmt ", 4) == 0) {
      if (chunk_size < 16 || body + chunk_size > bytes.size())
        throw MalformedFileError("'" + path + "': truncated fmt chunk");
      format = read_u16(bytes.data() + body);
      channels = read_u16(bytes.data() + body + 2);
      rate = read_u32(bytes.data() + body + 4);
      bits = read_u16(bytes.data() + body + 14);
      if (format == 0xFFFE && chunk_size >= 26)  // WAVE_FORMAT_EXTENSIBLE
        format = read_u16(bytes.data() + body + 24);
      have_fmt = true;
    } else if (std::memcmp(hdr, "data", 4) == 0) {
      if (!have_fmt)
        throw MalformedFileError("'" + path + "': data chunk before fmt chunk");
      if (format != 1)
        throw UnsupportedFormatError("'" + path + "': only PCM is supported (format " +
                                     std::to_string(format) + ")");
      if (channels != 1)
        throw UnsupportedFormatError("'" + path + "': only mono is supported (" +
                                     std::to_string(channels) + " channels)");
      if (bits != 16)
        throw UnsupportedFormatError("'" + path + "': only 16-bit samples are supported (" +
                                     std::to_string(bits) + " bits)");
      if (rate == 0) throw MalformedFileError("'" + path + "': zero sample rate");
      if (body + chunk_size > bytes.size())
        throw MalformedFileError("'" + path + "': data chunk declares " +
                                 std::to_string(chunk_size) + " bytes but only " +
                                 std::to_string(bytes.size() - body) + " remain");
      if (chunk_size % 2 != 0)
        throw MalformedFileError("'" + path + "': odd data chunk size");
      AudioClip clip;
      clip.sample_rate = static_cast<double>(rate);
      clip.samples.resize(chunk_size / 2);
      for (std::size_t i = 0; i < clip.samples.size(); ++i) {
        const auto v = static_cast<std::int16_t>(read_u16(bytes.data() + body + 2 * i));
        clip.samples[i] = static_cast<double>(v) / 32768.0;
      }
      return clip;
    }
    pos = body + chunk_size + (chunk_size & 1u);
  }
  throw MalformedFileError("'" + path + "': no data chunk");
}

void save_wav(const AudioClip& clip, const std::string& path) {
  const auto n = clip.samples.size();
  const auto rate = static_cast<std::uint32_t>(std::lround(clip.sample_rate));
  std::vector<std::uint8_t> out;
  out.reserve(44 + 2 * n);
  put_tag(out, "RIFF");
  put_u32(out, static_cast<std::uint32_t>(36 + 2 * n));
  put_tag(out, "WAVE");
  put_tag(out, "fmt ");
  put_u32(out, 16);
  put_u16(out, 1);  // PCM
  put_u16(out, 1);  // mono
  put_u32(out, rate);
  put_u32(out, rate * 2);
  put_u16(out, 2);
  put_u16(out, 16);
  put_tag(out, "data");
  put_u32(out, static_cast<std::uint32_t>(2 * n));
  for (double x : clip.samples) {
    const double scaled = std::round(x * 32768.0);
    const auto v = static_cast<std::int16_t>(std::clamp(scaled, -32768.0, 32767.0));
    put_u16(out, static_cast<std::uint16_t>(v));
  }
  std::ofstream f(path, std::ios::binary);
  if (!f) throw FormatError("cannot write '" + path + "'");
  f.write(reinterpret_cast<const char*>(out.data()),
          static_cast<std::streamsize>(out.size()));
  if (!f) throw FormatError("write failed for '" + path + "'");
}

}  // namespace ccqt::dsp
