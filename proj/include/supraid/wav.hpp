#pragma once

// Minimal RIFF/WAVE codec: PCM 16-bit little-endian, mono, 16 kHz only.
// Anything else is rejected rather than silently converted.

#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <vector>

#include "supraid/common.hpp"
#include "supraid/features.hpp"

namespace supraid {

namespace detail {

inline std::uint32_t read_u32(const unsigned char* p) {
  return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) |
         (static_cast<std::uint32_t>(p[3]) << 24);
}
inline std::uint16_t read_u16(const unsigned char* p) {
  return static_cast<std::uint16_t>(p[0] | (p[1] << 8));
}

}  // namespace detail

inline AudioClip read_wav(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw data_error("cannot open " + path.string());
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)),
                                   std::istreambuf_iterator<char>());
  if (bytes.size() < 44 || std::memcmp(bytes.data(), "RIFF", 4) != 0 ||
      std::memcmp(bytes.data() + 8, "WAVE", 4) != 0)
    throw data_error(path.string() + ": not a RIFF/WAVE file");

  std::uint16_t format = 0, channels = 0, bits = 0;
  std::uint32_t rate = 0;
  const unsigned char* data = nullptr;
  std::uint32_t data_len = 0;

  std::size_t pos = 12;
  while (pos + 8 <= bytes.size()) {
    const unsigned char* hdr = bytes.data() + pos;
    std::uint32_t len = detail::read_u32(hdr + 4);
    const unsigned char* body = hdr + 8;
    if (pos + 8 + len > bytes.size())
      throw data_error(path.string() + ": truncated chunk");
    if (std::memcmp(hdr, "fmt ", 4) == 0) {
      if (len < 16) throw data_error(path.string() + ": short fmt chunk");
      format = detail::read_u16(body);
      channels = detail::read_u16(body + 2);
      rate = detail::read_u32(body + 4);
      bits = detail::read_u16(body + 14);
    } else if (std::memcmp(hdr, "data", 4) == 0) {
      data = body;
      data_len = len;
    }
    pos += 8 + len + (len & 1);
  }

  if (format != 1) throw data_error(path.string() + ": not PCM");
  if (channels != 1) throw data_error(path.string() + ": not mono");
  if (bits != 16) throw data_error(path.string() + ": not 16-bit");
  if (rate != kSampleRateHz)
    throw data_error(path.string() + ": sample rate must be 16000 Hz");
  if (!data || data_len < 2) throw data_error(path.string() + ": no samples");

  AudioClip clip;
  clip.sample_rate_hz = static_cast<int>(rate);
  clip.samples.resize(data_len / 2);
  for (std::size_t i = 0; i < clip.samples.size(); ++i) {
    std::int16_t s = static_cast<std::int16_t>(
        data[2 * i] | (static_cast<std::uint16_t>(data[2 * i + 1]) << 8));
    clip.samples[i] = s / 32768.0;
  }
  return clip;
}

inline void write_wav(const AudioClip& clip,
                      const std::filesystem::path& path) {
  check_clip(clip);
  std::vector<unsigned char> out;
  auto put_u32 = [&out](std::uint32_t v) {
    out.push_back(v & 0xff);
    out.push_back((v >> 8) & 0xff);
    out.push_back((v >> 16) & 0xff);
    out.push_back((v >> 24) & 0xff);
  };
  auto put_u16 = [&out](std::uint16_t v) {
    out.push_back(v & 0xff);
    out.push_back((v >> 8) & 0xff);
  };
  auto put_tag = [&out](const char* t) {
    out.insert(out.end(), t, t + 4);
  };

  std::uint32_t data_len = static_cast<std::uint32_t>(clip.samples.size() * 2);
  put_tag("RIFF");
  put_u32(36 + data_len);
  put_tag("WAVE");
  put_tag("fmt ");
  put_u32(16);
  put_u16(1);  // PCM
  put_u16(1);  // mono
  put_u32(kSampleRateHz);
  put_u32(kSampleRateHz * 2);
  put_u16(2);
  put_u16(16);
  put_tag("data");
  put_u32(data_len);
  for (double s : clip.samples) {
    double clamped = std::max(-1.0, std::min(1.0, s));
    auto v = static_cast<std::int16_t>(std::lrint(clamped * 32767.0));
    put_u16(static_cast<std::uint16_t>(v));
  }

  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw data_error("cannot write " + path.string());
  f.write(reinterpret_cast<const char*>(out.data()),
          static_cast<std::streamsize>(out.size()));
}

}  // namespace supraid
