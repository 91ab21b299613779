#pragma once

#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <span>
#include <string>
#include <vector>

#include "otmorph/errors.hpp"

namespace otmorph {

// Minimal RIFF/WAVE reader and writer: mono, 16-bit PCM or 32-bit IEEE float
// in, 16-bit PCM out. 16-bit samples map to doubles as s / 32768, which makes
// a read-write round trip bit-identical in the sample payload.

struct WavData {
  std::vector<double> samples;
  int sample_rate_hz = 0;
};

namespace detail {

inline std::uint16_t read_u16(const unsigned char* p) {
  return static_cast<std::uint16_t>(p[0] | (p[1] << 8));
}
inline std::uint32_t read_u32(const unsigned char* p) {
  return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}
inline void put_u16(std::vector<unsigned char>& out, std::uint16_t v) {
  out.push_back(v & 0xff);
  out.push_back((v >> 8) & 0xff);
}
inline void put_u32(std::vector<unsigned char>& out, std::uint32_t v) {
  out.push_back(v & 0xff);
  out.push_back((v >> 8) & 0xff);
  out.push_back((v >> 16) & 0xff);
  out.push_back((v >> 24) & 0xff);
}

}  // namespace detail

inline WavData read_wav(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("wav: cannot open " + path);
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)),
                                   std::istreambuf_iterator<char>());
  if (bytes.size() < 44 || std::memcmp(bytes.data(), "RIFF", 4) != 0 ||
      std::memcmp(bytes.data() + 8, "WAVE", 4) != 0)
    throw InputError("wav: " + path + " is not a RIFF/WAVE file");

  std::uint16_t format = 0, channels = 0, bits = 0;
  std::uint32_t rate = 0;
  bool have_fmt = false;
  const unsigned char* data = nullptr;
  std::uint32_t data_len = 0;

  std::size_t pos = 12;
  while (pos + 8 <= bytes.size()) {
    char id[5] = {0};
    std::memcpy(id, bytes.data() + pos, 4);
    std::uint32_t len = detail::read_u32(bytes.data() + pos + 4);
    const unsigned char* body = bytes.data() + pos + 8;
    if (pos + 8 + len > bytes.size()) throw InputError("wav: " + path + " has a truncated chunk");
    if (std::memcmp(id, "fmt ", 4) == 0) {
      if (len < 16) throw InputError("wav: " + path + " has a malformed fmt chunk");
      format = detail::read_u16(body);
      channels = detail::read_u16(body + 2);
      rate = detail::read_u32(body + 4);
      bits = detail::read_u16(body + 14);
      have_fmt = true;
    } else if (std::memcmp(id, "data", 4) == 0) {
      data = body;
      data_len = len;
    }
    pos += 8 + len + (len & 1);  // chunks are word-aligned
  }
  if (!have_fmt || !data) throw InputError("wav: " + path + " is missing fmt or data chunk");
  if (channels != 1) throw InputError("wav: " + path + ": mono required");
  if (!((format == 1 && bits == 16) || (format == 3 && bits == 32)))
    throw InputError("wav: " + path + ": unsupported codec in fmt chunk (format tag " +
                     std::to_string(format) + ", " + std::to_string(bits) + " bits)");

  WavData out;
  out.sample_rate_hz = static_cast<int>(rate);
  if (format == 1) {
    std::size_t count = data_len / 2;
    out.samples.resize(count);
    for (std::size_t s = 0; s < count; ++s) {
      std::int16_t v = static_cast<std::int16_t>(detail::read_u16(data + 2 * s));
      out.samples[s] = v / 32768.0;
    }
  } else {
    std::size_t count = data_len / 4;
    out.samples.resize(count);
    for (std::size_t s = 0; s < count; ++s) {
      std::uint32_t u = detail::read_u32(data + 4 * s);
      float f;
      std::memcpy(&f, &u, 4);
      out.samples[s] = f;
    }
  }
  return out;
}

// Writes mono 16-bit PCM with round-to-nearest and saturation; returns the
// number of clipped samples so callers can warn.
inline int write_wav(const std::string& path, std::span<const double> samples,
                     int sample_rate_hz) {
  if (sample_rate_hz < 1) throw InputError("wav: sample rate must be positive");
  std::vector<unsigned char> out;
  out.reserve(44 + samples.size() * 2);
  const std::uint32_t data_len = static_cast<std::uint32_t>(samples.size() * 2);

  out.insert(out.end(), {'R', 'I', 'F', 'F'});
  detail::put_u32(out, 36 + data_len);
  out.insert(out.end(), {'W', 'A', 'V', 'E'});
  out.insert(out.end(), {'f', 'm', 't', ' '});
  detail::put_u32(out, 16);
  detail::put_u16(out, 1);  // PCM
  detail::put_u16(out, 1);  // mono
  detail::put_u32(out, static_cast<std::uint32_t>(sample_rate_hz));
  detail::put_u32(out, static_cast<std::uint32_t>(sample_rate_hz) * 2);
  detail::put_u16(out, 2);
  detail::put_u16(out, 16);
  out.insert(out.end(), {'d', 'a', 't', 'a'});
  detail::put_u32(out, data_len);

  int clipped = 0;
  for (double x : samples) {
    double scaled = std::lround(x * 32768.0);
    if (scaled > 32767.0) {
      scaled = 32767.0;
      ++clipped;
    } else if (scaled < -32768.0) {
      scaled = -32768.0;
      ++clipped;
    }
    detail::put_u16(out, static_cast<std::uint16_t>(static_cast<std::int16_t>(scaled)));
  }

  std::ofstream file(path, std::ios::binary);
  if (!file) throw InputError("wav: cannot write " + path);
  file.write(reinterpret_cast<const char*>(out.data()), static_cast<std::streamsize>(out.size()));
  if (!file) throw InputError("wav: write failed for " + path);
  return clipped;
}

}  // namespace otmorph
