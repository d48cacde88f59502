// Copyright 2026 The specflow Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "wav.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <vector>

#include "error.hpp"

namespace specflow {

namespace {

std::uint32_t ReadU32(const unsigned char* p) {
  return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) |
         (static_cast<std::uint32_t>(p[3]) << 24);
}

std::uint16_t ReadU16(const unsigned char* p) {
  return static_cast<std::uint16_t>(p[0] | (p[1] << 8));
}

void PutU32(std::vector<unsigned char>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<unsigned char>(v >> (8 * i)));
}

void PutU16(std::vector<unsigned char>& out, std::uint16_t v) {
  out.push_back(static_cast<unsigned char>(v & 0xff));
  out.push_back(static_cast<unsigned char>(v >> 8));
}

void PutTag(std::vector<unsigned char>& out, const char* tag) {
  out.insert(out.end(), tag, tag + 4);
}

std::int16_t ToPcm16(double sample) {
  const double clipped = std::clamp(sample, -1.0, 1.0);
  return static_cast<std::int16_t>(std::lround(clipped * 32767.0));
}

}  // namespace

double QuantizePcm16(double sample) { return ToPcm16(sample) / 32767.0; }

AudioSignal ReadWav(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  Require(in.good(), ErrorCode::kIo, "cannot open WAV file: " + path);
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)),
                                   std::istreambuf_iterator<char>());
  Require(bytes.size() >= 12 && std::memcmp(bytes.data(), "RIFF", 4) == 0 &&
              std::memcmp(bytes.data() + 8, "WAVE", 4) == 0,
          ErrorCode::kFormat, path + ": not a RIFF/WAVE file");

  bool have_fmt = false;
  int channels = 0;
  int bits = 0;
  AudioSignal signal;
  std::size_t pos = 12;
  while (pos + 8 <= bytes.size()) {
    const unsigned char* chunk = bytes.data() + pos;
    const std::uint32_t size = ReadU32(chunk + 4);
    const std::size_t body = pos + 8;
    Require(body + size <= bytes.size(), ErrorCode::kFormat,
            path + ": truncated chunk");
    if (std::memcmp(chunk, "fmt ", 4) == 0) {
      Require(size >= 16, ErrorCode::kFormat, path + ": short fmt chunk");
      const std::uint16_t format = ReadU16(bytes.data() + body);
      channels = ReadU16(bytes.data() + body + 2);
      signal.sample_rate = static_cast<int>(ReadU32(bytes.data() + body + 4));
      bits = ReadU16(bytes.data() + body + 14);
      Require(format == 1 || format == 0xFFFE, ErrorCode::kFormat,
              path + ": only PCM WAV is supported");
      have_fmt = true;
    } else if (std::memcmp(chunk, "data", 4) == 0) {
      Require(have_fmt, ErrorCode::kFormat, path + ": data chunk before fmt");
      Require(channels == 1, ErrorCode::kFormat,
              path + ": expected mono audio, found " + std::to_string(channels) +
                  " channels");
      Require(bits == 16, ErrorCode::kFormat,
              path + ": expected 16-bit PCM, found " + std::to_string(bits) + "-bit");
      Require(signal.sample_rate > 0, ErrorCode::kFormat,
              path + ": invalid sample rate");
      const std::size_t count = size / 2;
      signal.samples.resize(count);
      for (std::size_t i = 0; i < count; ++i) {
        const auto raw = static_cast<std::int16_t>(ReadU16(bytes.data() + body + 2 * i));
        signal.samples[i] = raw / 32767.0;
      }
      return signal;
    }
    pos = body + size + (size & 1);
  }
  Fail(ErrorCode::kFormat, path + ": no data chunk");
}

void WriteWav(const std::string& path, const AudioSignal& signal) {
  signal.Validate();
  const auto data_bytes = static_cast<std::uint32_t>(signal.samples.size() * 2);
  std::vector<unsigned char> out;
  out.reserve(44 + data_bytes);
  PutTag(out, "RIFF");
  PutU32(out, 36 + data_bytes);
  PutTag(out, "WAVE");
  PutTag(out, "fmt ");
  PutU32(out, 16);
  PutU16(out, 1);
  PutU16(out, 1);
  PutU32(out, static_cast<std::uint32_t>(signal.sample_rate));
  PutU32(out, static_cast<std::uint32_t>(signal.sample_rate) * 2);
  PutU16(out, 2);
  PutU16(out, 16);
  PutTag(out, "data");
  PutU32(out, data_bytes);
  for (double s : signal.samples) {
    PutU16(out, static_cast<std::uint16_t>(ToPcm16(s)));
  }
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  Require(f.good(), ErrorCode::kIo, "cannot write WAV file: " + path);
  f.write(reinterpret_cast<const char*>(out.data()),
          static_cast<std::streamsize>(out.size()));
  Require(f.good(), ErrorCode::kIo, "write failed: " + path);
}

}  // namespace specflow
