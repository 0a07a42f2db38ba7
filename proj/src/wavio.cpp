// Copyright 2026 The bsrnn-cpp Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "bsrnn/wavio.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <stdexcept>
#include <vector>

namespace bsrnn {

namespace {

constexpr uint16_t kFormatPcm = 1;
constexpr uint16_t kFormatFloat = 3;
constexpr uint16_t kFormatExtensible = 0xFFFE;

uint32_t rd_u32(const unsigned char* p) {
  return static_cast<uint32_t>(p[0]) | static_cast<uint32_t>(p[1]) << 8 |
         static_cast<uint32_t>(p[2]) << 16 | static_cast<uint32_t>(p[3]) << 24;
}

uint16_t rd_u16(const unsigned char* p) {
  return static_cast<uint16_t>(p[0] | p[1] << 8);
}

void wr_u32(std::ostream& os, uint32_t v) {
  const unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                              static_cast<unsigned char>(v >> 16),
                              static_cast<unsigned char>(v >> 24)};
  os.write(reinterpret_cast<const char*>(b), 4);
}

void wr_u16(std::ostream& os, uint16_t v) {
  const unsigned char b[2] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8)};
  os.write(reinterpret_cast<const char*>(b), 2);
}

[[noreturn]] void fail(const std::string& path, const std::string& what) {
  throw std::runtime_error(path + ": " + what);
}

// Converts one interleaved frame buffer into channel-major samples.
void decode(const std::vector<unsigned char>& raw, const WavInfo& info, int64_t frames,
            Waveform* out, int64_t out_offset) {
  const int bytes = info.bits_per_sample / 8;
  const int C = info.channels;
  for (int64_t f = 0; f < frames; ++f) {
    for (int c = 0; c < C; ++c) {
      const unsigned char* p = raw.data() + (f * C + c) * bytes;
      double v = 0.0;
      if (info.is_float && info.bits_per_sample == 32) {
        float x;
        std::memcpy(&x, p, 4);
        v = x;
      } else if (info.is_float && info.bits_per_sample == 64) {
        double x;
        std::memcpy(&x, p, 8);
        v = x;
      } else if (info.bits_per_sample == 16) {
        const int16_t s = static_cast<int16_t>(p[0] | p[1] << 8);
        v = s / 32768.0;
      } else if (info.bits_per_sample == 24) {
        int32_t s = p[0] | p[1] << 8 | p[2] << 16;
        if (s & 0x800000) s |= ~0xFFFFFF;
        v = s / 8388608.0;
      } else if (info.bits_per_sample == 32) {
        const int32_t s = static_cast<int32_t>(rd_u32(p));
        v = s / 2147483648.0;
      }
      out->at(c, out_offset + f) = v;
    }
  }
}

}  // namespace

WavInfo probe_wav(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(path, "cannot open");

  unsigned char hdr[12];
  if (!in.read(reinterpret_cast<char*>(hdr), 12)) fail(path, "truncated header");
  if (std::memcmp(hdr, "RIFF", 4) != 0 || std::memcmp(hdr + 8, "WAVE", 4) != 0)
    fail(path, "not a RIFF/WAVE file");

  WavInfo info;
  bool have_fmt = false;
  while (true) {
    unsigned char ch[8];
    if (!in.read(reinterpret_cast<char*>(ch), 8)) break;
    const uint32_t size = rd_u32(ch + 4);
    if (std::memcmp(ch, "fmt ", 4) == 0) {
      std::vector<unsigned char> fmt(size);
      if (!in.read(reinterpret_cast<char*>(fmt.data()), size)) fail(path, "truncated fmt");
      uint16_t format = rd_u16(fmt.data());
      info.channels = rd_u16(fmt.data() + 2);
      info.sample_rate = static_cast<int>(rd_u32(fmt.data() + 4));
      info.bits_per_sample = rd_u16(fmt.data() + 14);
      if (format == kFormatExtensible) {
        if (size < 40) fail(path, "short extensible fmt");
        format = rd_u16(fmt.data() + 24);  // first two GUID bytes
      }
      if (format == kFormatFloat) {
        info.is_float = true;
        if (info.bits_per_sample != 32 && info.bits_per_sample != 64)
          fail(path, "unsupported float width");
      } else if (format == kFormatPcm) {
        if (info.bits_per_sample != 16 && info.bits_per_sample != 24 &&
            info.bits_per_sample != 32)
          fail(path, "unsupported PCM width");
      } else {
        fail(path, "unsupported format tag " + std::to_string(format));
      }
      if (info.channels < 1) fail(path, "no channels");
      have_fmt = true;
      if (size % 2) in.seekg(1, std::ios::cur);
    } else if (std::memcmp(ch, "data", 4) == 0) {
      if (!have_fmt) fail(path, "data before fmt");
      info.data_offset = static_cast<int64_t>(in.tellg());
      const int64_t frame_bytes = static_cast<int64_t>(info.channels) * info.bits_per_sample / 8;
      info.frames = size / frame_bytes;
      return info;
    } else {
      in.seekg(size + (size % 2), std::ios::cur);
      if (!in) fail(path, "truncated chunk list");
    }
  }
  fail(path, "no data chunk");
}

Waveform read_wav(const std::string& path) {
  const WavInfo info = probe_wav(path);
  return read_wav_range(path, 0, info.frames);
}

Waveform read_wav_range(const std::string& path, int64_t start, int64_t count) {
  const WavInfo info = probe_wav(path);
  if (start < 0 || count < 0 || start + count > info.frames)
    fail(path, "range [" + std::to_string(start) + ", " + std::to_string(start + count) +
                   ") outside " + std::to_string(info.frames) + " frames");

  std::ifstream in(path, std::ios::binary);
  if (!in) fail(path, "cannot open");
  const int64_t frame_bytes = static_cast<int64_t>(info.channels) * info.bits_per_sample / 8;
  in.seekg(info.data_offset + start * frame_bytes);
  std::vector<unsigned char> raw(static_cast<size_t>(count * frame_bytes));
  if (count > 0 && !in.read(reinterpret_cast<char*>(raw.data()), count * frame_bytes))
    fail(path, "short read");

  Waveform wav(info.channels, count, info.sample_rate);
  decode(raw, info, count, &wav, 0);
  return wav;
}

void write_wav(const std::string& path, const Waveform& wav, WavFormat format) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(path, "cannot create");

  const int bytes = format == WavFormat::kPcm16 ? 2 : 4;
  const uint16_t tag = format == WavFormat::kPcm16 ? kFormatPcm : kFormatFloat;
  const int64_t data_bytes = wav.length * wav.channels * bytes;

  out.write("RIFF", 4);
  wr_u32(out, static_cast<uint32_t>(36 + data_bytes));
  out.write("WAVE", 4);
  out.write("fmt ", 4);
  wr_u32(out, 16);
  wr_u16(out, tag);
  wr_u16(out, static_cast<uint16_t>(wav.channels));
  wr_u32(out, static_cast<uint32_t>(wav.sample_rate));
  wr_u32(out, static_cast<uint32_t>(wav.sample_rate * wav.channels * bytes));
  wr_u16(out, static_cast<uint16_t>(wav.channels * bytes));
  wr_u16(out, static_cast<uint16_t>(bytes * 8));
  out.write("data", 4);
  wr_u32(out, static_cast<uint32_t>(data_bytes));

  for (int64_t f = 0; f < wav.length; ++f) {
    for (int c = 0; c < wav.channels; ++c) {
      const double v = wav.at(c, f);
      if (format == WavFormat::kPcm16) {
        const double clamped = std::clamp(v, -1.0, 1.0);
        const auto s = static_cast<int16_t>(std::lrint(clamped * 32767.0));
        wr_u16(out, static_cast<uint16_t>(s));
      } else {
        const float x = static_cast<float>(v);
        uint32_t bits;
        std::memcpy(&bits, &x, 4);
        wr_u32(out, bits);
      }
    }
  }
  if (!out) fail(path, "write failed");
}

}  // namespace bsrnn
