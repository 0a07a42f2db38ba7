// Copyright 2026 The bsrnn-cpp Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#ifndef BSRNN_WAVIO_HPP_
#define BSRNN_WAVIO_HPP_

#include <cstdint>
#include <string>

#include "bsrnn/waveform.hpp"

namespace bsrnn {

enum class WavFormat { kPcm16, kFloat32 };

struct WavInfo {
  int channels = 0;
  int sample_rate = 0;
  int64_t frames = 0;
  int bits_per_sample = 0;
  bool is_float = false;
  int64_t data_offset = 0;  // byte offset of the first sample
};

// Parses the header only; cheap enough to call per random-access read.
WavInfo probe_wav(const std::string& path);

Waveform read_wav(const std::string& path);

// Reads frames [start, start+count). count past the end is an error.
Waveform read_wav_range(const std::string& path, int64_t start, int64_t count);

// PCM16 writes clamp to [-1, 1]; float32 writes are lossless up to the
// narrowing cast.
void write_wav(const std::string& path, const Waveform& wav,
               WavFormat format = WavFormat::kFloat32);

}  // namespace bsrnn

#endif  // BSRNN_WAVIO_HPP_
