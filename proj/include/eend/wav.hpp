#pragma once

#include <string>
#include <vector>

namespace eend {

// Mono audio; samples are 16-bit PCM values mapped to [-1, 1).
struct AudioClip {
  std::vector<double> samples;
  int sample_rate = 8000;
};

// Single-channel PCM 16-bit little-endian RIFF only. Multi-channel input is
// averaged down to mono.
AudioClip read_wav(const std::string& path);
void write_wav(const AudioClip& clip, const std::string& path);

// Decimation-by-2 helper for 16 kHz material (simple low-pass then drop).
AudioClip downsample_by_two(const AudioClip& clip);

}  // namespace eend
