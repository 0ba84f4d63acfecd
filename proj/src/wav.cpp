#include "eend/wav.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>

#include "eend/errors.hpp"

namespace eend {

namespace {

std::uint32_t read_u32(std::istream& is) {
  unsigned char b[4];
  is.read(reinterpret_cast<char*>(b), 4);
  return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
         (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

std::uint16_t read_u16(std::istream& is) {
  unsigned char b[2];
  is.read(reinterpret_cast<char*>(b), 2);
  return static_cast<std::uint16_t>(b[0] | (b[1] << 8));
}

void write_u32(std::ostream& os, std::uint32_t v) {
  char b[4] = {static_cast<char>(v & 0xff), static_cast<char>((v >> 8) & 0xff),
               static_cast<char>((v >> 16) & 0xff), static_cast<char>((v >> 24) & 0xff)};
  os.write(b, 4);
}

void write_u16(std::ostream& os, std::uint16_t v) {
  char b[2] = {static_cast<char>(v & 0xff), static_cast<char>((v >> 8) & 0xff)};
  os.write(b, 2);
}

}  // namespace

AudioClip read_wav(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open wav file: " + path);
  char tag[4];
  is.read(tag, 4);
  if (!is || std::memcmp(tag, "RIFF", 4) != 0) throw InputError("not a RIFF file: " + path);
  read_u32(is);  // riff size
  is.read(tag, 4);
  if (!is || std::memcmp(tag, "WAVE", 4) != 0) throw InputError("not a WAVE file: " + path);

  std::uint16_t channels = 0, bits = 0;
  std::uint32_t sample_rate = 0;
  std::vector<std::int16_t> pcm;
  bool have_fmt = false, have_data = false;
  while (is && !(have_fmt && have_data)) {
    is.read(tag, 4);
    if (!is) break;
    std::uint32_t chunk_size = read_u32(is);
    if (std::memcmp(tag, "fmt ", 4) == 0) {
      std::uint16_t format = read_u16(is);
      channels = read_u16(is);
      sample_rate = read_u32(is);
      read_u32(is);  // byte rate
      read_u16(is);  // block align
      bits = read_u16(is);
      if (chunk_size > 16) is.ignore(chunk_size - 16);
      if (format != 1 || bits != 16)
        throw InputError("wav must be PCM 16-bit: " + path);
      have_fmt = true;
    } else if (std::memcmp(tag, "data", 4) == 0) {
      pcm.resize(chunk_size / 2);
      is.read(reinterpret_cast<char*>(pcm.data()), chunk_size);
      have_data = true;
    } else {
      is.ignore(chunk_size + (chunk_size & 1));
    }
  }
  if (!have_fmt || !have_data || channels == 0)
    throw InputError("incomplete wav file: " + path);

  AudioClip clip;
  clip.sample_rate = static_cast<int>(sample_rate);
  std::size_t frames = pcm.size() / channels;
  clip.samples.resize(frames);
  for (std::size_t i = 0; i < frames; ++i) {
    double acc = 0.0;
    for (std::uint16_t c = 0; c < channels; ++c) acc += pcm[i * channels + c];
    clip.samples[i] = acc / (channels * 32768.0);
  }
  if (clip.samples.empty()) throw InputError("wav contains no samples: " + path);
  return clip;
}

void write_wav(const AudioClip& clip, const std::string& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot open wav file for writing: " + path);
  const std::uint32_t n = static_cast<std::uint32_t>(clip.samples.size());
  const std::uint32_t data_bytes = n * 2;
  os.write("RIFF", 4);
  write_u32(os, 36 + data_bytes);
  os.write("WAVE", 4);
  os.write("fmt ", 4);
  write_u32(os, 16);
  write_u16(os, 1);  // PCM
  write_u16(os, 1);  // mono
  write_u32(os, static_cast<std::uint32_t>(clip.sample_rate));
  write_u32(os, static_cast<std::uint32_t>(clip.sample_rate * 2));
  write_u16(os, 2);
  write_u16(os, 16);
  os.write("data", 4);
  write_u32(os, data_bytes);
  for (double v : clip.samples) {
    double scaled = std::clamp(v, -1.0, 1.0 - 1.0 / 32768.0) * 32768.0;
    auto s = static_cast<std::int16_t>(std::lrint(scaled));
    char b[2] = {static_cast<char>(s & 0xff), static_cast<char>((s >> 8) & 0xff)};
    os.write(b, 2);
  }
  if (!os) throw IoError("failed writing wav: " + path);
}

AudioClip downsample_by_two(const AudioClip& clip) {
  AudioClip out;
  out.sample_rate = clip.sample_rate / 2;
  // 5-tap low-pass before decimation
  static const double kTaps[5] = {0.0625, 0.25, 0.375, 0.25, 0.0625};
  const std::size_t n = clip.samples.size();
  out.samples.reserve(n / 2);
  for (std::size_t i = 0; i < n; i += 2) {
    double acc = 0.0;
    for (int k = -2; k <= 2; ++k) {
      std::int64_t idx = static_cast<std::int64_t>(i) + k;
      idx = std::clamp<std::int64_t>(idx, 0, static_cast<std::int64_t>(n) - 1);
      acc += kTaps[k + 2] * clip.samples[static_cast<std::size_t>(idx)];
    }
    out.samples.push_back(acc);
  }
  return out;
}

}  // namespace eend
