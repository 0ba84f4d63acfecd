#include "eend/features.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <numbers>
#include <vector>

namespace eend {

namespace {

constexpr char kMagic[8] = {'E', 'E', 'N', 'D', 'F', 'E', 'A', 'T'};
constexpr std::uint32_t kVersion = 1;

// Iterative radix-2 FFT; fft_size must be a power of two.
void fft_inplace(std::vector<std::complex<double>>& a) {
  const std::size_t n = a.size();
  for (std::size_t i = 1, j = 0; i < n; ++i) {
    std::size_t bit = n >> 1;
    for (; j & bit; bit >>= 1) j ^= bit;
    j ^= bit;
    if (i < j) std::swap(a[i], a[j]);
  }
  for (std::size_t len = 2; len <= n; len <<= 1) {
    double angle = -2.0 * std::numbers::pi / static_cast<double>(len);
    std::complex<double> wlen(std::cos(angle), std::sin(angle));
    for (std::size_t i = 0; i < n; i += len) {
      std::complex<double> w(1.0);
      for (std::size_t k = 0; k < len / 2; ++k) {
        std::complex<double> u = a[i + k];
        std::complex<double> v = a[i + k + len / 2] * w;
        a[i + k] = u + v;
        a[i + k + len / 2] = u - v;
        w *= wlen;
      }
    }
  }
}

}  // namespace

double hz_to_mel(double hz) { return 2595.0 * std::log10(1.0 + hz / 700.0); }
double mel_to_hz(double mel) { return 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0); }

Tensor log_mel(const AudioClip& clip, const LogMelConfig& cfg) {
  const std::size_t win = static_cast<std::size_t>(std::lround(cfg.window_sec * clip.sample_rate));
  const std::size_t hop = static_cast<std::size_t>(std::lround(cfg.hop_sec * clip.sample_rate));
  if (clip.samples.size() < win)
    throw InputError("log_mel: clip shorter than one analysis window");
  if (cfg.fft_size < win || (cfg.fft_size & (cfg.fft_size - 1)) != 0)
    throw ConfigError("log_mel: fft size must be a power of two >= window length");

  const std::size_t n_frames = (clip.samples.size() - win) / hop + 1;
  const std::size_t n_bins = cfg.fft_size / 2 + 1;

  // Triangular Mel filters on edges equally spaced in Mel between f_low and
  // f_high, built over FFT bin center frequencies.
  std::vector<double> edges(cfg.n_mels + 2);
  double mel_lo = hz_to_mel(cfg.f_low), mel_hi = hz_to_mel(cfg.f_high);
  for (std::size_t m = 0; m < edges.size(); ++m)
    edges[m] = mel_to_hz(mel_lo + (mel_hi - mel_lo) * static_cast<double>(m) /
                                      static_cast<double>(cfg.n_mels + 1));
  std::vector<std::vector<double>> filters(cfg.n_mels, std::vector<double>(n_bins, 0.0));
  const double bin_hz = static_cast<double>(clip.sample_rate) / static_cast<double>(cfg.fft_size);
  for (std::size_t m = 0; m < cfg.n_mels; ++m) {
    double left = edges[m], center = edges[m + 1], right = edges[m + 2];
    for (std::size_t b = 0; b < n_bins; ++b) {
      double f = static_cast<double>(b) * bin_hz;
      if (f > left && f < center)
        filters[m][b] = (f - left) / (center - left);
      else if (f >= center && f < right)
        filters[m][b] = (right - f) / (right - center);
    }
  }

  std::vector<double> window(win);
  for (std::size_t i = 0; i < win; ++i)
    window[i] = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * static_cast<double>(i) /
                                     static_cast<double>(win));

  Tensor out(n_frames, cfg.n_mels);
  std::vector<std::complex<double>> buf(cfg.fft_size);
  for (std::size_t t = 0; t < n_frames; ++t) {
    std::fill(buf.begin(), buf.end(), std::complex<double>(0.0));
    const double* src = clip.samples.data() + t * hop;
    for (std::size_t i = 0; i < win; ++i) buf[i] = src[i] * window[i];
    fft_inplace(buf);
    for (std::size_t m = 0; m < cfg.n_mels; ++m) {
      double energy = 0.0;
      for (std::size_t b = 0; b < n_bins; ++b) {
        if (filters[m][b] == 0.0) continue;
        energy += filters[m][b] * std::norm(buf[b]);
      }
      out.at(t, m) = std::log(std::max(energy, cfg.log_floor));
    }
  }
  return out;
}

FeatureSequence splice_subsample(const Tensor& raw, std::size_t context, std::size_t factor,
                                 double hop_sec) {
  if (factor == 0) throw ConfigError("splice_subsample: factor must be positive");
  if (raw.rows() == 0) throw InputError("splice_subsample: empty input");
  const std::size_t t_in = raw.rows();
  const std::size_t n_mels = raw.cols();
  const std::size_t width = 2 * context + 1;
  const std::size_t t_out = (t_in + factor - 1) / factor;

  FeatureSequence fs;
  fs.frames = Tensor(t_out, n_mels * width);
  fs.frame_period = hop_sec * static_cast<double>(factor);
  for (std::size_t t = 0; t < t_out; ++t) {
    const std::int64_t center = static_cast<std::int64_t>(t * factor);
    for (std::size_t w = 0; w < width; ++w) {
      std::int64_t src = center + static_cast<std::int64_t>(w) - static_cast<std::int64_t>(context);
      src = std::clamp<std::int64_t>(src, 0, static_cast<std::int64_t>(t_in) - 1);  // edge replication
      for (std::size_t m = 0; m < n_mels; ++m)
        fs.frames.at(t, w * n_mels + m) = raw.at(static_cast<std::size_t>(src), m);
    }
  }
  return fs;
}

void mean_normalize(FeatureSequence& feats) {
  const std::size_t t_len = feats.num_frames(), d = feats.dim();
  if (t_len == 0) return;
  std::vector<double> mean(d, 0.0);
  for (std::size_t t = 0; t < t_len; ++t)
    for (std::size_t c = 0; c < d; ++c) mean[c] += feats.frames.at(t, c);
  for (double& m : mean) m /= static_cast<double>(t_len);
  for (std::size_t t = 0; t < t_len; ++t)
    for (std::size_t c = 0; c < d; ++c) feats.frames.at(t, c) -= mean[c];
}

void write_features(const FeatureSequence& feats, const std::string& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot open feature file for writing: " + path);
  os.write(kMagic, sizeof kMagic);
  std::uint32_t v = kVersion, t = static_cast<std::uint32_t>(feats.num_frames()),
                f = static_cast<std::uint32_t>(feats.dim());
  os.write(reinterpret_cast<const char*>(&v), 4);
  os.write(reinterpret_cast<const char*>(&t), 4);
  os.write(reinterpret_cast<const char*>(&f), 4);
  os.write(reinterpret_cast<const char*>(&feats.frame_period), 8);
  for (double d : feats.frames.data()) {
    float x = static_cast<float>(d);
    os.write(reinterpret_cast<const char*>(&x), 4);
  }
  if (!os) throw IoError("failed writing feature file: " + path);
}

FeatureSequence read_features(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open feature file: " + path);
  char magic[8];
  is.read(magic, 8);
  if (!is || std::memcmp(magic, kMagic, 8) != 0)
    throw InputError("not a feature file: " + path);
  std::uint32_t v = 0, t = 0, f = 0;
  is.read(reinterpret_cast<char*>(&v), 4);
  is.read(reinterpret_cast<char*>(&t), 4);
  is.read(reinterpret_cast<char*>(&f), 4);
  if (v != kVersion) throw InputError("unsupported feature file version: " + path);
  FeatureSequence fs;
  is.read(reinterpret_cast<char*>(&fs.frame_period), 8);
  fs.frames = Tensor(t, f);
  for (double& d : fs.frames.data()) {
    float x = 0.0f;
    is.read(reinterpret_cast<char*>(&x), 4);
    d = static_cast<double>(x);
  }
  if (!is) throw IoError("truncated feature file: " + path);
  return fs;
}

}  // namespace eend
