#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <numbers>

#include "eend/features.hpp"
#include "eend/rng.hpp"

using namespace eend;

namespace {

AudioClip tone(double freq, double seconds, int rate = 8000, double amp = 0.5) {
  AudioClip clip;
  clip.sample_rate = rate;
  std::size_t n = static_cast<std::size_t>(seconds * rate);
  clip.samples.resize(n);
  for (std::size_t i = 0; i < n; ++i)
    clip.samples[i] = amp * std::sin(2.0 * std::numbers::pi * freq * i / rate);
  return clip;
}

}  // namespace

TEST_CASE("log_mel frame count for one second at 8 kHz") {
  auto feats = log_mel(tone(440.0, 1.0));
  CHECK(feats.rows() == 98);  // floor((8000 - 200) / 80) + 1
  CHECK(feats.cols() == 23);
}

TEST_CASE("log_mel rejects too-short clips") {
  AudioClip clip;
  clip.sample_rate = 8000;
  clip.samples.assign(100, 0.0);  // shorter than the 200-sample window
  CHECK_THROWS_AS(log_mel(clip), InputError);
}

TEST_CASE("log_mel of silence hits the log floor") {
  AudioClip clip;
  clip.sample_rate = 8000;
  clip.samples.assign(8000, 0.0);
  auto feats = log_mel(clip);
  for (double v : feats.data()) CHECK(v == doctest::Approx(std::log(1e-10)));
}

TEST_CASE("1 kHz tone peaks in the Mel bin containing 1 kHz") {
  auto feats = log_mel(tone(1000.0, 1.0));

  // oracle: rebuild the filter edges and find which bin covers 1 kHz
  LogMelConfig cfg;
  double mel_lo = hz_to_mel(cfg.f_low), mel_hi = hz_to_mel(cfg.f_high);
  std::size_t covering = 0;
  for (std::size_t m = 0; m < cfg.n_mels; ++m) {
    double left = mel_to_hz(mel_lo + (mel_hi - mel_lo) * (m) / (cfg.n_mels + 1.0));
    double right = mel_to_hz(mel_lo + (mel_hi - mel_lo) * (m + 2) / (cfg.n_mels + 1.0));
    if (left < 1000.0 && 1000.0 < right) {
      double center = mel_to_hz(mel_lo + (mel_hi - mel_lo) * (m + 1) / (cfg.n_mels + 1.0));
      // among covering filters keep the one whose peak is nearest the tone
      if (std::abs(center - 1000.0) <
          std::abs(mel_to_hz(mel_lo + (mel_hi - mel_lo) * (covering + 1) / (cfg.n_mels + 1.0)) -
                   1000.0))
        covering = m;
    }
  }

  std::size_t mid = feats.rows() / 2;
  std::size_t argmax = 0;
  for (std::size_t m = 1; m < feats.cols(); ++m)
    if (feats.at(mid, m) > feats.at(mid, argmax)) argmax = m;
  CHECK(argmax == covering);
}

TEST_CASE("splice_subsample shapes and frame periods") {
  Rng rng(3);
  Tensor raw(100, 23);
  for (double& v : raw.data()) v = rng.uniform(-1, 1);

  auto ten = splice_subsample(raw, 7, 10);
  CHECK(ten.num_frames() == 10);
  CHECK(ten.dim() == 345);
  CHECK(ten.frame_period == doctest::Approx(0.1));

  auto five = splice_subsample(raw, 7, 5);
  CHECK(five.num_frames() == 20);
  CHECK(five.frame_period == doctest::Approx(0.05));
}

TEST_CASE("splicing a constant input replicates the frame everywhere") {
  Tensor raw = Tensor::full(50, 23, 1.25);
  auto fs = splice_subsample(raw, 7, 10);
  for (double v : fs.frames.data()) CHECK(v == 1.25);
}

TEST_CASE("center block of spliced frame t reproduces raw frame t*factor") {
  Rng rng(5);
  Tensor raw(93, 23);
  for (double& v : raw.data()) v = rng.uniform(-2, 2);
  std::size_t context = 7, factor = 10;
  auto fs = splice_subsample(raw, context, factor);
  for (std::size_t t = 0; t < fs.num_frames(); ++t)
    for (std::size_t m = 0; m < 23; ++m)
      CHECK(fs.frames.at(t, context * 23 + m) == raw.at(t * factor, m));
}

TEST_CASE("pipeline output is finite and mean normalization centers it") {
  Rng rng(11);
  AudioClip clip;
  clip.sample_rate = 8000;
  clip.samples.resize(16000);
  for (double& v : clip.samples) v = rng.uniform(-0.8, 0.8);
  auto fs = splice_subsample(log_mel(clip), 7, 10);
  CHECK(fs.frames.all_finite());
  mean_normalize(fs);
  for (std::size_t c = 0; c < fs.dim(); ++c) {
    double mean = 0.0;
    for (std::size_t t = 0; t < fs.num_frames(); ++t) mean += fs.frames.at(t, c);
    CHECK(std::abs(mean / fs.num_frames()) < 1e-9);
  }
}

TEST_CASE("feature files round-trip at float32 precision") {
  FeatureSequence fs;
  fs.frames = Tensor(4, 3, {1.0f, 2.5f, -3.25f, 0.0f, 7.0f, -1.5f, 0.125f, 9.0f, 2.0f, 4.5f, -8.0f, 0.5f});
  fs.frame_period = 0.05;
  std::string path = "test_features_roundtrip.feat";
  write_features(fs, path);
  auto back = read_features(path);
  std::remove(path.c_str());
  CHECK(back.frame_period == fs.frame_period);
  CHECK(back.frames.max_abs_diff(fs.frames) == 0.0);
}

TEST_CASE("wav round trip and decimation") {
  auto clip = tone(500.0, 0.5, 16000);
  std::string path = "test_wav_roundtrip.wav";
  write_wav(clip, path);
  auto back = read_wav(path);
  std::remove(path.c_str());
  CHECK(back.sample_rate == 16000);
  CHECK(back.samples.size() == clip.samples.size());
  double max_err = 0.0;
  for (std::size_t i = 0; i < back.samples.size(); ++i)
    max_err = std::max(max_err, std::abs(back.samples[i] - clip.samples[i]));
  CHECK(max_err < 1.0 / 32768.0);

  auto down = downsample_by_two(back);
  CHECK(down.sample_rate == 8000);
  CHECK(down.samples.size() == back.samples.size() / 2);
}
