#pragma once

#include <string>

#include "eend/tensor.hpp"
#include "eend/wav.hpp"

namespace eend {

// T x F acoustic features plus frame timing. The standard pipeline yields
// F = 345 (23 log-Mel bins spliced with +-7 context frames) at one frame per
// 100 ms (subsample factor 10) or 50 ms (factor 5).
struct FeatureSequence {
  Tensor frames;              // T x F
  double frame_period = 0.1;  // seconds

  std::size_t num_frames() const { return frames.rows(); }
  std::size_t dim() const { return frames.cols(); }
};

struct LogMelConfig {
  std::size_t n_mels = 23;
  double window_sec = 0.025;
  double hop_sec = 0.010;
  std::size_t fft_size = 256;   // Hann window, periodogram power spectrum
  double f_low = 0.0;           // Mel filter range, Hz
  double f_high = 4000.0;
  double log_floor = 1e-10;     // energies floored before the log
};

// Raw T' x n_mels log Mel-filterbank energies. Frame count is
// floor((len - win) / hop) + 1; a clip shorter than one window is an error.
Tensor log_mel(const AudioClip& clip, const LogMelConfig& cfg = {});

// Splices each frame with `context` preceding and following frames (edge
// replication) and keeps every `factor`-th spliced frame. Output length is
// ceil(T' / factor); the frame period becomes hop * factor.
FeatureSequence splice_subsample(const Tensor& raw, std::size_t context, std::size_t factor,
                                 double hop_sec = 0.010);

// Subtracts the per-dimension mean over the recording.
void mean_normalize(FeatureSequence& feats);

// Binary feature file: magic, T, F, frame period, then row-major float32.
void write_features(const FeatureSequence& feats, const std::string& path);
FeatureSequence read_features(const std::string& path);

// Helpers for the Mel scale (exposed for tests).
double hz_to_mel(double hz);
double mel_to_hz(double mel);

}  // namespace eend
