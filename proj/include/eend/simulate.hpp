#pragma once

#include <string>
#include <vector>

#include "eend/features.hpp"
#include "eend/rng.hpp"
#include "eend/rttm.hpp"
#include "eend/wav.hpp"

namespace eend {

enum class SimMode { kFeature, kWaveform };

// Multi-talker mixture simulation. Per speaker, utterances are concatenated
// with silence gaps drawn from an exponential distribution with mean beta
// (utterance onsets form a Poisson process); the per-speaker tracks are then
// mixed. The waveform mode synthesizes harmonic speakers through formant-like
// resonators; the feature mode emits log-Mel-like frames directly from
// per-speaker Gaussian profiles, which is the fast path for training runs.
struct SimConfig {
  std::size_t num_speakers = 2;
  std::size_t num_mixtures = 100;
  double beta = 2.0;  // mean silence gap, seconds
  std::size_t min_utterances = 10;
  std::size_t max_utterances = 30;
  double min_utterance_sec = 1.0;
  double max_utterance_sec = 5.0;
  std::uint64_t seed = 0;
  SimMode mode = SimMode::kFeature;

  // feature mode
  std::size_t feat_dim = 345;
  double frame_period = 0.1;
  double profile_scale = 1.0;   // spread of the per-speaker Gaussian means
  double draw_noise = 0.5;      // per-frame noise around the profile mean
  double silence_level = -3.0;  // noise-floor mean
  // crop/pad every mixture to exactly this many frames (0 keeps natural length)
  std::size_t fixed_frames = 0;

  // waveform mode
  int sample_rate = 8000;
  double noise_floor = 0.002;  // additive noise level
};

// Exponential silence gaps, i.i.d. with mean beta.
std::vector<double> sample_gaps(std::size_t count, double beta, Rng& rng);

// Speech timeline only (no signal): speakers spk0..spkN-1.
Annotation sample_timeline(const SimConfig& cfg, Rng& rng, const std::string& recording_id);

struct Mixture {
  Annotation reference;
  ActivityMatrix labels;    // rasterized reference at the feature frame period
  FeatureSequence features;  // feature mode, or extracted from audio in waveform mode
  AudioClip audio;           // waveform mode only
};

// One complete mixture from a derived per-mixture stream.
Mixture build_mixture(const SimConfig& cfg, Rng& rng, const std::string& recording_id);

// (duration with >= 2 active speakers) / (duration with >= 1) * 100, pooled
// over all recordings.
double overlap_ratio(const std::vector<Annotation>& annotations);

struct CorpusPaths {
  std::vector<std::string> feature_files;
  std::vector<std::string> label_files;
  std::vector<std::string> recording_ids;
  std::string rttm_file;
  std::string manifest_file;
};

// Generates `num_mixtures` mixtures into `out_dir`, writing feature (or wav +
// feature), label and reference RTTM files plus a trainer manifest.
CorpusPaths generate_corpus(const SimConfig& cfg, const std::string& out_dir);

}  // namespace eend
