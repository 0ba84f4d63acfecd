#include "eend/simulate.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numbers>

namespace eend {

std::vector<double> sample_gaps(std::size_t count, double beta, Rng& rng) {
  if (beta <= 0.0) throw ConfigError("sample_gaps: beta must be positive");
  std::vector<double> gaps(count);
  for (double& g : gaps) g = rng.exponential(beta);
  return gaps;
}

Annotation sample_timeline(const SimConfig& cfg, Rng& rng, const std::string& recording_id) {
  if (cfg.num_speakers == 0) throw ConfigError("sample_timeline: need at least one speaker");
  if (cfg.min_utterances == 0 || cfg.min_utterances > cfg.max_utterances)
    throw ConfigError("sample_timeline: bad utterance count range");
  Annotation ann;
  ann.recording_id = recording_id;
  for (std::size_t s = 0; s < cfg.num_speakers; ++s) {
    std::string id = "spk" + std::to_string(s);
    std::size_t n_utt = cfg.min_utterances +
                        rng.uniform_int(cfg.max_utterances - cfg.min_utterances + 1);
    double cursor = rng.exponential(cfg.beta);  // leading silence
    for (std::size_t u = 0; u < n_utt; ++u) {
      double dur = rng.uniform(cfg.min_utterance_sec, cfg.max_utterance_sec);
      ann.segments.push_back({id, cursor, dur});
      cursor += dur + rng.exponential(cfg.beta);
    }
  }
  if (cfg.fixed_frames > 0) {
    // crop to the fixed window; drop segments fully outside it
    double limit = static_cast<double>(cfg.fixed_frames) * cfg.frame_period;
    std::vector<Segment> kept;
    for (auto& seg : ann.segments) {
      if (seg.onset >= limit) continue;
      seg.duration = std::min(seg.duration, limit - seg.onset);
      if (seg.duration > 1e-9) kept.push_back(seg);
    }
    ann.segments = std::move(kept);
  }
  return ann;
}

namespace {

// Formant-like synthetic voice: pulse train at a speaker-specific pitch
// through two resonators, plus aspiration noise.
struct VoiceProfile {
  double f0;
  double formant1, formant2;
  double bw1, bw2;
};

VoiceProfile make_voice(Rng& rng) {
  VoiceProfile v;
  v.f0 = rng.uniform(85.0, 255.0);
  v.formant1 = rng.uniform(300.0, 900.0);
  v.formant2 = rng.uniform(1100.0, 2500.0);
  v.bw1 = rng.uniform(60.0, 120.0);
  v.bw2 = rng.uniform(80.0, 160.0);
  return v;
}

struct Biquad {
  double b0 = 1, a1 = 0, a2 = 0, z1 = 0, z2 = 0;
  static Biquad resonator(double freq, double bw, int rate) {
    Biquad q;
    double r = std::exp(-std::numbers::pi * bw / rate);
    double theta = 2.0 * std::numbers::pi * freq / rate;
    q.a1 = -2.0 * r * std::cos(theta);
    q.a2 = r * r;
    q.b0 = 1.0 - r;
    return q;
  }
  double step(double x) {
    double y = b0 * x - a1 * z1 - a2 * z2;
    z2 = z1;
    z1 = y;
    return y;
  }
};

void render_utterance(const VoiceProfile& voice, double onset, double dur, int rate,
                      Rng& rng, std::vector<double>& track) {
  std::size_t start = static_cast<std::size_t>(std::lround(onset * rate));
  std::size_t len = static_cast<std::size_t>(std::lround(dur * rate));
  if (track.size() < start + len) track.resize(start + len, 0.0);
  Biquad r1 = Biquad::resonator(voice.formant1, voice.bw1, rate);
  Biquad r2 = Biquad::resonator(voice.formant2, voice.bw2, rate);
  double phase = 0.0;
  for (std::size_t i = 0; i < len; ++i) {
    double vibrato = 1.0 + 0.01 * std::sin(2.0 * std::numbers::pi * 5.0 * i / rate);
    phase += voice.f0 * vibrato / rate;
    if (phase >= 1.0) phase -= 1.0;
    double pulse = (phase < 0.1) ? 1.0 : 0.0;  // glottal-ish pulse train
    double source = 0.6 * pulse + 0.08 * rng.gaussian();
    double sample = 0.5 * r1.step(source) + 0.35 * r2.step(source);
    double t_rel = static_cast<double>(i) / static_cast<double>(len);
    double envelope = std::min(1.0, 10.0 * std::min(t_rel, 1.0 - t_rel) + 0.1);
    track[start + i] += 0.35 * envelope * sample;
  }
}

}  // namespace

Mixture build_mixture(const SimConfig& cfg, Rng& rng, const std::string& recording_id) {
  Mixture mix;
  mix.reference = sample_timeline(cfg, rng, recording_id);

  std::size_t frames;
  if (cfg.fixed_frames > 0) {
    frames = cfg.fixed_frames;
  } else {
    frames = static_cast<std::size_t>(
        std::ceil(mix.reference.total_extent() / cfg.frame_period));
    frames = std::max<std::size_t>(frames, 1);
  }
  mix.labels = rasterize(mix.reference, cfg.frame_period, frames);

  if (cfg.mode == SimMode::kFeature) {
    const std::size_t f = cfg.feat_dim;
    std::vector<Tensor> profiles;
    for (std::size_t s = 0; s < cfg.num_speakers; ++s) {
      Tensor mu(1, f);
      for (double& v : mu.data()) v = cfg.profile_scale * rng.gaussian();
      profiles.push_back(std::move(mu));
    }
    // label rows follow sorted speaker ids; map back to profile index
    std::vector<std::size_t> profile_of_row(mix.labels.num_speakers);
    for (std::size_t r = 0; r < mix.labels.num_speakers; ++r)
      profile_of_row[r] = static_cast<std::size_t>(
          std::stoul(mix.labels.speakers[r].substr(3)));

    mix.features.frame_period = cfg.frame_period;
    mix.features.frames = Tensor(frames, f);
    std::vector<double> draw(f);
    for (std::size_t t = 0; t < frames; ++t) {
      // noise-floor draw first, then element-wise max over active speakers
      for (std::size_t c = 0; c < f; ++c)
        draw[c] = cfg.silence_level + cfg.draw_noise * rng.gaussian();
      for (std::size_t r = 0; r < mix.labels.num_speakers; ++r) {
        if (!mix.labels.at(r, t)) continue;
        const Tensor& mu = profiles[profile_of_row[r]];
        for (std::size_t c = 0; c < f; ++c)
          draw[c] = std::max(draw[c], mu.at(0, c) + cfg.draw_noise * rng.gaussian());
      }
      for (std::size_t c = 0; c < f; ++c) mix.features.frames.at(t, c) = draw[c];
    }
  } else {
    mix.audio.sample_rate = cfg.sample_rate;
    std::vector<double> mixdown;
    for (std::size_t s = 0; s < cfg.num_speakers; ++s) {
      VoiceProfile voice = make_voice(rng);
      std::vector<double> track;
      std::string id = "spk" + std::to_string(s);
      for (const auto& seg : mix.reference.segments) {
        if (seg.speaker != id) continue;
        render_utterance(voice, seg.onset, seg.duration, cfg.sample_rate, rng, track);
      }
      if (track.size() > mixdown.size()) mixdown.resize(track.size(), 0.0);
      for (std::size_t i = 0; i < track.size(); ++i) mixdown[i] += track[i];
    }
    std::size_t want = static_cast<std::size_t>(
        std::lround(static_cast<double>(frames) * cfg.frame_period * cfg.sample_rate));
    mixdown.resize(std::max(want, mixdown.size()), 0.0);
    for (double& v : mixdown) v += cfg.noise_floor * rng.gaussian();
    mix.audio.samples = std::move(mixdown);
    mix.features = splice_subsample(log_mel(mix.audio), 7, 10);
    // align label length with the extracted feature count
    if (mix.features.num_frames() != frames)
      mix.labels = rasterize(mix.reference, cfg.frame_period, mix.features.num_frames());
  }
  return mix;
}

double overlap_ratio(const std::vector<Annotation>& annotations) {
  std::int64_t any = 0, multi = 0;
  for (const auto& ann : annotations) {
    // event sweep over segment edges, counting concurrent speakers
    std::vector<std::pair<std::int64_t, int>> events;
    for (const auto& seg : ann.segments) {
      std::int64_t lo = to_ticks(seg.onset);
      std::int64_t hi = lo + to_ticks(seg.duration);
      events.push_back({lo, +1});
      events.push_back({hi, -1});
    }
    std::sort(events.begin(), events.end());
    int depth = 0;
    std::int64_t prev = 0;
    for (const auto& [tick, delta] : events) {
      if (depth >= 1) any += tick - prev;
      if (depth >= 2) multi += tick - prev;
      depth += delta;
      prev = tick;
    }
  }
  if (any == 0) throw InputError("overlap_ratio: no speech at all");
  return 100.0 * static_cast<double>(multi) / static_cast<double>(any);
}

CorpusPaths generate_corpus(const SimConfig& cfg, const std::string& out_dir) {
  namespace fs = std::filesystem;
  fs::create_directories(out_dir);
  Rng base(cfg.seed);

  CorpusPaths paths;
  std::vector<Annotation> refs;
  std::ofstream manifest;
  paths.manifest_file = (fs::path(out_dir) / "manifest.txt").string();
  manifest.open(paths.manifest_file, std::ios::binary);
  if (!manifest) throw IoError("cannot write manifest: " + paths.manifest_file);

  char name[64];
  for (std::size_t i = 0; i < cfg.num_mixtures; ++i) {
    std::snprintf(name, sizeof name, "mix_%06zu", i);
    Rng stream = base.derive(i);
    Mixture mix = build_mixture(cfg, stream, name);

    std::string feat_path = (fs::path(out_dir) / (std::string(name) + ".feat")).string();
    std::string lab_path = (fs::path(out_dir) / (std::string(name) + ".lab")).string();
    write_features(mix.features, feat_path);
    write_labels(mix.labels, lab_path);
    if (cfg.mode == SimMode::kWaveform) {
      std::string wav_path = (fs::path(out_dir) / (std::string(name) + ".wav")).string();
      write_wav(mix.audio, wav_path);
    }
    manifest << feat_path << '\t' << lab_path << '\t' << name << '\n';
    refs.push_back(std::move(mix.reference));
    paths.feature_files.push_back(feat_path);
    paths.label_files.push_back(lab_path);
    paths.recording_ids.push_back(name);
  }
  manifest.close();

  paths.rttm_file = (fs::path(out_dir) / "ref.rttm").string();
  emit_rttm_file(refs, paths.rttm_file);
  return paths;
}

}  // namespace eend
