#pragma once

#include <cstdint>
#include <memory>
#include <vector>

#include "eend/model.hpp"
#include "eend/rttm.hpp"

namespace eend {

// Frame-level speech/non-speech labels from an external SAD system.
struct SadLabels {
  std::vector<std::uint8_t> z;
  double frame_period = 0.1;
};

// Thresholded activities: active iff p > threshold (strictly).
ActivityMatrix decode(const Tensor& posteriors, double frame_period, double threshold = 0.5);

// Aligns thresholded activities with external SAD: frames the SAD calls
// silent are cleared (filter false alarms); frames it calls speech where no
// speaker fired activate the argmax-posterior speaker (recover misses,
// lowest index on ties).
ActivityMatrix sad_postprocess(const Tensor& posteriors, const SadLabels& sad);

// What iterative inference needs from a diarization model: posteriors plus a
// speaker-count estimate for an arbitrary (gap-free) frame subset.
class DiarizationBackend {
 public:
  virtual ~DiarizationBackend() = default;
  struct Decode {
    Tensor posteriors;  // S_hat x T_subset
    std::size_t estimated_speakers = 0;
  };
  virtual Decode decode_frames(const Tensor& features) = 0;
};

// Backend over a trained model; draws a fresh EDA shuffle per call from the
// given seed.
class EendEdaBackend : public DiarizationBackend {
 public:
  EendEdaBackend(const EendEdaModel& model, double tau, bool shuffle, std::uint64_t seed)
      : model_(model), tau_(tau), shuffle_(shuffle), rng_(seed) {}
  Decode decode_frames(const Tensor& features) override;

 private:
  const EendEdaModel& model_;
  double tau_;
  bool shuffle_;
  Rng rng_;
};

// Plain one-shot decoding of a whole recording.
ActivityMatrix plain_inference(const Tensor& features, DiarizationBackend& backend,
                               double frame_period);

// Repeated decoding on the frames left silent so far; each round contributes
// up to s_max new speakers whose activities never overlap earlier rounds'.
// Terminates when a round produces fewer than s_max speakers, the silent set
// empties, or after T rounds. `round_sizes`, when given, receives the number
// of speaker rows each round contributed.
ActivityMatrix iterative_inference(const Tensor& features, DiarizationBackend& backend,
                                   std::size_t s_max, double frame_period,
                                   std::vector<std::size_t>* round_sizes = nullptr);

// Runs iterative inference once per speaker cap 1..s_max (first round
// truncated to the cap) and fuses the hypotheses by overlap-aware voting.
ActivityMatrix iterative_inference_plus(const Tensor& features, DiarizationBackend& backend,
                                        std::size_t s_max, double frame_period);

}  // namespace eend
