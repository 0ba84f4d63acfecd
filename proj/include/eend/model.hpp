#pragma once

#include <optional>
#include <string>
#include <vector>

#include "eend/eda.hpp"
#include "eend/encoder.hpp"
#include "eend/features.hpp"
#include "eend/params.hpp"

namespace eend {

struct ModelConfig {
  std::size_t feat_dim = 345;
  std::size_t model_dim = 256;
  std::size_t num_blocks = 4;
  std::size_t num_heads = 4;
  std::size_t attractor_cap = 20;  // inference decode guard
};

// The full attractor-based diarization model: Transformer embedding part plus
// the EDA classification part.
class EendEdaModel {
 public:
  EendEdaModel(const ModelConfig& cfg, std::uint64_t seed);

  static EendEdaModel load(const std::string& path);
  void save(const std::string& path) const;

  const ModelConfig& config() const { return cfg_; }
  ParamStore& params() { return params_; }
  const ParamStore& params() const { return params_; }
  const EncoderStack& encoder() const { return encoder_; }
  const EdaParams& eda() const { return eda_; }

  // Training-time forward pass: decodes `num_attractors` attractors and
  // returns posteriors over the first `num_speakers` of them.
  struct TrainForward {
    Value posteriors;  // num_speakers x T
    Value existence;   // num_attractors x 1
  };
  TrainForward forward_train(const Tensor& features, const ShuffleOrder& order,
                             std::size_t num_speakers, bool stop_gradient_existence) const;

  // Inference: threshold-driven attractor decoding. Posteriors for the
  // estimated speakers, plus the raw existence sequence.
  struct InferForward {
    Tensor posteriors;  // S_hat x T
    std::vector<double> existence;
    CountEstimate estimate;
  };
  InferForward forward_infer(const Tensor& features, const ShuffleOrder& order,
                             double tau) const;

 private:
  EendEdaModel() = default;
  ModelConfig cfg_;
  ParamStore params_;
  EncoderStack encoder_;
  EdaParams eda_;
};

}  // namespace eend
