#pragma once

#include <string>
#include <vector>

#include "eend/params.hpp"
#include "eend/tensor.hpp"

namespace eend {

// Stacked Transformer encoders without positional encodings: a linear input
// projection F -> D followed by N post-norm blocks
// (attention -> add&norm -> feed-forward -> add&norm, inner dim 4D, ReLU).
class EncoderStack {
 public:
  struct Block {
    AttentionParams attn;
    Value norm1_gain, norm1_bias;
    Value ffn_w1, ffn_b1, ffn_w2, ffn_b2;
    Value norm2_gain, norm2_bias;
  };

  // Registers fresh parameters under `prefix` in the store.
  static EncoderStack create(ParamStore& store, const std::string& prefix, std::size_t feat_dim,
                             std::size_t model_dim, std::size_t num_blocks,
                             std::size_t num_heads, Rng& rng);
  // Binds to previously created (e.g. checkpoint-loaded) parameters.
  static EncoderStack bind(const ParamStore& store, const std::string& prefix,
                           std::size_t feat_dim, std::size_t model_dim, std::size_t num_blocks,
                           std::size_t num_heads);

  // T x F features -> T x D embeddings.
  Value embed(const Value& features) const;

  std::size_t feat_dim() const { return feat_dim_; }
  std::size_t model_dim() const { return model_dim_; }
  std::size_t num_heads() const { return num_heads_; }

 private:
  std::size_t feat_dim_ = 0, model_dim_ = 0, num_heads_ = 0;
  Value in_w_, in_b_;
  std::vector<Block> blocks_;
};

// Fully connected classification head of the fixed-capacity baseline model:
// posteriors = sigmoid(W^T e_t + b) for a construction-time speaker count.
struct FixedClassifierHead {
  Value w;  // D x S
  Value b;  // 1 x S

  static FixedClassifierHead create(ParamStore& store, const std::string& prefix,
                                    std::size_t model_dim, std::size_t num_speakers, Rng& rng);
};

// S x T posteriors in (0,1) from T x D embeddings.
Value fixed_head_posteriors(const Value& embeddings, const FixedClassifierHead& head);

}  // namespace eend
