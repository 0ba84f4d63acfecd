#include "eend/encoder.hpp"

namespace eend {

namespace {

std::string block_key(const std::string& prefix, std::size_t n, const std::string& leaf) {
  return prefix + ".block" + std::to_string(n) + "." + leaf;
}

}  // namespace

EncoderStack EncoderStack::create(ParamStore& store, const std::string& prefix,
                                  std::size_t feat_dim, std::size_t model_dim,
                                  std::size_t num_blocks, std::size_t num_heads, Rng& rng) {
  if (model_dim % num_heads != 0)
    throw ConfigError("EncoderStack: model dim must be divisible by head count");
  EncoderStack s;
  s.feat_dim_ = feat_dim;
  s.model_dim_ = model_dim;
  s.num_heads_ = num_heads;
  s.in_w_ = store.create(prefix + ".input.w", init_linear(feat_dim, feat_dim, model_dim, rng));
  s.in_b_ = store.create(prefix + ".input.b", Tensor(1, model_dim));
  const std::size_t ffn = 4 * model_dim;
  for (std::size_t n = 0; n < num_blocks; ++n) {
    Block b;
    b.attn.wq = store.create(block_key(prefix, n, "attn.wq"), init_linear(model_dim, model_dim, model_dim, rng));
    b.attn.bq = store.create(block_key(prefix, n, "attn.bq"), Tensor(1, model_dim));
    b.attn.wk = store.create(block_key(prefix, n, "attn.wk"), init_linear(model_dim, model_dim, model_dim, rng));
    b.attn.bk = store.create(block_key(prefix, n, "attn.bk"), Tensor(1, model_dim));
    b.attn.wv = store.create(block_key(prefix, n, "attn.wv"), init_linear(model_dim, model_dim, model_dim, rng));
    b.attn.bv = store.create(block_key(prefix, n, "attn.bv"), Tensor(1, model_dim));
    b.attn.wo = store.create(block_key(prefix, n, "attn.wo"), init_linear(model_dim, model_dim, model_dim, rng));
    b.attn.bo = store.create(block_key(prefix, n, "attn.bo"), Tensor(1, model_dim));
    b.norm1_gain = store.create(block_key(prefix, n, "norm1.gain"), Tensor::full(1, model_dim, 1.0));
    b.norm1_bias = store.create(block_key(prefix, n, "norm1.bias"), Tensor(1, model_dim));
    b.ffn_w1 = store.create(block_key(prefix, n, "ffn.w1"), init_linear(model_dim, model_dim, ffn, rng));
    b.ffn_b1 = store.create(block_key(prefix, n, "ffn.b1"), Tensor(1, ffn));
    b.ffn_w2 = store.create(block_key(prefix, n, "ffn.w2"), init_linear(ffn, ffn, model_dim, rng));
    b.ffn_b2 = store.create(block_key(prefix, n, "ffn.b2"), Tensor(1, model_dim));
    b.norm2_gain = store.create(block_key(prefix, n, "norm2.gain"), Tensor::full(1, model_dim, 1.0));
    b.norm2_bias = store.create(block_key(prefix, n, "norm2.bias"), Tensor(1, model_dim));
    s.blocks_.push_back(std::move(b));
  }
  return s;
}

EncoderStack EncoderStack::bind(const ParamStore& store, const std::string& prefix,
                                std::size_t feat_dim, std::size_t model_dim,
                                std::size_t num_blocks, std::size_t num_heads) {
  EncoderStack s;
  s.feat_dim_ = feat_dim;
  s.model_dim_ = model_dim;
  s.num_heads_ = num_heads;
  s.in_w_ = store.get(prefix + ".input.w");
  s.in_b_ = store.get(prefix + ".input.b");
  for (std::size_t n = 0; n < num_blocks; ++n) {
    Block b;
    b.attn.wq = store.get(block_key(prefix, n, "attn.wq"));
    b.attn.bq = store.get(block_key(prefix, n, "attn.bq"));
    b.attn.wk = store.get(block_key(prefix, n, "attn.wk"));
    b.attn.bk = store.get(block_key(prefix, n, "attn.bk"));
    b.attn.wv = store.get(block_key(prefix, n, "attn.wv"));
    b.attn.bv = store.get(block_key(prefix, n, "attn.bv"));
    b.attn.wo = store.get(block_key(prefix, n, "attn.wo"));
    b.attn.bo = store.get(block_key(prefix, n, "attn.bo"));
    b.norm1_gain = store.get(block_key(prefix, n, "norm1.gain"));
    b.norm1_bias = store.get(block_key(prefix, n, "norm1.bias"));
    b.ffn_w1 = store.get(block_key(prefix, n, "ffn.w1"));
    b.ffn_b1 = store.get(block_key(prefix, n, "ffn.b1"));
    b.ffn_w2 = store.get(block_key(prefix, n, "ffn.w2"));
    b.ffn_b2 = store.get(block_key(prefix, n, "ffn.b2"));
    b.norm2_gain = store.get(block_key(prefix, n, "norm2.gain"));
    b.norm2_bias = store.get(block_key(prefix, n, "norm2.bias"));
    s.blocks_.push_back(std::move(b));
  }
  return s;
}

Value EncoderStack::embed(const Value& features) const {
  if (features.cols() != feat_dim_)
    throw ConfigError("embed: feature dim " + std::to_string(features.cols()) +
                      " does not match input projection " + std::to_string(feat_dim_));
  Value e = add_rowvec(matmul(features, in_w_), in_b_);
  for (const auto& b : blocks_) {
    Value attn = multi_head_self_attention(e, b.attn, num_heads_);
    Value n1 = layer_norm(add(e, attn), b.norm1_gain, b.norm1_bias);
    Value hidden = relu(add_rowvec(matmul(n1, b.ffn_w1), b.ffn_b1));
    Value ffn = add_rowvec(matmul(hidden, b.ffn_w2), b.ffn_b2);
    e = layer_norm(add(n1, ffn), b.norm2_gain, b.norm2_bias);
  }
  return e;
}

FixedClassifierHead FixedClassifierHead::create(ParamStore& store, const std::string& prefix,
                                                std::size_t model_dim, std::size_t num_speakers,
                                                Rng& rng) {
  FixedClassifierHead head;
  head.w = store.create(prefix + ".w", init_linear(model_dim, model_dim, num_speakers, rng));
  head.b = store.create(prefix + ".b", Tensor(1, num_speakers));
  return head;
}

Value fixed_head_posteriors(const Value& embeddings, const FixedClassifierHead& head) {
  if (embeddings.cols() != head.w.rows())
    throw DimensionError("fixed_head_posteriors: embedding dim does not match head");
  // sigmoid(W^T e_t + b) over all frames, arranged S x T
  return sigmoid(transpose(add_rowvec(matmul(embeddings, head.w), head.b)));
}

}  // namespace eend
