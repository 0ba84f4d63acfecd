#include "eend/model.hpp"

namespace eend {

EendEdaModel::EendEdaModel(const ModelConfig& cfg, std::uint64_t seed) : cfg_(cfg) {
  Rng rng(seed);
  encoder_ = EncoderStack::create(params_, "encoder", cfg.feat_dim, cfg.model_dim,
                                  cfg.num_blocks, cfg.num_heads, rng);
  eda_ = EdaParams::create(params_, "eda", cfg.model_dim, rng);
}

EendEdaModel EendEdaModel::load(const std::string& path) {
  std::map<std::string, std::string> meta;
  ParamStore store = ParamStore::load(path, &meta);
  auto need = [&](const char* key) {
    auto it = meta.find(key);
    if (it == meta.end()) throw IoError(std::string("checkpoint missing meta key ") + key);
    return static_cast<std::size_t>(std::stoull(it->second));
  };
  EendEdaModel m;
  m.cfg_.feat_dim = need("feat_dim");
  m.cfg_.model_dim = need("model_dim");
  m.cfg_.num_blocks = need("num_blocks");
  m.cfg_.num_heads = need("num_heads");
  if (meta.count("attractor_cap"))
    m.cfg_.attractor_cap = static_cast<std::size_t>(std::stoull(meta["attractor_cap"]));
  m.params_ = std::move(store);
  m.encoder_ = EncoderStack::bind(m.params_, "encoder", m.cfg_.feat_dim, m.cfg_.model_dim,
                                  m.cfg_.num_blocks, m.cfg_.num_heads);
  m.eda_ = EdaParams::bind(m.params_, "eda");
  return m;
}

void EendEdaModel::save(const std::string& path) const {
  std::map<std::string, std::string> meta{
      {"format", "eend-eda"},
      {"feat_dim", std::to_string(cfg_.feat_dim)},
      {"model_dim", std::to_string(cfg_.model_dim)},
      {"num_blocks", std::to_string(cfg_.num_blocks)},
      {"num_heads", std::to_string(cfg_.num_heads)},
      {"attractor_cap", std::to_string(cfg_.attractor_cap)},
  };
  params_.save(path, meta);
}

EendEdaModel::TrainForward EendEdaModel::forward_train(const Tensor& features,
                                                       const ShuffleOrder& order,
                                                       std::size_t num_speakers,
                                                       bool stop_gradient_existence) const {
  Value x = Value::constant(features);
  Value e = encoder_.embed(x);
  LstmState state = encode_embeddings(e, order, eda_);
  Value attractors = decode_attractors(state, num_speakers + 1, eda_);
  TrainForward out;
  out.existence = existence_probs(attractors, eda_, stop_gradient_existence);
  if (num_speakers > 0)
    out.posteriors = attractor_posteriors(e, slice_rows(attractors, 0, num_speakers));
  return out;
}

EendEdaModel::InferForward EendEdaModel::forward_infer(const Tensor& features,
                                                       const ShuffleOrder& order,
                                                       double tau) const {
  NoGradGuard no_grad;
  Value x = Value::constant(features);
  Value e = encoder_.embed(x);
  LstmState state = encode_embeddings(e, order, eda_);
  AttractorDecode decode = decode_until_stop(state, eda_, tau, cfg_.attractor_cap);
  InferForward out;
  out.existence = decode.existence;
  out.estimate = decode.estimate;
  if (decode.estimate.count > 0)
    out.posteriors = attractor_posteriors(e, decode.attractors).val();
  else
    out.posteriors = Tensor(0, features.rows());
  return out;
}

}  // namespace eend
