#include "eend/eda.hpp"

#include <numeric>

namespace eend {

EdaParams EdaParams::create(ParamStore& store, const std::string& prefix, std::size_t model_dim,
                            Rng& rng) {
  EdaParams p;
  p.encoder.w_ih = store.create(prefix + ".enc.w_ih", init_linear(model_dim, model_dim, 4 * model_dim, rng));
  p.encoder.w_hh = store.create(prefix + ".enc.w_hh", init_linear(model_dim, model_dim, 4 * model_dim, rng));
  p.encoder.b = store.create(prefix + ".enc.b", Tensor(1, 4 * model_dim));
  p.decoder.w_ih = store.create(prefix + ".dec.w_ih", init_linear(model_dim, model_dim, 4 * model_dim, rng));
  p.decoder.w_hh = store.create(prefix + ".dec.w_hh", init_linear(model_dim, model_dim, 4 * model_dim, rng));
  p.decoder.b = store.create(prefix + ".dec.b", Tensor(1, 4 * model_dim));
  p.w_exist = store.create(prefix + ".exist.w", init_linear(model_dim, model_dim, 1, rng));
  p.b_exist = store.create(prefix + ".exist.b", Tensor(1, 1));
  return p;
}

EdaParams EdaParams::bind(const ParamStore& store, const std::string& prefix) {
  EdaParams p;
  p.encoder.w_ih = store.get(prefix + ".enc.w_ih");
  p.encoder.w_hh = store.get(prefix + ".enc.w_hh");
  p.encoder.b = store.get(prefix + ".enc.b");
  p.decoder.w_ih = store.get(prefix + ".dec.w_ih");
  p.decoder.w_hh = store.get(prefix + ".dec.w_hh");
  p.decoder.b = store.get(prefix + ".dec.b");
  p.w_exist = store.get(prefix + ".exist.w");
  p.b_exist = store.get(prefix + ".exist.b");
  return p;
}

ShuffleOrder ShuffleOrder::chronological(std::size_t t) {
  ShuffleOrder o;
  o.order.resize(t);
  std::iota(o.order.begin(), o.order.end(), 0);
  return o;
}

ShuffleOrder ShuffleOrder::shuffled(std::size_t t, Rng& rng) {
  ShuffleOrder o;
  o.order = rng.permutation(t);
  return o;
}

LstmState encode_embeddings(const Value& embeddings, const ShuffleOrder& order,
                            const EdaParams& params) {
  if (embeddings.rows() == 0) throw InputError("encode_embeddings: empty embedding sequence");
  if (order.order.size() != embeddings.rows())
    throw InputError("encode_embeddings: order length does not match sequence");
  const std::size_t d = params.dim();
  Value hc = lstm_sequence_final(embeddings, order.order, params.encoder);
  return {slice_cols(hc, 0, d), slice_cols(hc, d, 2 * d)};
}

Value decode_attractors(const LstmState& init, std::size_t count, const EdaParams& params) {
  if (count == 0) throw InputError("decode_attractors: count must be positive");
  Value zero_in = Value::constant(Tensor(1, params.dim()));
  LstmState state = init;
  std::vector<Value> rows;
  rows.reserve(count);
  for (std::size_t s = 0; s < count; ++s) {
    state = lstm_cell(zero_in, state, params.decoder);
    rows.push_back(state.h);
  }
  return count == 1 ? rows[0] : concat_rows(rows);
}

Value existence_probs(const Value& attractors, const EdaParams& params, bool stop_gradient_flag) {
  Value a = stop_gradient_flag ? stop_gradient(attractors) : attractors;
  return sigmoid(add_rowvec(matmul(a, params.w_exist), params.b_exist));
}

Value attractor_posteriors(const Value& embeddings, const Value& attractors) {
  if (embeddings.cols() != attractors.cols())
    throw DimensionError("attractor_posteriors: attractor dim does not match embeddings");
  return sigmoid(matmul_nt_scaled(attractors, embeddings, 1.0));
}

CountEstimate estimate_speaker_count(const std::vector<double>& existence, double tau) {
  CountEstimate e;
  for (std::size_t s = 0; s < existence.size(); ++s) {
    if (existence[s] < tau) {
      e.count = s;
      return e;
    }
  }
  e.count = existence.size();
  e.capped = true;
  return e;
}

AttractorDecode decode_until_stop(const LstmState& init, const EdaParams& params, double tau,
                                  std::size_t cap) {
  if (cap == 0) throw ConfigError("decode_until_stop: cap must be positive");
  AttractorDecode out;
  Value zero_in = Value::constant(Tensor(1, params.dim()));
  LstmState state = init;
  std::vector<Value> rows;
  for (std::size_t s = 0; s < cap; ++s) {
    state = lstm_cell(zero_in, state, params.decoder);
    Value q = existence_probs(state.h, params, false);
    out.existence.push_back(q.val().item());
    rows.push_back(state.h);
    if (out.existence.back() < tau) break;
  }
  out.estimate = estimate_speaker_count(out.existence, tau);
  std::size_t keep = out.estimate.count;
  if (keep == 0)
    out.attractors = Value::constant(Tensor(0, params.dim()));
  else if (keep == 1)
    out.attractors = rows[0];
  else
    out.attractors = concat_rows({rows.begin(), rows.begin() + static_cast<std::ptrdiff_t>(keep)});
  return out;
}

}  // namespace eend
