#pragma once

#include <optional>
#include <string>
#include <vector>

#include "eend/params.hpp"
#include "eend/rng.hpp"
#include "eend/tensor.hpp"

namespace eend {

// Encoder-decoder attractor calculation: an LSTM encoder consumes the
// frame-wise embeddings (optionally in shuffled order), an LSTM decoder then
// emits one attractor per step from zero inputs, and a fully connected layer
// scores each attractor's existence probability.
struct EdaParams {
  LstmParams encoder;  // D -> D
  LstmParams decoder;  // D -> D
  Value w_exist;       // D x 1
  Value b_exist;       // 1 x 1

  std::size_t dim() const { return encoder.hidden(); }

  static EdaParams create(ParamStore& store, const std::string& prefix, std::size_t model_dim,
                          Rng& rng);
  static EdaParams bind(const ParamStore& store, const std::string& prefix);
};

// Frame visit order for the EDA encoder.
struct ShuffleOrder {
  std::vector<std::size_t> order;

  static ShuffleOrder chronological(std::size_t t);
  static ShuffleOrder shuffled(std::size_t t, Rng& rng);
};

// Runs the LSTM encoder over the embeddings in the given order from a zero
// initial state; returns the final hidden and cell state.
LstmState encode_embeddings(const Value& embeddings, const ShuffleOrder& order,
                            const EdaParams& params);

// Decodes `count` attractors (rows of the returned S x D Value) by feeding
// zero vectors from the encoder's final state.
Value decode_attractors(const LstmState& init, std::size_t count, const EdaParams& params);

// Per-attractor existence probabilities, an S x 1 column. With stop_gradient
// the attractors are detached first so only w_exist/b_exist learn from the
// existence loss.
Value existence_probs(const Value& attractors, const EdaParams& params, bool stop_gradient);

// sigmoid(A e_t) for every frame: S x T posteriors, no bias term.
Value attractor_posteriors(const Value& embeddings, const Value& attractors);

struct CountEstimate {
  std::size_t count = 0;
  bool capped = false;  // hard cap hit before any probability fell below tau
};

// First index whose probability falls below tau; the full vector length with
// a warning flag when none does.
CountEstimate estimate_speaker_count(const std::vector<double>& existence, double tau = 0.5);

// Inference-side decode loop: emits attractors until the existence
// probability drops below tau or `cap` attractors have been produced.
// Returns the kept attractors (count rows) and all existence probabilities.
struct AttractorDecode {
  Value attractors;                // count x D (0 x D when silent)
  std::vector<double> existence;   // one entry per decoded attractor
  CountEstimate estimate;
};
AttractorDecode decode_until_stop(const LstmState& init, const EdaParams& params, double tau,
                                  std::size_t cap = 20);

}  // namespace eend
