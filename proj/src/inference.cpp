#include "eend/inference.hpp"

#include <algorithm>

#include "eend/combine.hpp"

namespace eend {

ActivityMatrix decode(const Tensor& posteriors, double frame_period, double threshold) {
  ActivityMatrix y(posteriors.rows(), posteriors.cols(), frame_period);
  for (std::size_t s = 0; s < posteriors.rows(); ++s)
    for (std::size_t t = 0; t < posteriors.cols(); ++t)
      y.at(s, t) = posteriors.at(s, t) > threshold ? 1 : 0;
  return y;
}

ActivityMatrix sad_postprocess(const Tensor& posteriors, const SadLabels& sad) {
  if (sad.z.size() != posteriors.cols())
    throw InputError("sad_postprocess: SAD length does not match posterior frames");
  ActivityMatrix y = decode(posteriors, sad.frame_period);
  const std::size_t s_count = y.num_speakers;
  for (std::size_t t = 0; t < y.num_frames; ++t) {
    std::size_t active = y.active_count(t);
    if (active > 0 && sad.z[t] == 0) {
      for (std::size_t s = 0; s < s_count; ++s) y.at(s, t) = 0;  // filter FA
    } else if (active == 0 && sad.z[t] == 1 && s_count > 0) {
      std::size_t best = 0;  // recover MI: argmax posterior, lowest index wins ties
      for (std::size_t s = 1; s < s_count; ++s)
        if (posteriors.at(s, t) > posteriors.at(best, t)) best = s;
      y.at(best, t) = 1;
    }
  }
  return y;
}

DiarizationBackend::Decode EendEdaBackend::decode_frames(const Tensor& features) {
  ShuffleOrder order = shuffle_ ? ShuffleOrder::shuffled(features.rows(), rng_)
                                : ShuffleOrder::chronological(features.rows());
  auto fwd = model_.forward_infer(features, order, tau_);
  Decode d;
  d.posteriors = std::move(fwd.posteriors);
  d.estimated_speakers = fwd.estimate.count;
  return d;
}

ActivityMatrix plain_inference(const Tensor& features, DiarizationBackend& backend,
                               double frame_period) {
  auto out = backend.decode_frames(features);
  return decode(out.posteriors, frame_period);
}

namespace {

struct Round {
  ActivityMatrix block;      // S_keep x T, full-length with zeros off the frame set
  std::size_t decoded = 0;   // S^(n) after the s_max cap, before any s_limit cut
};

// One decoding round on the selected frames; posteriors of unselected frames
// are zero, so their activities decode to zero.
Round run_round(const Tensor& features, DiarizationBackend& backend,
                const std::vector<std::size_t>& selected, std::size_t s_max,
                std::size_t s_keep_cap, double frame_period) {
  Tensor subset(selected.size(), features.cols());
  for (std::size_t i = 0; i < selected.size(); ++i)
    for (std::size_t c = 0; c < features.cols(); ++c)
      subset.at(i, c) = features.at(selected[i], c);

  auto out = backend.decode_frames(subset);
  Round round;
  round.decoded = std::min(out.estimated_speakers, s_max);
  const std::size_t s_keep = std::min(round.decoded, s_keep_cap);
  round.block = ActivityMatrix(s_keep, features.rows(), frame_period);
  for (std::size_t s = 0; s < s_keep; ++s)
    for (std::size_t i = 0; i < selected.size(); ++i)
      round.block.at(s, selected[i]) = out.posteriors.at(s, i) > 0.5 ? 1 : 0;
  return round;
}

ActivityMatrix stack_rounds(const std::vector<ActivityMatrix>& blocks, std::size_t t_len,
                            double frame_period) {
  std::size_t total = 0;
  for (const auto& b : blocks) total += b.num_speakers;
  ActivityMatrix y(total, t_len, frame_period);
  std::size_t row = 0;
  for (const auto& b : blocks) {
    for (std::size_t s = 0; s < b.num_speakers; ++s, ++row)
      for (std::size_t t = 0; t < t_len; ++t) y.at(row, t) = b.at(s, t);
  }
  return y;
}

// Shared loop of both iterative modes; first_round_cap only differs.
ActivityMatrix iterate(const Tensor& features, DiarizationBackend& backend, std::size_t s_max,
                       std::size_t first_round_cap, double frame_period,
                       std::vector<std::size_t>* round_sizes) {
  const std::size_t t_len = features.rows();
  std::vector<std::size_t> selected(t_len);
  for (std::size_t t = 0; t < t_len; ++t) selected[t] = t;

  std::vector<ActivityMatrix> blocks;
  for (std::size_t n = 0; n < t_len; ++n) {  // bounded; the frame set shrinks or we break
    std::size_t keep_cap = (n == 0) ? first_round_cap : s_max;
    Round round = run_round(features, backend, selected, s_max, keep_cap, frame_period);
    blocks.push_back(round.block);
    if (round_sizes) round_sizes->push_back(round.block.num_speakers);

    std::vector<std::size_t> silent;
    for (std::size_t t : selected) {
      bool any = false;
      for (std::size_t s = 0; s < round.block.num_speakers; ++s) any |= (round.block.at(s, t) != 0);
      if (!any) silent.push_back(t);
    }
    selected = std::move(silent);
    if (round.decoded < s_max || selected.empty()) break;
  }
  return stack_rounds(blocks, t_len, frame_period);
}

}  // namespace

ActivityMatrix iterative_inference(const Tensor& features, DiarizationBackend& backend,
                                   std::size_t s_max, double frame_period,
                                   std::vector<std::size_t>* round_sizes) {
  if (s_max == 0) throw ConfigError("iterative_inference: s_max must be positive");
  if (features.rows() == 0) throw InputError("iterative_inference: empty recording");
  return iterate(features, backend, s_max, s_max, frame_period, round_sizes);
}

ActivityMatrix iterative_inference_plus(const Tensor& features, DiarizationBackend& backend,
                                        std::size_t s_max, double frame_period) {
  if (s_max == 0) throw ConfigError("iterative_inference_plus: s_max must be positive");
  if (features.rows() == 0) throw InputError("iterative_inference_plus: empty recording");
  std::vector<Hypothesis> hypotheses;
  for (std::size_t s_limit = 1; s_limit <= s_max; ++s_limit)
    hypotheses.push_back({iterate(features, backend, s_max, s_limit, frame_period, nullptr), 1.0});
  if (hypotheses.size() == 1) return hypotheses[0].activity;
  return combine_hypotheses(hypotheses);
}

}  // namespace eend
