#include "eend/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>

#include "eend/features.hpp"

namespace eend {

double noam_lr(std::size_t step, std::size_t model_dim, std::size_t warmup) {
  if (step == 0) throw InputError("noam_lr: step starts at 1");
  double s = static_cast<double>(step);
  double w = static_cast<double>(warmup);
  return std::pow(static_cast<double>(model_dim), -0.5) *
         std::min(std::pow(s, -0.5), s * std::pow(w, -1.5));
}

void Adam::step(ParamStore& params, double lr) {
  ++step_;
  const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(step_));
  const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(step_));
  for (const auto& [name, value] : params.items()) {
    Value param = value;
    const Tensor& g = param.grad();
    if (g.size() != param.val().size()) continue;  // never touched by backward
    auto it = moments_.find(name);
    if (it == moments_.end()) {
      it = moments_.emplace(name, Moments{Tensor::zeros(param.rows(), param.cols()),
                                          Tensor::zeros(param.rows(), param.cols())}).first;
    }
    Tensor& m = it->second.m;
    Tensor& v = it->second.v;
    Tensor& data = const_cast<Tensor&>(param.val());
    for (std::size_t i = 0; i < g.size(); ++i) {
      double gi = g.data()[i];
      if (!std::isfinite(gi))
        throw InputError("adam: non-finite gradient in parameter " + name);
      m.data()[i] = cfg_.beta1 * m.data()[i] + (1.0 - cfg_.beta1) * gi;
      v.data()[i] = cfg_.beta2 * v.data()[i] + (1.0 - cfg_.beta2) * gi * gi;
      double mhat = m.data()[i] / bc1;
      double vhat = v.data()[i] / bc2;
      data.data()[i] -= lr * mhat / (std::sqrt(vhat) + cfg_.eps);
    }
  }
}

std::vector<TrainItem> load_manifest(const std::string& path, double max_skip_fraction,
                                     std::size_t* skipped_out) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot open manifest: " + path);
  std::vector<TrainItem> items;
  std::size_t total = 0, skipped = 0;
  std::string line;
  while (std::getline(is, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::istringstream fields(line);
    std::string feat_path, lab_path, rec_id;
    if (!(fields >> feat_path >> lab_path >> rec_id))
      throw InputError("manifest: malformed line: " + line);
    ++total;
    try {
      TrainItem item;
      item.id = rec_id;
      FeatureSequence fs = read_features(feat_path);
      item.labels = read_labels(lab_path);
      if (item.labels.num_frames != fs.num_frames())
        throw InputError("label/feature frame count mismatch");
      item.features = std::move(fs.frames);
      items.push_back(std::move(item));
    } catch (const std::exception& e) {
      ++skipped;
      std::cerr << "warning: skipping " << rec_id << ": " << e.what() << "\n";
    }
  }
  if (skipped_out) *skipped_out = skipped;
  if (total > 0 && static_cast<double>(skipped) > max_skip_fraction * static_cast<double>(total))
    throw InputError("manifest: " + std::to_string(skipped) + " of " + std::to_string(total) +
                     " items unusable");
  return items;
}

namespace {

struct Chunk {
  std::size_t item;
  std::size_t start;
  std::size_t len;
};

// Chunk labels drop speakers absent from the window, so the per-chunk speaker
// count matches what the attractor decoder is asked to produce.
Tensor chunk_labels(const ActivityMatrix& labels, std::size_t start, std::size_t len) {
  std::vector<std::size_t> present;
  for (std::size_t s = 0; s < labels.num_speakers; ++s) {
    bool any = false;
    for (std::size_t t = start; t < start + len; ++t) any |= (labels.at(s, t) != 0);
    if (any) present.push_back(s);
  }
  Tensor y(present.size(), len);
  for (std::size_t r = 0; r < present.size(); ++r)
    for (std::size_t t = 0; t < len; ++t)
      y.at(r, t) = static_cast<double>(labels.at(present[r], start + t));
  return y;
}

Tensor chunk_features(const Tensor& features, std::size_t start, std::size_t len) {
  Tensor x(len, features.cols());
  for (std::size_t t = 0; t < len; ++t)
    for (std::size_t c = 0; c < features.cols(); ++c) x.at(t, c) = features.at(start + t, c);
  return x;
}

}  // namespace

TrainResult train(EendEdaModel& model, const std::vector<TrainItem>& corpus,
                  const TrainConfig& cfg, const std::string& out_dir) {
  if (cfg.chunk_frames == 0 || cfg.batch_size == 0)
    throw ConfigError("train: chunk length and batch size must be positive");
  if (corpus.empty()) throw InputError("train: empty corpus");

  std::vector<Chunk> chunks;
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    const std::size_t t_len = corpus[i].features.rows();
    if (corpus[i].labels.num_frames != t_len)
      throw InputError("train: labels misaligned for item " + corpus[i].id);
    for (std::size_t start = 0; start < t_len; start += cfg.chunk_frames)
      chunks.push_back({i, start, std::min(cfg.chunk_frames, t_len - start)});
  }

  namespace fs = std::filesystem;
  std::ofstream loss_log;
  if (!out_dir.empty()) {
    fs::create_directories(out_dir);
    loss_log.open((fs::path(out_dir) / "loss_log.txt").string(), std::ios::binary);
    if (!loss_log) throw IoError("train: cannot write loss log in " + out_dir);
  }

  Rng rng(cfg.seed);
  Adam adam;
  TrainResult result;
  char line[160];

  for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
    auto order = rng.permutation(chunks.size());
    double sum_diar = 0.0, sum_exist = 0.0, sum_total = 0.0;

    for (std::size_t pos = 0; pos < order.size(); pos += cfg.batch_size) {
      const std::size_t batch_end = std::min(pos + cfg.batch_size, order.size());
      std::vector<Value> losses;
      for (std::size_t k = pos; k < batch_end; ++k) {
        const Chunk& ch = chunks[order[k]];
        const TrainItem& item = corpus[ch.item];
        Tensor x = chunk_features(item.features, ch.start, ch.len);
        Tensor y = chunk_labels(item.labels, ch.start, ch.len);
        ShuffleOrder eda_order = cfg.order == EdaInputOrder::kShuffled
                                     ? ShuffleOrder::shuffled(ch.len, rng)
                                     : ShuffleOrder::chronological(ch.len);
        auto fwd = model.forward_train(x, eda_order, y.rows(), cfg.stop_gradient_existence);
        PitResult pit = pit_loss(y, fwd.posteriors);
        Value exist = existence_loss(fwd.existence);
        LossBreakdown bd;
        Value total = total_loss(pit.loss, exist, cfg.alpha, &bd);
        if (!std::isfinite(bd.total))
          throw InputError("train: non-finite loss on item " + item.id);
        sum_diar += bd.diar;
        sum_exist += bd.exist;
        sum_total += bd.total;
        losses.push_back(total);
      }
      Value batch_loss = losses.size() == 1
                             ? losses[0]
                             : scale([&] {
                                 Value acc = losses[0];
                                 for (std::size_t i = 1; i < losses.size(); ++i)
                                   acc = add(acc, losses[i]);
                                 return acc;
                               }(),
                                     1.0 / static_cast<double>(losses.size()));
      model.params().zero_grad();
      backward(batch_loss);
      double lr = cfg.lr_mode == LrMode::kNoam
                      ? noam_lr(adam.steps() + 1, model.config().model_dim, cfg.warmup_steps)
                      : cfg.fixed_lr;
      adam.step(model.params(), lr);
      ++result.total_steps;
    }

    LossBreakdown mean;
    mean.alpha = cfg.alpha;
    mean.diar = sum_diar / static_cast<double>(chunks.size());
    mean.exist = sum_exist / static_cast<double>(chunks.size());
    mean.total = sum_total / static_cast<double>(chunks.size());
    result.epoch_means.push_back(mean);

    if (!out_dir.empty()) {
      std::snprintf(line, sizeof line, "%zu\t%.17g\t%.17g\t%.17g\n", epoch, mean.diar,
                    mean.exist, mean.total);
      loss_log << line;
      loss_log.flush();
      if (cfg.save_every_epoch) {
        std::snprintf(line, sizeof line, "epoch_%03zu.ckpt", epoch);
        model.save((fs::path(out_dir) / line).string());
      }
    }
  }

  if (!out_dir.empty()) model.save((fs::path(out_dir) / "final.ckpt").string());
  return result;
}

}  // namespace eend
