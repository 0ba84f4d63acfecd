#pragma once

#include <map>
#include <string>
#include <vector>

#include "eend/model.hpp"
#include "eend/objective.hpp"
#include "eend/rttm.hpp"

namespace eend {

// Learning rate of the inverse-square-root warmup schedule:
// model_dim^-0.5 * min(step^-0.5, step * warmup^-1.5); peaks at step = warmup.
double noam_lr(std::size_t step, std::size_t model_dim, std::size_t warmup);

struct AdamConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

// Standard bias-corrected Adam over a ParamStore. Moments are kept per
// parameter name; iteration order is the store's (sorted), so updates are
// deterministic. Throws on non-finite gradients.
class Adam {
 public:
  explicit Adam(AdamConfig cfg = {}) : cfg_(cfg) {}
  void step(ParamStore& params, double lr);
  std::size_t steps() const { return step_; }

 private:
  struct Moments {
    Tensor m, v;
  };
  AdamConfig cfg_;
  std::map<std::string, Moments> moments_;
  std::size_t step_ = 0;
};

enum class LrMode { kNoam, kFixed };
enum class EdaInputOrder { kShuffled, kChronological };

struct TrainConfig {
  std::size_t chunk_frames = 500;   // 2000 for adaptation runs
  std::size_t batch_size = 64;
  std::size_t epochs = 10;
  std::uint64_t seed = 0;
  double alpha = 1.0;
  bool stop_gradient_existence = true;  // false = full backprop from the existence loss
  EdaInputOrder order = EdaInputOrder::kShuffled;
  LrMode lr_mode = LrMode::kNoam;
  std::size_t warmup_steps = 100000;  // desk runs shrink this (e.g. 1000)
  double fixed_lr = 1e-5;
  double max_skip_fraction = 0.10;  // corpus items with bad labels
  bool save_every_epoch = true;
};

struct TrainItem {
  std::string id;
  Tensor features;        // T x F
  ActivityMatrix labels;  // S x T
};

struct TrainResult {
  std::vector<LossBreakdown> epoch_means;
  std::size_t skipped_items = 0;
  std::size_t total_steps = 0;
};

// Reads "feature_path <tab> label_path <tab> recording_id" lines. Items whose
// label and feature frame counts disagree are skipped with a warning; more
// than `max_skip_fraction` skipped is an error.
std::vector<TrainItem> load_manifest(const std::string& path, double max_skip_fraction,
                                     std::size_t* skipped = nullptr);

// Optimizes the model in place. When `out_dir` is non-empty, writes
// epoch_###.ckpt each epoch (per config), final.ckpt and loss_log.txt.
TrainResult train(EendEdaModel& model, const std::vector<TrainItem>& corpus,
                  const TrainConfig& cfg, const std::string& out_dir = "");

}  // namespace eend
