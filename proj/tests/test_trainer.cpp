#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "eend/simulate.hpp"
#include "eend/trainer.hpp"

using namespace eend;

TEST_CASE("noam schedule forced values") {
  // the two min branches meet at step = warmup
  CHECK(noam_lr(1000, 256, 1000) ==
        doctest::Approx(std::pow(256.0, -0.5) * std::pow(1000.0, -0.5)).epsilon(1e-12));
  // linear ramp: half way through warmup gives half the peak
  double peak = noam_lr(1000, 256, 1000);
  CHECK(noam_lr(500, 256, 1000) == doctest::Approx(0.5 * peak).epsilon(1e-12));
  // direct formula evaluation
  double expect = std::pow(256.0, -0.5) * std::min(std::pow(4000.0, -0.5), 4000.0 * std::pow(1000.0, -1.5));
  CHECK(noam_lr(4000, 256, 1000) == doctest::Approx(expect).epsilon(1e-12));
  CHECK_THROWS_AS(noam_lr(0, 256, 1000), InputError);
}

TEST_CASE("adam leaves parameters alone under zero gradients") {
  ParamStore store;
  Value w = store.create("w", Tensor(2, 2, {1.0, 2.0, 3.0, 4.0}));
  store.zero_grad();
  Adam adam;
  adam.step(store, 0.1);
  CHECK(w.val().data() == std::vector<double>{1.0, 2.0, 3.0, 4.0});
}

TEST_CASE("adam first-step size is ~lr regardless of gradient scale") {
  for (double g : {1e-4, 1.0, 1e4}) {
    ParamStore store;
    Value w = store.create("w", Tensor::scalar(0.0));
    const_cast<Tensor&>(w.grad()).data()[0] = g;
    Adam adam;
    adam.step(store, 0.01);
    CHECK(std::abs(w.val().item()) == doctest::Approx(0.01).epsilon(1e-3));
  }
}

TEST_CASE("adam three-step trace matches a manual recursion") {
  // loss 0.5 x^2, gradient x, starting at x = 1
  double x = 1.0, m = 0.0, v = 0.0;
  const double lr = 0.1, b1 = 0.9, b2 = 0.999, eps = 1e-8;

  ParamStore store;
  Value w = store.create("x", Tensor::scalar(1.0));
  Adam adam;
  for (int t = 1; t <= 3; ++t) {
    double g = x;  // manual
    m = b1 * m + (1 - b1) * g;
    v = b2 * v + (1 - b2) * g * g;
    double mh = m / (1 - std::pow(b1, t));
    double vh = v / (1 - std::pow(b2, t));
    x -= lr * mh / (std::sqrt(vh) + eps);

    store.zero_grad();
    Value loss = scale(mul(w, w), 0.5);
    backward(loss);
    adam.step(store, lr);
    CHECK(w.val().item() == doctest::Approx(x).epsilon(1e-10));
  }
}

TEST_CASE("adam rejects non-finite gradients") {
  ParamStore store;
  Value w = store.create("w", Tensor::scalar(0.0));
  const_cast<Tensor&>(w.grad()).data()[0] = std::nan("");
  Adam adam;
  CHECK_THROWS_AS(adam.step(store, 0.1), InputError);
}

TEST_CASE("chunking splits 1234 frames into 500/500/234") {
  // exercised through train() on a tiny corpus with an inspectable epoch count
  SimConfig sim;
  sim.num_speakers = 1;
  sim.feat_dim = 4;
  sim.fixed_frames = 1234;
  sim.min_utterances = 2;
  sim.max_utterances = 3;
  Rng rng(3);
  Mixture mix = build_mixture(sim, rng, "rec");

  ModelConfig mc;
  mc.feat_dim = 4;
  mc.model_dim = 4;
  mc.num_blocks = 1;
  mc.num_heads = 1;
  EendEdaModel model(mc, 1);

  TrainItem item{"rec", mix.features.frames, mix.labels};
  TrainConfig tc;
  tc.chunk_frames = 500;
  tc.batch_size = 3;
  tc.epochs = 1;
  tc.warmup_steps = 10;
  auto result = train(model, {item}, tc);
  // 3 chunks in one batch -> one optimizer step
  CHECK(result.total_steps == 1);
}

TEST_CASE("training is deterministic given the seed") {
  SimConfig sim;
  sim.num_speakers = 2;
  sim.feat_dim = 6;
  sim.fixed_frames = 40;
  sim.min_utterances = 2;
  sim.max_utterances = 3;
  sim.min_utterance_sec = 0.5;
  sim.max_utterance_sec = 2.0;

  std::vector<TrainItem> corpus;
  for (int i = 0; i < 2; ++i) {
    Rng rng(100 + i);
    Mixture mix = build_mixture(sim, rng, "rec" + std::to_string(i));
    corpus.push_back({"rec" + std::to_string(i), mix.features.frames, mix.labels});
  }

  ModelConfig mc;
  mc.feat_dim = 6;
  mc.model_dim = 8;
  mc.num_blocks = 1;
  mc.num_heads = 2;
  TrainConfig tc;
  tc.chunk_frames = 20;
  tc.batch_size = 2;
  tc.epochs = 2;
  tc.seed = 7;
  tc.warmup_steps = 100;

  EendEdaModel a(mc, 42), b(mc, 42);
  auto ra = train(a, corpus, tc);
  auto rb = train(b, corpus, tc);
  REQUIRE(ra.epoch_means.size() == rb.epoch_means.size());
  for (std::size_t e = 0; e < ra.epoch_means.size(); ++e) {
    CHECK(ra.epoch_means[e].total == rb.epoch_means[e].total);  // bit identical
    CHECK(ra.epoch_means[e].diar == rb.epoch_means[e].diar);
  }
  // and the parameters agree bit for bit
  for (const auto& [name, va] : a.params().items()) {
    CHECK(va.val().max_abs_diff(b.params().get(name).val()) == 0.0);
  }
}

TEST_CASE("stop-gradient routing blocks existence loss from the encoder") {
  SimConfig sim;
  sim.num_speakers = 2;
  sim.feat_dim = 6;
  sim.fixed_frames = 30;
  sim.min_utterances = 2;
  sim.max_utterances = 3;
  sim.min_utterance_sec = 0.5;
  sim.max_utterance_sec = 1.5;
  Rng rng(5);
  Mixture mix = build_mixture(sim, rng, "rec");

  ModelConfig mc;
  mc.feat_dim = 6;
  mc.model_dim = 8;
  mc.num_blocks = 1;
  mc.num_heads = 2;
  EendEdaModel model(mc, 11);

  Tensor y(0, 0);  // zero the diarization loss by scoring zero speakers
  for (bool stop_grad : {true, false}) {
    model.params().zero_grad();
    auto fwd = model.forward_train(mix.features.frames, ShuffleOrder::chronological(30), 2,
                                   stop_grad);
    // L_diar zeroed: only the existence loss backpropagates
    backward(existence_loss(fwd.existence));
    bool any_encoder_grad = false;
    for (const auto& [name, v] : model.params().items()) {
      if (name.rfind("encoder.", 0) == 0 || name.find(".enc.") != std::string::npos ||
          name.find(".dec.") != std::string::npos) {
        for (double g : v.grad().data()) any_encoder_grad |= (g != 0.0);
      }
    }
    CHECK(any_encoder_grad == !stop_grad);
  }
}

TEST_CASE("manifest loading skips mismatched items and enforces the skip cap") {
  namespace fs = std::filesystem;
  fs::create_directories("trainer_manifest_test");
  SimConfig sim;
  sim.num_speakers = 1;
  sim.feat_dim = 4;
  sim.fixed_frames = 10;
  sim.min_utterances = 1;
  sim.max_utterances = 2;
  sim.min_utterance_sec = 0.3;
  sim.max_utterance_sec = 0.6;
  Rng rng(9);
  Mixture good = build_mixture(sim, rng, "good");
  write_features(good.features, "trainer_manifest_test/good.feat");
  write_labels(good.labels, "trainer_manifest_test/good.lab");

  // bad item: labels with the wrong frame count
  ActivityMatrix bad_labels(1, 5, 0.1);
  write_labels(bad_labels, "trainer_manifest_test/bad.lab");

  {
    std::ofstream m("trainer_manifest_test/manifest.txt");
    m << "trainer_manifest_test/good.feat\ttrainer_manifest_test/good.lab\tgood\n";
  }
  std::size_t skipped = 0;
  auto items = load_manifest("trainer_manifest_test/manifest.txt", 0.1, &skipped);
  CHECK(items.size() == 1);
  CHECK(skipped == 0);

  {
    std::ofstream m("trainer_manifest_test/manifest.txt");
    m << "trainer_manifest_test/good.feat\ttrainer_manifest_test/good.lab\tgood\n";
    m << "trainer_manifest_test/good.feat\ttrainer_manifest_test/bad.lab\tbad\n";
  }
  // 50% unusable blows through the 10% cap
  CHECK_THROWS_AS(load_manifest("trainer_manifest_test/manifest.txt", 0.1, &skipped), InputError);
  fs::remove_all("trainer_manifest_test");
}

TEST_CASE("overfitting a single recording drives the loss down") {
  SimConfig sim;
  sim.num_speakers = 2;
  sim.feat_dim = 8;
  sim.fixed_frames = 60;
  sim.min_utterances = 2;
  sim.max_utterances = 4;
  sim.min_utterance_sec = 0.5;
  sim.max_utterance_sec = 2.0;
  Rng rng(21);
  Mixture mix = build_mixture(sim, rng, "rec");

  ModelConfig mc;
  mc.feat_dim = 8;
  mc.model_dim = 8;
  mc.num_blocks = 1;
  mc.num_heads = 2;
  EendEdaModel model(mc, 3);

  TrainConfig tc;
  tc.chunk_frames = 60;
  tc.batch_size = 1;
  tc.epochs = 50;
  tc.seed = 1;
  tc.warmup_steps = 20;
  tc.stop_gradient_existence = false;
  auto result = train(model, {{"rec", mix.features.frames, mix.labels}}, tc);
  CHECK(result.epoch_means.back().total < result.epoch_means.front().total);
}

TEST_CASE("checkpoints written during training reload to identical forwards") {
  namespace fs = std::filesystem;
  SimConfig sim;
  sim.num_speakers = 1;
  sim.feat_dim = 4;
  sim.fixed_frames = 20;
  sim.min_utterances = 1;
  sim.max_utterances = 2;
  sim.min_utterance_sec = 0.4;
  sim.max_utterance_sec = 1.0;
  Rng rng(33);
  Mixture mix = build_mixture(sim, rng, "rec");

  ModelConfig mc;
  mc.feat_dim = 4;
  mc.model_dim = 4;
  mc.num_blocks = 1;
  mc.num_heads = 1;
  EendEdaModel model(mc, 8);
  TrainConfig tc;
  tc.chunk_frames = 20;
  tc.batch_size = 1;
  tc.epochs = 2;
  tc.warmup_steps = 10;
  train(model, {{"rec", mix.features.frames, mix.labels}}, tc, "trainer_ckpt_test");

  CHECK(fs::exists("trainer_ckpt_test/epoch_001.ckpt"));
  CHECK(fs::exists("trainer_ckpt_test/epoch_002.ckpt"));
  CHECK(fs::exists("trainer_ckpt_test/final.ckpt"));
  CHECK(fs::exists("trainer_ckpt_test/loss_log.txt"));

  auto loaded = EendEdaModel::load("trainer_ckpt_test/final.ckpt");
  auto a = model.forward_infer(mix.features.frames, ShuffleOrder::chronological(20), 0.5);
  auto b = loaded.forward_infer(mix.features.frames, ShuffleOrder::chronological(20), 0.5);
  CHECK(a.posteriors.rows() == b.posteriors.rows());
  if (a.posteriors.size() > 0) CHECK(a.posteriors.max_abs_diff(b.posteriors) == 0.0);
  fs::remove_all("trainer_ckpt_test");
}
