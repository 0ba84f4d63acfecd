#include <doctest.h>

#include <cmath>

#include "eend/encoder.hpp"
#include "eend/rng.hpp"

using namespace eend;

namespace {

Tensor random_tensor(std::size_t r, std::size_t c, Rng& rng, double scale = 1.0) {
  Tensor t(r, c);
  for (double& v : t.data()) v = rng.uniform(-scale, scale);
  return t;
}

}  // namespace

TEST_CASE("encoder embed is permutation equivariant over frames") {
  ParamStore store;
  Rng rng(1);
  auto stack = EncoderStack::create(store, "encoder", 12, 16, 2, 4, rng);
  for (int trial = 0; trial < 5; ++trial) {
    std::size_t t = 2 + rng.uniform_int(49);
    Tensor x = random_tensor(t, 12, rng);
    auto perm = rng.permutation(t);
    Tensor xp(t, 12);
    for (std::size_t r = 0; r < t; ++r)
      for (std::size_t c = 0; c < 12; ++c) xp.at(r, c) = x.at(perm[r], c);
    Tensor e = stack.embed(Value::constant(x)).val();
    Tensor ep = stack.embed(Value::constant(xp)).val();
    double max_diff = 0.0;
    for (std::size_t r = 0; r < t; ++r)
      for (std::size_t c = 0; c < 16; ++c)
        max_diff = std::max(max_diff, std::abs(ep.at(r, c) - e.at(perm[r], c)));
    CHECK(max_diff < 1e-9);
  }
}

TEST_CASE("encoder handles a single frame and stays finite for large inputs") {
  ParamStore store;
  Rng rng(2);
  auto stack = EncoderStack::create(store, "encoder", 8, 8, 1, 2, rng);
  Tensor one = random_tensor(1, 8, rng);
  auto e = stack.embed(Value::constant(one));
  CHECK(e.rows() == 1);
  CHECK(e.cols() == 8);
  CHECK(e.val().all_finite());

  Tensor big = random_tensor(10, 8, rng, 100.0);
  CHECK(stack.embed(Value::constant(big)).val().all_finite());
}

TEST_CASE("encoder duplicating a frame duplicates its output") {
  ParamStore store;
  Rng rng(3);
  auto stack = EncoderStack::create(store, "encoder", 6, 8, 2, 2, rng);
  Tensor x = random_tensor(4, 6, rng);
  // duplicate frame 2 at the end
  Tensor xd(5, 6);
  for (std::size_t r = 0; r < 4; ++r)
    for (std::size_t c = 0; c < 6; ++c) xd.at(r, c) = x.at(r, c);
  for (std::size_t c = 0; c < 6; ++c) xd.at(4, c) = x.at(2, c);

  // oracle: rerun the forward pass on the longer input
  Tensor ed = stack.embed(Value::constant(xd)).val();
  double diff = 0.0;
  for (std::size_t c = 0; c < 8; ++c) diff = std::max(diff, std::abs(ed.at(4, c) - ed.at(2, c)));
  CHECK(diff < 1e-12);  // duplicated frames get identical embeddings

  // and the duplicated-input embeddings differ from the original-length run
  Tensor e = stack.embed(Value::constant(x)).val();
  CHECK(e.max_abs_diff(Tensor(4, 8)) > 0.0);
}

TEST_CASE("encoder rejects mismatched feature dim") {
  ParamStore store;
  Rng rng(4);
  auto stack = EncoderStack::create(store, "encoder", 6, 8, 1, 2, rng);
  CHECK_THROWS_AS(stack.embed(Value::constant(Tensor(3, 7))), ConfigError);
}

TEST_CASE("fixed head posteriors") {
  ParamStore store;
  Rng rng(5);
  auto stack = EncoderStack::create(store, "encoder", 6, 8, 1, 2, rng);
  (void)stack;

  // zero weights and bias: everything 0.5
  FixedClassifierHead zero_head{Value::parameter(Tensor(8, 3)), Value::parameter(Tensor(1, 3))};
  Tensor e = random_tensor(4, 8, rng);
  Tensor p = fixed_head_posteriors(Value::constant(e), zero_head).val();
  CHECK(p.rows() == 3);
  CHECK(p.cols() == 4);
  for (double v : p.data()) CHECK(v == doctest::Approx(0.5));

  // manual computation oracle, S = 1, two frames
  FixedClassifierHead head{Value::parameter(random_tensor(8, 1, rng)),
                           Value::parameter(random_tensor(1, 1, rng))};
  Tensor e2 = random_tensor(2, 8, rng);
  Tensor got = fixed_head_posteriors(Value::constant(e2), head).val();
  for (std::size_t t = 0; t < 2; ++t) {
    double z = head.b.val().item();
    for (std::size_t c = 0; c < 8; ++c) z += head.w.val().at(c, 0) * e2.at(t, c);
    CHECK(std::abs(got.at(0, t) - 1.0 / (1.0 + std::exp(-z))) < 1e-12);
  }

  // large positive bias saturates towards 1
  FixedClassifierHead biased{Value::parameter(Tensor(8, 1)),
                             Value::parameter(Tensor(1, 1, {30.0}))};
  Tensor sat = fixed_head_posteriors(Value::constant(e2), biased).val();
  for (double v : sat.data()) CHECK(v > 0.999999);

  FixedClassifierHead wrong{Value::parameter(Tensor(9, 1)), Value::parameter(Tensor(1, 1))};
  CHECK_THROWS_AS(fixed_head_posteriors(Value::constant(e2), wrong), DimensionError);
}
