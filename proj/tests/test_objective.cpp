#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "eend/assignment.hpp"
#include "eend/objective.hpp"
#include "eend/rng.hpp"
#include "gradcheck.hpp"

using namespace eend;

namespace {

Tensor random_labels(std::size_t s, std::size_t t, Rng& rng) {
  Tensor y(s, t);
  for (double& v : y.data()) v = rng.uniform() < 0.5 ? 0.0 : 1.0;
  return y;
}

Tensor random_posteriors(std::size_t s, std::size_t t, Rng& rng) {
  Tensor p(s, t);
  for (double& v : p.data()) v = rng.uniform(0.01, 0.99);
  return p;
}

// Independent oracle: direct minimum over every permutation, recomputing the
// BCE from scratch.
double exhaustive_pit_oracle(const Tensor& y, const Tensor& p) {
  const std::size_t s = y.rows(), t = y.cols();
  std::vector<std::size_t> perm(s);
  std::iota(perm.begin(), perm.end(), 0);
  double best = std::numeric_limits<double>::infinity();
  do {
    double acc = 0.0;
    for (std::size_t slot = 0; slot < s; ++slot)
      for (std::size_t k = 0; k < t; ++k) {
        double yy = y.at(perm[slot], k);
        double pp = std::clamp(p.at(slot, k), 1e-7, 1.0 - 1e-7);
        acc += -yy * std::log(pp) - (1.0 - yy) * std::log(1.0 - pp);
      }
    best = std::min(best, acc);
  } while (std::next_permutation(perm.begin(), perm.end()));
  return best / static_cast<double>(s * t);
}

// Brute-force minimum assignment cost by permutation enumeration.
double exhaustive_assignment_cost(const Tensor& cost) {
  std::vector<std::size_t> cols(cost.cols());
  std::iota(cols.begin(), cols.end(), 0);
  double best = std::numeric_limits<double>::infinity();
  do {
    double acc = 0.0;
    for (std::size_t i = 0; i < cost.rows(); ++i) acc += cost.at(i, cols[i]);
    best = std::min(best, acc);
  } while (std::next_permutation(cols.begin(), cols.end()));
  return best;
}

}  // namespace

TEST_CASE("hungarian matches exhaustive assignment on random instances") {
  Rng rng(101);
  for (int trial = 0; trial < 50; ++trial) {
    std::size_t n = 1 + rng.uniform_int(6);
    Tensor cost(n, n);
    for (double& v : cost.data()) v = rng.uniform(-5.0, 5.0);
    auto assign = solve_assignment_min(cost);
    double total = 0.0;
    std::vector<bool> used(n, false);
    for (std::size_t i = 0; i < n; ++i) {
      CHECK(!used[assign[i]]);
      used[assign[i]] = true;
      total += cost.at(i, assign[i]);
    }
    CHECK(total == doctest::Approx(exhaustive_assignment_cost(cost)).epsilon(1e-12));
  }
}

TEST_CASE("hungarian handles rectangular maximization") {
  Tensor score(2, 3, {1.0, 9.0, 2.0, 8.0, 1.0, 3.0});
  auto m = solve_assignment_max(score);
  CHECK(m[0] == 1);
  CHECK(m[1] == 0);
}

TEST_CASE("pit loss on a single speaker single frame") {
  Tensor y(1, 1, {1.0});
  Value p = Value::constant(Tensor(1, 1, {0.5}));
  auto r = pit_loss(y, p);
  CHECK(r.loss.val().item() == doctest::Approx(std::log(2.0)));
  REQUIRE(r.assignment.perm.size() == 1);
  CHECK(r.assignment.perm[0] == 0);
}

TEST_CASE("pit loss picks the row swap when posteriors are swapped") {
  Tensor y(2, 4, {1, 1, 0, 0, 0, 0, 1, 1});
  // posteriors approximate the swapped labels
  Tensor p(2, 4, {0.1, 0.1, 0.9, 0.9, 0.9, 0.9, 0.1, 0.1});
  auto r = pit_loss(y, Value::constant(p));
  CHECK(r.assignment.perm == std::vector<std::size_t>{1, 0});

  // identity permutation must cost strictly more
  double identity_cost = 0.0;
  for (std::size_t s = 0; s < 2; ++s)
    for (std::size_t t = 0; t < 4; ++t) {
      double pp = p.at(s, t);
      identity_cost += -y.at(s, t) * std::log(pp) - (1 - y.at(s, t)) * std::log(1 - pp);
    }
  identity_cost /= 8.0;
  CHECK(r.assignment.loss < identity_cost);
}

TEST_CASE("pit loss equals the exhaustive oracle on random instances") {
  Rng rng(202);
  for (int trial = 0; trial < 40; ++trial) {
    std::size_t s = 1 + rng.uniform_int(3);
    std::size_t t = 1 + rng.uniform_int(5);
    Tensor y = random_labels(s, t, rng);
    Tensor p = random_posteriors(s, t, rng);
    auto r = pit_loss(y, Value::constant(p));
    CHECK(std::abs(r.assignment.loss - exhaustive_pit_oracle(y, p)) < 1e-12);
  }
}

TEST_CASE("pit loss hungarian path agrees with exhaustive path") {
  Rng rng(303);
  for (int trial = 0; trial < 30; ++trial) {
    std::size_t s = 2 + rng.uniform_int(5);  // up to 6
    std::size_t t = 1 + rng.uniform_int(8);
    Tensor y = random_labels(s, t, rng);
    Tensor p = random_posteriors(s, t, rng);
    auto a = pit_loss(y, Value::constant(p), PitMethod::kExhaustive);
    auto b = pit_loss(y, Value::constant(p), PitMethod::kHungarian);
    CHECK(std::abs(a.assignment.loss - b.assignment.loss) < 1e-12);
  }
}

TEST_CASE("pit loss invariances") {
  Rng rng(404);
  std::size_t s = 3, t = 6;
  Tensor y = random_labels(s, t, rng);
  Tensor p = random_posteriors(s, t, rng);
  double base = pit_loss(y, Value::constant(p)).assignment.loss;

  // invariant under any permutation of label rows
  auto perm = rng.permutation(s);
  Tensor y_perm(s, t), p_perm(s, t);
  for (std::size_t i = 0; i < s; ++i)
    for (std::size_t k = 0; k < t; ++k) {
      y_perm.at(i, k) = y.at(perm[i], k);
      p_perm.at(i, k) = p.at(perm[i], k);
    }
  CHECK(pit_loss(y_perm, Value::constant(p)).assignment.loss == doctest::Approx(base).epsilon(1e-12));

  // invariant under joint identical permutation of both
  CHECK(pit_loss(y_perm, Value::constant(p_perm)).assignment.loss ==
        doctest::Approx(base).epsilon(1e-12));

  // minimality against every fixed permutation
  std::vector<std::size_t> phi(s);
  std::iota(phi.begin(), phi.end(), 0);
  do {
    double fixed = 0.0;
    for (std::size_t slot = 0; slot < s; ++slot)
      for (std::size_t k = 0; k < t; ++k) {
        double yy = y.at(phi[slot], k);
        double pp = p.at(slot, k);
        fixed += -yy * std::log(pp) - (1.0 - yy) * std::log(1.0 - pp);
      }
    CHECK(base <= fixed / static_cast<double>(s * t) + 1e-12);
  } while (std::next_permutation(phi.begin(), phi.end()));
}

TEST_CASE("pit loss S=0 and shape errors") {
  auto r = pit_loss(Tensor(0, 0), Value());
  CHECK(r.loss.val().item() == 0.0);
  CHECK(r.assignment.perm.empty());
  CHECK_THROWS_AS(pit_loss(Tensor(2, 3), Value::constant(Tensor(3, 2))), DimensionError);
}

TEST_CASE("pit loss gradient matches finite differences at the chosen permutation") {
  Rng rng(505);
  std::size_t s = 3, t = 5;
  Tensor y = random_labels(s, t, rng);
  Value logits = Value::parameter(Tensor(s, t));
  for (double& v : const_cast<Tensor&>(logits.val()).data()) v = rng.uniform(-2.0, 2.0);
  auto forward = [&] { return pit_loss(y, sigmoid(logits)).loss; };
  auto res = gradcheck::check(forward, {logits});
  CHECK(res.max_rel_error < 1e-4);
}

TEST_CASE("existence loss forced values and oracle") {
  Tensor q1(2, 1, {1.0 - 1e-9, 1e-9});
  CHECK(existence_loss(Value::constant(q1)).val().item() == doctest::Approx(0.0).epsilon(1e-6));

  Tensor q2(2, 1, {0.5, 0.5});
  CHECK(existence_loss(Value::constant(q2)).val().item() == doctest::Approx(std::log(2.0)));

  // direct-summation oracle for q = [0.9, 0.8, 0.1], S = 2
  Tensor q3(3, 1, {0.9, 0.8, 0.1});
  double expected = (-std::log(0.9) - std::log(0.8) - std::log(1.0 - 0.1)) / 3.0;
  CHECK(std::abs(existence_loss(Value::constant(q3)).val().item() - expected) < 1e-12);

  CHECK_THROWS_AS(existence_loss(Value::constant(Tensor(0, 1))), InputError);
}

TEST_CASE("total loss arithmetic") {
  Value d = Value::constant(Tensor::scalar(0.5));
  Value e = Value::constant(Tensor::scalar(0.3));
  LossBreakdown b;
  CHECK(total_loss(d, e, 1.0, &b).val().item() == doctest::Approx(0.8));
  CHECK(b.total == doctest::Approx(b.diar + b.alpha * b.exist));
  CHECK(total_loss(d, e, 0.0, nullptr).val().item() == doctest::Approx(0.5));
  CHECK(total_loss(d, e, 2.0, nullptr).val().item() == doctest::Approx(1.1));
  CHECK_THROWS_AS(total_loss(d, e, -1.0, nullptr), ConfigError);
}
