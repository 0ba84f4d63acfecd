#include "eend/objective.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "eend/assignment.hpp"

namespace eend {

namespace {

constexpr double kClampEps = 1e-7;

double bce_term(double y, double p) {
  double pc = std::clamp(p, kClampEps, 1.0 - kClampEps);
  return -y * std::log(pc) - (1.0 - y) * std::log(1.0 - pc);
}

// cost[i][j]: summed BCE of reference row i against posterior row j.
Tensor pairwise_costs(const Tensor& labels, const Tensor& posteriors) {
  const std::size_t s = labels.rows(), t = labels.cols();
  Tensor cost(s, s);
  for (std::size_t i = 0; i < s; ++i)
    for (std::size_t j = 0; j < s; ++j) {
      double acc = 0.0;
      for (std::size_t k = 0; k < t; ++k)
        acc += bce_term(labels.at(i, k), posteriors.at(j, k));
      cost.at(i, j) = acc;
    }
  return cost;
}

std::vector<std::size_t> best_perm_exhaustive(const Tensor& cost) {
  const std::size_t s = cost.rows();
  std::vector<std::size_t> perm(s), best(s);
  for (std::size_t i = 0; i < s; ++i) perm[i] = i;
  best = perm;
  double best_cost = std::numeric_limits<double>::infinity();
  do {
    double c = 0.0;
    for (std::size_t slot = 0; slot < s; ++slot) c += cost.at(perm[slot], slot);
    if (c < best_cost) {  // strict: first minimum in lexicographic order wins
      best_cost = c;
      best = perm;
    }
  } while (std::next_permutation(perm.begin(), perm.end()));
  return best;
}

std::vector<std::size_t> best_perm_hungarian(const Tensor& cost) {
  // assignment gives ref row i -> slot j; invert to slot -> ref row
  auto row_to_slot = solve_assignment_min(cost);
  std::vector<std::size_t> perm(cost.rows());
  for (std::size_t i = 0; i < row_to_slot.size(); ++i) perm[row_to_slot[i]] = i;
  return perm;
}

}  // namespace

PitResult pit_loss(const Tensor& labels, const Value& posteriors, PitMethod method) {
  const std::size_t s = labels.rows();
  const std::size_t t = labels.cols();
  if (s == 0) {
    PitResult r;
    r.loss = Value::constant(Tensor::scalar(0.0));
    return r;
  }
  if (!posteriors.defined() || posteriors.rows() != s || posteriors.cols() != t)
    throw DimensionError("pit_loss: labels and posteriors must both be SxT");

  Tensor cost = pairwise_costs(labels, posteriors.val());
  std::vector<std::size_t> perm;
  if (method == PitMethod::kExhaustive || (method == PitMethod::kAuto && s <= 6))
    perm = best_perm_exhaustive(cost);
  else
    perm = best_perm_hungarian(cost);

  Tensor permuted(s, t);
  for (std::size_t slot = 0; slot < s; ++slot)
    for (std::size_t k = 0; k < t; ++k) permuted.at(slot, k) = labels.at(perm[slot], k);

  PitResult r;
  r.loss = scale(bce_sum(permuted, posteriors), 1.0 / static_cast<double>(s * t));
  r.assignment.perm = std::move(perm);
  r.assignment.loss = r.loss.val().item();
  return r;
}

Value existence_loss(const Value& existence) {
  const std::size_t n = existence.val().size();
  if (n == 0) throw InputError("existence_loss: empty existence vector");
  Tensor labels(existence.rows(), existence.cols());
  for (std::size_t i = 0; i + 1 < n; ++i) labels.data()[i] = 1.0;
  return scale(bce_sum(labels, existence), 1.0 / static_cast<double>(n));
}

Value total_loss(const Value& diar, const Value& exist, double alpha,
                 LossBreakdown* breakdown) {
  if (alpha < 0.0) throw ConfigError("total_loss: alpha must be non-negative");
  Value total = add(diar, scale(exist, alpha));
  if (breakdown) {
    breakdown->diar = diar.val().item();
    breakdown->exist = exist.val().item();
    breakdown->alpha = alpha;
    breakdown->total = total.val().item();
  }
  return total;
}

}  // namespace eend
