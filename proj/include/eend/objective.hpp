#pragma once

#include <vector>

#include "eend/tensor.hpp"

namespace eend {

enum class PitMethod {
  kAuto,        // exhaustive for S <= 6, Hungarian above
  kExhaustive,  // lexicographically first minimum
  kHungarian,   // assignment on the frame-summed BCE cost matrix
};

struct PermutationAssignment {
  std::vector<std::size_t> perm;  // labels row s of the loss sees ref row perm[s]
  double loss = 0.0;
};

struct PitResult {
  Value loss;  // differentiable scalar, gradient flows through the chosen permutation
  PermutationAssignment assignment;
};

// Permutation-free diarization loss: (1/(TS)) min over label permutations of
// the summed BCE between permuted reference rows and the posterior rows.
// `labels` is S x T in {0,1}; `posteriors` S x T in (0,1). S = 0 yields zero
// loss and an empty assignment. Equal-cost permutations resolve to the
// lexicographically smallest.
PitResult pit_loss(const Tensor& labels, const Value& posteriors,
                   PitMethod method = PitMethod::kAuto);

// Mean BCE of the S+1 existence probabilities against (1, ..., 1, 0).
Value existence_loss(const Value& existence);

struct LossBreakdown {
  double diar = 0.0;
  double exist = 0.0;
  double alpha = 1.0;
  double total = 0.0;  // diar + alpha * exist
};

// Weighted multi-task objective; also returns the differentiable total.
Value total_loss(const Value& diar, const Value& exist, double alpha, LossBreakdown* breakdown);

}  // namespace eend
