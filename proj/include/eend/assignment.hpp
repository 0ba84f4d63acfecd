#pragma once

#include <vector>

#include "eend/tensor.hpp"

namespace eend {

// Minimum-cost one-to-one assignment (Hungarian / Jonker-Volgenant with
// potentials, O(n^3)). `cost` must have rows() <= cols(); returns for each
// row the assigned column. Total cost is the exact minimum.
std::vector<std::size_t> solve_assignment_min(const Tensor& cost);

// Convenience: maximize total `score` over one-to-one row->column matches.
// Rows may exceed columns; unmatched rows get kNoMatch.
inline constexpr std::size_t kNoMatch = static_cast<std::size_t>(-1);
std::vector<std::size_t> solve_assignment_max(const Tensor& score);

}  // namespace eend
