#pragma once

#include <string>
#include <vector>

#include "eend/rttm.hpp"

namespace eend {

// One diarization hypothesis entering the vote. Weights are normalized; the
// default leaves every hypothesis equal (no hypothesis-wise ranking).
struct Hypothesis {
  ActivityMatrix activity;
  double weight = 1.0;
};

// Per-hypothesis map from local speaker row to global speaker id. Greedy
// pairwise alignment: the first hypothesis anchors the global set; each later
// hypothesis is matched against the accumulated global activities by
// maximizing total overlapped speaking time (optimal assignment); speakers
// with no overlapping match get fresh global ids.
struct LabelMapping {
  std::vector<std::vector<std::size_t>> rows;  // [hypothesis][local row] -> global id
  std::vector<std::string> global_names;
};

LabelMapping map_labels(const std::vector<Hypothesis>& hypotheses);

// Overlap-aware majority voting at frame resolution: per frame the rounded
// (half-to-even) weighted mean of the hypotheses' active-speaker counts
// decides how many speakers to emit; the top-voted global speakers win, ties
// broken towards lower global ids.
ActivityMatrix vote(const std::vector<Hypothesis>& hypotheses, const LabelMapping& mapping);

// map_labels + vote.
ActivityMatrix combine_hypotheses(const std::vector<Hypothesis>& hypotheses);

}  // namespace eend
