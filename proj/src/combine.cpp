#include "eend/combine.hpp"

#include <algorithm>
#include <cmath>

#include "eend/assignment.hpp"
#include "eend/tensor.hpp"

namespace eend {

namespace {

std::size_t round_half_even(double x) {
  double fl = std::floor(x);
  double frac = x - fl;
  if (frac > 0.5) return static_cast<std::size_t>(fl) + 1;
  if (frac < 0.5) return static_cast<std::size_t>(fl);
  auto n = static_cast<std::size_t>(fl);
  return (n % 2 == 0) ? n : n + 1;
}

}  // namespace

LabelMapping map_labels(const std::vector<Hypothesis>& hypotheses) {
  if (hypotheses.empty()) throw InputError("map_labels: no hypotheses");
  const std::size_t t_len = hypotheses[0].activity.num_frames;
  for (const auto& h : hypotheses)
    if (h.activity.num_frames != t_len)
      throw InputError("map_labels: hypotheses disagree on frame count");

  LabelMapping mapping;
  mapping.rows.resize(hypotheses.size());

  // accumulated global activities (union of everything mapped so far)
  std::vector<std::vector<std::uint8_t>> global_activity;
  auto fresh_global = [&](const ActivityMatrix& act, std::size_t row, std::size_t hyp_index) {
    std::vector<std::uint8_t> a(t_len, 0);
    for (std::size_t t = 0; t < t_len; ++t) a[t] = act.at(row, t);
    global_activity.push_back(std::move(a));
    std::string base = row < act.speakers.size() ? act.speakers[row]
                                                 : "spk" + std::to_string(row);
    mapping.global_names.push_back(hyp_index == 0 ? base
                                                  : "h" + std::to_string(hyp_index) + "_" + base);
    return global_activity.size() - 1;
  };

  for (std::size_t k = 0; k < hypotheses.size(); ++k) {
    const ActivityMatrix& act = hypotheses[k].activity;
    mapping.rows[k].assign(act.num_speakers, kNoMatch);
    if (k == 0 || global_activity.empty() || act.num_speakers == 0) {
      for (std::size_t r = 0; r < act.num_speakers; ++r)
        mapping.rows[k][r] = fresh_global(act, r, k);
      continue;
    }
    // overlapped speaking time against every existing global speaker
    Tensor overlap(act.num_speakers, global_activity.size());
    for (std::size_t r = 0; r < act.num_speakers; ++r)
      for (std::size_t g = 0; g < global_activity.size(); ++g) {
        std::size_t n = 0;
        for (std::size_t t = 0; t < t_len; ++t) n += act.at(r, t) & global_activity[g][t];
        overlap.at(r, g) = static_cast<double>(n);
      }
    auto assign = solve_assignment_max(overlap);
    std::vector<char> taken(global_activity.size(), 0);
    std::vector<std::size_t> unmatched;
    for (std::size_t r = 0; r < act.num_speakers; ++r) {
      std::size_t g = assign[r];
      if (g == kNoMatch || overlap.at(r, g) == 0.0) {
        unmatched.push_back(r);
      } else {
        mapping.rows[k][r] = g;
        taken[g] = 1;
        for (std::size_t t = 0; t < t_len; ++t) global_activity[g][t] |= act.at(r, t);
      }
    }
    // Silent rows pair with unclaimed silent globals (in id order) so that
    // combining identical hypotheses stays an exact identity; anything left
    // gets a fresh global id.
    for (std::size_t r : unmatched) {
      bool row_silent = true;
      for (std::size_t t = 0; t < t_len && row_silent; ++t) row_silent = !act.at(r, t);
      std::size_t target = kNoMatch;
      if (row_silent) {
        for (std::size_t g = 0; g < taken.size() && target == kNoMatch; ++g) {
          if (taken[g]) continue;
          bool g_silent = true;
          for (std::size_t t = 0; t < t_len && g_silent; ++t) g_silent = !global_activity[g][t];
          if (g_silent) target = g;
        }
      }
      if (target == kNoMatch) {
        mapping.rows[k][r] = fresh_global(act, r, k);
        taken.push_back(1);
      } else {
        mapping.rows[k][r] = target;
        taken[target] = 1;
      }
    }
  }
  return mapping;
}

ActivityMatrix vote(const std::vector<Hypothesis>& hypotheses, const LabelMapping& mapping) {
  if (hypotheses.empty()) throw InputError("vote: no hypotheses");
  const std::size_t t_len = hypotheses[0].activity.num_frames;
  const std::size_t n_globals = mapping.global_names.size();

  double total_weight = 0.0;
  for (const auto& h : hypotheses) {
    if (h.weight < 0.0) throw InputError("vote: negative weight");
    total_weight += h.weight;
  }
  if (total_weight <= 0.0) throw InputError("vote: zero total weight");

  ActivityMatrix fused(n_globals, t_len, hypotheses[0].activity.frame_period);
  fused.speakers = mapping.global_names;

  std::vector<double> score(n_globals);
  for (std::size_t t = 0; t < t_len; ++t) {
    std::fill(score.begin(), score.end(), 0.0);
    double weighted_count = 0.0;
    for (std::size_t k = 0; k < hypotheses.size(); ++k) {
      const ActivityMatrix& act = hypotheses[k].activity;
      const double w = hypotheses[k].weight / total_weight;
      for (std::size_t r = 0; r < act.num_speakers; ++r) {
        if (!act.at(r, t)) continue;
        weighted_count += w;
        score[mapping.rows[k][r]] += w;
      }
    }
    std::size_t emit = std::min(round_half_even(weighted_count), n_globals);
    if (emit == 0) continue;
    // top `emit` by score, lower global id on ties
    std::vector<std::size_t> order(n_globals);
    for (std::size_t g = 0; g < n_globals; ++g) order[g] = g;
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return score[a] > score[b]; });
    for (std::size_t i = 0; i < emit; ++i) fused.at(order[i], t) = 1;
  }
  return fused;
}

ActivityMatrix combine_hypotheses(const std::vector<Hypothesis>& hypotheses) {
  return vote(hypotheses, map_labels(hypotheses));
}

}  // namespace eend
