#include "eend/scoring.hpp"

#include <algorithm>
#include <functional>
#include <limits>
#include <map>
#include <set>

#include "eend/assignment.hpp"
#include "eend/tensor.hpp"

namespace eend {

namespace {

using Interval = std::pair<std::int64_t, std::int64_t>;  // [lo, hi) ticks

// Per-speaker merged interval lists, ticks.
std::map<std::string, std::vector<Interval>> speaker_intervals(const Annotation& a) {
  std::map<std::string, std::vector<Interval>> by_speaker;
  for (const auto& seg : a.segments) {
    std::int64_t lo = to_ticks(seg.onset);
    std::int64_t hi = lo + to_ticks(seg.duration);
    if (hi > lo) by_speaker[seg.speaker].push_back({lo, hi});
  }
  for (auto& [id, ivs] : by_speaker) {
    std::sort(ivs.begin(), ivs.end());
    std::vector<Interval> merged;
    for (const auto& iv : ivs) {
      if (!merged.empty() && iv.first <= merged.back().second)
        merged.back().second = std::max(merged.back().second, iv.second);
      else
        merged.push_back(iv);
    }
    ivs = std::move(merged);
  }
  return by_speaker;
}

std::vector<Interval> merge_intervals(std::vector<Interval> ivs) {
  std::sort(ivs.begin(), ivs.end());
  std::vector<Interval> merged;
  for (const auto& iv : ivs) {
    if (iv.second <= iv.first) continue;
    if (!merged.empty() && iv.first <= merged.back().second)
      merged.back().second = std::max(merged.back().second, iv.second);
    else
      merged.push_back(iv);
  }
  return merged;
}

bool contains(const std::vector<Interval>& merged, std::int64_t lo, std::int64_t hi) {
  // merged is sorted and disjoint; [lo,hi) never straddles boundaries because
  // the caller's elementary intervals are split at every edge
  auto it = std::upper_bound(merged.begin(), merged.end(),
                             Interval{lo, std::numeric_limits<std::int64_t>::max()});
  if (it == merged.begin()) return false;
  --it;
  return it->first <= lo && hi <= it->second;
}

struct Timeline {
  std::vector<std::string> speakers;
  std::vector<std::vector<Interval>> intervals;  // parallel to speakers
};

Timeline build_timeline(const Annotation& a) {
  Timeline tl;
  auto by_speaker = speaker_intervals(a);
  for (auto& [id, ivs] : by_speaker) {
    tl.speakers.push_back(id);
    tl.intervals.push_back(std::move(ivs));
  }
  return tl;
}

std::int64_t overlap_len(const std::vector<Interval>& a, const std::vector<Interval>& b) {
  std::int64_t total = 0;
  std::size_t i = 0, j = 0;
  while (i < a.size() && j < b.size()) {
    std::int64_t lo = std::max(a[i].first, b[j].first);
    std::int64_t hi = std::min(a[i].second, b[j].second);
    if (hi > lo) total += hi - lo;
    if (a[i].second < b[j].second)
      ++i;
    else
      ++j;
  }
  return total;
}

std::int64_t total_len(const std::vector<Interval>& a) {
  std::int64_t total = 0;
  for (const auto& iv : a) total += iv.second - iv.first;
  return total;
}

// Intersection of two sorted disjoint interval lists.
std::vector<Interval> restrict_to(const std::vector<Interval>& ivs,
                                  const std::vector<Interval>& scored) {
  std::vector<Interval> out;
  std::size_t i = 0, j = 0;
  while (i < ivs.size() && j < scored.size()) {
    std::int64_t lo = std::max(ivs[i].first, scored[j].first);
    std::int64_t hi = std::min(ivs[i].second, scored[j].second);
    if (hi > lo) out.push_back({lo, hi});
    if (ivs[i].second < scored[j].second)
      ++i;
    else
      ++j;
  }
  return out;
}

}  // namespace

DerBreakdown der(const Annotation& ref, const Annotation& hyp, double collar) {
  if (collar < 0.0) throw InputError("der: negative collar");
  Timeline ref_tl = build_timeline(ref);
  Timeline hyp_tl = build_timeline(hyp);

  // Collar union around reference segment boundaries.
  std::vector<Interval> collar_ivs;
  const std::int64_t collar_ticks = to_ticks(collar);
  if (collar_ticks > 0) {
    for (const auto& seg : ref.segments) {
      std::int64_t lo = to_ticks(seg.onset);
      std::int64_t hi = lo + to_ticks(seg.duration);
      collar_ivs.push_back({std::max<std::int64_t>(0, lo - collar_ticks), lo + collar_ticks});
      collar_ivs.push_back({std::max<std::int64_t>(0, hi - collar_ticks), hi + collar_ticks});
    }
  }
  collar_ivs = merge_intervals(std::move(collar_ivs));

  // Scored region = [0, extent) minus collars.
  std::int64_t extent = 0;
  for (const auto& tl : {std::cref(ref_tl), std::cref(hyp_tl)})
    for (const auto& ivs : tl.get().intervals)
      for (const auto& iv : ivs) extent = std::max(extent, iv.second);
  std::vector<Interval> scored;
  std::int64_t cursor = 0;
  for (const auto& iv : collar_ivs) {
    if (iv.first > cursor) scored.push_back({cursor, iv.first});
    cursor = std::max(cursor, iv.second);
  }
  if (extent > cursor) scored.push_back({cursor, extent});

  // Optimal mapping maximizing scored ref/hyp co-speech, i.e. minimizing
  // confusion, via assignment on the overlap matrix.
  std::vector<std::vector<Interval>> ref_scored(ref_tl.speakers.size());
  std::vector<std::vector<Interval>> hyp_scored(hyp_tl.speakers.size());
  for (std::size_t i = 0; i < ref_tl.intervals.size(); ++i)
    ref_scored[i] = restrict_to(ref_tl.intervals[i], scored);
  for (std::size_t j = 0; j < hyp_tl.intervals.size(); ++j)
    hyp_scored[j] = restrict_to(hyp_tl.intervals[j], scored);

  std::vector<std::size_t> ref_to_hyp(ref_tl.speakers.size(), kNoMatch);
  if (!ref_tl.speakers.empty() && !hyp_tl.speakers.empty()) {
    Tensor overlap(ref_tl.speakers.size(), hyp_tl.speakers.size());
    for (std::size_t i = 0; i < ref_scored.size(); ++i)
      for (std::size_t j = 0; j < hyp_scored.size(); ++j)
        overlap.at(i, j) = static_cast<double>(overlap_len(ref_scored[i], hyp_scored[j]));
    ref_to_hyp = solve_assignment_max(overlap);
  }

  // Elementary sweep over all edges within the scored region.
  std::vector<std::int64_t> edges;
  for (const auto& iv : scored) {
    edges.push_back(iv.first);
    edges.push_back(iv.second);
  }
  auto add_edges = [&](const std::vector<std::vector<Interval>>& lists) {
    for (const auto& ivs : lists)
      for (const auto& iv : ivs) {
        edges.push_back(iv.first);
        edges.push_back(iv.second);
      }
  };
  add_edges(ref_scored);
  add_edges(hyp_scored);
  std::sort(edges.begin(), edges.end());
  edges.erase(std::unique(edges.begin(), edges.end()), edges.end());

  std::int64_t t_speech = 0, t_miss = 0, t_fa = 0, t_conf = 0;
  std::map<std::string, std::size_t> hyp_row;
  for (std::size_t j = 0; j < hyp_tl.speakers.size(); ++j) hyp_row[hyp_tl.speakers[j]] = j;

  for (std::size_t e = 0; e + 1 < edges.size(); ++e) {
    std::int64_t lo = edges[e], hi = edges[e + 1];
    if (hi <= lo || !contains(scored, lo, hi)) continue;
    std::int64_t dur = hi - lo;
    std::size_t n_ref = 0, n_hyp = 0, n_correct = 0;
    std::vector<char> hyp_active(hyp_tl.speakers.size(), 0);
    for (std::size_t j = 0; j < hyp_scored.size(); ++j)
      if (contains(hyp_scored[j], lo, hi)) {
        hyp_active[j] = 1;
        ++n_hyp;
      }
    for (std::size_t i = 0; i < ref_scored.size(); ++i) {
      if (!contains(ref_scored[i], lo, hi)) continue;
      ++n_ref;
      std::size_t j = ref_to_hyp[i];
      if (j != kNoMatch && hyp_active[j]) ++n_correct;
    }
    t_speech += dur * static_cast<std::int64_t>(n_ref);
    if (n_ref > n_hyp) t_miss += dur * static_cast<std::int64_t>(n_ref - n_hyp);
    if (n_hyp > n_ref) t_fa += dur * static_cast<std::int64_t>(n_hyp - n_ref);
    t_conf += dur * static_cast<std::int64_t>(std::min(n_ref, n_hyp) - n_correct);
  }

  if (t_speech == 0) throw InputError("der: no scored reference speech (DER undefined)");
  DerBreakdown out;
  out.speech = to_seconds(t_speech);
  out.missed = to_seconds(t_miss);
  out.false_alarm = to_seconds(t_fa);
  out.confusion = to_seconds(t_conf);
  out.der = static_cast<double>(t_miss + t_fa + t_conf) / static_cast<double>(t_speech);
  return out;
}

JerBreakdown jer(const Annotation& ref, const Annotation& hyp) {
  Timeline ref_tl = build_timeline(ref);
  Timeline hyp_tl = build_timeline(hyp);
  if (ref_tl.speakers.empty()) throw InputError("jer: no reference speakers");

  const std::size_t n = ref_tl.speakers.size();
  const std::size_t m = hyp_tl.speakers.size();

  // Pair cost (FA + MI) / union is always in [0, 1]; padding the rectangle
  // with 1.0 makes "leave unpaired" available to the assignment.
  Tensor cost(n, m + n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < m + n; ++j) cost.at(i, j) = 1.0;
  for (std::size_t i = 0; i < n; ++i) {
    std::int64_t ref_len = total_len(ref_tl.intervals[i]);
    for (std::size_t j = 0; j < m; ++j) {
      std::int64_t inter = overlap_len(ref_tl.intervals[i], hyp_tl.intervals[j]);
      std::int64_t hyp_len = total_len(hyp_tl.intervals[j]);
      std::int64_t uni = ref_len + hyp_len - inter;
      if (uni > 0)
        cost.at(i, j) = static_cast<double>((ref_len - inter) + (hyp_len - inter)) /
                        static_cast<double>(uni);
    }
  }
  auto assign = solve_assignment_min(cost);

  JerBreakdown out;
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    JerSpeaker js;
    js.ref_speaker = ref_tl.speakers[i];
    std::size_t j = assign[i];
    if (j < m) {
      std::int64_t inter = overlap_len(ref_tl.intervals[i], hyp_tl.intervals[j]);
      std::int64_t ref_len = total_len(ref_tl.intervals[i]);
      std::int64_t hyp_len = total_len(hyp_tl.intervals[j]);
      std::int64_t uni = ref_len + hyp_len - inter;
      js.missed = to_seconds(ref_len - inter);
      js.false_alarm = to_seconds(hyp_len - inter);
      js.union_time = to_seconds(uni);
      js.score = uni > 0 ? static_cast<double>((ref_len - inter) + (hyp_len - inter)) /
                               static_cast<double>(uni)
                         : 0.0;
    } else {
      std::int64_t ref_len = total_len(ref_tl.intervals[i]);
      js.missed = to_seconds(ref_len);
      js.union_time = to_seconds(ref_len);
      js.score = 1.0;
    }
    total += js.score;
    out.per_speaker.push_back(std::move(js));
  }
  out.jer = total / static_cast<double>(n);
  return out;
}

CountingConfusion counting_confusion(const std::vector<std::size_t>& ref_counts,
                                     const std::vector<std::size_t>& hyp_counts) {
  if (ref_counts.size() != hyp_counts.size())
    throw InputError("counting_confusion: list length mismatch");
  CountingConfusion out;
  for (std::size_t i = 0; i < ref_counts.size(); ++i)
    out.max_count = std::max({out.max_count, ref_counts[i], hyp_counts[i]});
  out.matrix.assign(out.max_count + 1, std::vector<std::size_t>(out.max_count + 1, 0));
  std::size_t correct = 0;
  for (std::size_t i = 0; i < ref_counts.size(); ++i) {
    out.matrix[hyp_counts[i]][ref_counts[i]] += 1;
    if (hyp_counts[i] == ref_counts[i]) ++correct;
  }
  out.total = ref_counts.size();
  out.accuracy = out.total ? static_cast<double>(correct) / static_cast<double>(out.total) : 0.0;
  return out;
}

CountingConfusion counting_confusion(const std::vector<Annotation>& refs,
                                     const std::vector<Annotation>& hyps) {
  if (refs.size() != hyps.size()) throw InputError("counting_confusion: list length mismatch");
  std::vector<std::size_t> rc, hc;
  for (const auto& a : refs) rc.push_back(a.speakers().size());
  for (const auto& a : hyps) hc.push_back(a.speakers().size());
  return counting_confusion(rc, hc);
}

DerBreakdown frame_der(const ActivityMatrix& ref, const ActivityMatrix& hyp) {
  if (ref.num_frames != hyp.num_frames) throw InputError("frame_der: frame count mismatch");
  const std::size_t t_len = ref.num_frames;

  std::vector<std::size_t> map(ref.num_speakers, kNoMatch);
  if (ref.num_speakers > 0 && hyp.num_speakers > 0) {
    Tensor overlap(ref.num_speakers, hyp.num_speakers);
    for (std::size_t i = 0; i < ref.num_speakers; ++i)
      for (std::size_t j = 0; j < hyp.num_speakers; ++j) {
        std::size_t n = 0;
        for (std::size_t t = 0; t < t_len; ++t) n += ref.at(i, t) & hyp.at(j, t);
        overlap.at(i, j) = static_cast<double>(n);
      }
    map = solve_assignment_max(overlap);
  }

  std::int64_t speech = 0, miss = 0, fa = 0, conf = 0;
  for (std::size_t t = 0; t < t_len; ++t) {
    std::size_t n_ref = ref.active_count(t);
    std::size_t n_hyp = hyp.active_count(t);
    std::size_t n_correct = 0;
    for (std::size_t i = 0; i < ref.num_speakers; ++i)
      if (ref.at(i, t) && map[i] != kNoMatch && hyp.at(map[i], t)) ++n_correct;
    speech += static_cast<std::int64_t>(n_ref);
    if (n_ref > n_hyp) miss += static_cast<std::int64_t>(n_ref - n_hyp);
    if (n_hyp > n_ref) fa += static_cast<std::int64_t>(n_hyp - n_ref);
    conf += static_cast<std::int64_t>(std::min(n_ref, n_hyp) - n_correct);
  }
  if (speech == 0) throw InputError("frame_der: no reference speech (DER undefined)");

  const std::int64_t fp = to_ticks(ref.frame_period);
  DerBreakdown out;
  out.speech = to_seconds(speech * fp);
  out.missed = to_seconds(miss * fp);
  out.false_alarm = to_seconds(fa * fp);
  out.confusion = to_seconds(conf * fp);
  out.der = static_cast<double>(miss + fa + conf) / static_cast<double>(speech);
  return out;
}

}  // namespace eend
