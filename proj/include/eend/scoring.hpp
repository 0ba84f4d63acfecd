#pragma once

#include <cstdint>
#include <vector>

#include "eend/rttm.hpp"

namespace eend {

struct DerBreakdown {
  double speech = 0.0;     // scored reference speech, seconds
  double missed = 0.0;     // T_MI
  double false_alarm = 0.0;  // T_FA
  double confusion = 0.0;  // T_CF
  double der = 0.0;        // (MI + FA + CF) / speech
};

// DER with an optimal global speaker mapping (assignment minimizing confusion
// time). Regions within +-collar of each reference segment boundary are
// excluded from scoring; overlap regions are included. Throws InputError when
// the scored reference speech is empty.
DerBreakdown der(const Annotation& ref, const Annotation& hyp, double collar = 0.25);

struct JerSpeaker {
  std::string ref_speaker;
  double false_alarm = 0.0;
  double missed = 0.0;
  double union_time = 0.0;
  double score = 0.0;  // (FA + MI) / union, 1.0 when unpaired
};

struct JerBreakdown {
  std::vector<JerSpeaker> per_speaker;
  double jer = 0.0;  // mean over reference speakers
};

// Jaccard error rate: optimal assignment between reference and system
// speakers minimizing total (FA+MI)/union; unpaired reference speakers score
// 1.0. No collar.
JerBreakdown jer(const Annotation& ref, const Annotation& hyp);

struct CountingConfusion {
  std::vector<std::vector<std::size_t>> matrix;  // [predicted][reference]
  std::size_t max_count = 0;
  std::size_t total = 0;
  double accuracy = 0.0;  // trace / total
};

CountingConfusion counting_confusion(const std::vector<std::size_t>& ref_counts,
                                     const std::vector<std::size_t>& hyp_counts);
CountingConfusion counting_confusion(const std::vector<Annotation>& refs,
                                     const std::vector<Annotation>& hyps);

// Frame-resolution DER between two activity matrices of equal frame count,
// zero collar, optimal mapping. Durations are frame counts converted through
// the shared tick arithmetic.
DerBreakdown frame_der(const ActivityMatrix& ref, const ActivityMatrix& hyp);

}  // namespace eend
