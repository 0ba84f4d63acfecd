#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "eend/errors.hpp"

namespace eend {

// Times are held as integer ticks (100 ns) internally so interval arithmetic
// in the scorer and rasterizer is exact; seconds only appear at the edges.
constexpr std::int64_t kTicksPerSecond = 10000000;

inline std::int64_t to_ticks(double seconds) {
  return static_cast<std::int64_t>(seconds * static_cast<double>(kTicksPerSecond) +
                                   (seconds >= 0 ? 0.5 : -0.5));
}
inline double to_seconds(std::int64_t ticks) {
  return static_cast<double>(ticks) / static_cast<double>(kTicksPerSecond);
}

struct Segment {
  std::string speaker;
  double onset = 0.0;     // seconds
  double duration = 0.0;  // seconds, > 0
};

// RTTM-level view of one recording's reference or hypothesis.
struct Annotation {
  std::string recording_id;
  std::vector<Segment> segments;

  std::vector<std::string> speakers() const;  // sorted unique ids
  double total_extent() const;                // max segment end, seconds
};

// S x T binary speech activities at a fixed frame period. Row order follows
// `speakers` when present; otherwise rows are anonymous.
struct ActivityMatrix {
  std::size_t num_speakers = 0;
  std::size_t num_frames = 0;
  double frame_period = 0.1;  // seconds
  std::vector<std::uint8_t> active;  // row-major S x T
  std::vector<std::string> speakers;

  ActivityMatrix() = default;
  ActivityMatrix(std::size_t s, std::size_t t, double fp)
      : num_speakers(s), num_frames(t), frame_period(fp), active(s * t, 0) {}

  std::uint8_t& at(std::size_t s, std::size_t t) { return active[s * num_frames + t]; }
  std::uint8_t at(std::size_t s, std::size_t t) const { return active[s * num_frames + t]; }
  std::size_t active_count(std::size_t t) const {
    std::size_t n = 0;
    for (std::size_t s = 0; s < num_speakers; ++s) n += at(s, t);
    return n;
  }
  bool operator==(const ActivityMatrix& o) const {
    return num_speakers == o.num_speakers && num_frames == o.num_frames &&
           frame_period == o.frame_period && active == o.active;
  }
};

// Parses `SPEAKER <file> <chan> <tbeg> <tdur> <NA> <NA> <spk> <NA> <NA>`
// lines grouped by recording in file order. Non-SPEAKER lines and `;;`
// comments are ignored; malformed lines raise InputError with line numbers.
std::vector<Annotation> parse_rttm(const std::string& text);
std::vector<Annotation> parse_rttm_file(const std::string& path);

// Canonical form: 3 decimal places, segments sorted by onset per recording.
std::string emit_rttm(const std::vector<Annotation>& annotations);
void emit_rttm_file(const std::vector<Annotation>& annotations, const std::string& path);

// A frame is active for a speaker iff the frame center lies inside
// [onset, onset + duration). Rows ordered by sorted speaker id.
ActivityMatrix rasterize(const Annotation& a, double frame_period, std::size_t num_frames);

// Merges runs of active frames into maximal segments. Rows without ids are
// named spk0, spk1, ...
Annotation segmentize(const ActivityMatrix& y, const std::string& recording_id);

// Frame-label files: the binary S x T 0/1 matrix with speaker ids used for
// training targets and SAD label input.
void write_labels(const ActivityMatrix& y, const std::string& path);
ActivityMatrix read_labels(const std::string& path);

}  // namespace eend
