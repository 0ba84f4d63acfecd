#include "eend/rttm.hpp"

#include <algorithm>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

namespace eend {

std::vector<std::string> Annotation::speakers() const {
  std::set<std::string> ids;
  for (const auto& seg : segments) ids.insert(seg.speaker);
  return {ids.begin(), ids.end()};
}

double Annotation::total_extent() const {
  double end = 0.0;
  for (const auto& seg : segments) end = std::max(end, seg.onset + seg.duration);
  return end;
}

std::vector<Annotation> parse_rttm(const std::string& text) {
  std::vector<Annotation> result;
  std::map<std::string, std::size_t> index;  // recording id -> result slot
  std::istringstream stream(text);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(stream, line)) {
    ++line_no;
    if (line.rfind(";;", 0) == 0) continue;
    std::istringstream fields(line);
    std::string type;
    if (!(fields >> type)) continue;  // blank line
    if (type != "SPEAKER") continue;

    std::string rec, chan, spk, tbeg_s, tdur_s, skip;
    if (!(fields >> rec >> chan >> tbeg_s >> tdur_s >> skip >> skip >> spk)) {
      throw InputError("rttm line " + std::to_string(line_no) + ": malformed SPEAKER record");
    }
    double onset, duration;
    try {
      onset = std::stod(tbeg_s);
      duration = std::stod(tdur_s);
    } catch (const std::exception&) {
      throw InputError("rttm line " + std::to_string(line_no) + ": bad time field");
    }
    if (duration <= 0.0)
      throw InputError("rttm line " + std::to_string(line_no) + ": non-positive duration");
    if (onset < 0.0)
      throw InputError("rttm line " + std::to_string(line_no) + ": negative onset");
    if (spk.empty())
      throw InputError("rttm line " + std::to_string(line_no) + ": empty speaker id");

    auto it = index.find(rec);
    if (it == index.end()) {
      index.emplace(rec, result.size());
      result.push_back(Annotation{rec, {}});
      it = index.find(rec);
    }
    result[it->second].segments.push_back(Segment{spk, onset, duration});
  }
  return result;
}

std::vector<Annotation> parse_rttm_file(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot open rttm file: " + path);
  std::ostringstream buf;
  buf << is.rdbuf();
  return parse_rttm(buf.str());
}

std::string emit_rttm(const std::vector<Annotation>& annotations) {
  std::string out;
  char line[256];
  for (const auto& ann : annotations) {
    std::vector<Segment> sorted = ann.segments;
    std::stable_sort(sorted.begin(), sorted.end(), [](const Segment& a, const Segment& b) {
      if (a.onset != b.onset) return a.onset < b.onset;
      if (a.speaker != b.speaker) return a.speaker < b.speaker;
      return a.duration < b.duration;
    });
    for (const auto& seg : sorted) {
      std::snprintf(line, sizeof line, "SPEAKER %s 1 %.3f %.3f <NA> <NA> %s <NA> <NA>\n",
                    ann.recording_id.c_str(), seg.onset, seg.duration, seg.speaker.c_str());
      out += line;
    }
  }
  return out;
}

void emit_rttm_file(const std::vector<Annotation>& annotations, const std::string& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot open rttm file for writing: " + path);
  os << emit_rttm(annotations);
}

ActivityMatrix rasterize(const Annotation& a, double frame_period, std::size_t num_frames) {
  if (frame_period <= 0.0) throw InputError("rasterize: frame period must be positive");
  auto ids = a.speakers();
  ActivityMatrix y(ids.size(), num_frames, frame_period);
  y.speakers = ids;
  std::map<std::string, std::size_t> row;
  for (std::size_t i = 0; i < ids.size(); ++i) row[ids[i]] = i;

  const std::int64_t fp = to_ticks(frame_period);
  for (const auto& seg : a.segments) {
    // frame center (2t+1) * fp / 2 lies in [onset, onset+dur) iff
    // (2t+1) * fp is in [2*onset, 2*(onset+dur)) -- integer comparisons only
    const std::int64_t lo2 = 2 * to_ticks(seg.onset);
    const std::int64_t hi2 = 2 * (to_ticks(seg.onset) + to_ticks(seg.duration));
    std::size_t s = row[seg.speaker];
    for (std::size_t t = 0; t < num_frames; ++t) {
      std::int64_t center2 = (2 * static_cast<std::int64_t>(t) + 1) * fp;
      if (center2 >= lo2 && center2 < hi2) y.at(s, t) = 1;
    }
  }
  return y;
}

Annotation segmentize(const ActivityMatrix& y, const std::string& recording_id) {
  Annotation ann;
  ann.recording_id = recording_id;
  for (std::size_t s = 0; s < y.num_speakers; ++s) {
    std::string id = s < y.speakers.size() ? y.speakers[s] : "spk" + std::to_string(s);
    std::size_t t = 0;
    while (t < y.num_frames) {
      if (!y.at(s, t)) {
        ++t;
        continue;
      }
      std::size_t start = t;
      while (t < y.num_frames && y.at(s, t)) ++t;
      ann.segments.push_back(Segment{id, static_cast<double>(start) * y.frame_period,
                                     static_cast<double>(t - start) * y.frame_period});
    }
  }
  std::stable_sort(ann.segments.begin(), ann.segments.end(),
                   [](const Segment& a, const Segment& b) { return a.onset < b.onset; });
  return ann;
}

namespace {
constexpr char kLabelMagic[8] = {'E', 'E', 'N', 'D', 'L', 'A', 'B', 'L'};
constexpr std::uint32_t kLabelVersion = 1;
}  // namespace

void write_labels(const ActivityMatrix& y, const std::string& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot open label file for writing: " + path);
  os.write(kLabelMagic, 8);
  std::uint32_t v = kLabelVersion, s = static_cast<std::uint32_t>(y.num_speakers),
                t = static_cast<std::uint32_t>(y.num_frames);
  os.write(reinterpret_cast<const char*>(&v), 4);
  os.write(reinterpret_cast<const char*>(&s), 4);
  os.write(reinterpret_cast<const char*>(&t), 4);
  os.write(reinterpret_cast<const char*>(&y.frame_period), 8);
  for (std::size_t i = 0; i < y.num_speakers; ++i) {
    std::string id = i < y.speakers.size() ? y.speakers[i] : "spk" + std::to_string(i);
    std::uint16_t len = static_cast<std::uint16_t>(id.size());
    os.write(reinterpret_cast<const char*>(&len), 2);
    os.write(id.data(), len);
  }
  os.write(reinterpret_cast<const char*>(y.active.data()),
           static_cast<std::streamsize>(y.active.size()));
  if (!os) throw IoError("failed writing label file: " + path);
}

ActivityMatrix read_labels(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open label file: " + path);
  char magic[8];
  is.read(magic, 8);
  if (!is || std::memcmp(magic, kLabelMagic, 8) != 0)
    throw InputError("not a label file: " + path);
  std::uint32_t v = 0, s = 0, t = 0;
  is.read(reinterpret_cast<char*>(&v), 4);
  is.read(reinterpret_cast<char*>(&s), 4);
  is.read(reinterpret_cast<char*>(&t), 4);
  if (v != kLabelVersion) throw InputError("unsupported label file version: " + path);
  double fp = 0.0;
  is.read(reinterpret_cast<char*>(&fp), 8);
  ActivityMatrix y(s, t, fp);
  for (std::uint32_t i = 0; i < s; ++i) {
    std::uint16_t len = 0;
    is.read(reinterpret_cast<char*>(&len), 2);
    std::string id(len, '\0');
    is.read(id.data(), len);
    y.speakers.push_back(id);
  }
  is.read(reinterpret_cast<char*>(y.active.data()),
          static_cast<std::streamsize>(y.active.size()));
  if (!is) throw IoError("truncated label file: " + path);
  return y;
}

}  // namespace eend
