#pragma once

// Sliding-window language segmentation of multi-language feature streams,
// per-second scoring against ground truth, and synthetic stream assembly.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <map>
#include <random>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "lidsvd/error.hpp"
#include "lidsvd/features.hpp"
#include "lidsvd/parallel.hpp"
#include "lidsvd/pipeline.hpp"
#include "lidsvd/svm.hpp"

namespace lidsvd::segmentation {

struct SegmentationConfig {
  double window_s = 5.0;
  double shift_s = 1.0;
  int scheme = 0;  // 0: whatever the system was trained with

  void validate() const {
    if (!(shift_s > 0.0)) throw Error(Errc::invalid_argument, "shift must be positive");
    if (!(window_s >= shift_s)) throw Error(Errc::invalid_argument, "window must be at least the shift");
    if (scheme != 0 && scheme != 1 && scheme != 2) throw Error(Errc::invalid_argument, "scheme must be 1 or 2");
  }
};

struct Segment {
  int language = 0;
  double start_s = 0.0;
  double end_s = 0.0;
};

struct GroundTruth {
  std::vector<Segment> segments;

  double duration_s() const { return segments.empty() ? 0.0 : segments.back().end_s; }

  void validate() const {
    if (segments.empty()) throw Error(Errc::invalid_argument, "ground truth has no segments");
    if (segments.front().start_s != 0.0) throw Error(Errc::invalid_argument, "ground truth must start at 0");
    for (std::size_t i = 0; i < segments.size(); ++i) {
      if (!(segments[i].end_s > segments[i].start_s))
        throw Error(Errc::invalid_argument, "segment " + std::to_string(i) + " is empty or reversed");
      if (i > 0 && segments[i].start_s != segments[i - 1].end_s)
        throw Error(Errc::invalid_argument, "gap or overlap before segment " + std::to_string(i));
    }
  }

  /// Language at time t; the last segment owns its end point.
  int language_at(double t) const {
    for (const auto& s : segments)
      if (t < s.end_s) return s.language;
    return segments.back().language;
  }
};

struct WindowDecision {
  double start_s = 0.0;
  double end_s = 0.0;
  int class_index = 0;
  int class_id = 0;
  Vector scores;
};

struct SegmentationTrace {
  std::vector<WindowDecision> decisions;
  std::vector<int> per_second;  // class id for each whole second
  double duration_s = 0.0;
  double window_s = 0.0;
  double shift_s = 0.0;
};

/// Classifier seen by the segmenter: a window of frames -> prediction.
using WindowClassifier = std::function<svm::Prediction(const features::FeatureMatrix&)>;

/// Index of the window whose center is nearest to second s's midpoint;
/// ties go to the earlier window.
inline std::size_t nearest_window(const std::vector<WindowDecision>& decisions, double t) {
  std::size_t best = 0;
  double best_dist = std::abs(0.5 * (decisions[0].start_s + decisions[0].end_s) - t);
  for (std::size_t k = 1; k < decisions.size(); ++k) {
    const double d = std::abs(0.5 * (decisions[k].start_s + decisions[k].end_s) - t);
    if (d < best_dist) {
      best_dist = d;
      best = k;
    }
  }
  return best;
}

/// Fills per_second from the window decisions.
inline void assign_seconds(SegmentationTrace& trace) {
  const auto seconds = static_cast<std::size_t>(std::floor(trace.duration_s + 1e-9));
  trace.per_second.assign(seconds, 0);
  if (trace.decisions.empty()) return;
  for (std::size_t s = 0; s < seconds; ++s)
    trace.per_second[s] = trace.decisions[nearest_window(trace.decisions, static_cast<double>(s) + 0.5)].class_id;
}

inline SegmentationTrace segment_with(const features::FeatureMatrix& stream, const WindowClassifier& classify,
                                      const SegmentationConfig& cfg) {
  cfg.validate();
  const double fps = 1000.0 / stream.frame_shift_ms;
  const double duration = stream.duration_s();
  if (duration + 1e-9 < cfg.window_s)
    throw Error(Errc::too_short, "segment", "stream of " + std::to_string(duration) + " s is shorter than the " +
                                                std::to_string(cfg.window_s) + " s window");
  const auto window_frames = static_cast<Eigen::Index>(std::lround(cfg.window_s * fps));
  const auto count = static_cast<std::size_t>(std::floor((duration - cfg.window_s) / cfg.shift_s + 1e-9)) + 1;

  SegmentationTrace trace;
  trace.duration_s = duration;
  trace.window_s = cfg.window_s;
  trace.shift_s = cfg.shift_s;
  trace.decisions.resize(count);
  parallel_for(count, [&](std::size_t k) {
    const double start = static_cast<double>(k) * cfg.shift_s;
    const auto first = std::min(static_cast<Eigen::Index>(std::lround(start * fps)),
                                stream.num_frames() - window_frames);
    features::FeatureMatrix window;
    window.frame_shift_ms = stream.frame_shift_ms;
    window.frames = stream.frames.middleRows(first, window_frames);
    const svm::Prediction p = classify(window);
    auto& d = trace.decisions[k];
    d.start_s = start;
    d.end_s = start + cfg.window_s;
    d.class_index = p.class_index;
    d.class_id = p.class_id;
    d.scores = p.scores;
  });

  assign_seconds(trace);
  return trace;
}

inline SegmentationTrace segment(const features::FeatureMatrix& stream, const pipeline::TrainedSystem& system,
                                 const SegmentationConfig& cfg) {
  if (cfg.scheme != 0 && cfg.scheme != system.scheme)
    throw Error(Errc::inconsistent_model, "segment",
                "requested scheme " + std::to_string(cfg.scheme) + " but the model is scheme " +
                    std::to_string(system.scheme));
  return segment_with(
      stream, [&](const features::FeatureMatrix& w) { return pipeline::identify(system, w).prediction; }, cfg);
}

/// Fraction of whole seconds whose label equals the truth at the second's
/// midpoint.
inline double frame_accuracy(const SegmentationTrace& trace, const GroundTruth& truth) {
  truth.validate();
  if (std::abs(trace.duration_s - truth.duration_s()) > 1.0)
    throw Error(Errc::dimension_mismatch, "trace covers " + std::to_string(trace.duration_s) + " s, truth " +
                                              std::to_string(truth.duration_s()) + " s");
  std::size_t n = 0, hits = 0;
  for (std::size_t s = 0; s < trace.per_second.size(); ++s) {
    const double mid = static_cast<double>(s) + 0.5;
    if (mid >= truth.duration_s()) break;
    ++n;
    hits += trace.per_second[s] == truth.language_at(mid);
  }
  if (n == 0) throw Error(Errc::insufficient_data, "no whole seconds to score");
  return static_cast<double>(hits) / static_cast<double>(n);
}

struct ConcatResult {
  features::FeatureMatrix stream;
  GroundTruth truth;
};

/// Builds a stream following `plan`. Each language's utterances are
/// consumed in order, a segment continuing into the next utterance when one
/// runs out. Segment lengths are rounded to whole frames.
inline ConcatResult concat_streams(const std::vector<std::pair<features::FeatureMatrix, int>>& utterances,
                                   const GroundTruth& plan) {
  plan.validate();
  if (utterances.empty()) throw Error(Errc::insufficient_data, "no utterances to concatenate");
  const double shift_ms = utterances.front().first.frame_shift_ms;
  const Eigen::Index dim = utterances.front().first.dim();
  std::map<int, std::vector<const RowMatrix*>> pool;
  for (const auto& [fm, lang] : utterances) {
    if (fm.dim() != dim || fm.frame_shift_ms != shift_ms)
      throw Error(Errc::dimension_mismatch, "utterances differ in dimension or frame shift");
    pool[lang].push_back(&fm.frames);
  }

  std::vector<Eigen::Index> lengths;
  Eigen::Index total = 0;
  for (const auto& s : plan.segments) {
    lengths.push_back(std::lround((s.end_s - s.start_s) * 1000.0 / shift_ms));
    total += lengths.back();
  }

  ConcatResult out;
  out.stream.frame_shift_ms = shift_ms;
  out.stream.frames.resize(total, dim);
  std::map<int, std::pair<std::size_t, Eigen::Index>> cursor;  // (utterance, frame)
  Eigen::Index at = 0;
  for (std::size_t i = 0; i < plan.segments.size(); ++i) {
    const int lang = plan.segments[i].language;
    auto it = pool.find(lang);
    if (it == pool.end()) throw Error(Errc::insufficient_data, "no material for language " + std::to_string(lang));
    auto& [u, f] = cursor[lang];
    Eigen::Index need = lengths[i];
    const Eigen::Index start = at;
    while (need > 0) {
      if (u >= it->second.size())
        throw Error(Errc::insufficient_data, "ran out of material for language " + std::to_string(lang));
      const RowMatrix& src = *it->second[u];
      const Eigen::Index take = std::min(need, src.rows() - f);
      out.stream.frames.middleRows(at, take) = src.middleRows(f, take);
      at += take;
      f += take;
      need -= take;
      if (f == src.rows()) {
        ++u;
        f = 0;
      }
    }
    out.truth.segments.push_back(
        {lang, static_cast<double>(start) * shift_ms / 1000.0, static_cast<double>(at) * shift_ms / 1000.0});
  }
  return out;
}

/// Random plan: `per_language` segments for every language, integer
/// durations in [min_s, max_s], never the same language twice in a row.
inline GroundTruth random_plan(const std::vector<int>& languages, int per_language, int min_s, int max_s,
                               std::uint64_t seed) {
  if (languages.size() < 2 || per_language < 1 || min_s < 1 || max_s < min_s)
    throw Error(Errc::invalid_argument, "bad segmentation plan parameters");
  std::mt19937_64 rng(seed);
  std::vector<int> order;
  for (int lang : languages)
    for (int r = 0; r < per_language; ++r) order.push_back(lang);
  const auto adjacent_repeat = [&] {
    return std::adjacent_find(order.begin(), order.end()) != order.end();
  };
  int attempts = 0;
  do {
    std::shuffle(order.begin(), order.end(), rng);
    if (++attempts > 100000) throw Error(Errc::invalid_argument, "cannot avoid adjacent repeats");
  } while (adjacent_repeat());
  std::uniform_int_distribution<int> dur(min_s, max_s);
  GroundTruth plan;
  double t = 0.0;
  for (int lang : order) {
    const double d = dur(rng);
    plan.segments.push_back({lang, t, t + d});
    t += d;
  }
  return plan;
}

// ---------------------------------------------------------------------------
// Text formats

/// One `lang,start_s,end_s` line per segment.
inline void write_truth(std::ostream& os, const GroundTruth& truth) {
  os << std::setprecision(17);
  for (const auto& s : truth.segments) os << s.language << ',' << s.start_s << ',' << s.end_s << '\n';
}

inline GroundTruth read_truth(std::istream& is) {
  GroundTruth truth;
  std::string line;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty() || line[0] == '#') continue;
    std::replace(line.begin(), line.end(), ',', ' ');
    std::istringstream fields(line);
    Segment s;
    if (!(fields >> s.language >> s.start_s >> s.end_s))
      throw Error(Errc::invalid_argument, "truth line " + std::to_string(lineno) + ": expected lang,start_s,end_s");
    truth.segments.push_back(s);
  }
  truth.validate();
  return truth;
}

inline GroundTruth read_truth(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw Error(Errc::file_not_found, "truth file not found: " + path.string());
  return read_truth(is);
}

/// start_s,end_s,predicted,score_0..score_{k-1}
inline void write_trace_csv(std::ostream& os, const SegmentationTrace& trace,
                            const std::vector<std::string>& class_names = {}) {
  os << std::setprecision(17) << "# duration_s=" << trace.duration_s << " window_s=" << trace.window_s
     << " shift_s=" << trace.shift_s << '\n';
  os << "start_s,end_s,predicted";
  const Eigen::Index k = trace.decisions.empty() ? 0 : trace.decisions.front().scores.size();
  for (Eigen::Index c = 0; c < k; ++c)
    os << ",score_"
       << (static_cast<std::size_t>(c) < class_names.size() ? class_names[static_cast<std::size_t>(c)]
                                                            : std::to_string(c));
  os << '\n' << std::setprecision(10);
  for (const auto& d : trace.decisions) {
    os << d.start_s << ',' << d.end_s << ',' << d.class_id;
    for (Eigen::Index c = 0; c < d.scores.size(); ++c) os << ',' << d.scores[c];
    os << '\n';
  }
}

inline SegmentationTrace read_trace_csv(std::istream& is) {
  SegmentationTrace trace;
  std::string line;
  if (!std::getline(is, line) || line.rfind("# duration_s=", 0) != 0)
    throw Error(Errc::malformed_header, "trace CSV lacks its '# duration_s=' header");
  if (std::sscanf(line.c_str(), "# duration_s=%lf window_s=%lf shift_s=%lf", &trace.duration_s, &trace.window_s,
                  &trace.shift_s) != 3)
    throw Error(Errc::malformed_header, "bad trace header: " + line);
  std::getline(is, line);  // column names
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::replace(line.begin(), line.end(), ',', ' ');
    std::istringstream fields(line);
    WindowDecision d;
    if (!(fields >> d.start_s >> d.end_s >> d.class_id)) throw Error(Errc::invalid_argument, "bad trace row");
    std::vector<double> scores;
    for (double v; fields >> v;) scores.push_back(v);
    d.scores = Eigen::Map<Vector>(scores.data(), static_cast<Eigen::Index>(scores.size()));
    d.class_index = -1;
    trace.decisions.push_back(std::move(d));
  }
  if (trace.decisions.empty()) throw Error(Errc::insufficient_data, "trace has no decisions");
  assign_seconds(trace);
  return trace;
}

/// second,predicted
inline void write_per_second_csv(std::ostream& os, const SegmentationTrace& trace) {
  os << "second,predicted\n";
  for (std::size_t s = 0; s < trace.per_second.size(); ++s) os << s << ',' << trace.per_second[s] << '\n';
}

inline std::vector<int> read_per_second_csv(std::istream& is) {
  std::vector<int> labels;
  std::string line;
  std::getline(is, line);
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    const auto comma = line.find(',');
    if (comma == std::string::npos) throw Error(Errc::invalid_argument, "bad per-second line: " + line);
    labels.push_back(std::stoi(line.substr(comma + 1)));
  }
  return labels;
}

}  // namespace lidsvd::segmentation
