#pragma once

// Training and test phases for both schemes, model persistence and the
// key=value configuration file.
//
// Scheme 1: MAP-adapt -> decode components with the adapted model ->
//           skip-K bigram matrix -> flatten -> SVD embedding -> SVM.
// Scheme 2: MAP-adapt -> mean supervector minus UBM supervector ->
//           SVD embedding -> SVM.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "lidsvd/audio.hpp"
#include "lidsvd/container.hpp"
#include "lidsvd/embedding.hpp"
#include "lidsvd/error.hpp"
#include "lidsvd/features.hpp"
#include "lidsvd/gmm.hpp"
#include "lidsvd/ngram.hpp"
#include "lidsvd/parallel.hpp"
#include "lidsvd/supervector.hpp"
#include "lidsvd/svm.hpp"
#include "lidsvd/synthcorpus.hpp"

namespace lidsvd::pipeline {

struct PipelineConfig {
  int scheme = 2;
  features::MfccConfig mfcc;
  audio::VadConfig vad;
  bool vad_enabled = true;
  double cmn_window_s = 1.0;  // 0 disables CMN
  int mixtures = 64;
  int em_iters = 10;
  Eigen::Index ubm_max_frames = 200000;
  double adapt_clip_s = 60.0;
  double map_relevance = 16.0;
  bool decode_with_weights = true;
  int skip_k = 1;
  double energy_tau = 0.60;
  double svm_c = 1.0;
  double svm_tolerance = 1e-4;
  bool svm_standardize = false;
  std::uint64_t seed = 1;

  void validate() const {
    if (scheme != 1 && scheme != 2) throw Error(Errc::invalid_argument, "scheme must be 1 or 2");
    if (mixtures < 1) throw Error(Errc::invalid_argument, "mixtures must be positive");
    if (skip_k < 1) throw Error(Errc::invalid_argument, "skip_k must be >= 1");
    if (!(energy_tau > 0.0 && energy_tau <= 1.0)) throw Error(Errc::invalid_argument, "energy_tau must be in (0, 1]");
    if (!(svm_c > 0.0)) throw Error(Errc::invalid_argument, "svm_c must be positive");
    if (!(map_relevance >= 0.0)) throw Error(Errc::invalid_argument, "map_relevance must be >= 0");
    if (!(adapt_clip_s > 0.0)) throw Error(Errc::invalid_argument, "adapt_clip_s must be positive");
    if (cmn_window_s < 0.0) throw Error(Errc::invalid_argument, "cmn_window_s must be >= 0");
  }
};

/// Applies `key=value` lines onto `cfg`. Blank lines and '#' comments are
/// skipped; unknown keys are rejected.
inline void apply_config(PipelineConfig& cfg, std::istream& in) {
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    const auto trim = [](std::string s) {
      const auto b = s.find_first_not_of(" \t\r");
      const auto e = s.find_last_not_of(" \t\r");
      return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
    };
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw Error(Errc::invalid_argument, "config line " + std::to_string(lineno) + ": expected key=value");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    try {
      const auto as_bool = [&] {
        if (value == "1" || value == "true" || value == "on") return true;
        if (value == "0" || value == "false" || value == "off") return false;
        throw std::invalid_argument(value);
      };
      if (key == "frame_ms") cfg.mfcc.frame_ms = cfg.vad.frame_ms = std::stod(value);
      else if (key == "shift_ms") cfg.mfcc.shift_ms = cfg.vad.shift_ms = std::stod(value);
      else if (key == "cmn_window_s") cfg.cmn_window_s = std::stod(value);
      else if (key == "mixtures") cfg.mixtures = std::stoi(value);
      else if (key == "map_relevance") cfg.map_relevance = std::stod(value);
      else if (key == "skip_k") cfg.skip_k = std::stoi(value);
      else if (key == "energy_tau") cfg.energy_tau = std::stod(value);
      else if (key == "svm_c") cfg.svm_c = std::stod(value);
      else if (key == "seed") cfg.seed = std::stoull(value);
      else if (key == "scheme") cfg.scheme = std::stoi(value);
      else if (key == "em_iters") cfg.em_iters = std::stoi(value);
      else if (key == "ubm_max_frames") cfg.ubm_max_frames = std::stol(value);
      else if (key == "adapt_clip_s") cfg.adapt_clip_s = std::stod(value);
      else if (key == "decode_with_weights") cfg.decode_with_weights = as_bool();
      else if (key == "svm_standardize") cfg.svm_standardize = as_bool();
      else if (key == "vad") cfg.vad_enabled = as_bool();
      else if (key == "vad_threshold_db") cfg.vad.threshold_db = std::stod(value);
      else throw Error(Errc::invalid_argument, "config line " + std::to_string(lineno) + ": unknown key '" + key + "'");
    } catch (const std::logic_error&) {
      throw Error(Errc::invalid_argument,
                  "config line " + std::to_string(lineno) + ": bad value '" + value + "' for " + key);
    }
  }
  cfg.validate();
}

inline PipelineConfig load_config(const std::filesystem::path& path, PipelineConfig base = {}) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::file_not_found, "config not found: " + path.string());
  apply_config(base, in);
  return base;
}

// ---------------------------------------------------------------------------
// Feature files and corpus sources

inline void save_features(const features::FeatureMatrix& fm, const std::filesystem::path& path) {
  container::ModelContainer c;
  c.meta["kind"] = "features";
  c.meta["frame_shift_ms"] = fm.frame_shift_ms;
  if (fm.label) c.meta["label"] = *fm.label;
  c.put("frames", fm.frames);
  c.save(path);
}

inline features::FeatureMatrix load_features(const std::filesystem::path& path) {
  const auto c = container::ModelContainer::load(path);
  if (c.meta.value("kind", "") != "features")
    throw Error(Errc::container_integrity, path.string() + " is not a feature container");
  features::FeatureMatrix fm;
  fm.frames = c.get("frames");
  fm.frame_shift_ms = c.meta.value("frame_shift_ms", 10.0);
  if (c.meta.contains("label")) fm.label = c.meta["label"].get<int>();
  return fm;
}

/// WAV -> optional VAD -> MFCC(+deltas).
inline features::FeatureMatrix front_end(const audio::AudioClip& clip, const PipelineConfig& cfg) {
  const audio::AudioClip voiced = cfg.vad_enabled ? audio::remove_silence(clip, cfg.vad) : clip;
  return features::mfcc(voiced, cfg.mfcc);
}

/// Random access to labeled training sessions. `load` must be safe to call
/// concurrently and return the same frames every time.
class UtteranceSource {
 public:
  virtual ~UtteranceSource() = default;
  virtual std::size_t size() const = 0;
  virtual int label(std::size_t i) const = 0;
  virtual features::FeatureMatrix load(std::size_t i) const = 0;
  /// Class id -> display name, for every label the source produces.
  virtual std::map<int, std::string> language_names() const = 0;
};

class InMemorySource : public UtteranceSource {
 public:
  InMemorySource(std::vector<features::FeatureMatrix> utts, std::map<int, std::string> names = {})
      : utts_(std::move(utts)), names_(std::move(names)) {
    for (const auto& u : utts_) {
      if (!u.label) throw Error(Errc::invalid_argument, "in-memory utterance without label");
      names_.try_emplace(*u.label, std::to_string(*u.label));
    }
  }
  std::size_t size() const override { return utts_.size(); }
  int label(std::size_t i) const override { return *utts_.at(i).label; }
  features::FeatureMatrix load(std::size_t i) const override { return utts_.at(i); }
  std::map<int, std::string> language_names() const override { return names_; }

 private:
  std::vector<features::FeatureMatrix> utts_;
  std::map<int, std::string> names_;
};

/// Regenerates sessions on demand, so paper-sized corpora never have to be
/// resident in memory.
class SyntheticSource : public UtteranceSource {
 public:
  explicit SyntheticSource(synthcorpus::CorpusSpec spec) : spec_(std::move(spec)) { synthcorpus::validate(spec_); }
  std::size_t size() const override { return spec_.num_sessions(); }
  int label(std::size_t i) const override { return synthcorpus::session_info(spec_, i).language_id; }
  features::FeatureMatrix load(std::size_t i) const override { return synthcorpus::generate_session(spec_, i).feats; }
  std::map<int, std::string> language_names() const override {
    std::map<int, std::string> names;
    for (const auto& l : spec_.languages) names[l.id] = l.name.empty() ? std::to_string(l.id) : l.name;
    return names;
  }
  const synthcorpus::CorpusSpec& spec() const { return spec_; }

 private:
  synthcorpus::CorpusSpec spec_;
};

struct ManifestEntry {
  std::string language;
  std::string speaker;
  std::string session;
  std::filesystem::path path;
};

/// Corpus manifest: one session per line, `language speaker session path`,
/// whitespace separated; relative paths resolve against the manifest's
/// directory. Paths ending in .wav go through the audio front-end, anything
/// else is read as a feature container.
inline std::vector<ManifestEntry> read_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::file_not_found, "manifest not found: " + path.string());
  std::vector<ManifestEntry> out;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    std::istringstream fields(line);
    ManifestEntry e;
    std::string file;
    if (!(fields >> e.language)) continue;
    if (!(fields >> e.speaker >> e.session >> file))
      throw Error(Errc::invalid_argument, path.string() + ":" + std::to_string(lineno) +
                                              ": expected 'language speaker session path'");
    e.path = std::filesystem::path(file).is_absolute() ? std::filesystem::path(file) : path.parent_path() / file;
    out.push_back(std::move(e));
  }
  if (out.empty()) throw Error(Errc::insufficient_data, "manifest lists no sessions: " + path.string());
  return out;
}

inline void write_manifest(const std::filesystem::path& path, const std::vector<ManifestEntry>& entries) {
  std::ofstream os(path);
  if (!os) throw Error(Errc::io_failure, "cannot write manifest " + path.string());
  os << "# language speaker session path\n";
  for (const auto& e : entries)
    os << e.language << ' ' << e.speaker << ' ' << e.session << ' ' << e.path.string() << '\n';
}

class ManifestSource : public UtteranceSource {
 public:
  ManifestSource(const std::filesystem::path& manifest, PipelineConfig cfg)
      : entries_(read_manifest(manifest)), cfg_(std::move(cfg)) {
    std::vector<std::string> langs;
    for (const auto& e : entries_) langs.push_back(e.language);
    std::sort(langs.begin(), langs.end());
    langs.erase(std::unique(langs.begin(), langs.end()), langs.end());
    for (std::size_t i = 0; i < langs.size(); ++i) {
      ids_[langs[i]] = static_cast<int>(i);
      names_[static_cast<int>(i)] = langs[i];
    }
  }
  std::size_t size() const override { return entries_.size(); }
  int label(std::size_t i) const override { return ids_.at(entries_.at(i).language); }
  features::FeatureMatrix load(std::size_t i) const override {
    const auto& e = entries_.at(i);
    features::FeatureMatrix fm = e.path.extension() == ".wav" ? front_end(audio::read_wav(e.path), cfg_)
                                                              : load_features(e.path);
    fm.label = label(i);
    return fm;
  }
  std::map<int, std::string> language_names() const override { return names_; }
  const std::vector<ManifestEntry>& entries() const { return entries_; }

 private:
  std::vector<ManifestEntry> entries_;
  PipelineConfig cfg_;
  std::map<std::string, int> ids_;
  std::map<int, std::string> names_;
};

// ---------------------------------------------------------------------------
// Trained system

inline constexpr int kSystemFormatVersion = 1;

struct TrainedSystem {
  int scheme = 2;
  gmm::DiagGmm ubm;
  int skip_k = 1;
  double map_relevance = 16.0;
  bool decode_with_weights = true;
  double cmn_window_s = 1.0;
  features::MfccConfig mfcc;
  audio::VadConfig vad;
  bool vad_enabled = true;
  embedding::EmbeddingSpace embedding;
  svm::SvmModel svm;
  embedding::EmbeddedMatrix train_embedding;
  int format_version = kSystemFormatVersion;

  Eigen::Index feature_dim() const {
    const Eigen::Index m = ubm.num_components();
    return scheme == 1 ? m * m : m * ubm.dim();
  }

  /// Cross-component shape checks; throws inconsistent_model.
  void validate() const {
    if (scheme != 1 && scheme != 2) throw Error(Errc::inconsistent_model, "unknown scheme " + std::to_string(scheme));
    ubm.validate();
    if (embedding.ambient_dim() != feature_dim())
      throw Error(Errc::inconsistent_model, "embedding expects " + std::to_string(embedding.ambient_dim()) +
                                                "-dim features, scheme " + std::to_string(scheme) + " produces " +
                                                std::to_string(feature_dim()));
    if (embedding.retained() < 1 || embedding.spectrum.size() < embedding.retained())
      throw Error(Errc::inconsistent_model, "embedding retains more singular values than it stores");
    if (!(embedding.singular_values().array() > 0.0).all())
      throw Error(Errc::inconsistent_model, "retained singular values must be positive");
    if (svm.input_dim() != embedding.retained())
      throw Error(Errc::inconsistent_model, "SVM input dimension " + std::to_string(svm.input_dim()) +
                                                " differs from embedding rank " + std::to_string(embedding.retained()));
    if (svm.bias.size() != svm.num_classes() || svm.input_scale.size() != svm.input_dim() ||
        static_cast<Eigen::Index>(svm.class_ids.size()) != svm.num_classes() ||
        static_cast<Eigen::Index>(svm.class_names.size()) != svm.num_classes())
      throw Error(Errc::inconsistent_model, "SVM arrays disagree on the class count");
    if (svm.num_classes() < 2) throw Error(Errc::inconsistent_model, "SVM needs at least two classes");
  }
};

struct TrainReport {
  gmm::EmReport em;
  Eigen::Index ubm_frames = 0;
  Eigen::Index feature_rows = 0;  // N_tot
  Eigen::Index feature_cols = 0;  // M*M or M*d
  Eigen::Index spectrum_size = 0;
  Eigen::Index retained = 0;
  double training_accuracy = 0.0;
};

inline features::FeatureMatrix normalize(const features::FeatureMatrix& fm, double cmn_window_s) {
  return cmn_window_s > 0.0 ? features::cmn_sliding(fm, cmn_window_s) : fm;
}

/// Scheme feature vector of one utterance (the row it contributes to the
/// utterance n-gram matrix or the difference matrix).
inline Vector utterance_vector(int scheme, const gmm::DiagGmm& ubm, const RowMatrix& frames, int skip_k,
                               double relevance, bool decode_with_weights) {
  const gmm::DiagGmm adapted = gmm::map_adapt(ubm, frames, gmm::MapConfig{relevance});
  if (scheme == 2) return supervector::difference_vector(adapted, ubm);
  const gmm::SymbolSequence seq = gmm::decode_symbols(adapted, frames, decode_with_weights);
  return ngram::flatten(ngram::skipgram(seq, {skip_k, static_cast<int>(ubm.num_components())}));
}

/// Strided subsample of every session, at most `max_frames` in total.
inline RowMatrix pool_ubm_frames(const UtteranceSource& source, const PipelineConfig& cfg) {
  const std::size_t n = source.size();
  const Eigen::Index quota = std::max<Eigen::Index>(1, (cfg.ubm_max_frames + static_cast<Eigen::Index>(n) - 1) /
                                                           static_cast<Eigen::Index>(n));
  std::vector<RowMatrix> parts(n);
  parallel_for(n, [&](std::size_t i) {
    const features::FeatureMatrix fm = normalize(source.load(i), cfg.cmn_window_s);
    const Eigen::Index t = fm.num_frames();
    const Eigen::Index stride = std::max<Eigen::Index>(1, (t + quota - 1) / quota);
    RowMatrix part((t + stride - 1) / stride, fm.dim());
    for (Eigen::Index r = 0; r < part.rows(); ++r) part.row(r) = fm.frames.row(r * stride);
    parts[i] = std::move(part);
  });
  Eigen::Index total = 0;
  for (const auto& p : parts) total += p.rows();
  if (total == 0) throw Error(Errc::insufficient_data, "corpus has no frames");
  RowMatrix pooled(total, parts.front().cols());
  Eigen::Index at = 0;
  for (const auto& p : parts) {
    if (p.cols() != pooled.cols()) throw Error(Errc::dimension_mismatch, "sessions differ in feature dimension");
    pooled.middleRows(at, p.rows()) = p;
    at += p.rows();
  }
  return pooled;
}

/// Splits every session into adaptation clips of adapt_clip_s (a session
/// shorter than one clip is used whole; a trailing partial clip is
/// dropped) and computes one scheme row per clip.
inline std::pair<RowMatrix, std::vector<int>> training_rows(const UtteranceSource& source, const gmm::DiagGmm& ubm,
                                                            const PipelineConfig& cfg) {
  const std::size_t n = source.size();
  std::vector<std::vector<Vector>> per_session(n);
  parallel_for(n, [&](std::size_t i) {
    const features::FeatureMatrix fm = normalize(source.load(i), cfg.cmn_window_s);
    const auto clip = std::max<Eigen::Index>(1, std::lround(cfg.adapt_clip_s * 1000.0 / fm.frame_shift_ms));
    const Eigen::Index clips = std::max<Eigen::Index>(1, fm.num_frames() / clip);
    const Eigen::Index len = fm.num_frames() < clip ? fm.num_frames() : clip;
    for (Eigen::Index c = 0; c < clips; ++c)
      per_session[i].push_back(utterance_vector(cfg.scheme, ubm, fm.frames.middleRows(c * len, len), cfg.skip_k,
                                                cfg.map_relevance, cfg.decode_with_weights));
  });
  Eigen::Index rows = 0;
  for (const auto& s : per_session) rows += static_cast<Eigen::Index>(s.size());
  const Eigen::Index width = per_session.front().front().size();
  RowMatrix x(rows, width);
  std::vector<int> labels;
  labels.reserve(static_cast<std::size_t>(rows));
  Eigen::Index at = 0;
  for (std::size_t i = 0; i < n; ++i)
    for (const auto& v : per_session[i]) {
      x.row(at++) = v.transpose();
      labels.push_back(source.label(i));
    }
  return {std::move(x), std::move(labels)};
}

inline gmm::DiagGmm train_background(const UtteranceSource& source, const PipelineConfig& cfg,
                                     TrainReport* report = nullptr) {
  const RowMatrix pooled = with_stage("ubm", [&] { return pool_ubm_frames(source, cfg); });
  gmm::EmConfig em;
  em.components = cfg.mixtures;
  em.em_iters = cfg.em_iters;
  em.seed = cfg.seed;
  if (report) report->ubm_frames = pooled.rows();
  return with_stage("ubm", [&] { return gmm::train_ubm(pooled, em, report ? &report->em : nullptr); });
}

/// Full training phase. A pre-trained background model may be passed in to
/// share it between schemes.
inline TrainedSystem train(const UtteranceSource& source, const PipelineConfig& cfg,
                           const gmm::DiagGmm* background = nullptr, TrainReport* report = nullptr) {
  with_stage("config", [&] { cfg.validate(); });
  if (source.size() == 0) throw Error(Errc::insufficient_data, "corpus", "empty corpus");
  {
    std::vector<int> labels;
    for (std::size_t i = 0; i < source.size(); ++i) labels.push_back(source.label(i));
    std::sort(labels.begin(), labels.end());
    if (std::unique(labels.begin(), labels.end()) - labels.begin() < 2)
      throw Error(Errc::insufficient_data, "corpus", "training needs at least two languages");
  }

  TrainedSystem sys;
  sys.scheme = cfg.scheme;
  sys.skip_k = cfg.skip_k;
  sys.map_relevance = cfg.map_relevance;
  sys.decode_with_weights = cfg.decode_with_weights;
  sys.cmn_window_s = cfg.cmn_window_s;
  sys.mfcc = cfg.mfcc;
  sys.vad = cfg.vad;
  sys.vad_enabled = cfg.vad_enabled;
  sys.ubm = background ? *background : train_background(source, cfg, report);
  if (sys.ubm.num_components() != cfg.mixtures)
    throw Error(Errc::inconsistent_model, "ubm", "background model has a different mixture count");

  auto [x, labels] = with_stage(cfg.scheme == 1 ? "ngram" : "supervector",
                                [&] { return training_rows(source, sys.ubm, cfg); });
  auto fitted = with_stage("embedding", [&] { return embedding::fit(x, cfg.energy_tau, labels); });
  sys.embedding = std::move(fitted.space);
  sys.train_embedding = std::move(fitted.embedded);

  std::vector<std::string> names;
  {
    const auto all_names = source.language_names();
    std::vector<int> ids = labels;
    std::sort(ids.begin(), ids.end());
    ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
    for (int id : ids) {
      auto it = all_names.find(id);
      names.push_back(it != all_names.end() ? it->second : std::to_string(id));
    }
  }
  svm::TrainConfig svm_cfg;
  svm_cfg.c = cfg.svm_c;
  svm_cfg.tolerance = cfg.svm_tolerance;
  svm_cfg.seed = cfg.seed;
  svm_cfg.standardize = cfg.svm_standardize;
  sys.svm = with_stage("svm", [&] { return svm::train(sys.train_embedding, svm_cfg, names); });

  if (report) {
    report->feature_rows = x.rows();
    report->feature_cols = x.cols();
    report->spectrum_size = sys.embedding.spectrum.size();
    report->retained = sys.embedding.retained();
    long correct = 0;
    for (Eigen::Index r = 0; r < sys.train_embedding.rows.rows(); ++r)
      correct += svm::predict(sys.svm, sys.train_embedding.rows.row(r).transpose()).class_id ==
                 sys.train_embedding.labels[static_cast<std::size_t>(r)];
    report->training_accuracy = static_cast<double>(correct) / static_cast<double>(x.rows());
  }
  return sys;
}

struct Identification {
  svm::Prediction prediction;
  Vector embedded;  // L-dim projection of the test vector
};

/// Test phase on an already extracted feature stream. `max_duration_s`
/// (if positive) truncates the utterance first.
inline Identification identify(const TrainedSystem& sys, const features::FeatureMatrix& utterance,
                               double max_duration_s = 0.0) {
  features::FeatureMatrix fm = utterance;
  if (max_duration_s > 0.0) {
    const auto keep = static_cast<Eigen::Index>(std::lround(max_duration_s * 1000.0 / fm.frame_shift_ms));
    if (keep < fm.num_frames()) fm.frames.conservativeResize(keep, Eigen::NoChange);
  }
  if (fm.num_frames() < 1) throw Error(Errc::too_short, "identify", "utterance has no frames");
  if (sys.scheme == 1 && fm.num_frames() <= sys.skip_k)
    throw Error(Errc::too_short, "identify", "utterance shorter than skip + 1 frames");
  fm = with_stage("cmn", [&] { return normalize(fm, sys.cmn_window_s); });
  const Vector v = with_stage(sys.scheme == 1 ? "ngram" : "supervector", [&] {
    return utterance_vector(sys.scheme, sys.ubm, fm.frames, sys.skip_k, sys.map_relevance, sys.decode_with_weights);
  });
  Identification out;
  out.embedded = with_stage("embedding", [&] { return embedding::project(sys.embedding, v); });
  out.prediction = with_stage("svm", [&] { return svm::predict(sys.svm, out.embedded); });
  return out;
}

inline Identification identify_audio(const TrainedSystem& sys, const audio::AudioClip& clip,
                                     double max_duration_s = 0.0) {
  PipelineConfig fe;
  fe.mfcc = sys.mfcc;
  fe.vad = sys.vad;
  fe.vad_enabled = sys.vad_enabled;
  const features::FeatureMatrix fm = with_stage("front-end", [&] { return front_end(clip, fe); });
  return identify(sys, fm, max_duration_s);
}

// ---------------------------------------------------------------------------
// Persistence

inline container::ModelContainer to_container(const TrainedSystem& sys) {
  container::ModelContainer c;
  auto& m = c.meta;
  m["kind"] = "trained-system";
  m["system_format_version"] = sys.format_version;
  m["scheme"] = sys.scheme;
  m["skip_k"] = sys.skip_k;
  m["map_relevance"] = sys.map_relevance;
  m["decode_with_weights"] = sys.decode_with_weights;
  m["cmn_window_s"] = sys.cmn_window_s;
  m["mixtures"] = sys.ubm.num_components();
  m["feature_dim"] = sys.ubm.dim();
  m["mfcc"] = {{"frame_ms", sys.mfcc.frame_ms},
               {"shift_ms", sys.mfcc.shift_ms},
               {"num_mel_filters", sys.mfcc.num_mel_filters},
               {"num_cepstra", sys.mfcc.num_cepstra},
               {"pre_emphasis", sys.mfcc.pre_emphasis},
               {"window", static_cast<int>(sys.mfcc.window)},
               {"delta_half_width", sys.mfcc.delta_half_width},
               {"deltas", sys.mfcc.deltas},
               {"double_deltas", sys.mfcc.double_deltas}};
  m["vad"] = {{"enabled", sys.vad_enabled},
              {"frame_ms", sys.vad.frame_ms},
              {"shift_ms", sys.vad.shift_ms},
              {"threshold_db", sys.vad.threshold_db}};
  m["embedding"] = {{"energy_fraction", sys.embedding.energy_fraction},
                    {"rank", sys.embedding.rank},
                    {"retained", sys.embedding.retained()},
                    {"ambient_dim", sys.embedding.ambient_dim()}};
  m["svm"] = {{"c", sys.svm.c}, {"class_names", sys.svm.class_names}};

  c.put("ubm.weights", sys.ubm.weights);
  c.put("ubm.means", sys.ubm.means);
  c.put("ubm.variances", sys.ubm.variances);
  c.put("embedding.spectrum", sys.embedding.spectrum);
  c.put("embedding.basis", sys.embedding.basis);
  c.put("svm.weights", sys.svm.weights);
  c.put("svm.bias", sys.svm.bias);
  c.put("svm.input_scale", sys.svm.input_scale);
  c.put("svm.class_ids", sys.svm.class_ids);
  c.put("train.embedding", sys.train_embedding.rows);
  c.put("train.labels", sys.train_embedding.labels);
  return c;
}

inline TrainedSystem from_container(const container::ModelContainer& c) {
  return with_stage("load", [&] {
    const auto& m = c.meta;
    if (m.value("kind", "") != "trained-system")
      throw Error(Errc::container_integrity, "container does not hold a trained system");
    TrainedSystem sys;
    try {
      sys.format_version = m.at("system_format_version").get<int>();
      if (sys.format_version != kSystemFormatVersion)
        throw Error(Errc::version_mismatch, "system format version " + std::to_string(sys.format_version));
      sys.scheme = m.at("scheme").get<int>();
      sys.skip_k = m.at("skip_k").get<int>();
      sys.map_relevance = m.at("map_relevance").get<double>();
      sys.decode_with_weights = m.at("decode_with_weights").get<bool>();
      sys.cmn_window_s = m.at("cmn_window_s").get<double>();
      const auto& mf = m.at("mfcc");
      sys.mfcc.frame_ms = mf.at("frame_ms").get<double>();
      sys.mfcc.shift_ms = mf.at("shift_ms").get<double>();
      sys.mfcc.num_mel_filters = mf.at("num_mel_filters").get<int>();
      sys.mfcc.num_cepstra = mf.at("num_cepstra").get<int>();
      sys.mfcc.pre_emphasis = mf.at("pre_emphasis").get<double>();
      sys.mfcc.window = static_cast<features::Window>(mf.at("window").get<int>());
      sys.mfcc.delta_half_width = mf.at("delta_half_width").get<int>();
      sys.mfcc.deltas = mf.at("deltas").get<bool>();
      sys.mfcc.double_deltas = mf.at("double_deltas").get<bool>();
      const auto& vd = m.at("vad");
      sys.vad_enabled = vd.at("enabled").get<bool>();
      sys.vad.frame_ms = vd.at("frame_ms").get<double>();
      sys.vad.shift_ms = vd.at("shift_ms").get<double>();
      sys.vad.threshold_db = vd.at("threshold_db").get<double>();
      const auto& em = m.at("embedding");
      sys.embedding.energy_fraction = em.at("energy_fraction").get<double>();
      sys.embedding.rank = em.at("rank").get<Eigen::Index>();
      sys.svm.c = m.at("svm").at("c").get<double>();
      sys.svm.class_names = m.at("svm").at("class_names").get<std::vector<std::string>>();

      const Eigen::Index mix = m.at("mixtures").get<Eigen::Index>();
      const Eigen::Index dim = m.at("feature_dim").get<Eigen::Index>();
      const Eigen::Index retained = em.at("retained").get<Eigen::Index>();
      const Eigen::Index ambient = em.at("ambient_dim").get<Eigen::Index>();
      const auto k = static_cast<Eigen::Index>(sys.svm.class_names.size());
      sys.ubm.weights = c.get_vector("ubm.weights", mix);
      sys.ubm.means = c.get("ubm.means", mix, dim);
      sys.ubm.variances = c.get("ubm.variances", mix, dim);
      sys.embedding.spectrum = c.get_vector("embedding.spectrum");
      sys.embedding.basis = c.get("embedding.basis", ambient, retained);
      sys.svm.weights = c.get("svm.weights", k, -1);
      sys.svm.bias = c.get_vector("svm.bias", k);
      sys.svm.input_scale = c.get_vector("svm.input_scale", sys.svm.weights.cols());
      sys.svm.class_ids = c.get_ints("svm.class_ids", k);
      sys.train_embedding.rows = c.get("train.embedding", -1, retained);
      sys.train_embedding.labels = c.get_ints("train.labels", sys.train_embedding.rows.rows());
    } catch (const nlohmann::json::exception& e) {
      throw Error(Errc::container_integrity, std::string("manifest metadata: ") + e.what());
    }
    sys.validate();
    return sys;
  });
}

inline void save(const TrainedSystem& sys, const std::filesystem::path& path) {
  with_stage("save", [&] { to_container(sys).save(path); });
}

inline TrainedSystem load(const std::filesystem::path& path) {
  return from_container(with_stage("load", [&] { return container::ModelContainer::load(path); }));
}

}  // namespace lidsvd::pipeline
