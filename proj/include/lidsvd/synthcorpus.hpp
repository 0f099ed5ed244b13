#pragma once

// Deterministic synthetic corpora. Each "language" is a Markov chain over
// the components of its own emission GMM; a session is a walk of that chain
// with Gaussian draws, shifted by a per-speaker offset. Tone WAVs exercise
// the audio path.

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <numbers>
#include <random>
#include <string>
#include <vector>

#include "lidsvd/audio.hpp"
#include "lidsvd/error.hpp"
#include "lidsvd/features.hpp"
#include "lidsvd/gmm.hpp"
#include "lidsvd/linalg.hpp"
#include "lidsvd/parallel.hpp"

namespace lidsvd::synthcorpus {

struct SyntheticLanguage {
  int id = 0;
  std::string name;
  gmm::DiagGmm emission;  // weights are ignored; the chain decides occupancy
  RowMatrix transition;   // row-stochastic, over emission components
  double speaker_offset_sd = 0.3;
  double speaker_style = 0.0;  // weight of each speaker's private transition habits
  std::uint64_t speaker_seed = 0;

  void validate() const {
    const Eigen::Index m = emission.num_components();
    if (transition.rows() != m || transition.cols() != m)
      throw Error(Errc::shape_mismatch, "transition matrix must be M x M");
    if ((transition.array() < 0.0).any() ||
        ((transition.rowwise().sum().array() - 1.0).abs() > 1e-12).any())
      throw Error(Errc::invalid_argument, "transition rows must be stochastic");
    emission.validate();
    if (!(speaker_style >= 0.0 && speaker_style <= 1.0))
      throw Error(Errc::invalid_argument, "speaker_style must be in [0, 1]");
  }
};

struct CorpusSpec {
  std::vector<SyntheticLanguage> languages;
  int speakers_per_language = 8;
  int sessions_per_speaker = 4;
  double session_duration_s = 180.0;
  double frame_shift_ms = 10.0;
  int first_speaker = 0;  // speaker indices first_speaker .. first_speaker + speakers - 1
  std::uint64_t seed = 1;

  std::size_t num_sessions() const {
    return languages.size() * static_cast<std::size_t>(speakers_per_language * sessions_per_speaker);
  }
  Eigen::Index frames_per_session() const {
    return static_cast<Eigen::Index>(std::lround(session_duration_s * 1000.0 / frame_shift_ms));
  }
};

struct SessionInfo {
  int language_index = 0;
  int language_id = 0;
  int speaker = 0;
  int session = 0;
};

struct SyntheticUtterance {
  features::FeatureMatrix feats;
  SessionInfo info;
};

/// SplitMix64 finalizer; derives independent stream seeds from tuples.
constexpr std::uint64_t mix_seed(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

constexpr std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b) { return mix_seed(mix_seed(a) ^ b); }

/// Stationary distribution of a row-stochastic matrix by power iteration.
inline Vector stationary_distribution(const RowMatrix& transition) {
  const Eigen::Index m = transition.rows();
  Eigen::RowVectorXd pi = Eigen::RowVectorXd::Constant(m, 1.0 / m);
  for (int it = 0; it < 100000; ++it) {
    Eigen::RowVectorXd next = pi * transition;
    next /= next.sum();
    const double change = (next - pi).cwiseAbs().sum();
    pi = next;
    if (change < 1e-15) break;
  }
  return pi.transpose();
}

/// Speaker offsets depend only on the language and the speaker index, so
/// a corpus built with a disjoint speaker range has unseen speakers.
inline Vector speaker_offset(const SyntheticLanguage& lang, int speaker) {
  std::mt19937_64 rng(mix_seed(lang.speaker_seed, static_cast<std::uint64_t>(speaker)));
  std::normal_distribution<double> n01;
  Vector offset(lang.emission.dim());
  for (Eigen::Index j = 0; j < offset.size(); ++j) offset[j] = lang.speaker_offset_sd * n01(rng);
  return offset;
}

/// (1 - style) * language transitions + style * a random Dirichlet(1)
/// matrix owned by the speaker.
inline RowMatrix speaker_transition(const SyntheticLanguage& lang, int speaker) {
  if (lang.speaker_style == 0.0) return lang.transition;
  std::mt19937_64 rng(mix_seed(lang.speaker_seed ^ 0x5157u, static_cast<std::uint64_t>(speaker)));
  std::exponential_distribution<double> e1(1.0);
  RowMatrix own(lang.transition.rows(), lang.transition.cols());
  for (auto& v : own.reshaped()) v = e1(rng);
  own.array().colwise() /= own.rowwise().sum().array();
  return (1.0 - lang.speaker_style) * lang.transition + lang.speaker_style * own;
}

/// Session seed = mix(mix(mix(spec seed, language id), speaker), session).
inline std::uint64_t session_seed(const CorpusSpec& spec, const SessionInfo& info) {
  return mix_seed(mix_seed(mix_seed(spec.seed, static_cast<std::uint64_t>(info.language_id)),
                           static_cast<std::uint64_t>(info.speaker)),
                  static_cast<std::uint64_t>(info.session));
}

/// Markov walk of `frames` steps; the first state is drawn from the
/// stationary distribution.
inline RowMatrix sample_walk(const SyntheticLanguage& lang, const RowMatrix& transition, Eigen::Index frames,
                             const Vector& offset, std::uint64_t seed, std::vector<int>* states = nullptr) {
  const Eigen::Index m = lang.emission.num_components();
  const Eigen::Index d = lang.emission.dim();
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n01;
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  const RowMatrix sd = lang.emission.variances.cwiseSqrt();
  const Vector pi = stationary_distribution(transition);
  const auto draw = [&](const auto& probs) {
    double target = u01(rng);
    for (Eigen::Index k = 0; k < m - 1; ++k) {
      target -= probs[k];
      if (target < 0.0) return k;
    }
    return m - 1;
  };

  RowMatrix out(frames, d);
  if (states) states->resize(static_cast<std::size_t>(frames));
  Eigen::Index state = draw(pi);
  for (Eigen::Index t = 0; t < frames; ++t) {
    if (t > 0) state = draw(transition.row(state));
    if (states) (*states)[static_cast<std::size_t>(t)] = static_cast<int>(state);
    for (Eigen::Index j = 0; j < d; ++j)
      out(t, j) = lang.emission.means(state, j) + sd(state, j) * n01(rng) + offset[j];
  }
  return out;
}

inline RowMatrix sample_walk(const SyntheticLanguage& lang, Eigen::Index frames, const Vector& offset,
                             std::uint64_t seed, std::vector<int>* states = nullptr) {
  return sample_walk(lang, lang.transition, frames, offset, seed, states);
}

/// Sessions in language-major, then speaker, then session order.
inline SessionInfo session_info(const CorpusSpec& spec, std::size_t index) {
  const auto per_language = static_cast<std::size_t>(spec.speakers_per_language * spec.sessions_per_speaker);
  SessionInfo info;
  info.language_index = static_cast<int>(index / per_language);
  const auto rest = static_cast<int>(index % per_language);
  info.language_id = spec.languages.at(static_cast<std::size_t>(info.language_index)).id;
  info.speaker = spec.first_speaker + rest / spec.sessions_per_speaker;
  info.session = rest % spec.sessions_per_speaker;
  return info;
}

inline SyntheticUtterance generate_session(const CorpusSpec& spec, std::size_t index) {
  SyntheticUtterance out;
  out.info = session_info(spec, index);
  const SyntheticLanguage& lang = spec.languages[static_cast<std::size_t>(out.info.language_index)];
  out.feats.frame_shift_ms = spec.frame_shift_ms;
  out.feats.label = lang.id;
  out.feats.frames = sample_walk(lang, speaker_transition(lang, out.info.speaker), spec.frames_per_session(),
                                 speaker_offset(lang, out.info.speaker), session_seed(spec, out.info));
  return out;
}

inline void validate(const CorpusSpec& spec) {
  if (spec.languages.empty()) throw Error(Errc::invalid_argument, "corpus needs at least one language");
  if (spec.speakers_per_language < 1 || spec.sessions_per_speaker < 1)
    throw Error(Errc::invalid_argument, "speaker and session counts must be >= 1");
  if (spec.frames_per_session() < 1 || !(spec.frame_shift_ms > 0.0))
    throw Error(Errc::invalid_argument, "sessions must hold at least one frame");
  for (const auto& lang : spec.languages) lang.validate();
}

inline std::vector<SyntheticUtterance> generate(const CorpusSpec& spec) {
  validate(spec);
  std::vector<SyntheticUtterance> out(spec.num_sessions());
  parallel_for(out.size(), [&](std::size_t i) { out[i] = generate_session(spec, i); });
  return out;
}

/// Transition matrix that stays put with probability `stay` and otherwise
/// moves `step` components around a cycle (negative steps run backwards).
inline RowMatrix cyclic_transition(int components, double stay, int step) {
  RowMatrix t = RowMatrix::Zero(components, components);
  for (int i = 0; i < components; ++i) {
    const int next = ((i + step) % components + components) % components;
    t(i, i) += stay;
    t(i, next) += 1.0 - stay;
  }
  return t;
}

/// Sticky random transitions: `stay` on the diagonal, the rest spread with
/// random Dirichlet(1) proportions over the other components.
inline RowMatrix sticky_transition(int components, double stay, std::mt19937_64& rng) {
  RowMatrix t = RowMatrix::Zero(components, components);
  std::exponential_distribution<double> e1(1.0);
  for (int i = 0; i < components; ++i) {
    double total = 0.0;
    for (int j = 0; j < components; ++j)
      if (j != i) total += (t(i, j) = e1(rng));
    if (components == 1) {
      t(i, i) = 1.0;
      continue;
    }
    t.row(i) *= (1.0 - stay) / total;
    t(i, i) = stay;
    t.row(i) /= t.row(i).sum();
  }
  return t;
}

/// Random unit-variance emission means, redrawn until every pair of
/// component means (within and across `existing`) is at least
/// `min_separation` apart (in units of the unit standard deviation).
inline RowMatrix separated_means(int components, int dim, double spread, double min_separation,
                                 const std::vector<RowMatrix>& existing, std::mt19937_64& rng) {
  std::normal_distribution<double> n01;
  RowMatrix means(components, dim);
  for (int k = 0; k < components; ++k) {
    for (int attempt = 0;; ++attempt) {
      if (attempt > 10000) throw Error(Errc::invalid_argument, "cannot place separated emission means");
      Eigen::RowVectorXd candidate(dim);
      for (int j = 0; j < dim; ++j) candidate[j] = spread * n01(rng);
      bool ok = true;
      for (int prev = 0; prev < k && ok; ++prev) ok = (means.row(prev) - candidate).norm() >= min_separation;
      for (const auto& other : existing)
        for (Eigen::Index r = 0; r < other.rows() && ok; ++r) ok = (other.row(r) - candidate).norm() >= min_separation;
      if (ok) {
        means.row(k) = candidate;
        break;
      }
    }
  }
  return means;
}

inline gmm::DiagGmm unit_emission(RowMatrix means) {
  gmm::DiagGmm g;
  const Eigen::Index m = means.rows();
  g.weights = Vector::Constant(m, 1.0 / m);
  g.variances = RowMatrix::Ones(m, means.cols());
  g.means = std::move(means);
  return g;
}

struct LanguageSetOptions {
  int count = 10;
  int components = 8;
  int dim = 39;
  double spread = 3.0;          // sd of the emission means
  double min_separation = 6.0;  // between any two component means, any languages
  double stay = 0.8;            // self-transition probability
  double speaker_offset_sd = 0.3;
  double speaker_style = 0.0;
  std::uint64_t seed = 7;
};

/// Languages with disjoint, well-separated emission components and their
/// own sticky transition structure.
inline std::vector<SyntheticLanguage> separated_languages(const LanguageSetOptions& opt) {
  std::mt19937_64 rng(opt.seed);
  std::vector<SyntheticLanguage> out;
  std::vector<RowMatrix> placed;
  for (int l = 0; l < opt.count; ++l) {
    SyntheticLanguage lang;
    lang.id = l;
    lang.name = "lang" + std::to_string(l);
    RowMatrix means = separated_means(opt.components, opt.dim, opt.spread, opt.min_separation, placed, rng);
    placed.push_back(means);
    lang.emission = unit_emission(std::move(means));
    lang.transition = sticky_transition(opt.components, opt.stay, rng);
    lang.speaker_offset_sd = opt.speaker_offset_sd;
    lang.speaker_style = opt.speaker_style;
    lang.speaker_seed = mix_seed(opt.seed, 1000 + static_cast<std::uint64_t>(l));
    out.push_back(std::move(lang));
  }
  return out;
}

/// Two languages with one shared emission GMM and uniform stationary
/// occupancy; one cycles forward through the components, the other
/// backward. Only the temporal order tells them apart.
inline std::vector<SyntheticLanguage> temporal_pair(const LanguageSetOptions& opt) {
  std::mt19937_64 rng(opt.seed);
  const gmm::DiagGmm shared =
      unit_emission(separated_means(opt.components, opt.dim, opt.spread, opt.min_separation, {}, rng));
  std::vector<SyntheticLanguage> out(2);
  for (int l = 0; l < 2; ++l) {
    out[l].id = l;
    out[l].name = l == 0 ? "forward" : "backward";
    out[l].emission = shared;
    out[l].transition = cyclic_transition(opt.components, opt.stay, l == 0 ? 1 : -1);
    out[l].speaker_offset_sd = opt.speaker_offset_sd;
    out[l].speaker_style = opt.speaker_style;
    out[l].speaker_seed = mix_seed(opt.seed, 2000 + static_cast<std::uint64_t>(l));
  }
  return out;
}

/// amplitude * sin(2 pi f t) written as 16-bit mono PCM.
inline void write_tone(double freq_hz, double amplitude, int sample_rate, double duration_s,
                       const std::filesystem::path& path) {
  if (sample_rate <= 0 || !(duration_s > 0.0)) throw Error(Errc::invalid_argument, "bad tone parameters");
  const auto n = static_cast<std::size_t>(std::lround(duration_s * sample_rate));
  std::vector<double> samples(n);
  for (std::size_t i = 0; i < n; ++i)
    samples[i] = amplitude * std::sin(2.0 * std::numbers::pi * freq_hz * static_cast<double>(i) / sample_rate);
  audio::write_wav(path, samples, sample_rate, audio::SampleFormat::pcm16);
}

}  // namespace lidsvd::synthcorpus
