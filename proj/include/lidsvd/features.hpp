#pragma once

// MFCC front-end, sliding-window cepstral mean normalization and the Fisher
// criterion used to pick the normalization window.

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <numbers>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include <unsupported/Eigen/FFT>

#include "lidsvd/audio.hpp"
#include "lidsvd/error.hpp"
#include "lidsvd/linalg.hpp"

namespace lidsvd::features {

struct FeatureMatrix {
  RowMatrix frames;  // T x d
  double frame_shift_ms = 10.0;
  std::optional<int> label;

  Eigen::Index num_frames() const { return frames.rows(); }
  Eigen::Index dim() const { return frames.cols(); }
  double duration_s() const { return num_frames() * frame_shift_ms / 1000.0; }
};

enum class Window { hamming, hann, rectangular };

struct MfccConfig {
  double frame_ms = 25.0;
  double shift_ms = 10.0;
  int num_mel_filters = 26;
  int num_cepstra = 13;
  double pre_emphasis = 0.97;
  Window window = Window::hamming;
  int delta_half_width = 2;
  bool deltas = true;
  bool double_deltas = true;

  int feature_dim() const { return num_cepstra * (1 + deltas + double_deltas); }
};

/// Number of full frames that fit in `num_samples`; 0 if not even one.
inline Eigen::Index frame_count(std::size_t num_samples, std::size_t frame_len, std::size_t hop) {
  if (num_samples < frame_len || frame_len == 0 || hop == 0) return 0;
  return static_cast<Eigen::Index>((num_samples - frame_len) / hop + 1);
}

inline double hz_to_mel(double hz) { return 2595.0 * std::log10(1.0 + hz / 700.0); }
inline double mel_to_hz(double mel) { return 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0); }

/// Triangular filters equally spaced on the HTK mel scale from 0 Hz to
/// Nyquist; rows are filters, columns FFT bins 0..fft_size/2.
inline RowMatrix mel_filterbank(int num_filters, std::size_t fft_size, int sample_rate) {
  const std::size_t bins = fft_size / 2 + 1;
  const double top = hz_to_mel(sample_rate / 2.0);
  std::vector<double> edges(num_filters + 2);
  for (int i = 0; i < num_filters + 2; ++i) edges[i] = top * i / (num_filters + 1);

  RowMatrix bank = RowMatrix::Zero(num_filters, static_cast<Eigen::Index>(bins));
  for (std::size_t k = 0; k < bins; ++k) {
    const double mel = hz_to_mel(static_cast<double>(k) * sample_rate / fft_size);
    for (int m = 0; m < num_filters; ++m) {
      const double lo = edges[m], mid = edges[m + 1], hi = edges[m + 2];
      if (mel > lo && mel < hi)
        bank(m, static_cast<Eigen::Index>(k)) = mel <= mid ? (mel - lo) / (mid - lo) : (hi - mel) / (hi - mid);
    }
  }
  return bank;
}

/// Orthonormal DCT-II basis, num_cepstra x num_inputs.
inline RowMatrix dct_matrix(int num_cepstra, int num_inputs) {
  RowMatrix dct(num_cepstra, num_inputs);
  for (int i = 0; i < num_cepstra; ++i) {
    const double scale = std::sqrt((i == 0 ? 1.0 : 2.0) / num_inputs);
    for (int j = 0; j < num_inputs; ++j)
      dct(i, j) = scale * std::cos(std::numbers::pi * i * (j + 0.5) / num_inputs);
  }
  return dct;
}

inline std::vector<double> window_coefficients(Window w, std::size_t n) {
  std::vector<double> out(n, 1.0);
  if (n < 2) return out;
  for (std::size_t i = 0; i < n; ++i) {
    const double phase = 2.0 * std::numbers::pi * i / (n - 1);
    if (w == Window::hamming) out[i] = 0.54 - 0.46 * std::cos(phase);
    if (w == Window::hann) out[i] = 0.5 - 0.5 * std::cos(phase);
  }
  return out;
}

/// Regression deltas over +-half_width frames, replicating edge frames.
inline RowMatrix deltas(const RowMatrix& x, int half_width) {
  const Eigen::Index T = x.rows();
  RowMatrix out = RowMatrix::Zero(T, x.cols());
  if (half_width <= 0 || T == 0) return out;
  double denom = 0.0;
  for (int n = 1; n <= half_width; ++n) denom += 2.0 * n * n;
  for (Eigen::Index t = 0; t < T; ++t) {
    for (int n = 1; n <= half_width; ++n) {
      const Eigen::Index ahead = std::min<Eigen::Index>(T - 1, t + n);
      const Eigen::Index behind = std::max<Eigen::Index>(0, t - n);
      out.row(t) += n * (x.row(ahead) - x.row(behind));
    }
  }
  return out / denom;
}

/// Static cepstra for every full frame (pre-emphasis over the whole signal,
/// window, |FFT|^2, mel filterbank, natural log, orthonormal DCT-II).
inline RowMatrix cepstra(const audio::AudioClip& clip, const MfccConfig& cfg) {
  if (cfg.num_cepstra < 1 || cfg.num_cepstra > cfg.num_mel_filters)
    throw Error(Errc::invalid_argument, "need 1 <= num_cepstra <= num_mel_filters");
  if (!(cfg.shift_ms > 0.0) || !(cfg.frame_ms > cfg.shift_ms))
    throw Error(Errc::invalid_argument, "need frame_ms > shift_ms > 0");
  const auto frame_len = static_cast<std::size_t>(std::lround(cfg.frame_ms * clip.sample_rate / 1000.0));
  const auto hop = static_cast<std::size_t>(std::lround(cfg.shift_ms * clip.sample_rate / 1000.0));
  const Eigen::Index T = frame_count(clip.samples.size(), frame_len, hop);
  if (T == 0)
    throw Error(Errc::too_short, "clip has " + std::to_string(clip.samples.size()) +
                                     " samples, shorter than one " + std::to_string(frame_len) +
                                     "-sample frame");

  std::size_t fft_size = 1;
  while (fft_size < frame_len) fft_size <<= 1;
  const RowMatrix bank = mel_filterbank(cfg.num_mel_filters, fft_size, clip.sample_rate);
  const RowMatrix dct = dct_matrix(cfg.num_cepstra, cfg.num_mel_filters);
  const std::vector<double> window = window_coefficients(cfg.window, frame_len);

  std::vector<double> emphasized(clip.samples.size());
  for (std::size_t i = 0; i < emphasized.size(); ++i)
    emphasized[i] = clip.samples[i] - (i ? cfg.pre_emphasis * clip.samples[i - 1] : 0.0);

  constexpr double kLogFloor = 1e-10;
  Eigen::FFT<double> fft;
  std::vector<double> buffer(fft_size);
  std::vector<std::complex<double>> spectrum;
  Vector power(static_cast<Eigen::Index>(fft_size / 2 + 1));
  RowMatrix out(T, cfg.num_cepstra);
  for (Eigen::Index t = 0; t < T; ++t) {
    std::fill(buffer.begin(), buffer.end(), 0.0);
    const std::size_t start = static_cast<std::size_t>(t) * hop;
    for (std::size_t i = 0; i < frame_len; ++i) buffer[i] = emphasized[start + i] * window[i];
    fft.fwd(spectrum, buffer);
    for (Eigen::Index k = 0; k < power.size(); ++k) power[k] = std::norm(spectrum[static_cast<std::size_t>(k)]);
    const Vector log_mel = (bank * power).array().max(kLogFloor).log();
    out.row(t) = (dct * log_mel).transpose();
  }
  return out;
}

/// 13 cepstra followed by deltas and double deltas (when enabled).
inline FeatureMatrix mfcc(const audio::AudioClip& clip, const MfccConfig& cfg = {}) {
  const RowMatrix base = cepstra(clip, cfg);
  const int c = cfg.num_cepstra;
  FeatureMatrix out;
  out.frame_shift_ms = cfg.shift_ms;
  out.frames.resize(base.rows(), cfg.feature_dim());
  out.frames.leftCols(c) = base;
  int col = c;
  if (cfg.deltas || cfg.double_deltas) {
    const RowMatrix d1 = deltas(base, cfg.delta_half_width);
    if (cfg.deltas) {
      out.frames.middleCols(col, c) = d1;
      col += c;
    }
    if (cfg.double_deltas) out.frames.middleCols(col, c) = deltas(d1, cfg.delta_half_width);
  }
  return out;
}

/// Subtracts from each frame the per-dimension mean over a centered window of
/// +-(window frames / 2), shrunk at the utterance edges.
inline FeatureMatrix cmn_sliding(const FeatureMatrix& feats, double window_s) {
  if (!(window_s > 0.0)) throw Error(Errc::invalid_argument, "CMN window must be positive");
  const Eigen::Index T = feats.num_frames();
  const Eigen::Index d = feats.dim();
  const auto span_frames = std::max<long>(1, std::lround(window_s * 1000.0 / feats.frame_shift_ms));
  const Eigen::Index half = span_frames / 2;

  FeatureMatrix out = feats;
  std::vector<long double> prefix(static_cast<std::size_t>(T) + 1);
  for (Eigen::Index j = 0; j < d; ++j) {
    // Prefix sums of the recentred column keep cancellation error small.
    long double centre = 0.0L;
    for (Eigen::Index t = 0; t < T; ++t) centre += feats.frames(t, j);
    centre /= std::max<Eigen::Index>(T, 1);
    prefix[0] = 0.0L;
    for (Eigen::Index t = 0; t < T; ++t) prefix[t + 1] = prefix[t] + (feats.frames(t, j) - centre);
    for (Eigen::Index t = 0; t < T; ++t) {
      const Eigen::Index lo = std::max<Eigen::Index>(0, t - half);
      const Eigen::Index hi = std::min<Eigen::Index>(T - 1, t + half);
      const long double mean = (prefix[hi + 1] - prefix[lo]) / static_cast<long double>(hi - lo + 1);
      out.frames(t, j) = static_cast<double>((feats.frames(t, j) - centre) - mean);
    }
  }
  return out;
}

struct FisherStats {
  RowMatrix within;   // S_w
  RowMatrix between;  // S_b
  std::vector<int> class_ids;
  std::vector<Vector> class_means;
  std::vector<long> counts;
  Vector overall_mean;

  double criterion() const {
    const double w = within.trace();
    return w > 0.0 ? between.trace() / w : 0.0;
  }
};

/// Within- and between-class scatter of all frames, each frame carrying the
/// label of the matrix it belongs to.
inline FisherStats fisher_stats(std::span<const FeatureMatrix> sets) {
  if (sets.empty()) throw Error(Errc::insufficient_data, "no labeled feature sets");
  const Eigen::Index d = sets.front().dim();
  FisherStats st;
  std::vector<Vector> sums;
  long total = 0;
  Vector grand = Vector::Zero(d);
  for (const auto& fm : sets) {
    if (!fm.label) throw Error(Errc::invalid_argument, "feature set without class label");
    if (fm.dim() != d) throw Error(Errc::dimension_mismatch, "feature sets differ in dimension");
    auto it = std::find(st.class_ids.begin(), st.class_ids.end(), *fm.label);
    std::size_t k = static_cast<std::size_t>(it - st.class_ids.begin());
    if (it == st.class_ids.end()) {
      st.class_ids.push_back(*fm.label);
      sums.push_back(Vector::Zero(d));
      st.counts.push_back(0);
    }
    sums[k] += fm.frames.colwise().sum().transpose();
    st.counts[k] += fm.num_frames();
    total += fm.num_frames();
  }
  if (total == 0) throw Error(Errc::insufficient_data, "no frames");
  for (std::size_t k = 0; k < sums.size(); ++k) {
    grand += sums[k];
    st.class_means.push_back(st.counts[k] ? Vector(sums[k] / st.counts[k]) : Vector::Zero(d));
  }
  st.overall_mean = grand / static_cast<double>(total);

  st.within = RowMatrix::Zero(d, d);
  for (const auto& fm : sets) {
    const auto k = static_cast<std::size_t>(
        std::find(st.class_ids.begin(), st.class_ids.end(), *fm.label) - st.class_ids.begin());
    const RowMatrix centred = fm.frames.rowwise() - st.class_means[k].transpose();
    st.within.noalias() += centred.transpose() * centred;
  }
  st.between = RowMatrix::Zero(d, d);
  for (std::size_t k = 0; k < sums.size(); ++k) {
    const Vector diff = st.class_means[k] - st.overall_mean;
    st.between.noalias() += static_cast<double>(st.counts[k]) * diff * diff.transpose();
  }
  return st;
}

/// trace(S_b) / trace(S_w) after sliding CMN with `window_s`.
inline double fisher_score(std::span<const FeatureMatrix> sets, double window_s) {
  std::vector<FeatureMatrix> normalized;
  normalized.reserve(sets.size());
  for (const auto& fm : sets) normalized.push_back(cmn_sliding(fm, window_s));
  const FisherStats st = fisher_stats(normalized);
  const double w = st.within.trace();
  if (!(w > 0.0))
    throw Error(Errc::degenerate_data,
                "within-class scatter vanishes for CMN window " + std::to_string(window_s) + " s");
  return st.between.trace() / w;
}

/// Candidate CMN window with the largest Fisher score; ties go to the
/// shorter window.
inline double fisher_select_window(std::span<const FeatureMatrix> sets,
                                   std::span<const double> candidate_windows_s) {
  if (candidate_windows_s.empty()) throw Error(Errc::invalid_argument, "no candidate windows");
  std::vector<int> classes;
  for (const auto& fm : sets)
    if (fm.label && std::find(classes.begin(), classes.end(), *fm.label) == classes.end())
      classes.push_back(*fm.label);
  if (classes.size() < 2) throw Error(Errc::insufficient_data, "Fisher selection needs at least two classes");

  std::vector<double> candidates(candidate_windows_s.begin(), candidate_windows_s.end());
  std::sort(candidates.begin(), candidates.end());
  double best = candidates.front();
  double best_score = -1.0;
  for (double w : candidates) {
    if (!(w > 0.0)) throw Error(Errc::invalid_argument, "candidate windows must be positive");
    const double score = fisher_score(sets, w);
    if (score > best_score) {
      best_score = score;
      best = w;
    }
  }
  return best;
}

inline void write_csv(std::ostream& os, const FeatureMatrix& fm) {
  os.precision(17);
  for (Eigen::Index t = 0; t < fm.num_frames(); ++t) {
    for (Eigen::Index j = 0; j < fm.dim(); ++j) os << (j ? "," : "") << fm.frames(t, j);
    os << '\n';
  }
}

}  // namespace lidsvd::features
