#include <gtest/gtest.h>

#include <cmath>
#include <complex>
#include <numbers>
#include <random>

#include "lidsvd/features.hpp"

using namespace lidsvd;

namespace {

RowMatrix random_matrix(Eigen::Index rows, Eigen::Index cols, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n(0.0, 1.0);
  RowMatrix m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = n(rng);
  return m;
}

// Straight-line cepstra for frame 0, written without the library's helpers.
std::vector<double> reference_cepstra(const std::vector<double>& x, int rate) {
  const std::size_t len = 400;
  const std::size_t nfft = 512;
  const int filters = 26;
  std::vector<double> frame(nfft, 0.0);
  for (std::size_t i = 0; i < len; ++i) {
    const double emph = x[i] - (i > 0 ? 0.97 * x[i - 1] : 0.0);
    const double w = 0.54 - 0.46 * std::cos(2.0 * std::numbers::pi * i / (len - 1));
    frame[i] = emph * w;
  }
  std::vector<double> power(nfft / 2 + 1);
  for (std::size_t k = 0; k < power.size(); ++k) {
    std::complex<double> acc = 0.0;
    for (std::size_t n = 0; n < nfft; ++n)
      acc += frame[n] * std::polar(1.0, -2.0 * std::numbers::pi * static_cast<double>(k * n % nfft) / nfft);
    power[k] = std::norm(acc);
  }
  auto mel = [](double hz) { return 2595.0 * std::log10(1.0 + hz / 700.0); };
  const double top = mel(rate / 2.0);
  std::vector<double> logmel(filters);
  for (int m = 0; m < filters; ++m) {
    const double lo = top * m / (filters + 1);
    const double mid = top * (m + 1) / (filters + 1);
    const double hi = top * (m + 2) / (filters + 1);
    double e = 0.0;
    for (std::size_t k = 0; k < power.size(); ++k) {
      const double f = mel(static_cast<double>(k) * rate / nfft);
      double w = 0.0;
      if (f > lo && f <= mid) w = (f - lo) / (mid - lo);
      else if (f > mid && f < hi) w = (hi - f) / (hi - mid);
      e += w * power[k];
    }
    logmel[m] = std::log(std::max(e, 1e-10));
  }
  std::vector<double> c(13);
  for (int i = 0; i < 13; ++i) {
    double acc = 0.0;
    for (int j = 0; j < filters; ++j) acc += logmel[j] * std::cos(std::numbers::pi * i * (j + 0.5) / filters);
    c[i] = acc * std::sqrt((i == 0 ? 1.0 : 2.0) / filters);
  }
  return c;
}

RowMatrix naive_cmn(const RowMatrix& x, Eigen::Index half) {
  RowMatrix out(x.rows(), x.cols());
  for (Eigen::Index t = 0; t < x.rows(); ++t) {
    const Eigen::Index lo = std::max<Eigen::Index>(0, t - half);
    const Eigen::Index hi = std::min<Eigen::Index>(x.rows() - 1, t + half);
    for (Eigen::Index j = 0; j < x.cols(); ++j) {
      double s = 0.0;
      for (Eigen::Index u = lo; u <= hi; ++u) s += x(u, j);
      out(t, j) = x(t, j) - s / static_cast<double>(hi - lo + 1);
    }
  }
  return out;
}

}  // namespace

TEST(Mfcc, PaperFrameCount) {
  audio::AudioClip clip{std::vector<double>(60 * 16000), 16000, ""};
  std::mt19937_64 rng(1);
  std::normal_distribution<double> n(0.0, 0.1);
  for (double& s : clip.samples) s = n(rng);
  const auto fm = features::mfcc(clip);
  EXPECT_EQ(fm.num_frames(), 5998);
  EXPECT_EQ(fm.dim(), 39);
}

TEST(Mfcc, FrameCountFormula) {
  for (std::size_t n : {400u, 401u, 559u, 560u, 561u, 16000u, 16399u}) {
    audio::AudioClip clip{std::vector<double>(n, 0.1), 16000, ""};
    EXPECT_EQ(features::mfcc(clip).num_frames(), static_cast<Eigen::Index>((n - 400) / 160 + 1)) << n;
  }
}

TEST(Mfcc, ConstantClipHasZeroDeltas) {
  audio::AudioClip clip{std::vector<double>(8000, 0.0), 16000, ""};
  const auto fm = features::mfcc(clip);
  EXPECT_TRUE((fm.frames.rightCols(26).array() == 0.0).all());
  EXPECT_LT(fm.frames(0, 0), 0.0);
  for (Eigen::Index t = 1; t < fm.num_frames(); ++t) EXPECT_EQ(fm.frames.row(t), fm.frames.row(0));
}

TEST(Mfcc, MatchesBruteForceReference) {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> u(-0.8, 0.8);
  for (int trial = 0; trial < 5; ++trial) {
    audio::AudioClip clip{std::vector<double>(400), 16000, ""};
    for (double& s : clip.samples) s = u(rng);
    const RowMatrix c = features::cepstra(clip, {});
    ASSERT_EQ(c.rows(), 1);
    const auto ref = reference_cepstra(clip.samples, 16000);
    for (int i = 0; i < 13; ++i) EXPECT_NEAR(c(0, i), ref[i], 1e-9) << i;
  }
}

TEST(Mfcc, TooShort) {
  audio::AudioClip clip{std::vector<double>(399, 0.1), 16000, ""};
  try {
    features::mfcc(clip);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::too_short);
  }
}

TEST(Cmn, LongWindowIsGlobal) {
  features::FeatureMatrix fm{random_matrix(150, 5, 2), 10.0, {}};
  const auto out = features::cmn_sliding(fm, 10.0);
  EXPECT_LT(out.frames.colwise().mean().cwiseAbs().maxCoeff(), 1e-10);
}

TEST(Cmn, ConstantStreamBecomesZero) {
  features::FeatureMatrix fm{RowMatrix::Constant(80, 4, 3.25), 10.0, {}};
  EXPECT_LT(features::cmn_sliding(fm, 0.5).frames.cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Cmn, MatchesNaiveOracle) {
  features::FeatureMatrix fm{random_matrix(200, 39, 5), 10.0, {}};
  fm.frames.array() += 40.0;
  const auto out = features::cmn_sliding(fm, 1.0);
  EXPECT_LE((out.frames - naive_cmn(fm.frames, 50)).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Cmn, ShiftInvariant) {
  features::FeatureMatrix fm{random_matrix(120, 6, 8), 10.0, {}};
  features::FeatureMatrix shifted = fm;
  Eigen::RowVectorXd c(6);
  c << 1, -2, 3.5, 100, -7, 0.25;
  shifted.frames.rowwise() += c;
  const auto a = features::cmn_sliding(fm, 0.3);
  const auto b = features::cmn_sliding(shifted, 0.3);
  EXPECT_LT((a.frames - b.frames).cwiseAbs().maxCoeff(), 1e-10);
}

TEST(Fisher, ScatterDecomposition) {
  std::vector<features::FeatureMatrix> sets;
  for (int k = 0; k < 6; ++k) {
    features::FeatureMatrix fm{random_matrix(50 + 10 * k, 4, 100 + k), 10.0, k % 3};
    fm.frames.array() += k % 3;
    sets.push_back(fm);
  }
  const auto st = features::fisher_stats(sets);
  RowMatrix all(0, 4);
  for (const auto& fm : sets) {
    RowMatrix grown(all.rows() + fm.num_frames(), 4);
    grown << all, fm.frames;
    all = grown;
  }
  const RowMatrix centred = all.rowwise() - all.colwise().mean();
  const RowMatrix total = centred.transpose() * centred;
  EXPECT_LE((st.within + st.between - total).norm(), 1e-8 * total.norm());
}

TEST(Fisher, SingleCandidate) {
  std::vector<features::FeatureMatrix> sets{{random_matrix(100, 3, 1), 10.0, 0}, {random_matrix(100, 3, 2), 10.0, 1}};
  const double w[] = {1.0};
  EXPECT_EQ(features::fisher_select_window(sets, w), 1.0);
}

TEST(Fisher, SelectsBruteForceArgmax) {
  const int T = 600;
  std::vector<features::FeatureMatrix> sets;
  std::mt19937_64 rng(9);
  std::normal_distribution<double> n(0.0, 0.2);
  for (int k = 0; k < 4; ++k) {
    features::FeatureMatrix fm{RowMatrix(T, 2), 10.0, k % 2};
    const double sign = k % 2 ? 1.0 : -1.0;
    for (int t = 0; t < T; ++t) {
      const double drift = 4.0 * std::sin(2.0 * std::numbers::pi * (t + 37 * k) / 200.0);
      fm.frames(t, 0) = drift + sign * t / 300.0 + n(rng);
      fm.frames(t, 1) = drift + n(rng);
    }
    sets.push_back(fm);
  }
  const std::vector<double> windows{0.2, 0.5, 1.0, 2.0, 4.0};
  double best = 0.0, best_j = -1.0;
  for (double w : windows) {
    const auto half = static_cast<Eigen::Index>(std::lround(w * 100.0) / 2);
    std::vector<features::FeatureMatrix> normed;
    for (const auto& fm : sets) normed.push_back({naive_cmn(fm.frames, half), 10.0, fm.label});
    Vector mean[2] = {Vector::Zero(2), Vector::Zero(2)};
    double count[2] = {0, 0};
    for (const auto& fm : normed) {
      mean[*fm.label] += fm.frames.colwise().sum().transpose();
      count[*fm.label] += T;
    }
    const Vector grand = (mean[0] + mean[1]) / (count[0] + count[1]);
    for (int c = 0; c < 2; ++c) mean[c] /= count[c];
    double sw = 0.0, sb = 0.0;
    for (const auto& fm : normed)
      sw += (fm.frames.rowwise() - mean[*fm.label].transpose()).squaredNorm();
    for (int c = 0; c < 2; ++c) sb += count[c] * (mean[c] - grand).squaredNorm();
    EXPECT_NEAR(features::fisher_score(sets, w), sb / sw, 1e-9 * sb / sw) << w;
    if (sb / sw > best_j) {
      best_j = sb / sw;
      best = w;
    }
  }
  EXPECT_EQ(features::fisher_select_window(sets, windows), best);
}
