#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <random>

#include "lidsvd/audio.hpp"
#include "lidsvd/synthcorpus.hpp"

namespace fs = std::filesystem;
using namespace lidsvd;

namespace {

fs::path temp_path(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / "lidsvd_test_audio";
  fs::create_directories(dir);
  return dir / name;
}

std::vector<double> tone(double freq, double amp, int rate, double seconds) {
  std::vector<double> out(static_cast<std::size_t>(std::lround(seconds * rate)));
  for (std::size_t i = 0; i < out.size(); ++i)
    out[i] = amp * std::sin(2.0 * std::numbers::pi * freq * static_cast<double>(i) / rate);
  return out;
}

}  // namespace

TEST(ReadWav, DigitalSilence) {
  const auto path = temp_path("silence.wav");
  audio::write_wav(path, std::vector<double>(16000, 0.0), 16000);
  const auto clip = audio::read_wav(path);
  EXPECT_EQ(clip.sample_rate, 16000);
  ASSERT_EQ(clip.samples.size(), 16000u);
  for (double s : clip.samples) EXPECT_EQ(s, 0.0);
}

TEST(ReadWav, ToneRoundTripWithinQuantization) {
  const auto path = temp_path("tone.wav");
  synthcorpus::write_tone(440.0, 0.5, 16000, 2.0, path);
  const auto clip = audio::read_wav(path);
  const auto ref = tone(440.0, 0.5, 16000, 2.0);
  ASSERT_EQ(clip.samples.size(), ref.size());
  double worst = 0.0;
  for (std::size_t i = 0; i < ref.size(); ++i) worst = std::max(worst, std::abs(clip.samples[i] - ref[i]));
  EXPECT_LE(worst, std::ldexp(1.0, -15));
}

TEST(ReadWav, StereoAntiphaseIsSilent) {
  const auto path = temp_path("stereo.wav");
  const auto mono = tone(300.0, 0.7, 8000, 0.5);
  std::vector<double> interleaved;
  for (double s : mono) {
    interleaved.push_back(s);
    interleaved.push_back(-s);
  }
  audio::write_wav(path, interleaved, 8000, audio::SampleFormat::pcm16, 2);
  const auto clip = audio::read_wav(path);
  ASSERT_EQ(clip.samples.size(), mono.size());
  for (double s : clip.samples) EXPECT_EQ(s, 0.0);
}

TEST(ReadWav, FormatsRoundTrip) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(-0.99, 0.99);
  std::vector<double> x(1000);
  for (double& v : x) v = u(rng);
  const std::pair<audio::SampleFormat, double> cases[] = {
      {audio::SampleFormat::pcm8, 1.0 / 128.0},
      {audio::SampleFormat::pcm16, 1.0 / 32768.0},
      {audio::SampleFormat::float32, 1e-7},
  };
  for (const auto& [fmt, step] : cases) {
    const auto path = temp_path("fmt.wav");
    audio::write_wav(path, x, 22050, fmt);
    const auto clip = audio::read_wav(path);
    EXPECT_EQ(clip.sample_rate, 22050);
    ASSERT_EQ(clip.samples.size(), x.size());
    for (std::size_t i = 0; i < x.size(); ++i) EXPECT_LE(std::abs(clip.samples[i] - x[i]), step);
  }
}

TEST(ReadWav, Errors) {
  try {
    audio::read_wav(temp_path("does_not_exist.wav"));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::file_not_found);
  }
  const auto junk = temp_path("junk.wav");
  std::ofstream(junk, std::ios::binary) << "this is not a riff file at all, not even close";
  try {
    audio::read_wav(junk);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::malformed_header);
  }
}

TEST(RemoveSilence, AllZeroFails) {
  audio::AudioClip clip{std::vector<double>(8000, 0.0), 16000, "zeros"};
  try {
    audio::remove_silence(clip);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::empty_after_vad);
  }
}

TEST(RemoveSilence, ConstantToneUntouched) {
  audio::AudioClip clip{std::vector<double>(16000, 0.9), 16000, "dc"};
  const auto out = audio::remove_silence(clip);
  EXPECT_EQ(out.samples, clip.samples);
}

TEST(RemoveSilence, ToneGapTone) {
  const int rate = 16000;
  auto samples = tone(500.0, 0.5, rate, 8.0);
  samples.resize(samples.size() + 2 * rate, 0.0);
  const auto tail = tone(500.0, 0.5, rate, 8.0);
  samples.insert(samples.end(), tail.begin(), tail.end());
  const audio::AudioClip clip{samples, rate, "gap"};
  const auto out = audio::remove_silence(clip);
  const double frame = 0.025;
  EXPECT_NEAR(out.duration_s(), 16.0, frame + 1e-12);
}

TEST(RemoveSilence, Idempotent) {
  std::mt19937_64 rng(11);
  std::normal_distribution<double> n(0.0, 1.0);
  std::vector<double> x;
  for (int seg = 0; seg < 12; ++seg) {
    const double gain = seg % 3 == 0 ? 1e-4 : 0.3;
    for (int i = 0; i < 3700; ++i) x.push_back(gain * n(rng) / 4.0);
  }
  const audio::AudioClip clip{x, 16000, "noise"};
  const auto once = audio::remove_silence(clip);
  const auto twice = audio::remove_silence(once);
  EXPECT_LT(once.samples.size(), x.size());
  EXPECT_EQ(twice.samples.size(), once.samples.size());
}

TEST(RemoveSilence, OutputIsBlockSubsequence) {
  std::vector<double> x(16000);
  for (std::size_t i = 0; i < x.size(); ++i) x[i] = (i / 1600) % 2 ? 0.0 : std::sin(0.01 * i) * 0.5 + 0.6;
  const audio::AudioClip clip{x, 16000, "blocks"};
  const auto keep = audio::voiced_blocks(clip, {});
  const auto out = audio::remove_silence(clip);
  std::vector<double> expect;
  for (std::size_t k = 0; k < keep.size(); ++k)
    if (keep[k])
      for (std::size_t i = k * 160; i < std::min(x.size(), (k + 1) * 160); ++i) expect.push_back(x[i]);
  EXPECT_EQ(out.samples, expect);
}
