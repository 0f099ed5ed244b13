#pragma once

// PCM WAV I/O and energy-threshold silence removal.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <limits>
#include <string>
#include <vector>

#include "lidsvd/error.hpp"

namespace lidsvd::audio {

struct AudioClip {
  std::vector<double> samples;  // normalized to [-1, 1]
  int sample_rate = 16000;
  std::string source_id;

  double duration_s() const {
    return static_cast<double>(samples.size()) / sample_rate;
  }
};

struct VadConfig {
  double frame_ms = 25.0;
  double shift_ms = 10.0;
  double threshold_db = -40.0;  // relative to the loudest frame
};

enum class SampleFormat { pcm8, pcm16, float32 };

namespace detail {

inline std::uint32_t read_u32(const unsigned char* p) {
  return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}
inline std::uint16_t read_u16(const unsigned char* p) {
  return static_cast<std::uint16_t>(p[0] | (p[1] << 8));
}
inline void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}
inline void put_u16(std::string& out, std::uint16_t v) {
  out.push_back(static_cast<char>(v & 0xff));
  out.push_back(static_cast<char>((v >> 8) & 0xff));
}

constexpr std::uint16_t kFormatPcm = 1;
constexpr std::uint16_t kFormatFloat = 3;
constexpr std::uint16_t kFormatExtensible = 0xfffe;

inline void validate(const AudioClip& clip) {
  if (clip.sample_rate <= 0)
    throw Error(Errc::invalid_argument, "sample rate must be positive");
  for (double s : clip.samples)
    if (!std::isfinite(s)) throw Error(Errc::invalid_argument, "non-finite sample");
}

}  // namespace detail

/// Reads a RIFF/WAVE file holding 8- or 16-bit integer PCM or 32-bit float
/// samples. Multi-channel audio is averaged down to mono.
inline AudioClip read_wav(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    if (!std::filesystem::exists(path))
      throw Error(Errc::file_not_found, "wav not found: " + path.string());
    throw Error(Errc::io_failure, "cannot open wav: " + path.string());
  }
  const std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)),
                                         std::istreambuf_iterator<char>());
  const auto malformed = [&](const std::string& why) {
    return Error(Errc::malformed_header, path.string() + ": " + why);
  };
  if (bytes.size() < 12 || std::memcmp(bytes.data(), "RIFF", 4) != 0 ||
      std::memcmp(bytes.data() + 8, "WAVE", 4) != 0)
    throw malformed("not a RIFF/WAVE file");

  std::uint16_t format = 0, channels = 0, bits = 0;
  std::uint32_t rate = 0;
  bool have_fmt = false;
  const unsigned char* data = nullptr;
  std::size_t data_size = 0;

  std::size_t pos = 12;
  while (pos + 8 <= bytes.size()) {
    const unsigned char* chunk = bytes.data() + pos;
    const std::uint32_t size = detail::read_u32(chunk + 4);
    const std::size_t body = pos + 8;
    if (std::memcmp(chunk, "fmt ", 4) == 0) {
      if (size < 16 || body + size > bytes.size()) throw malformed("truncated fmt chunk");
      format = detail::read_u16(bytes.data() + body);
      channels = detail::read_u16(bytes.data() + body + 2);
      rate = detail::read_u32(bytes.data() + body + 4);
      bits = detail::read_u16(bytes.data() + body + 14);
      if (format == detail::kFormatExtensible) {
        if (size < 40) throw malformed("truncated extensible fmt chunk");
        // First two bytes of the sub-format GUID carry the real format tag.
        format = detail::read_u16(bytes.data() + body + 24);
      }
      have_fmt = true;
    } else if (std::memcmp(chunk, "data", 4) == 0) {
      if (body + size > bytes.size()) throw malformed("truncated data chunk");
      data = bytes.data() + body;
      data_size = size;
      break;
    }
    pos = body + size + (size & 1u);
  }
  if (!have_fmt) throw malformed("missing fmt chunk");
  if (data == nullptr) throw malformed("missing data chunk");
  if (channels == 0 || rate == 0) throw malformed("zero channels or sample rate");

  const bool pcm = format == detail::kFormatPcm && (bits == 8 || bits == 16);
  const bool flt = format == detail::kFormatFloat && bits == 32;
  if (!pcm && !flt)
    throw Error(Errc::unsupported_encoding,
                path.string() + ": format tag " + std::to_string(format) + " with " +
                    std::to_string(bits) + " bits per sample");

  const std::size_t width = bits / 8;
  const std::size_t frame_bytes = width * channels;
  const std::size_t frames = data_size / frame_bytes;
  if (frames == 0) throw malformed("no sample frames");

  AudioClip clip;
  clip.sample_rate = static_cast<int>(rate);
  clip.source_id = path.stem().string();
  clip.samples.resize(frames);
  for (std::size_t f = 0; f < frames; ++f) {
    double acc = 0.0;
    for (std::size_t c = 0; c < channels; ++c) {
      const unsigned char* p = data + f * frame_bytes + c * width;
      double v = 0.0;
      if (bits == 8) {
        v = (static_cast<double>(p[0]) - 128.0) / 128.0;
      } else if (bits == 16) {
        v = static_cast<std::int16_t>(detail::read_u16(p)) / 32768.0;
      } else {
        const std::uint32_t raw = detail::read_u32(p);
        float fv;
        std::memcpy(&fv, &raw, sizeof fv);
        v = fv;
      }
      acc += v;
    }
    clip.samples[f] = acc / channels;
  }
  detail::validate(clip);
  return clip;
}

/// Writes `samples` as a WAV file. With more than one channel the buffer is
/// interleaved, frame-major.
inline void write_wav(const std::filesystem::path& path, const std::vector<double>& samples,
                      int sample_rate, SampleFormat fmt = SampleFormat::pcm16,
                      int interleaved_channels = 1) {
  if (sample_rate <= 0) throw Error(Errc::invalid_argument, "sample rate must be positive");
  if (interleaved_channels < 1 || samples.size() % interleaved_channels != 0)
    throw Error(Errc::invalid_argument, "sample count not divisible by channel count");
  const std::uint16_t bits = fmt == SampleFormat::pcm8 ? 8 : fmt == SampleFormat::pcm16 ? 16 : 32;
  const std::uint16_t tag = fmt == SampleFormat::float32 ? detail::kFormatFloat : detail::kFormatPcm;
  const auto channels = static_cast<std::uint16_t>(interleaved_channels);
  const std::uint32_t data_bytes = static_cast<std::uint32_t>(samples.size() * (bits / 8));

  std::string out;
  out.reserve(44 + data_bytes);
  out += "RIFF";
  detail::put_u32(out, 36 + data_bytes);
  out += "WAVEfmt ";
  detail::put_u32(out, 16);
  detail::put_u16(out, tag);
  detail::put_u16(out, channels);
  detail::put_u32(out, static_cast<std::uint32_t>(sample_rate));
  detail::put_u32(out, static_cast<std::uint32_t>(sample_rate) * channels * (bits / 8));
  detail::put_u16(out, static_cast<std::uint16_t>(channels * (bits / 8)));
  detail::put_u16(out, bits);
  out += "data";
  detail::put_u32(out, data_bytes);
  for (double s : samples) {
    if (!std::isfinite(s)) throw Error(Errc::invalid_argument, "non-finite sample");
    const double x = std::clamp(s, -1.0, 1.0);
    if (fmt == SampleFormat::pcm8) {
      const long q = std::clamp(std::lround(x * 128.0) + 128L, 0L, 255L);
      out.push_back(static_cast<char>(q));
    } else if (fmt == SampleFormat::pcm16) {
      const long q = std::clamp(std::lround(x * 32768.0), -32768L, 32767L);
      detail::put_u16(out, static_cast<std::uint16_t>(static_cast<std::int16_t>(q)));
    } else {
      const float f = static_cast<float>(x);
      std::uint32_t raw;
      std::memcpy(&raw, &f, sizeof raw);
      detail::put_u32(out, raw);
    }
  }
  std::ofstream os(path, std::ios::binary);
  if (!os) throw Error(Errc::io_failure, "cannot write wav: " + path.string());
  os.write(out.data(), static_cast<std::streamsize>(out.size()));
  if (!os) throw Error(Errc::io_failure, "short write: " + path.string());
}

inline void write_wav(const std::filesystem::path& path, const AudioClip& clip,
                      SampleFormat fmt = SampleFormat::pcm16) {
  write_wav(path, clip.samples, clip.sample_rate, fmt);
}

/// Per-hop voice decision. Hop block k spans samples [k*hop, (k+1)*hop) and
/// is voiced when the analysis frame starting there (frame_ms long, cut
/// short at the end of the clip) has a log energy above
/// peak + threshold_db.
inline std::vector<bool> voiced_blocks(const AudioClip& clip, const VadConfig& cfg) {
  if (!(cfg.shift_ms > 0.0) || cfg.shift_ms > cfg.frame_ms)
    throw Error(Errc::invalid_argument, "VAD needs 0 < shift_ms <= frame_ms");
  if (!(cfg.threshold_db < 0.0)) throw Error(Errc::invalid_argument, "VAD threshold must be negative");
  if (clip.samples.empty()) throw Error(Errc::too_short, "empty clip");

  const std::size_t n = clip.samples.size();
  const auto hop = std::max<std::size_t>(1, std::lround(cfg.shift_ms * clip.sample_rate / 1000.0));
  const auto len = std::max<std::size_t>(hop, std::lround(cfg.frame_ms * clip.sample_rate / 1000.0));
  const std::size_t blocks = (n + hop - 1) / hop;

  std::vector<double> energy_db(blocks);
  double peak = -std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < blocks; ++k) {
    const std::size_t begin = k * hop;
    const std::size_t end = std::min(n, begin + len);
    double sum = 0.0;
    for (std::size_t i = begin; i < end; ++i) sum += clip.samples[i] * clip.samples[i];
    const double mean = sum / static_cast<double>(end - begin);
    energy_db[k] = mean > 0.0 ? 10.0 * std::log10(mean) : -std::numeric_limits<double>::infinity();
    peak = std::max(peak, energy_db[k]);
  }
  std::vector<bool> keep(blocks, false);
  if (!std::isfinite(peak)) return keep;
  const double floor_db = peak + cfg.threshold_db;
  for (std::size_t k = 0; k < blocks; ++k) keep[k] = energy_db[k] > floor_db;
  return keep;
}

/// Drops silent hop blocks and concatenates the rest in their original order.
inline AudioClip remove_silence(const AudioClip& clip, const VadConfig& cfg = {}) {
  const std::vector<bool> keep = voiced_blocks(clip, cfg);
  const auto hop = std::max<std::size_t>(1, std::lround(cfg.shift_ms * clip.sample_rate / 1000.0));
  AudioClip out;
  out.sample_rate = clip.sample_rate;
  out.source_id = clip.source_id;
  out.samples.reserve(clip.samples.size());
  for (std::size_t k = 0; k < keep.size(); ++k) {
    if (!keep[k]) continue;
    const std::size_t begin = k * hop;
    const std::size_t end = std::min(clip.samples.size(), begin + hop);
    out.samples.insert(out.samples.end(), clip.samples.begin() + begin, clip.samples.begin() + end);
  }
  if (out.samples.empty())
    throw Error(Errc::empty_after_vad, "no frame of '" + clip.source_id + "' exceeds the VAD threshold");
  return out;
}

}  // namespace lidsvd::audio
