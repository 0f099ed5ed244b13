#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace lidsvd {

enum class Errc {
  invalid_argument,
  file_not_found,
  io_failure,
  malformed_header,
  unsupported_encoding,
  empty_after_vad,
  too_short,
  dimension_mismatch,
  degenerate_data,
  insufficient_data,
  container_integrity,
  version_mismatch,
  shape_mismatch,
  inconsistent_model,
};

constexpr std::string_view errc_name(Errc c) noexcept {
  switch (c) {
    case Errc::invalid_argument: return "invalid argument";
    case Errc::file_not_found: return "file not found";
    case Errc::io_failure: return "i/o failure";
    case Errc::malformed_header: return "malformed header";
    case Errc::unsupported_encoding: return "unsupported encoding";
    case Errc::empty_after_vad: return "empty after VAD";
    case Errc::too_short: return "input too short";
    case Errc::dimension_mismatch: return "dimension mismatch";
    case Errc::degenerate_data: return "degenerate data";
    case Errc::insufficient_data: return "insufficient data";
    case Errc::container_integrity: return "container integrity";
    case Errc::version_mismatch: return "version mismatch";
    case Errc::shape_mismatch: return "shape mismatch";
    case Errc::inconsistent_model: return "inconsistent model";
  }
  return "unknown";
}

/// Every failure raised by the library carries a machine-checkable code.
/// `stage()` is empty unless the error passed through the pipeline, which
/// prefixes the message with the stage that failed.
class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& what)
      : std::runtime_error(what), code_(code) {}
  Error(Errc code, std::string stage, const std::string& what)
      : std::runtime_error("[" + stage + "] " + what),
        code_(code),
        stage_(std::move(stage)) {}

  Errc code() const noexcept { return code_; }
  const std::string& stage() const noexcept { return stage_; }

 private:
  Errc code_;
  std::string stage_;
};

/// Runs `fn`, relabeling any library error with `stage`.
template <class Fn>
decltype(auto) with_stage(const std::string& stage, Fn&& fn) {
  try {
    return fn();
  } catch (const Error& e) {
    if (!e.stage().empty()) throw;
    throw Error(e.code(), stage, e.what());
  }
}

}  // namespace lidsvd
