#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace slab {

enum class Errc {
  NonFiniteLogit,
  NotADistribution,
  HyperparamOutOfRange,
  EntropyUnreachable,
  NoConvergence,
  LengthMismatch,
  UniformInput,
  EmptyCorpus,
  ReplayMiss,
  RetryExhausted,
  IoError,
  FormatVersionMismatch,
  EmptyInput,
  NoNgrams,
  ConfigError,
  InvalidArgument,
};

constexpr std::string_view to_string(Errc code) noexcept {
  switch (code) {
    case Errc::NonFiniteLogit: return "NonFiniteLogit";
    case Errc::NotADistribution: return "NotADistribution";
    case Errc::HyperparamOutOfRange: return "HyperparamOutOfRange";
    case Errc::EntropyUnreachable: return "EntropyUnreachable";
    case Errc::NoConvergence: return "NoConvergence";
    case Errc::LengthMismatch: return "LengthMismatch";
    case Errc::UniformInput: return "UniformInput";
    case Errc::EmptyCorpus: return "EmptyCorpus";
    case Errc::ReplayMiss: return "ReplayMiss";
    case Errc::RetryExhausted: return "RetryExhausted";
    case Errc::IoError: return "IoError";
    case Errc::FormatVersionMismatch: return "FormatVersionMismatch";
    case Errc::EmptyInput: return "EmptyInput";
    case Errc::NoNgrams: return "NoNgrams";
    case Errc::ConfigError: return "ConfigError";
    case Errc::InvalidArgument: return "InvalidArgument";
  }
  return "Unknown";
}

/// Every failure raised by the library carries one of the Errc codes.
class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

[[noreturn]] inline void fail(Errc code, const std::string& what) { throw Error(code, what); }

}  // namespace slab
