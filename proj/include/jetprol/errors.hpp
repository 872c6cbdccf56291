#pragma once

#include <stdexcept>
#include <string>

namespace jetprol {

/// Process exit status associated with each error family.
enum class ExitCode : int {
  ok = 0,
  input = 1,       // malformed input, bad arguments, insufficient jet order
  degeneracy = 2,  // the mathematics degenerates at the chosen base point
  internal = 3,    // an internal consistency assertion failed
};

/// Base class of every error raised by the library. Carries the pipeline
/// stage that raised it so reports can point at the offending step.
class Error : public std::runtime_error {
 public:
  Error(ExitCode code, std::string stage, const std::string& what)
      : std::runtime_error(what), code_(code), stage_(std::move(stage)) {}

  ExitCode code() const noexcept { return code_; }
  const std::string& stage() const noexcept { return stage_; }

  /// Replaces the stage tag, keeping the message and exit code.
  void set_stage(std::string stage) { stage_ = std::move(stage); }

 private:
  ExitCode code_;
  std::string stage_;
};

class InputError : public Error {
 public:
  InputError(std::string stage, const std::string& what)
      : Error(ExitCode::input, std::move(stage), what) {}
};

class DegeneracyError : public Error {
 public:
  DegeneracyError(std::string stage, const std::string& what)
      : Error(ExitCode::degeneracy, std::move(stage), what) {}
};

class ConsistencyError : public Error {
 public:
  ConsistencyError(std::string stage, const std::string& what)
      : Error(ExitCode::internal, std::move(stage), what) {}
};

/// Runs `fn`, re-tagging any library error with `stage`.
template <typename Fn>
decltype(auto) in_stage(const std::string& stage, Fn&& fn) {
  try {
    return fn();
  } catch (Error& e) {
    e.set_stage(stage);
    throw;
  }
}

}  // namespace jetprol
