#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace mhntf {

/// Invalid shapes, ranks, modes or option values passed to a library call.
class ArgumentError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// A requested combination the library does not implement (e.g. supervision
/// on tensors of order > 2).
class UnsupportedError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

/// File parse / validation failure. Carries the 1-based line number when known
/// (0 means the failure is not tied to a line).
class LoadError : public std::runtime_error {
 public:
  LoadError(const std::string& path, std::size_t line, const std::string& what)
      : std::runtime_error(format(path, line, what)), path_(path), line_(line) {}

  const std::string& path() const noexcept { return path_; }
  std::size_t line() const noexcept { return line_; }

 private:
  static std::string format(const std::string& path, std::size_t line,
                            const std::string& what) {
    std::string msg = path;
    if (line > 0) msg += ":" + std::to_string(line);
    return msg + ": " + what;
  }

  std::string path_;
  std::size_t line_;
};

}  // namespace mhntf
