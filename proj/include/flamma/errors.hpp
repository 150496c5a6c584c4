#pragma once

#include <stdexcept>
#include <string>

namespace flamma {

// Precondition or argument-range violation.
class InvalidArgument : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Malformed on-disk data (IDX files, JSON reports).
class FormatError : public std::runtime_error {
 public:
  FormatError(const std::string& path, const std::string& what)
      : std::runtime_error(path + ": " + what), path_(path) {}

  const std::string& path() const noexcept { return path_; }

 private:
  std::string path_;
};

class IoError : public std::runtime_error {
 public:
  IoError(const std::string& path, const std::string& what)
      : std::runtime_error(path + ": " + what), path_(path) {}

  const std::string& path() const noexcept { return path_; }

 private:
  std::string path_;
};

// Config file problems. line() is 0 when the error is not tied to a line
// (missing file, cross-key validation).
class ConfigError : public std::runtime_error {
 public:
  ConfigError(const std::string& what, int line = 0)
      : std::runtime_error(line > 0 ? "line " + std::to_string(line) + ": " + what : what),
        line_(line) {}

  int line() const noexcept { return line_; }

 private:
  int line_;
};

}  // namespace flamma
