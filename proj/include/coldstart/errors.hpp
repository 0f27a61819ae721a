#pragma once

#include <stdexcept>
#include <string>

namespace coldstart {

// Base class for every error raised by the library. The CLI maps the
// subclasses onto process exit codes.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& what) : std::runtime_error(what) {}
};

// Invalid arguments or configuration (exit code 1).
class UsageError : public Error {
 public:
  explicit UsageError(const std::string& what) : Error(what) {}
};

// Malformed, inconsistent or missing data (exit code 2).
class DataError : public Error {
 public:
  explicit DataError(const std::string& what) : Error(what) {}
};

class UnknownSignalError : public DataError {
 public:
  explicit UnknownSignalError(const std::string& name)
      : DataError("unknown signal type '" + name + "'") {}
};

class UnknownEntityError : public DataError {
 public:
  explicit UnknownEntityError(const std::string& name)
      : DataError("unknown entity kind '" + name + "'") {}
};

// A feature event that is not dated on the user's registration day.
class LeakageError : public DataError {
 public:
  explicit LeakageError(const std::string& what) : DataError(what) {}
};

class DimensionError : public DataError {
 public:
  explicit DimensionError(const std::string& what) : DataError(what) {}
};

class FormatError : public DataError {
 public:
  enum class Kind { bad_magic, version_mismatch, truncated, shape_mismatch, parse };
  FormatError(Kind kind, const std::string& what) : DataError(what), kind_(kind) {}
  Kind kind() const { return kind_; }

 private:
  Kind kind_;
};

class MissingArtifactError : public DataError {
 public:
  MissingArtifactError(const std::string& path, const std::string& producer)
      : DataError("missing artifact '" + path + "' (produced by `coldstart " + producer + "`)") {}
};

// Divergence, non-finite values (exit code 3).
class NumericalError : public Error {
 public:
  explicit NumericalError(const std::string& what) : Error(what) {}
};

}  // namespace coldstart
