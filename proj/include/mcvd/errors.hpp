#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace mcvd {

/// One or more violated configuration constraints, all reported at once.
class ConfigError : public std::runtime_error
{
  public:
    explicit ConfigError(std::vector<std::string> violations);
    explicit ConfigError(std::string const& violation)
        : ConfigError(std::vector<std::string>{violation})
    {
    }

    [[nodiscard]] std::vector<std::string> const& violations() const { return violations_; }

  private:
    std::vector<std::string> violations_;
};

/// Non-finite value produced during a numeric computation.
class NumericError : public std::runtime_error
{
  public:
    using std::runtime_error::runtime_error;
};

/// Operation called on an object in the wrong state (e.g. unfitted scaler).
class StateError : public std::logic_error
{
  public:
    using std::logic_error::logic_error;
};

/// Scaler statistics were not fitted on exactly the training split.
class LeakageError : public std::runtime_error
{
  public:
    using std::runtime_error::runtime_error;
};

/// Metric has no defined value for the given input (e.g. constant truth).
class UndefinedMetricError : public std::domain_error
{
  public:
    using std::domain_error::domain_error;
};

/// Base for on-disk format problems.
class FormatError : public std::runtime_error
{
  public:
    using std::runtime_error::runtime_error;
};

class VersionError : public FormatError
{
  public:
    using FormatError::FormatError;
};

class HeaderError : public FormatError
{
  public:
    using FormatError::FormatError;
};

class TruncationError : public FormatError
{
  public:
    using FormatError::FormatError;
};

}  // namespace mcvd
