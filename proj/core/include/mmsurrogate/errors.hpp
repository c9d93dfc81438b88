#pragma once

#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace mmsurrogate {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed input file or message.
class ParseError : public Error {
 public:
  using Error::Error;
};

// Input parsed but violates a domain invariant.
class ValidationError : public Error {
 public:
  using Error::Error;
};

// Box count and embedding row count disagree, or a mask has the wrong length.
class DimensionError : public Error {
 public:
  using Error::Error;
};

// Precondition violation on a pure function argument.
class ArgumentError : public Error {
 public:
  using Error::Error;
};

class SingularSystemError : public Error {
 public:
  using Error::Error;
};

// Collects every violated bound, not just the first.
class ConfigError : public Error {
 public:
  explicit ConfigError(std::vector<std::string> problems)
      : Error(join(problems)), problems_(std::move(problems)) {}

  const std::vector<std::string>& problems() const noexcept { return problems_; }

 private:
  static std::string join(const std::vector<std::string>& problems) {
    std::string out;
    for (const auto& p : problems) {
      if (!out.empty()) out += "; ";
      out += p;
    }
    return out;
  }

  std::vector<std::string> problems_;
};

class PredictorError : public Error {
 public:
  using Error::Error;
};

class TransportError : public PredictorError {
 public:
  using PredictorError::PredictorError;
};

class ProtocolError : public PredictorError {
 public:
  using PredictorError::PredictorError;
};

class TimeoutError : public PredictorError {
 public:
  using PredictorError::PredictorError;
};

// The predictor answered with an {"type":"error"} message.
class RemoteError : public PredictorError {
 public:
  RemoteError(std::string request_id, const std::string& message)
      : PredictorError(request_id.empty() ? "predictor error: " + message
                                          : "predictor error for request '" + request_id +
                                                "': " + message),
        request_id_(std::move(request_id)) {}

  const std::string& request_id() const noexcept { return request_id_; }

 private:
  std::string request_id_;
};

}  // namespace mmsurrogate
