#pragma once

#include <stdexcept>
#include <string>

namespace caudit {

// Validation / precondition failures (bad input data, bad config).
class ValidationError : public std::runtime_error {
 public:
  explicit ValidationError(const std::string& what) : std::runtime_error(what) {}
};

// Failures talking to an external service (LLM backend) after retries.
class ExternalServiceError : public std::runtime_error {
 public:
  explicit ExternalServiceError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace caudit
