#pragma once

#include <chrono>
#include <cstdint>
#include <functional>
#include <memory>
#include <string>

#include "caudit/error.hpp"

namespace caudit {

struct DecodingConfig {
  double temperature = 0.0;
  bool greedy = true;  // when true, temperature is ignored
};

struct RetryPolicy {
  int max_attempts = 5;
  std::chrono::milliseconds initial_backoff{1000};
  double multiplier = 2.0;
  double jitter = 0.2;  // +-20% on each backoff interval
};

// Minimal completion interface shared by the annotator, the counterfactual
// injector, and the ICL classifier. Implementations must be safe for
// concurrent complete() calls.
class LlmClient {
 public:
  virtual ~LlmClient() = default;
  virtual std::string complete(const std::string& prompt,
                               const DecodingConfig& decoding) = 0;
};

struct HttpLlmConfig {
  std::string endpoint;  // e.g. http://host:port/v1/chat/completions
  std::string model;
  std::string api_key;  // typically from CONCEPT_AUDIT_API_KEY
  RetryPolicy retry;
  int max_parallel = 4;
  std::string audit_log_path;  // request/response log, key redacted; empty = off
};

// Chat-completion style HTTP backend. Throws ExternalServiceError once the
// retry budget is exhausted.
std::unique_ptr<LlmClient> make_http_client(const HttpLlmConfig& config);

// Wraps an arbitrary response function; the workhorse for deterministic
// test doubles.
std::unique_ptr<LlmClient> make_function_client(
    std::function<std::string(const std::string&, const DecodingConfig&)> fn);

// Runs fn(0..n-1) with at most max_parallel threads in flight. Results are
// keyed by index, so completion order never matters.
void parallel_for_indexed(std::size_t n, int max_parallel,
                          const std::function<void(std::size_t)>& fn);

}  // namespace caudit
