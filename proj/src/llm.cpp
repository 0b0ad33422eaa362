#include "caudit/llm.hpp"

#include <atomic>
#include <fstream>
#include <mutex>
#include <random>
#include <thread>
#include <vector>

#include <httplib.h>
#include <json.hpp>

namespace caudit {

using nlohmann::json;

namespace {

class FunctionClient : public LlmClient {
 public:
  explicit FunctionClient(
      std::function<std::string(const std::string&, const DecodingConfig&)> fn)
      : fn_(std::move(fn)) {}

  std::string complete(const std::string& prompt,
                       const DecodingConfig& decoding) override {
    return fn_(prompt, decoding);
  }

 private:
  std::function<std::string(const std::string&, const DecodingConfig&)> fn_;
};

// Splits an endpoint URL into (scheme://host[:port], path).
std::pair<std::string, std::string> split_endpoint(const std::string& url) {
  auto scheme_end = url.find("://");
  if (scheme_end == std::string::npos)
    throw ValidationError("endpoint URL missing scheme: " + url);
  auto path_start = url.find('/', scheme_end + 3);
  if (path_start == std::string::npos) return {url, "/"};
  return {url.substr(0, path_start), url.substr(path_start)};
}

class HttpClient : public LlmClient {
 public:
  explicit HttpClient(HttpLlmConfig config) : config_(std::move(config)) {
    std::tie(base_, path_) = split_endpoint(config_.endpoint);
  }

  std::string complete(const std::string& prompt,
                       const DecodingConfig& decoding) override {
    json body;
    body["model"] = config_.model;
    body["messages"] = json::array({{{"role", "user"}, {"content", prompt}}});
    if (decoding.greedy) {
      body["temperature"] = 0.0;
    } else {
      body["temperature"] = decoding.temperature;
    }
    const std::string payload = body.dump();

    std::string last_error;
    auto backoff = config_.retry.initial_backoff;
    for (int attempt = 1; attempt <= config_.retry.max_attempts; ++attempt) {
      if (attempt > 1) {
        std::this_thread::sleep_for(jittered(backoff));
        backoff = std::chrono::milliseconds(static_cast<long>(
            static_cast<double>(backoff.count()) * config_.retry.multiplier));
      }
      httplib::Client cli(base_);
      cli.set_read_timeout(120, 0);
      httplib::Headers headers;
      if (!config_.api_key.empty())
        headers.emplace("Authorization", "Bearer " + config_.api_key);
      auto res = cli.Post(path_, headers, payload, "application/json");
      if (!res) {
        last_error = "transport error: " + httplib::to_string(res.error());
        continue;
      }
      if (res->status == 429 || res->status >= 500) {
        last_error = "HTTP " + std::to_string(res->status);
        continue;
      }
      if (res->status != 200)
        throw ExternalServiceError("LLM backend returned HTTP " +
                                   std::to_string(res->status) + ": " + res->body);
      std::string content = extract_content(res->body);
      log_exchange(payload, res->body);
      return content;
    }
    throw ExternalServiceError("LLM request failed after " +
                               std::to_string(config_.retry.max_attempts) +
                               " attempts; last error: " + last_error);
  }

 private:
  std::chrono::milliseconds jittered(std::chrono::milliseconds base) {
    std::uniform_real_distribution<double> dist(1.0 - config_.retry.jitter,
                                                1.0 + config_.retry.jitter);
    double factor;
    {
      std::lock_guard<std::mutex> lock(mutex_);
      factor = dist(rng_);
    }
    return std::chrono::milliseconds(
        static_cast<long>(static_cast<double>(base.count()) * factor));
  }

  static std::string extract_content(const std::string& body) {
    try {
      json j = json::parse(body);
      return j.at("choices").at(0).at("message").at("content").get<std::string>();
    } catch (const json::exception& ex) {
      throw ExternalServiceError(std::string("unexpected LLM response shape: ") +
                                 ex.what());
    }
  }

  void log_exchange(const std::string& request, const std::string& response) {
    if (config_.audit_log_path.empty()) return;
    std::lock_guard<std::mutex> lock(mutex_);
    std::ofstream log(config_.audit_log_path, std::ios::app);
    json entry;
    entry["request"] = request;
    entry["response"] = response;
    log << entry.dump() << '\n';
  }

  HttpLlmConfig config_;
  std::string base_;
  std::string path_;
  std::mutex mutex_;
  std::mt19937_64 rng_{std::random_device{}()};
};

}  // namespace

std::unique_ptr<LlmClient> make_http_client(const HttpLlmConfig& config) {
  return std::make_unique<HttpClient>(config);
}

std::unique_ptr<LlmClient> make_function_client(
    std::function<std::string(const std::string&, const DecodingConfig&)> fn) {
  return std::make_unique<FunctionClient>(std::move(fn));
}

void parallel_for_indexed(std::size_t n, int max_parallel,
                          const std::function<void(std::size_t)>& fn) {
  if (n == 0) return;
  int workers = std::max(1, max_parallel);
  if (workers == 1 || n == 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  std::vector<std::thread> threads;
  for (int w = 0; w < workers; ++w) {
    threads.emplace_back([&] {
      for (;;) {
        std::size_t i = next.fetch_add(1);
        if (i >= n) return;
        try {
          fn(i);
        } catch (...) {
          std::lock_guard<std::mutex> lock(error_mutex);
          if (!error) error = std::current_exception();
          return;
        }
      }
    });
  }
  for (auto& t : threads) t.join();
  if (error) std::rethrow_exception(error);
}

}  // namespace caudit
