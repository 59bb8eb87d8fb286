#pragma once

#include <atomic>
#include <chrono>
#include <cstdlib>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "semlog/dataset.hpp"
#include "semlog/detect.hpp"

namespace semlog {

struct EndpointConfig {
  /// e.g. http://localhost:8000/v1 ; requests go to {base_url}/chat/completions
  std::string base_url;
  std::string model_name;
  double temperature = 0.0;
  std::size_t max_concurrent = 4;
  std::chrono::milliseconds timeout{60000};
  std::string api_key;
  std::size_t max_retries = 3;
  std::chrono::milliseconds initial_backoff{500};

  void validate() const {
    if (base_url.empty()) throw std::invalid_argument("endpoint base_url is empty");
    if (temperature < 0) throw std::invalid_argument("temperature must be >= 0");
    if (max_concurrent < 1) throw std::invalid_argument("max_concurrent must be >= 1");
  }

  /// Reads the API key from SEMLOG_API_KEY, if set.
  static std::string api_key_from_env() {
    const char* v = std::getenv("SEMLOG_API_KEY");
    return v ? std::string(v) : std::string();
  }
};

using ChatMessages = std::vector<Turn>;

/// Chat-completions client for anomaly detection. classify() runs the same
/// two-step conversation the fine-tuning data uses: verdict first, then the
/// cause question when the verdict is anomalous.
class LlmDetector {
 public:
  explicit LlmDetector(EndpointConfig cfg) : cfg_(std::move(cfg)) {
    cfg_.validate();
    const auto scheme = cfg_.base_url.find("://");
    const auto path = cfg_.base_url.find('/', scheme == std::string::npos ? 0 : scheme + 3);
    if (path == std::string::npos) {
      origin_ = cfg_.base_url;
    } else {
      origin_ = cfg_.base_url.substr(0, path);
      prefix_ = cfg_.base_url.substr(path);
    }
    while (!prefix_.empty() && prefix_.back() == '/') prefix_.pop_back();
  }

  const EndpointConfig& config() const noexcept { return cfg_; }

  /// One chat completion with retries on transport failures and 429/5xx.
  std::string complete(const ChatMessages& messages, const std::string& trace_id = {}) const {
    nlohmann::json body;
    body["model"] = cfg_.model_name;
    body["messages"] = nlohmann::json::array();
    for (const auto& m : messages) body["messages"].push_back({{"role", m.role}, {"content", m.content}});
    body["temperature"] = cfg_.temperature;
    const std::string payload = body.dump();

    httplib::Client client(origin_);
    const auto secs = std::chrono::duration_cast<std::chrono::seconds>(cfg_.timeout);
    const auto usecs = std::chrono::duration_cast<std::chrono::microseconds>(cfg_.timeout - secs);
    client.set_connection_timeout(secs.count(), usecs.count());
    client.set_read_timeout(secs.count(), usecs.count());
    client.set_write_timeout(secs.count(), usecs.count());
    httplib::Headers headers;
    if (!cfg_.api_key.empty()) headers.emplace("Authorization", "Bearer " + cfg_.api_key);

    std::string last_error;
    auto backoff = cfg_.initial_backoff;
    for (std::size_t attempt = 0; attempt <= cfg_.max_retries; ++attempt) {
      if (attempt > 0) {
        std::this_thread::sleep_for(backoff);
        backoff *= 2;
      }
      auto res = client.Post(prefix_ + "/chat/completions", headers, payload, "application/json");
      if (!res) {
        last_error = httplib::to_string(res.error());
        continue;
      }
      const int status = res->status;
      if (status == 429 || status == 500 || status == 502 || status == 503 || status == 504) {
        last_error = "HTTP " + std::to_string(status);
        continue;
      }
      if (status < 200 || status >= 300) throw EndpointError(status, res->body);
      try {
        const auto reply = nlohmann::json::parse(res->body);
        return reply.at("choices").at(0).at("message").at("content").get<std::string>();
      } catch (const nlohmann::json::exception&) {
        throw EndpointError(status, "unexpected reply body: " + res->body);
      }
    }
    throw TransportError("trace " + (trace_id.empty() ? std::string("?") : trace_id) + ": request failed after " +
                         std::to_string(cfg_.max_retries + 1) + " attempts (" + last_error + ")");
  }

  Verdict classify(const Trace& trace, const std::string& trace_id = {}) const {
    ChatMessages messages{{"user", render_prompt(trace)}};
    std::string reply = complete(messages, trace_id);
    switch (parse_verdict(reply)) {
      case ParsedVerdict::Normal: {
        Verdict v = Verdict::normal();
        v.raw = std::move(reply);
        return v;
      }
      case ParsedVerdict::Unparseable:
        return Verdict::unparseable(std::move(reply));
      case ParsedVerdict::Anomalous:
        break;
    }
    messages.push_back({"assistant", reply});
    messages.push_back({"user", std::string(kCauseQuestion)});
    Verdict v = Verdict::anomalous(complete(messages, trace_id));
    v.raw = std::move(reply);
    return v;
  }

  struct Outcome {
    std::optional<Verdict> verdict;
    std::string error;
    bool transport_failure = false;
  };

  /// Classifies all traces with at most max_concurrent conversations in
  /// flight. Results are in input order; failures are reported per trace.
  std::vector<Outcome> classify_all(const std::vector<Trace>& traces, const std::vector<std::string>& ids = {}) const {
    std::vector<Outcome> out(traces.size());
    std::atomic<std::size_t> next{0};
    const std::size_t workers = std::min(cfg_.max_concurrent, traces.size());
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w) {
      pool.emplace_back([&] {
        for (std::size_t i; (i = next.fetch_add(1)) < traces.size();) {
          const std::string id = i < ids.size() ? ids[i] : std::to_string(i);
          try {
            out[i].verdict = classify(traces[i], id);
          } catch (const TransportError& e) {
            out[i].error = e.what();
            out[i].transport_failure = true;
          } catch (const std::exception& e) {
            out[i].error = e.what();
          }
        }
      });
    }
    for (auto& t : pool) t.join();
    return out;
  }

 private:
  EndpointConfig cfg_;
  std::string origin_;
  std::string prefix_;
};

}  // namespace semlog
