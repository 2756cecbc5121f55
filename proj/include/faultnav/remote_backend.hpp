#pragma once

#include <string>

#include "faultnav/llm.hpp"

namespace faultnav {

struct RemoteConfig {
  std::string api_base_url = "https://api.openai.com/v1";
  std::string api_key;
  std::string model = "gpt-4o-mini-2024-07-18";
  int retries = 3;              // additional attempts after the first
  int retry_base_delay_ms = 500;  // doubles per retry
  int max_inflight = 4;
  int timeout_seconds = 120;

  // Reads FL_API_KEY, FL_API_BASE_URL and FL_MODEL; unset variables keep
  // the defaults above.
  static RemoteConfig from_env();
};

// Chat-completions HTTP backend. Transport failures, 429 and 5xx responses
// are retried with exponential backoff and end in TransportError; context
// window rejections raise ContextOverflow, other 4xx raise BackendRefusal.
// Concurrent completes are throttled to `max_inflight`.
class RemoteBackend : public Backend {
 public:
  explicit RemoteBackend(RemoteConfig config);
  ~RemoteBackend() override;

  CompletionResponse complete(const CompletionRequest& request) override;
  std::string describe() const override;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace faultnav
