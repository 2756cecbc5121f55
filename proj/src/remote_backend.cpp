#include "faultnav/remote_backend.hpp"

#include <chrono>
#include <condition_variable>
#include <cstdlib>
#include <mutex>
#include <thread>

#include <httplib.h>
#include <json.hpp>

#include "faultnav/errors.hpp"

namespace faultnav {

using nlohmann::json;

RemoteConfig RemoteConfig::from_env() {
  RemoteConfig config;
  if (const char* v = std::getenv("FL_API_KEY")) config.api_key = v;
  if (const char* v = std::getenv("FL_API_BASE_URL")) config.api_base_url = v;
  if (const char* v = std::getenv("FL_MODEL")) config.model = v;
  return config;
}

struct RemoteBackend::Impl {
  RemoteConfig config;
  std::string host;       // scheme://authority
  std::string path_prefix;

  std::mutex mu;
  std::condition_variable cv;
  int inflight = 0;

  void acquire() {
    std::unique_lock<std::mutex> lock(mu);
    cv.wait(lock, [&] { return inflight < config.max_inflight; });
    ++inflight;
  }
  void release() {
    {
      std::lock_guard<std::mutex> lock(mu);
      --inflight;
    }
    cv.notify_one();
  }
};

RemoteBackend::RemoteBackend(RemoteConfig config) : impl_(new Impl) {
  if (config.max_inflight < 1) raise(ErrorCode::InvalidConfig, "max_inflight must be >= 1");
  if (config.retries < 0) raise(ErrorCode::InvalidConfig, "retries must be >= 0");
  const std::string& url = config.api_base_url;
  size_t scheme = url.find("://");
  if (scheme == std::string::npos) {
    raise(ErrorCode::InvalidConfig, "api_base_url must include a scheme: " + url);
  }
  size_t slash = url.find('/', scheme + 3);
  impl_->host = slash == std::string::npos ? url : url.substr(0, slash);
  impl_->path_prefix = slash == std::string::npos ? "" : url.substr(slash);
  while (!impl_->path_prefix.empty() && impl_->path_prefix.back() == '/') {
    impl_->path_prefix.pop_back();
  }
  impl_->config = std::move(config);
}

RemoteBackend::~RemoteBackend() = default;

std::string RemoteBackend::describe() const {
  return "remote(" + impl_->config.model + " at " + impl_->host + ")";
}

namespace {

json wire_request(const CompletionRequest& request, const std::string& model) {
  json body;
  body["model"] = request.model.empty() ? model : request.model;
  body["temperature"] = request.temperature;
  if (request.max_tokens > 0) body["max_tokens"] = request.max_tokens;
  body["messages"] = json::array();
  for (const auto& m : request.messages) {
    json jm;
    jm["role"] = m.role;
    jm["content"] = m.content;
    if (!m.tool_calls.empty()) {
      jm["tool_calls"] = json::array();
      for (const auto& c : m.tool_calls) {
        jm["tool_calls"].push_back(
            {{"id", c.id},
             {"type", "function"},
             {"function", {{"name", c.name}, {"arguments", c.arguments}}}});
      }
    }
    if (!m.tool_call_id.empty()) jm["tool_call_id"] = m.tool_call_id;
    body["messages"].push_back(std::move(jm));
  }
  if (!request.tools.empty()) {
    body["tools"] = json::array();
    for (const auto& t : request.tools) {
      json schema = json::parse(t.parameters_schema, nullptr, false);
      if (schema.is_discarded()) schema = json::object();
      body["tools"].push_back(
          {{"type", "function"},
           {"function",
            {{"name", t.name}, {"description", t.description}, {"parameters", schema}}}});
    }
    body["tool_choice"] = "auto";
  }
  return body;
}

CompletionResponse wire_response(const std::string& body_text) {
  json body;
  try {
    body = json::parse(body_text);
  } catch (const json::exception& e) {
    raise(ErrorCode::TransportError, std::string("unparsable response body: ") + e.what());
  }
  if (!body.contains("choices") || !body["choices"].is_array() || body["choices"].empty()) {
    raise(ErrorCode::TransportError, "response has no choices");
  }
  const json& choice = body["choices"][0];
  const json& message = choice.at("message");

  CompletionResponse response;
  response.message.role = message.value("role", "assistant");
  if (message.contains("content") && message["content"].is_string()) {
    response.message.content = message["content"].get<std::string>();
  }
  if (message.contains("tool_calls") && message["tool_calls"].is_array()) {
    for (const auto& c : message["tool_calls"]) {
      ToolCall call;
      call.id = c.value("id", "");
      call.name = c.at("function").at("name").get<std::string>();
      call.arguments = c.at("function").value("arguments", "");
      response.message.tool_calls.push_back(std::move(call));
    }
  }
  response.finish_reason = choice.value("finish_reason", "stop");
  if (body.contains("usage")) {
    response.usage.prompt_tokens = body["usage"].value("prompt_tokens", 0);
    response.usage.completion_tokens = body["usage"].value("completion_tokens", 0);
  }
  return response;
}

}  // namespace

CompletionResponse RemoteBackend::complete(const CompletionRequest& request) {
  const std::string payload = wire_request(request, impl_->config.model).dump();
  const std::string path = impl_->path_prefix + "/chat/completions";

  impl_->acquire();
  struct Release {
    Impl* impl;
    ~Release() { impl->release(); }
  } release{impl_.get()};

  std::string last_failure = "no attempt made";
  for (int attempt = 0; attempt <= impl_->config.retries; ++attempt) {
    if (attempt > 0) {
      std::this_thread::sleep_for(
          std::chrono::milliseconds(impl_->config.retry_base_delay_ms * (1 << (attempt - 1))));
    }
    httplib::Client client(impl_->host);
    client.set_connection_timeout(impl_->config.timeout_seconds);
    client.set_read_timeout(impl_->config.timeout_seconds);
    httplib::Headers headers;
    if (!impl_->config.api_key.empty()) {
      headers.emplace("Authorization", "Bearer " + impl_->config.api_key);
    }
    auto result = client.Post(path, headers, payload, "application/json");
    if (!result) {
      last_failure = "transport failure: " + httplib::to_string(result.error());
      continue;
    }
    if (result->status == 429 || result->status >= 500) {
      last_failure = "HTTP " + std::to_string(result->status);
      continue;
    }
    if (result->status >= 400) {
      if (result->body.find("context_length_exceeded") != std::string::npos) {
        raise(ErrorCode::ContextOverflow, "backend rejected the request as too large");
      }
      raise(ErrorCode::BackendRefusal,
            "HTTP " + std::to_string(result->status) + ": " + result->body.substr(0, 400));
    }
    return wire_response(result->body);
  }
  raise(ErrorCode::TransportError,
        last_failure + " after " + std::to_string(impl_->config.retries + 1) + " attempts");
}

}  // namespace faultnav
