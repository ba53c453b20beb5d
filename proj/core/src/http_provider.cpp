#include <chrono>
#include <cstdlib>
#include <regex>
#include <thread>

#include <httplib.h>

#include "funsearch/errors.hpp"
#include "funsearch/llm_gateway.hpp"

namespace funsearch::llm {

using nlohmann::json;

namespace {

struct Url {
  std::string origin;  // scheme://host[:port]
  std::string path;
};

Url split_url(const std::string& url, const std::string& model) {
  static const std::regex re(R"(^(https?://[^/]+)(/.*)?$)");
  std::smatch m;
  if (!std::regex_match(url, m, re)) {
    throw ConfigError("model " + model + ": endpoint '" + url + "' is not an http(s) URL");
  }
  return {m[1].str(), m[2].matched ? m[2].str() : "/"};
}

bool transient(int status) { return status == 0 || status == 408 || status == 429 || status >= 500; }

}  // namespace

json HttpChatProvider::request_body(const specfmt::PromptBundle& bundle, const ModelConfig& model) {
  return {{"model", model.name},
          {"messages",
           json::array({{{"role", "system"}, {"content", bundle.system_prompt}},
                        {{"role", "user"}, {"content", bundle.user_prompt}}})},
          {"temperature", model.temperature},
          {"max_tokens", model.max_tokens}};
}

Completion HttpChatProvider::complete(const specfmt::PromptBundle& bundle, const ModelConfig& model) {
  const char* key = model.api_key_env.empty() ? nullptr : std::getenv(model.api_key_env.c_str());
  if (!model.api_key_env.empty() && (key == nullptr || *key == '\0')) {
    throw GatewayError("model " + model.name + ": API key variable " + model.api_key_env + " is not set");
  }
  const Url url = split_url(model.endpoint, model.name);
  const std::string body = request_body(bundle, model).dump();

  httplib::Client client(url.origin);
  client.set_connection_timeout(std::chrono::duration<double>(policy_.connect_timeout_s));
  client.set_read_timeout(std::chrono::duration<double>(policy_.read_timeout_s));
  httplib::Headers headers;
  if (key != nullptr) headers.emplace("Authorization", std::string("Bearer ") + key);

  Completion out;
  out.model = model.name;
  auto backoff = policy_.initial_backoff;
  const auto started = std::chrono::steady_clock::now();
  for (int attempt = 0; attempt < policy_.attempts; ++attempt) {
    if (attempt > 0) {
      std::this_thread::sleep_for(backoff);
      backoff *= 2;
    }
    const auto t0 = std::chrono::steady_clock::now();
    auto res = client.Post(url.path, headers, body, "application/json");
    Attempt a;
    a.latency_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (!res) {
      a.error = httplib::to_string(res.error());
      out.attempts.push_back(a);
      continue;
    }
    a.status = res->status;
    if (res->status == 401 || res->status == 403) {
      a.error = "authentication rejected";
      out.attempts.push_back(a);
      throw GatewayError("model " + model.name + ": authentication rejected (HTTP " +
                         std::to_string(res->status) + ")");
    }
    if (res->status != 200) {
      a.error = "HTTP " + std::to_string(res->status);
      out.attempts.push_back(a);
      if (transient(res->status)) continue;
      throw GatewayError("model " + model.name + ": HTTP " + std::to_string(res->status));
    }
    out.attempts.push_back(a);
    try {
      const json reply = json::parse(res->body);
      out.text = reply.at("choices").at(0).at("message").at("content").get<std::string>();
      const json usage = reply.value("usage", json::object());
      if (usage.contains("prompt_tokens") && usage.contains("completion_tokens") &&
          usage["prompt_tokens"].is_number() && usage["completion_tokens"].is_number()) {
        out.n_in = usage["prompt_tokens"].get<std::uint64_t>();
        out.n_out = usage["completion_tokens"].get<std::uint64_t>();
      } else {
        out.estimated = true;
        out.n_in = estimate_tokens(bundle.system_prompt) + estimate_tokens(bundle.user_prompt);
        out.n_out = estimate_tokens(out.text);
      }
    } catch (const json::exception& e) {
      throw GatewayError("model " + model.name + ": malformed completion response: " + e.what());
    }
    out.latency_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
    return out;
  }
  std::string last = out.attempts.empty() ? "no attempt made" : out.attempts.back().error;
  throw GatewayError("model " + model.name + ": giving up after " + std::to_string(policy_.attempts) +
                     " attempts (" + last + ")");
}

}  // namespace funsearch::llm
