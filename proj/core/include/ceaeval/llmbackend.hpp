// Copyright 2026 The ceaeval-kit Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <atomic>
#include <chrono>
#include <cstddef>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

namespace ceaeval::llm {

inline constexpr const char *kApiKeyEnv = "CEAEVAL_API_KEY";

struct BackendConfig {
    std::string base_url;  // e.g. http://127.0.0.1:8000/v1
    std::string model_id;
    std::string api_key;   // only ever read from CEAEVAL_API_KEY
    int max_parallel = 4;
    double timeout_s = 60.0;
    int retries = 3;
    double temperature = 0.0;
    double backoff_s = 0.5;     // first retry delay; doubles per attempt
    bool audio_capable = false; // send the base64 audio field when present

    // Throws ConfigError.
    void validate() const;
};

struct ChatMessage {
    std::string role;
    std::string content;
};

struct ChatRequest {
    std::vector<ChatMessage> messages;
    std::optional<double> temperature;  // overrides the backend default
    std::optional<std::string> audio_base64;
};

struct Usage {
    long prompt_tokens = 0;
    long completion_tokens = 0;
};

struct ChatResponse {
    std::string text;
    std::string finish_reason;
    Usage usage;
    int attempts = 1;
    std::vector<std::string> attempt_log;
};

/// Stable identity of a request (roles and contents), hex FNV-1a.
std::string request_hash(const ChatRequest &req);

// Wire format helpers, exposed for tests.
std::string to_wire_json(const BackendConfig &cfg, const ChatRequest &req);
ChatResponse parse_wire_response(std::string_view body);

class ChatBackend {
public:
    virtual ~ChatBackend() = default;
    virtual ChatResponse complete(const ChatRequest &req) = 0;
    // Upper bound on concurrent complete() calls callers should issue.
    virtual int max_parallel() const = 0;
};

/// POST {base_url}/chat/completions with retries on 429, 5xx and transport
/// errors (exponential backoff). At most cfg.max_parallel requests are in
/// flight per instance; extra callers block.
class HttpChatBackend final : public ChatBackend {
public:
    explicit HttpChatBackend(BackendConfig cfg);
    ~HttpChatBackend() override;

    ChatResponse complete(const ChatRequest &req) override;
    int max_parallel() const override { return m_cfg.max_parallel; }
    const BackendConfig &config() const { return m_cfg; }

private:
    struct Gate;
    BackendConfig m_cfg;
    std::unique_ptr<Gate> m_gate;
};

/// One-shot call through a process-wide gate shared by equal configs.
/// Throws Timeout, HttpError, RateLimited or MalformedResponse.
ChatResponse chat_complete(const BackendConfig &cfg, const ChatRequest &req);

/// POSTs `body` to {base_url}{path} under the same retry policy and returns
/// the response body.
std::string post_json(const BackendConfig &cfg, std::string_view path, const std::string &body,
                      std::vector<std::string> *attempt_log = nullptr);

// ---------------------------------------------------------------------------
// Mock backend

struct MockRule {
    std::vector<std::string> contains; // all must occur in the concatenated message contents
    std::vector<std::string> choices; // picked by request hash
};

struct MockScript {
    std::optional<std::string> default_response;
    std::map<std::string, std::string> by_hash;
    std::vector<MockRule> rules;
    std::set<std::size_t> fail_calls;  // 1-based call ordinals
    std::set<std::string> fail_hashes;
    int max_parallel = 1;
    std::chrono::milliseconds delay{0};

    // {"default", "responses": {hash: text}, "rules": [{"contains": str|[str], "choices"}],
    //  "fail_calls": [n], "fail_hashes": [hash], "max_parallel", "delay_ms"}
    static MockScript parse(std::string_view json_text);
    static MockScript load(const std::filesystem::path &path);
};

/// Deterministic scripted backend. Lookup order: exact request hash, first
/// matching rule, default; no match is a BackendFailure. Injected faults throw
/// HttpError(500).
class MockBackend final : public ChatBackend {
public:
    explicit MockBackend(MockScript script);

    ChatResponse complete(const ChatRequest &req) override;
    int max_parallel() const override { return m_script.max_parallel; }

    std::size_t calls() const { return m_calls.load(); }
    int peak_in_flight() const { return m_peak.load(); }

private:
    MockScript m_script;
    std::atomic<std::size_t> m_calls{0};
    std::atomic<int> m_in_flight{0};
    std::atomic<int> m_peak{0};
};

/// Backend from a JSON config document: {"kind": "mock", "script": <path or
/// inline object>} or {"kind": "http", "base_url", "model", ...}. Relative
/// script paths resolve against `base_dir`.
std::unique_ptr<ChatBackend> make_backend(std::string_view json_text, const std::filesystem::path &base_dir);
std::unique_ptr<ChatBackend> load_backend(const std::filesystem::path &config_file);
BackendConfig parse_backend_config(std::string_view json_text);

} // namespace ceaeval::llm
