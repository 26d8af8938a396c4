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

#include "ceaeval/llmbackend.hpp"

#include <algorithm>
#include <cstdlib>
#include <fstream>
#include <semaphore>
#include <sstream>
#include <thread>

#include <fmt/format.h>
#include <httplib.h>
#include <nlohmann/json.hpp>

#include "ceaeval/error.hpp"
#include "ceaeval/text.hpp"

namespace ceaeval::llm {

using nlohmann::json;

namespace {

using Semaphore = std::counting_semaphore<4096>;

struct SplitUrl {
    std::string host;   // scheme://host[:port]
    std::string prefix; // path prefix without trailing '/'
};

SplitUrl split_url(const std::string &base_url) {
    auto scheme = base_url.find("://");
    if (scheme == std::string::npos) throw Error(Errc::kConfigError, "base_url", "missing scheme in " + base_url);
    auto slash = base_url.find('/', scheme + 3);
    SplitUrl out;
    out.host = base_url.substr(0, slash);
    if (slash != std::string::npos) out.prefix = base_url.substr(slash);
    while (!out.prefix.empty() && out.prefix.back() == '/') out.prefix.pop_back();
    return out;
}

class SemaphoreGuard {
public:
    explicit SemaphoreGuard(Semaphore &s) : m_s(s) { m_s.acquire(); }
    ~SemaphoreGuard() { m_s.release(); }
    SemaphoreGuard(const SemaphoreGuard &) = delete;
    SemaphoreGuard &operator=(const SemaphoreGuard &) = delete;

private:
    Semaphore &m_s;
};

bool retryable_status(int status) { return status == 429 || status >= 500; }

std::string read_file(const std::filesystem::path &path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(Errc::kIoFailure, path.string(), "cannot open file");
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

json parse_json_or_config_error(std::string_view text, std::string_view what) {
    auto j = json::parse(text, nullptr, false);
    if (j.is_discarded()) throw Error(Errc::kConfigError, std::string(what), "invalid JSON");
    return j;
}

} // namespace

void BackendConfig::validate() const {
    if (base_url.empty()) throw Error(Errc::kConfigError, "base_url", "empty");
    if (max_parallel < 1) throw Error(Errc::kConfigError, "max_parallel", "must be >= 1");
    if (retries < 0) throw Error(Errc::kConfigError, "retries", "must be >= 0");
    if (!(timeout_s > 0.0)) throw Error(Errc::kConfigError, "timeout", "must be > 0");
    if (!(temperature >= 0.0)) throw Error(Errc::kConfigError, "temperature", "must be >= 0");
    if (!(backoff_s >= 0.0)) throw Error(Errc::kConfigError, "backoff", "must be >= 0");
}

std::string request_hash(const ChatRequest &req) {
    std::string key;
    for (const auto &m : req.messages) {
        key += m.role;
        key += '\x1f';
        key += m.content;
        key += '\x1e';
    }
    return text::hex64(text::fnv1a64(key));
}

std::string to_wire_json(const BackendConfig &cfg, const ChatRequest &req) {
    json body;
    body["model"] = cfg.model_id;
    body["temperature"] = req.temperature.value_or(cfg.temperature);
    body["messages"] = json::array();
    for (const auto &m : req.messages) body["messages"].push_back({{"role", m.role}, {"content", m.content}});
    if (cfg.audio_capable && req.audio_base64) body["audio"] = {{"data", *req.audio_base64}, {"format", "wav"}};
    return body.dump();
}

ChatResponse parse_wire_response(std::string_view body) {
    auto j = json::parse(body, nullptr, false);
    auto malformed = [](std::string why) { return Error(Errc::kMalformedResponse, std::move(why)); };
    if (j.is_discarded() || !j.is_object()) throw malformed("response is not a JSON object");
    if (!j.contains("choices") || !j["choices"].is_array() || j["choices"].empty()) {
        throw malformed("response has no choices");
    }
    const json &choice = j["choices"][0];
    ChatResponse out;
    if (choice.contains("message") && choice["message"].is_object()) {
        const json &content = choice["message"].value("content", json());
        if (content.is_string()) out.text = content.get<std::string>();
        else if (!content.is_null()) throw malformed("message content is not a string");
    } else {
        throw malformed("choice has no message");
    }
    if (choice.contains("finish_reason") && choice["finish_reason"].is_string()) {
        out.finish_reason = choice["finish_reason"].get<std::string>();
    }
    if (j.contains("usage") && j["usage"].is_object()) {
        out.usage.prompt_tokens = j["usage"].value("prompt_tokens", 0L);
        out.usage.completion_tokens = j["usage"].value("completion_tokens", 0L);
    }
    if (out.text.empty() && (out.finish_reason.empty() || out.finish_reason == "stop")) {
        throw malformed("empty completion with a normal finish reason");
    }
    return out;
}

std::string post_json(const BackendConfig &cfg, std::string_view path, const std::string &body,
                      std::vector<std::string> *attempt_log) {
    cfg.validate();
    SplitUrl url = split_url(cfg.base_url);
    httplib::Client client(url.host);
    auto timeout = std::chrono::duration_cast<std::chrono::microseconds>(
        std::chrono::duration<double>(cfg.timeout_s));
    client.set_connection_timeout(timeout);
    client.set_read_timeout(timeout);
    client.set_write_timeout(timeout);

    httplib::Headers headers;
    if (!cfg.api_key.empty()) headers.emplace("Authorization", "Bearer " + cfg.api_key);
    const std::string target = url.prefix + std::string(path);

    std::vector<std::string> local_log;
    std::vector<std::string> &log = attempt_log ? *attempt_log : local_log;
    std::optional<Error> last;
    for (int attempt = 0; attempt <= cfg.retries; ++attempt) {
        if (attempt > 0) {
            std::this_thread::sleep_for(std::chrono::duration<double>(cfg.backoff_s * double(1 << (attempt - 1))));
        }
        auto res = client.Post(target, headers, body, "application/json");
        if (!res) {
            auto err = res.error();
            log.push_back(fmt::format("attempt {}: transport error {}", attempt + 1, httplib::to_string(err)));
            bool timed_out = err == httplib::Error::Read || err == httplib::Error::Write ||
                             err == httplib::Error::ConnectionTimeout;
            last.emplace(timed_out ? Errc::kTimeout : Errc::kHttpError, httplib::to_string(err));
            continue;
        }
        log.push_back(fmt::format("attempt {}: status {}", attempt + 1, res->status));
        if (res->status >= 200 && res->status < 300) return res->body;

        Error e = res->status == 429 ? Error(Errc::kRateLimited, fmt::format("status 429 from {}", target))
                                     : Error(Errc::kHttpError, fmt::format("status {} from {}", res->status, target));
        e.status = res->status;
        if (!retryable_status(res->status)) throw e;
        last = std::move(e);
    }
    Error final_error(last->code(), fmt::format("{} [{}]", last->what(), text::join(log, "; ")));
    final_error.status = last->status;
    throw final_error;
}

struct HttpChatBackend::Gate {
    explicit Gate(int n) : sem(n) {}
    Semaphore sem;
};

HttpChatBackend::HttpChatBackend(BackendConfig cfg) : m_cfg(std::move(cfg)) {
    m_cfg.validate();
    m_gate = std::make_unique<Gate>(m_cfg.max_parallel);
}

HttpChatBackend::~HttpChatBackend() = default;

ChatResponse HttpChatBackend::complete(const ChatRequest &req) {
    if (req.messages.empty()) throw Error(Errc::kConfigError, "messages", "request has no messages");
    SemaphoreGuard guard(m_gate->sem);
    std::vector<std::string> log;
    std::string body = post_json(m_cfg, "/chat/completions", to_wire_json(m_cfg, req), &log);
    ChatResponse out = parse_wire_response(body);
    out.attempts = static_cast<int>(log.size());
    out.attempt_log = std::move(log);
    return out;
}

ChatResponse chat_complete(const BackendConfig &cfg, const ChatRequest &req) {
    static std::mutex mu;
    static std::map<std::string, std::shared_ptr<HttpChatBackend>> registry;
    std::shared_ptr<HttpChatBackend> backend;
    {
        std::lock_guard lock(mu);
        auto key = fmt::format("{}|{}|{}|{}|{}|{}|{}|{}", cfg.base_url, cfg.model_id, cfg.max_parallel,
                               cfg.retries, cfg.timeout_s, cfg.temperature, cfg.backoff_s, cfg.audio_capable);
        auto &slot = registry[key];
        if (!slot) slot = std::make_shared<HttpChatBackend>(cfg);
        backend = slot;
    }
    return backend->complete(req);
}

MockScript MockScript::parse(std::string_view json_text) {
    json j = parse_json_or_config_error(json_text, "mock script");
    if (!j.is_object()) throw Error(Errc::kConfigError, "mock script", "must be an object");
    MockScript s;
    try {
        if (j.contains("default") && !j["default"].is_null()) s.default_response = j["default"].get<std::string>();
        if (j.contains("responses")) {
            for (const auto &[k, v] : j["responses"].items()) s.by_hash[k] = v.get<std::string>();
        }
        if (j.contains("rules")) {
            for (const auto &r : j["rules"]) {
                MockRule rule;
                if (r.contains("contains")) {
                    const auto &c = r["contains"];
                    if (c.is_string()) rule.contains.push_back(c.get<std::string>());
                    else rule.contains = c.get<std::vector<std::string>>();
                }
                rule.choices = r.at("choices").get<std::vector<std::string>>();
                if (rule.choices.empty()) throw Error(Errc::kConfigError, "rules", "rule without choices");
                s.rules.push_back(std::move(rule));
            }
        }
        if (j.contains("fail_calls")) {
            for (const auto &n : j["fail_calls"]) s.fail_calls.insert(n.get<std::size_t>());
        }
        if (j.contains("fail_hashes")) {
            for (const auto &h : j["fail_hashes"]) s.fail_hashes.insert(h.get<std::string>());
        }
        s.max_parallel = j.value("max_parallel", 1);
        s.delay = std::chrono::milliseconds(j.value("delay_ms", 0));
    } catch (const json::exception &e) {
        throw Error(Errc::kConfigError, "mock script", e.what());
    }
    if (s.max_parallel < 1) throw Error(Errc::kConfigError, "max_parallel", "must be >= 1");
    return s;
}

MockScript MockScript::load(const std::filesystem::path &path) { return parse(read_file(path)); }

MockBackend::MockBackend(MockScript script) : m_script(std::move(script)) {}

ChatResponse MockBackend::complete(const ChatRequest &req) {
    const std::size_t call = ++m_calls;
    int now = ++m_in_flight;
    int peak = m_peak.load();
    while (now > peak && !m_peak.compare_exchange_weak(peak, now)) {
    }
    struct Leave {
        std::atomic<int> &n;
        ~Leave() { --n; }
    } leave{m_in_flight};

    if (m_script.delay.count() > 0) std::this_thread::sleep_for(m_script.delay);

    const std::string hash = request_hash(req);
    if (m_script.fail_calls.contains(call) || m_script.fail_hashes.contains(hash)) {
        Error e(Errc::kHttpError, fmt::format("injected fault on call {} ({})", call, hash));
        e.status = 500;
        throw e;
    }

    ChatResponse out;
    out.finish_reason = "stop";
    out.attempt_log = {"mock: " + hash};
    if (auto it = m_script.by_hash.find(hash); it != m_script.by_hash.end()) {
        out.text = it->second;
        return out;
    }
    std::string joined;
    for (const auto &m : req.messages) {
        joined += m.content;
        joined += '\n';
    }
    for (const auto &rule : m_script.rules) {
        bool hit = std::all_of(rule.contains.begin(), rule.contains.end(),
                               [&](const std::string &c) { return joined.find(c) != std::string::npos; });
        if (!hit) continue;
        out.text = rule.choices[text::fnv1a64(hash) % rule.choices.size()];
        return out;
    }
    if (m_script.default_response) {
        out.text = *m_script.default_response;
        return out;
    }
    throw Error(Errc::kBackendFailure, "mock script has no response for request " + hash);
}

BackendConfig parse_backend_config(std::string_view json_text) {
    json j = parse_json_or_config_error(json_text, "backend config");
    BackendConfig cfg;
    try {
        cfg.base_url = j.at("base_url").get<std::string>();
        cfg.model_id = j.value("model", std::string());
        cfg.max_parallel = j.value("max_parallel", cfg.max_parallel);
        cfg.timeout_s = j.value("timeout", cfg.timeout_s);
        cfg.retries = j.value("retries", cfg.retries);
        cfg.temperature = j.value("temperature", cfg.temperature);
        cfg.backoff_s = j.value("backoff", cfg.backoff_s);
        cfg.audio_capable = j.value("audio_capable", cfg.audio_capable);
    } catch (const json::exception &e) {
        throw Error(Errc::kConfigError, "backend config", e.what());
    }
    if (j.contains("api_key")) {
        throw Error(Errc::kConfigError, "api_key", fmt::format("secrets belong in {}, not in config files", kApiKeyEnv));
    }
    if (const char *key = std::getenv(kApiKeyEnv)) cfg.api_key = key;
    cfg.validate();
    return cfg;
}

std::unique_ptr<ChatBackend> make_backend(std::string_view json_text, const std::filesystem::path &base_dir) {
    json j = parse_json_or_config_error(json_text, "backend config");
    std::string kind = j.value("kind", std::string("http"));
    if (kind == "mock") {
        if (!j.contains("script")) throw Error(Errc::kConfigError, "script", "mock backend needs a script");
        const json &script = j["script"];
        if (script.is_string()) {
            std::filesystem::path p = script.get<std::string>();
            if (p.is_relative()) p = base_dir / p;
            return std::make_unique<MockBackend>(MockScript::load(p));
        }
        return std::make_unique<MockBackend>(MockScript::parse(script.dump()));
    }
    if (kind == "http") return std::make_unique<HttpChatBackend>(parse_backend_config(json_text));
    throw Error(Errc::kConfigError, "kind", "unknown backend kind " + kind);
}

std::unique_ptr<ChatBackend> load_backend(const std::filesystem::path &config_file) {
    return make_backend(read_file(config_file), config_file.parent_path());
}

} // namespace ceaeval::llm
