#pragma once

// Generator client: one completion request per prompt, retried with
// exponential backoff on transient failures, with a global bound on in-flight
// requests. Backends are selected by endpoint scheme:
//   mock://rules[?seed=N]   offline rule-based paraphrase / inversion backend
//   http://... https://...  JSON completion API (field names per BackendProfile)

#include "mind/cleaning.hpp"
#include "mind/mock_rules.hpp"

#include <httplib.h>
#ifdef _res
#undef _res  // <resolv.h> macro; collides with Eigen parameter names
#endif
#include <nlohmann/json.hpp>

#include <atomic>
#include <chrono>
#include <functional>
#include <memory>
#include <mutex>
#include <semaphore>
#include <string>
#include <thread>
#include <variant>
#include <vector>

namespace mind {

/// Request/response field names of a completion API.
struct BackendProfile {
    std::string model_field = "model";
    std::string prompt_field = "prompt";
    std::string temperature_field = "temperature";
    std::string max_tokens_field = "max_tokens";
    /// JSON pointer to the completion text in the response body.
    std::string response_pointer = "/choices/0/text";

    static BackendProfile named(const std::string& name) {
        if (name == "completions") return {};
        if (name == "ollama") return {"model", "prompt", "temperature", "num_predict", "/response"};
        if (name == "raw") return {"model", "prompt", "temperature", "max_tokens", ""};
        throw ConfigError("unknown backend profile '" + name + "'");
    }
};

struct GeneratorConfig {
    std::string endpoint = "mock://rules";
    std::string model_id = "mock-rules";
    int max_attempts = 3;
    std::chrono::milliseconds request_timeout{30000};
    int max_parallel = 4;
    double temperature = 0.7;
    int max_tokens = 2048;
    std::chrono::milliseconds initial_backoff{500};
    double backoff_factor = 2.0;
    /// 0 disables the request-rate limit.
    double max_requests_per_second = 0.0;
    std::uint64_t seed = 0;
    BackendProfile profile;

    void validate() const {
        if (max_attempts < 1) throw ConfigError("max_attempts must be >= 1");
        if (max_parallel < 1) throw ConfigError("max_parallel must be >= 1");
        if (temperature < 0) throw ConfigError("temperature must be >= 0");
        if (backoff_factor < 1.0) throw ConfigError("backoff_factor must be >= 1");
        if (endpoint.empty()) throw ConfigError("endpoint must be set");
    }
};

struct CompletionRequest {
    std::string prompt;
    std::uint64_t nonce = 0;
};

/// HTTP-level outcome. `text` is the completion on success and the raw body otherwise.
struct CompletionReply {
    int status = 200;
    std::string text;
};

/// Thrown by backends when no response was obtained at all.
class ConnectionFailure : public Error {
public:
    using Error::Error;
};

class CompletionBackend {
public:
    virtual ~CompletionBackend() = default;
    virtual std::string id() const = 0;
    virtual CompletionReply send(const CompletionRequest& req) = 0;
};

class RuleBackend final : public CompletionBackend {
public:
    explicit RuleBackend(std::uint64_t seed) : seed_(seed) {}
    std::string id() const override { return "mock-rules"; }
    CompletionReply send(const CompletionRequest& req) override {
        return {200, rules::respond(req.prompt, seed_, req.nonce)};
    }

private:
    std::uint64_t seed_;
};

/// Replays a fixed transcript; the last step repeats once the script runs out.
class ScriptedBackend final : public CompletionBackend {
public:
    struct Drop {};
    using Step = std::variant<CompletionReply, Drop>;

    explicit ScriptedBackend(std::vector<Step> script) : script_(std::move(script)) {
        if (script_.empty()) throw ConfigError("empty script");
    }
    std::string id() const override { return "scripted"; }
    CompletionReply send(const CompletionRequest&) override {
        std::lock_guard lock(mu_);
        const Step& step = script_[std::min(calls_, script_.size() - 1)];
        ++calls_;
        if (std::holds_alternative<Drop>(step)) throw ConnectionFailure("scripted connection drop");
        return std::get<CompletionReply>(step);
    }
    std::size_t calls() const {
        std::lock_guard lock(mu_);
        return calls_;
    }

private:
    std::vector<Step> script_;
    mutable std::mutex mu_;
    std::size_t calls_ = 0;
};

class HttpBackend final : public CompletionBackend {
public:
    explicit HttpBackend(const GeneratorConfig& cfg) : cfg_(cfg) {
        const auto scheme_end = cfg.endpoint.find("://");
        if (scheme_end == std::string::npos) throw ConfigError("endpoint has no scheme: " + cfg.endpoint);
        const auto path_begin = cfg.endpoint.find('/', scheme_end + 3);
        origin_ = cfg.endpoint.substr(0, path_begin);
        path_ = path_begin == std::string::npos ? "/" : cfg.endpoint.substr(path_begin);
    }

    std::string id() const override { return cfg_.model_id; }

    CompletionReply send(const CompletionRequest& req) override {
        httplib::Client client(origin_);
        const auto secs = std::chrono::duration_cast<std::chrono::seconds>(cfg_.request_timeout);
        const auto usecs = std::chrono::duration_cast<std::chrono::microseconds>(cfg_.request_timeout - secs);
        client.set_connection_timeout(secs.count(), usecs.count());
        client.set_read_timeout(secs.count(), usecs.count());
        client.set_write_timeout(secs.count(), usecs.count());

        nlohmann::json body;
        body[cfg_.profile.model_field] = cfg_.model_id;
        body[cfg_.profile.prompt_field] = req.prompt;
        body[cfg_.profile.temperature_field] = cfg_.temperature;
        body[cfg_.profile.max_tokens_field] = cfg_.max_tokens;
        auto res = client.Post(path_, body.dump(), "application/json");
        if (!res) throw ConnectionFailure("request to " + cfg_.endpoint + " failed: " + httplib::to_string(res.error()));
        if (res->status != 200) return {res->status, res->body};
        if (cfg_.profile.response_pointer.empty()) return {200, res->body};
        try {
            const auto j = nlohmann::json::parse(res->body);
            return {200, j.at(nlohmann::json::json_pointer(cfg_.profile.response_pointer)).get<std::string>()};
        } catch (const std::exception& e) {
            throw BackendError(res->status, std::string("unparseable completion: ") + e.what());
        }
    }

private:
    GeneratorConfig cfg_;
    std::string origin_;
    std::string path_;
};

inline std::unique_ptr<CompletionBackend> make_backend(const GeneratorConfig& cfg) {
    if (cfg.endpoint.starts_with("mock://")) {
        std::uint64_t seed = cfg.seed;
        if (auto q = cfg.endpoint.find("seed="); q != std::string::npos) seed = std::stoull(cfg.endpoint.substr(q + 5));
        return std::make_unique<RuleBackend>(seed);
    }
    if (cfg.endpoint.starts_with("http://") || cfg.endpoint.starts_with("https://"))
        return std::make_unique<HttpBackend>(cfg);
    throw ConfigError("unsupported endpoint scheme: " + cfg.endpoint);
}

inline bool is_transient_status(int status) { return status == 408 || status == 429 || status >= 500; }

class GeneratorClient {
public:
    using Sleeper = std::function<void(std::chrono::milliseconds)>;

    GeneratorClient(GeneratorConfig cfg, std::shared_ptr<CompletionBackend> backend,
                    Sleeper sleeper = [](std::chrono::milliseconds d) { std::this_thread::sleep_for(d); })
        : cfg_((cfg.validate(), std::move(cfg))),
          backend_(std::move(backend)),
          sleeper_(std::move(sleeper)),
          slots_(cfg_.max_parallel) {}

    explicit GeneratorClient(const GeneratorConfig& cfg) : GeneratorClient(cfg, make_backend(cfg)) {}

    const GeneratorConfig& config() const { return cfg_; }
    std::string generator_id() const { return backend_->id(); }
    std::size_t requests_sent() const { return requests_.load(); }
    int peak_in_flight() const { return peak_.load(); }

    RawBatch generate(const std::string& prompt, std::uint64_t nonce = 0) {
        const std::string digest = sha256_hex(prompt);
        std::string last_failure;
        for (int attempt = 1; attempt <= cfg_.max_attempts; ++attempt) {
            if (attempt > 1) sleeper_(backoff(attempt - 1));
            try {
                const CompletionReply reply = send_bounded({prompt, nonce});
                if (reply.status == 200) return {digest, reply.text};
                if (!is_transient_status(reply.status)) throw BackendError(reply.status, reply.text.substr(0, 200));
                last_failure = "status " + std::to_string(reply.status) + ": " + reply.text.substr(0, 200);
            } catch (const ConnectionFailure& e) {
                last_failure = e.what();
            }
        }
        throw TransportError("generation failed after " + std::to_string(cfg_.max_attempts) +
                                 " attempts; last failure: " + last_failure,
                             cfg_.max_attempts);
    }

    std::chrono::milliseconds backoff(int retry) const {
        double ms = static_cast<double>(cfg_.initial_backoff.count());
        for (int i = 1; i < retry; ++i) ms *= cfg_.backoff_factor;
        return std::chrono::milliseconds(static_cast<long long>(ms));
    }

private:
    CompletionReply send_bounded(const CompletionRequest& req) {
        slots_.acquire();
        struct Release {
            GeneratorClient* self;
            ~Release() {
                self->in_flight_.fetch_sub(1);
                self->slots_.release();
            }
        } release{this};
        const int now = in_flight_.fetch_add(1) + 1;
        for (int peak = peak_.load(); now > peak && !peak_.compare_exchange_weak(peak, now);) {
        }
        throttle();
        ++requests_;
        return backend_->send(req);
    }

    void throttle() {
        if (cfg_.max_requests_per_second <= 0) return;
        const auto interval = std::chrono::duration_cast<std::chrono::steady_clock::duration>(
            std::chrono::duration<double>(1.0 / cfg_.max_requests_per_second));
        std::chrono::steady_clock::time_point slot;
        {
            std::lock_guard lock(rate_mu_);
            const auto now = std::chrono::steady_clock::now();
            slot = std::max(now, next_slot_);
            next_slot_ = slot + interval;
        }
        std::this_thread::sleep_until(slot);
    }

    GeneratorConfig cfg_;
    std::shared_ptr<CompletionBackend> backend_;
    Sleeper sleeper_;
    std::counting_semaphore<> slots_;
    std::atomic<int> in_flight_{0};
    std::atomic<int> peak_{0};
    std::atomic<std::size_t> requests_{0};
    std::mutex rate_mu_;
    std::chrono::steady_clock::time_point next_slot_{};
};

/// One-shot generation with a client built from `cfg`.
inline RawBatch generate(const std::string& prompt, const GeneratorConfig& cfg) {
    GeneratorClient client(cfg);
    return client.generate(prompt);
}

}  // namespace mind
