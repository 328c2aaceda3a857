#include "mind/generator.hpp"

#include <gtest/gtest.h>

#include <atomic>
#include <thread>

using namespace mind;

namespace {

// Local completion server on an ephemeral port.
class LocalServer {
public:
    explicit LocalServer(httplib::Server::Handler handler) {
        server_.Post("/v1/completions", std::move(handler));
        port_ = server_.bind_to_any_port("127.0.0.1");
        thread_ = std::thread([this] { server_.listen_after_bind(); });
        server_.wait_until_ready();
    }
    ~LocalServer() {
        server_.stop();
        thread_.join();
    }
    std::string endpoint() const { return "http://127.0.0.1:" + std::to_string(port_) + "/v1/completions"; }

private:
    httplib::Server server_;
    int port_ = 0;
    std::thread thread_;
};

GeneratorConfig http_config(const std::string& endpoint) {
    GeneratorConfig cfg;
    cfg.endpoint = endpoint;
    cfg.model_id = "test-model";
    cfg.request_timeout = std::chrono::milliseconds(2000);
    cfg.initial_backoff = std::chrono::milliseconds(1);
    return cfg;
}

// Backend that records how many calls overlap.
class SlowBackend final : public CompletionBackend {
public:
    std::string id() const override { return "slow"; }
    CompletionReply send(const CompletionRequest&) override {
        const int now = ++active_;
        for (int p = peak_.load(); now > p && !peak_.compare_exchange_weak(p, now);) {
        }
        std::this_thread::sleep_for(std::chrono::milliseconds(20));
        --active_;
        return {200, "done"};
    }
    int peak() const { return peak_.load(); }

private:
    std::atomic<int> active_{0};
    std::atomic<int> peak_{0};
};

}  // namespace

TEST(Http, FailureThenSuccess) {
    std::atomic<int> calls{0};
    nlohmann::json seen;
    LocalServer server([&](const httplib::Request& req, httplib::Response& res) {
        if (calls++ == 0) {
            res.status = 500;
            res.set_content("overloaded", "text/plain");
            return;
        }
        seen = nlohmann::json::parse(req.body);
        res.set_content(R"({"choices":[{"text":"Adjusted Solution: A\n\n~~~\n\nAdjusted Solution: B"}]})",
                        "application/json");
    });
    auto cfg = http_config(server.endpoint());
    cfg.max_attempts = 2;
    GeneratorClient client(cfg);
    const auto raw = client.generate("the prompt");
    EXPECT_EQ(calls.load(), 2);
    EXPECT_EQ(split_batch(raw), (std::vector<std::string>{"A", "B"}));
    EXPECT_EQ(seen["model"], "test-model");
    EXPECT_EQ(seen["prompt"], "the prompt");
    EXPECT_EQ(seen["max_tokens"], 2048);
}

TEST(Http, AlwaysFailingExhaustsAttempts) {
    std::atomic<int> calls{0};
    LocalServer server([&](const httplib::Request&, httplib::Response& res) {
        ++calls;
        res.status = 503;
    });
    auto cfg = http_config(server.endpoint());
    cfg.max_attempts = 3;
    GeneratorClient client(cfg);
    EXPECT_THROW(client.generate("p"), TransportError);
    EXPECT_EQ(calls.load(), 3);
}

TEST(Http, ClientErrorCarriesStatusAndBody) {
    LocalServer server([](const httplib::Request&, httplib::Response& res) {
        res.status = 401;
        res.set_content("missing api key", "text/plain");
    });
    GeneratorClient client(http_config(server.endpoint()));
    try {
        client.generate("p");
        FAIL();
    } catch (const BackendError& e) {
        EXPECT_EQ(e.status(), 401);
        EXPECT_EQ(e.body(), "missing api key");
    }
}

TEST(Http, UnparseableBodyIsBackendError) {
    LocalServer server([](const httplib::Request&, httplib::Response& res) { res.set_content("{}", "application/json"); });
    GeneratorClient client(http_config(server.endpoint()));
    EXPECT_THROW(client.generate("p"), BackendError);
}

TEST(Http, ProfileChangesFieldNames) {
    nlohmann::json seen;
    LocalServer server([&](const httplib::Request& req, httplib::Response& res) {
        seen = nlohmann::json::parse(req.body);
        res.set_content(R"({"response":"hello"})", "application/json");
    });
    auto cfg = http_config(server.endpoint());
    cfg.profile = BackendProfile::named("ollama");
    GeneratorClient client(cfg);
    EXPECT_EQ(client.generate("p").text, "hello");
    EXPECT_TRUE(seen.contains("num_predict"));
}

TEST(Http, UnreachableEndpointIsTransportError) {
    // Bind then release a port so nothing listens on it.
    int port = 0;
    {
        httplib::Server s;
        port = s.bind_to_any_port("127.0.0.1");
    }
    auto cfg = http_config("http://127.0.0.1:" + std::to_string(port) + "/v1/completions");
    cfg.max_attempts = 2;
    GeneratorClient client(cfg);
    try {
        client.generate("p");
        FAIL();
    } catch (const TransportError& e) {
        EXPECT_EQ(e.attempts(), 2);
    }
}

TEST(Concurrency, MaxParallelBoundsInFlightRequests) {
    auto backend = std::make_shared<SlowBackend>();
    GeneratorConfig cfg;
    cfg.max_parallel = 2;
    GeneratorClient client(cfg, backend);
    {
        std::vector<std::jthread> threads;
        for (int i = 0; i < 8; ++i) threads.emplace_back([&] { client.generate("p"); });
    }
    EXPECT_EQ(client.requests_sent(), 8u);
    EXPECT_LE(backend->peak(), 2);
    EXPECT_LE(client.peak_in_flight(), 2);
    EXPECT_EQ(backend->peak(), 2);
}

TEST(Concurrency, RateLimitSpacesRequests) {
    auto backend = std::make_shared<ScriptedBackend>(std::vector<ScriptedBackend::Step>{CompletionReply{200, "x"}});
    GeneratorConfig cfg;
    cfg.max_requests_per_second = 50.0;
    GeneratorClient client(cfg, backend);
    const auto t0 = std::chrono::steady_clock::now();
    for (int i = 0; i < 6; ++i) client.generate("p");
    const auto elapsed = std::chrono::steady_clock::now() - t0;
    EXPECT_GE(elapsed, std::chrono::milliseconds(95));
}

TEST(Backoff, GrowsGeometrically) {
    GeneratorConfig cfg;
    cfg.initial_backoff = std::chrono::milliseconds(100);
    cfg.backoff_factor = 3.0;
    GeneratorClient client(cfg, std::make_shared<RuleBackend>(0));
    EXPECT_EQ(client.backoff(1), std::chrono::milliseconds(100));
    EXPECT_EQ(client.backoff(2), std::chrono::milliseconds(300));
    EXPECT_EQ(client.backoff(3), std::chrono::milliseconds(900));
}
