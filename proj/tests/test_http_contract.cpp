// Contract test for the live HTTP backend wire format. Requires
// LMKEX_API_KEY; without it the suite stays fully offline and these
// checks are skipped. With the key set, the test targets LMKEX_ENDPOINT
// when given, or an in-process emulator speaking the documented format.
#include "lmkex/backend.hpp"

#include <doctest.h>
#include <httplib.h>
#include <json.hpp>

#include <atomic>
#include <cstdlib>
#include <thread>

using namespace lmkex;
using nlohmann::json;

namespace {

PromptSpec generative_spec(const std::string& text, int n) {
    PromptSpec spec;
    spec.text = text;
    spec.target_class = ModelClass::Generative;
    spec.schema = SchemaKind::FreeText;
    spec.params.n_samples = n;
    spec.params.max_tokens = 16;
    spec.params.temperature = 0.2;
    return spec;
}

PromptSpec masked_spec(const std::string& text, int top_k) {
    PromptSpec spec;
    spec.text = text;
    spec.target_class = ModelClass::Masked;
    spec.schema = SchemaKind::MaskLexicon;
    spec.relation = RelationKind::AlsoKnownAs;
    spec.params.top_k = top_k;
    return spec;
}

struct Emulator {
    httplib::Server server;
    std::thread thread;
    int port = 0;
    std::atomic<int> complete_failures_left{0};
    std::string last_authorization;

    Emulator() {
        server.Post("/complete", [this](const httplib::Request& req, httplib::Response& res) {
            last_authorization = req.get_header_value("Authorization");
            if (complete_failures_left.fetch_sub(1) > 0) {
                res.status = 503;
                return;
            }
            const json body = json::parse(req.body);
            json choices = json::array();
            for (int i = 0; i < body.at("n").get<int>(); ++i) {
                choices.push_back({{"text", "completion " + std::to_string(i)}});
            }
            res.set_content(json{{"choices", choices}}.dump(), "application/json");
        });
        server.Post("/fill_mask", [](const httplib::Request& req, httplib::Response& res) {
            const json body = json::parse(req.body);
            json candidates = json::array();
            const int k = body.at("top_k").get<int>();
            for (int i = 0; i < k; ++i) {
                candidates.push_back(
                    {{"token", "token" + std::to_string(i)}, {"score", 1.0 - 0.1 * i}});
            }
            res.set_content(json{{"candidates", candidates}}.dump(), "application/json");
        });
        port = server.bind_to_any_port("127.0.0.1");
        thread = std::thread([this] { server.listen_after_bind(); });
        server.wait_until_ready();
    }

    ~Emulator() {
        server.stop();
        if (thread.joinable()) {
            thread.join();
        }
    }

    std::string endpoint() const { return "http://127.0.0.1:" + std::to_string(port); }
};

} // namespace

TEST_CASE("live backend contract (needs LMKEX_API_KEY)") {
    if (!std::getenv("LMKEX_API_KEY")) {
        MESSAGE("LMKEX_API_KEY unset; skipping live-backend contract checks");
        return;
    }

    const char* remote = std::getenv("LMKEX_ENDPOINT");
    if (remote) {
        // Real hosted endpoint: just exercise both request kinds.
        HttpBackend backend("live", remote);
        const GenerativeResponse resp = backend.complete(generative_spec("Say hello.", 1));
        CHECK(resp.samples.size() == 1);
        return;
    }

    Emulator emulator;

    SUBCASE("completion round-trip carries the sample count and bearer token") {
        HttpBackend backend("emulated", emulator.endpoint());
        const GenerativeResponse resp =
            backend.complete(generative_spec("The warehouse robot charges in the", 3));
        REQUIRE(resp.samples.size() == 3);
        CHECK(resp.samples[0] == "completion 0");
        CHECK(emulator.last_authorization.rfind("Bearer ", 0) == 0);
    }

    SUBCASE("fill-mask round-trip honors top_k and score ordering") {
        HttpBackend backend("emulated", emulator.endpoint());
        const MaskedResponse resp = backend.fill_mask(masked_spec("A bay is used for <mask>.", 4));
        REQUIRE(resp.candidates.size() == 4);
        CHECK(resp.candidates[0].first == "token0");
        CHECK(resp.candidates[0].second > resp.candidates[3].second);
    }

    SUBCASE("transient server errors are retried within the budget") {
        emulator.complete_failures_left = 2;
        auto inner = std::make_shared<HttpBackend>("emulated", emulator.endpoint());
        RetryingBackend backend(inner, RetryPolicy{3, std::chrono::milliseconds(5), 2.0},
                                /*sleep_between=*/false);
        const GenerativeResponse resp = backend.complete(generative_spec("retry me", 1));
        CHECK(resp.samples.size() == 1);
    }
}
