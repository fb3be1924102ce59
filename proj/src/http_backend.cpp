#include "lmkex/backend.hpp"

#include "lmkex/errors.hpp"

#include <httplib.h>
#include <json.hpp>

#include <chrono>
#include <cstdlib>

namespace lmkex {

using nlohmann::json;

struct HttpBackend::Impl {
    std::string scheme_host_port;
    std::string base_path;
    std::chrono::seconds timeout{30};
    std::string mask_token;

    httplib::Result post(const std::string& path, const std::string& body) {
        httplib::Client client(scheme_host_port);
        client.set_connection_timeout(timeout.count(), 0);
        client.set_read_timeout(timeout.count(), 0);
        httplib::Headers headers;
        if (const char* key = std::getenv("LMKEX_API_KEY")) {
            headers.emplace("Authorization", std::string("Bearer ") + key);
        }
        return client.Post((base_path + path).c_str(), headers, body, "application/json");
    }
};

namespace {

// Splits "http://host:port/some/base" into client target and path prefix.
void split_endpoint(const std::string& endpoint, std::string& scheme_host_port,
                    std::string& base_path) {
    const std::size_t scheme = endpoint.find("://");
    const std::size_t path_start =
        endpoint.find('/', scheme == std::string::npos ? 0 : scheme + 3);
    if (path_start == std::string::npos) {
        scheme_host_port = endpoint;
        base_path.clear();
        return;
    }
    scheme_host_port = endpoint.substr(0, path_start);
    base_path = endpoint.substr(path_start);
    if (!base_path.empty() && base_path.back() == '/') {
        base_path.pop_back();
    }
}

json parse_response(const httplib::Result& res, const std::string& what) {
    if (!res) {
        const auto code = res.error();
        if (code == httplib::Error::ConnectionTimeout || code == httplib::Error::Read ||
            code == httplib::Error::Write) {
            throw TimeoutError(what + ": transport timeout");
        }
        throw BackendError(what + ": transport failure (" + httplib::to_string(code) + ")");
    }
    if (res->status >= 500) {
        throw BackendError(what + ": server error " + std::to_string(res->status));
    }
    if (res->status != 200) {
        throw BackendError(what + ": unexpected status " + std::to_string(res->status),
                           /*retryable=*/false);
    }
    try {
        return json::parse(res->body);
    } catch (const json::exception& e) {
        throw BackendError(what + ": bad response body: " + e.what(), /*retryable=*/false);
    }
}

} // namespace

HttpBackend::HttpBackend(std::string lm_id, std::string endpoint, std::chrono::seconds timeout,
                         std::string mask_token)
    : lm_id_(std::move(lm_id)), impl_(std::make_unique<Impl>()) {
    split_endpoint(endpoint, impl_->scheme_host_port, impl_->base_path);
    impl_->timeout = timeout;
    impl_->mask_token = std::move(mask_token);
}

HttpBackend::~HttpBackend() = default;

GenerativeResponse HttpBackend::complete(const PromptSpec& spec) {
    check_generative_request(spec);
    const json body{{"prompt", spec.text},
                    {"max_tokens", spec.params.max_tokens},
                    {"temperature", spec.params.temperature},
                    {"n", spec.params.n_samples}};
    const auto started = std::chrono::steady_clock::now();
    auto res = impl_->post("/complete", body.dump());
    const json doc = parse_response(res, "complete");
    GenerativeResponse out;
    out.lm_id = lm_id_;
    out.elapsed_ms = std::chrono::duration_cast<std::chrono::milliseconds>(
                         std::chrono::steady_clock::now() - started)
                         .count();
    try {
        for (const json& choice : doc.at("choices")) {
            std::string text = choice.at("text").get<std::string>();
            // Some services echo the prompt; completions must not include it.
            if (text.rfind(spec.text, 0) == 0) {
                text.erase(0, spec.text.size());
                while (!text.empty() && text.front() == ' ') {
                    text.erase(text.begin());
                }
            }
            out.samples.push_back(std::move(text));
        }
    } catch (const json::exception& e) {
        throw BackendError(std::string("complete: malformed choices: ") + e.what(),
                           /*retryable=*/false);
    }
    if (static_cast<int>(out.samples.size()) != spec.params.n_samples) {
        throw BackendError("complete: expected " + std::to_string(spec.params.n_samples) +
                               " samples, got " + std::to_string(out.samples.size()),
                           /*retryable=*/false);
    }
    return out;
}

MaskedResponse HttpBackend::fill_mask(const PromptSpec& spec) {
    check_masked_request(spec);
    const json body{{"prompt", apply_mask_token(spec.text, impl_->mask_token)},
                    {"top_k", spec.params.top_k}};
    auto res = impl_->post("/fill_mask", body.dump());
    const json doc = parse_response(res, "fill_mask");
    MaskedResponse out;
    out.lm_id = lm_id_;
    try {
        for (const json& c : doc.at("candidates")) {
            out.candidates.emplace_back(c.at("token").get<std::string>(),
                                        c.at("score").get<double>());
        }
    } catch (const json::exception& e) {
        throw BackendError(std::string("fill_mask: malformed candidates: ") + e.what(),
                           /*retryable=*/false);
    }
    std::stable_sort(out.candidates.begin(), out.candidates.end(),
                     [](const auto& a, const auto& b) { return a.second > b.second; });
    if (static_cast<int>(out.candidates.size()) > spec.params.top_k) {
        out.candidates.resize(spec.params.top_k);
    }
    return out;
}

} // namespace lmkex
