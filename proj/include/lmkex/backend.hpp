// Uniform access to masked and generative LM services, plus a
// deterministic scripted backend for offline, reproducible runs.
#pragma once

#include "lmkex/prompt_spec.hpp"
#include "lmkex/types.hpp"

#include <chrono>
#include <filesystem>
#include <map>
#include <memory>
#include <string>
#include <utility>
#include <vector>

namespace lmkex {

struct GenerativeResponse {
    std::vector<std::string> samples; // one completion per requested sample
    std::string lm_id;
    long elapsed_ms = 0;
};

struct MaskedResponse {
    std::vector<std::pair<std::string, double>> candidates; // (token, score), scores non-increasing
    std::string lm_id;
};

class Backend {
public:
    virtual ~Backend() = default;
    virtual const std::string& lm_id() const = 0;

    // Requires spec.target_class == generative. Completions never include
    // the prompt text.
    virtual GenerativeResponse complete(const PromptSpec& spec) = 0;

    // Requires spec.target_class == masked and exactly one mask marker.
    virtual MaskedResponse fill_mask(const PromptSpec& spec) = 0;
};

// Validations shared by every backend; throw UsageError.
void check_generative_request(const PromptSpec& spec);
void check_masked_request(const PromptSpec& spec);

// Collapse whitespace runs and trim; the scripted backend matches prompts
// on this normalized form.
std::string normalize_prompt_key(const std::string& text);

// Templates carry the model-agnostic "<mask>" marker; a backend with a
// native mask token (e.g. "[MASK]") swaps it in on the way out.
std::string apply_mask_token(const std::string& text, const std::string& native_token);

// Replays recorded responses for exact (whitespace-normalized) prompt
// matches. Immutable after load, so safe for concurrent requests.
//
// Script file: JSON array of {"prompt": string, "responses": [string]}
// or {"prompt": string, "candidates": [[token, score], ...]}.
class ScriptedBackend : public Backend {
public:
    static std::shared_ptr<ScriptedBackend> load(const std::filesystem::path& path,
                                                 std::string lm_id);
    static std::shared_ptr<ScriptedBackend> from_json_text(const std::string& text,
                                                           std::string lm_id);

    const std::string& lm_id() const override { return lm_id_; }
    GenerativeResponse complete(const PromptSpec& spec) override;
    MaskedResponse fill_mask(const PromptSpec& spec) override;

private:
    struct Entry {
        std::vector<std::string> responses;
        std::vector<std::pair<std::string, double>> candidates;
    };

    std::string lm_id_;
    std::map<std::string, Entry> entries_;
};

struct RetryPolicy {
    int max_attempts = 3;
    std::chrono::milliseconds initial_backoff{200};
    double backoff_factor = 2.0;
};

// Wraps any backend with bounded retries on retryable errors. Never
// retries UsageError/NotFoundError or a BackendError marked non-retryable.
class RetryingBackend : public Backend {
public:
    RetryingBackend(std::shared_ptr<Backend> inner, RetryPolicy policy, bool sleep_between = true);

    const std::string& lm_id() const override { return inner_->lm_id(); }
    GenerativeResponse complete(const PromptSpec& spec) override;
    MaskedResponse fill_mask(const PromptSpec& spec) override;

private:
    template <typename Fn>
    auto with_retries(Fn&& fn) -> decltype(fn());

    std::shared_ptr<Backend> inner_;
    RetryPolicy policy_;
    bool sleep_between_;
};

// Talks to a hosted LM endpoint.
//   POST <endpoint>/complete  {"prompt","max_tokens","temperature","n"}
//                            -> {"choices":[{"text":...}, ...]}
//   POST <endpoint>/fill_mask {"prompt","top_k"}
//                            -> {"candidates":[{"token":...,"score":...}, ...]}
// Credentials come from the LMKEX_API_KEY environment variable and are
// sent as a bearer token.
class HttpBackend : public Backend {
public:
    HttpBackend(std::string lm_id, std::string endpoint,
                std::chrono::seconds timeout = std::chrono::seconds(30),
                std::string mask_token = "");
    ~HttpBackend() override;

    const std::string& lm_id() const override { return lm_id_; }
    GenerativeResponse complete(const PromptSpec& spec) override;
    MaskedResponse fill_mask(const PromptSpec& spec) override;

private:
    struct Impl;
    std::string lm_id_;
    std::unique_ptr<Impl> impl_;
};

} // namespace lmkex
