#include "lmkex/backend.hpp"

#include "lmkex/errors.hpp"
#include "lmkex/prompt_engine.hpp"

#include <json.hpp>

#include <algorithm>
#include <cctype>
#include <fstream>
#include <sstream>
#include <thread>

namespace lmkex {

using nlohmann::json;

void check_generative_request(const PromptSpec& spec) {
    if (spec.target_class != ModelClass::Generative) {
        throw UsageError("complete() requires a generative prompt spec");
    }
    if (spec.params.n_samples < 1) {
        throw UsageError("n_samples must be >= 1");
    }
}

void check_masked_request(const PromptSpec& spec) {
    if (spec.target_class != ModelClass::Masked) {
        throw UsageError("fill_mask() requires a masked prompt spec");
    }
    const int masks = mask_count(spec.text);
    if (masks != 1) {
        throw UsageError("fill_mask() needs exactly one mask marker, found " +
                         std::to_string(masks));
    }
}

std::string apply_mask_token(const std::string& text, const std::string& native_token) {
    if (native_token.empty()) {
        return text;
    }
    std::string out = text;
    std::size_t pos = 0;
    const std::string marker = kMaskMarker;
    while ((pos = out.find(marker, pos)) != std::string::npos) {
        out.replace(pos, marker.size(), native_token);
        pos += native_token.size();
    }
    return out;
}

std::string normalize_prompt_key(const std::string& text) {
    std::string out;
    out.reserve(text.size());
    bool in_ws = true; // leading whitespace dropped
    for (unsigned char c : text) {
        if (std::isspace(c)) {
            in_ws = true;
            continue;
        }
        if (in_ws && !out.empty()) {
            out.push_back(' ');
        }
        in_ws = false;
        out.push_back(static_cast<char>(c));
    }
    return out;
}

namespace {

// Byte offset -> 1-based line number, for parse diagnostics.
int line_of_offset(const std::string& text, std::size_t offset) {
    int line = 1;
    for (std::size_t i = 0; i < offset && i < text.size(); ++i) {
        if (text[i] == '\n') {
            ++line;
        }
    }
    return line;
}

} // namespace

std::shared_ptr<ScriptedBackend> ScriptedBackend::from_json_text(const std::string& text,
                                                                 std::string lm_id) {
    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::parse_error& e) {
        throw ParseError(std::string("bad script JSON: ") + e.what(),
                         line_of_offset(text, e.byte));
    }
    if (!doc.is_array()) {
        throw ParseError("script must be a JSON array of entries", 1);
    }
    auto backend = std::make_shared<ScriptedBackend>();
    backend->lm_id_ = std::move(lm_id);
    for (const json& item : doc) {
        if (!item.is_object() || !item.contains("prompt")) {
            throw ParseError("script entry missing \"prompt\"", 1);
        }
        const std::string key = normalize_prompt_key(item.at("prompt").get<std::string>());
        if (backend->entries_.count(key)) {
            throw ParseError("duplicate script prompt: '" + key + "'", 1);
        }
        Entry entry;
        if (item.contains("responses")) {
            entry.responses = item.at("responses").get<std::vector<std::string>>();
        }
        if (item.contains("candidates")) {
            for (const json& c : item.at("candidates")) {
                entry.candidates.emplace_back(c.at(0).get<std::string>(), c.at(1).get<double>());
            }
            // Enforce the non-increasing score invariant.
            std::stable_sort(entry.candidates.begin(), entry.candidates.end(),
                             [](const auto& a, const auto& b) { return a.second > b.second; });
        }
        if (entry.responses.empty() && entry.candidates.empty()) {
            throw ParseError("script entry for '" + key + "' has neither responses nor candidates",
                             1);
        }
        backend->entries_[key] = std::move(entry);
    }
    return backend;
}

std::shared_ptr<ScriptedBackend> ScriptedBackend::load(const std::filesystem::path& path,
                                                       std::string lm_id) {
    std::ifstream in(path);
    if (!in) {
        throw ConfigError("cannot read script file '" + path.string() + "'");
    }
    std::ostringstream buf;
    buf << in.rdbuf();
    return from_json_text(buf.str(), std::move(lm_id));
}

GenerativeResponse ScriptedBackend::complete(const PromptSpec& spec) {
    check_generative_request(spec);
    auto it = entries_.find(normalize_prompt_key(spec.text));
    if (it == entries_.end() || it->second.responses.empty()) {
        throw NotFoundError("scripted backend has no completion for prompt: '" + spec.text + "'");
    }
    GenerativeResponse resp;
    resp.lm_id = lm_id_;
    const std::vector<std::string>& listed = it->second.responses;
    for (int i = 0; i < spec.params.n_samples; ++i) {
        resp.samples.push_back(listed[i % listed.size()]);
    }
    return resp;
}

MaskedResponse ScriptedBackend::fill_mask(const PromptSpec& spec) {
    check_masked_request(spec);
    auto it = entries_.find(normalize_prompt_key(spec.text));
    if (it == entries_.end() || it->second.candidates.empty()) {
        throw NotFoundError("scripted backend has no candidates for prompt: '" + spec.text + "'");
    }
    MaskedResponse resp;
    resp.lm_id = lm_id_;
    const auto& listed = it->second.candidates;
    const std::size_t take = std::min<std::size_t>(listed.size(), std::max(0, spec.params.top_k));
    resp.candidates.assign(listed.begin(), listed.begin() + take);
    return resp;
}

RetryingBackend::RetryingBackend(std::shared_ptr<Backend> inner, RetryPolicy policy,
                                 bool sleep_between)
    : inner_(std::move(inner)), policy_(policy), sleep_between_(sleep_between) {}

template <typename Fn>
auto RetryingBackend::with_retries(Fn&& fn) -> decltype(fn()) {
    std::chrono::milliseconds backoff = policy_.initial_backoff;
    int attempt = 0;
    for (;;) {
        ++attempt;
        try {
            return fn();
        } catch (const BackendError& e) {
            if (!e.retryable() || attempt >= policy_.max_attempts) {
                throw;
            }
        }
        if (sleep_between_) {
            std::this_thread::sleep_for(backoff);
        }
        backoff = std::chrono::milliseconds(
            static_cast<long>(static_cast<double>(backoff.count()) * policy_.backoff_factor));
    }
}

GenerativeResponse RetryingBackend::complete(const PromptSpec& spec) {
    return with_retries([&] { return inner_->complete(spec); });
}

MaskedResponse RetryingBackend::fill_mask(const PromptSpec& spec) {
    return with_retries([&] { return inner_->fill_mask(spec); });
}

} // namespace lmkex
