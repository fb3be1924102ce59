#include "lmkex/config.hpp"

#include "lmkex/errors.hpp"

#include <json.hpp>

#include <fstream>
#include <sstream>

namespace lmkex {

using nlohmann::json;

namespace {

json parse_file(const std::filesystem::path& path, const char* what) {
    std::ifstream in(path);
    if (!in) {
        throw ConfigError(std::string("cannot read ") + what + " file '" + path.string() + "'");
    }
    std::ostringstream buf;
    buf << in.rdbuf();
    try {
        return json::parse(buf.str());
    } catch (const json::exception& e) {
        throw ConfigError(std::string("bad ") + what + " file '" + path.string() +
                          "': " + e.what());
    }
}

std::filesystem::path resolve(const std::filesystem::path& base,
                              const std::filesystem::path& path) {
    return path.is_absolute() ? path : base / path;
}

ParameterBounds bounds_from(const json& j) {
    ParameterBounds b;
    if (j.contains("max_tokens")) {
        b.max_tokens = {j.at("max_tokens").at(0).get<int>(), j.at("max_tokens").at(1).get<int>()};
    }
    if (j.contains("temperature")) {
        b.temperature = {j.at("temperature").at(0).get<double>(),
                         j.at("temperature").at(1).get<double>()};
    }
    if (j.contains("top_k")) {
        b.top_k = {j.at("top_k").at(0).get<int>(), j.at("top_k").at(1).get<int>()};
    }
    return b;
}

} // namespace

Config Config::load(const std::filesystem::path& path) {
    const json doc = parse_file(path, "config");
    const std::filesystem::path base = path.has_parent_path()
                                           ? path.parent_path()
                                           : std::filesystem::path(".");
    Config config;
    try {
        for (const json& p : doc.value("profiles", json::array())) {
            LMProfile profile;
            profile.lm_id = p.at("lm_id").get<std::string>();
            profile.model_class = model_class_from_string(p.at("model_class").get<std::string>());
            profile.training_cutoff = p.value("training_cutoff", "");
            profile.corpus_description = p.value("corpus_description", "");
            profile.endpoint_ref = p.at("endpoint_ref").get<std::string>();
            profile.latency_class =
                latency_class_from_string(p.value("latency_class", std::string("remote")));
            if (p.contains("parameter_bounds")) {
                profile.bounds = bounds_from(p.at("parameter_bounds"));
            }
            if (p.contains("extensions")) {
                profile.extensions = p.at("extensions").get<std::map<std::string, std::string>>();
            }
            if (profile.endpoint_ref.rfind("script:", 0) == 0) {
                const std::filesystem::path script =
                    resolve(base, profile.endpoint_ref.substr(7));
                profile.endpoint_ref = "script:" + script.string();
            }
            config.profiles.push_back(std::move(profile));
        }
        config.store_path = resolve(base, doc.value("store_path", std::string("lmkex.store.jsonl")));
        config.usage_model_path =
            resolve(base, doc.value("usage_model_path", std::string("lmkex.usage.jsonl")));
        if (doc.contains("policy")) {
            const json& p = doc.at("policy");
            config.policy.n_samples = p.value("n_samples", config.policy.n_samples);
            config.policy.agreement_threshold =
                p.value("agreement_threshold", config.policy.agreement_threshold);
            config.policy.require_human = p.value("require_human", config.policy.require_human);
            config.policy.auto_promote_min_samples =
                p.value("auto_promote_min_samples", config.policy.auto_promote_min_samples);
        }
        config.max_attempts = doc.value("max_attempts", config.max_attempts);
        config.verification_threshold =
            doc.value("verification_threshold", config.verification_threshold);
        if (doc.contains("fixed_time")) {
            config.fixed_time = doc.at("fixed_time").get<std::string>();
        }
        if (doc.contains("analogical")) {
            const json& a = doc.at("analogical");
            AnalogicalMaterial material;
            material.stimulus_pattern = a.at("stimulus_pattern").get<std::string>();
            material.qa_style = a.value("qa_style", false);
            for (const json& c : a.at("cases")) {
                material.cases.push_back(
                    {c.at("stimulus").get<std::string>(), c.value("response", "")});
            }
            config.analogical = std::move(material);
        }
        for (const json& t : doc.value("template_files", json::array())) {
            config.template_files.push_back(resolve(base, t.get<std::string>()));
        }
    } catch (const json::exception& e) {
        throw ConfigError("bad config file '" + path.string() + "': " + e.what());
    }
    if (config.policy.n_samples < 1) {
        throw ConfigError("policy.n_samples must be >= 1");
    }
    if (config.policy.agreement_threshold < 0.0 || config.policy.agreement_threshold > 1.0) {
        throw ConfigError("policy.agreement_threshold must be in [0,1]");
    }
    if (config.max_attempts < 1) {
        throw ConfigError("max_attempts must be >= 1");
    }
    return config;
}

std::shared_ptr<Clock> make_clock(const Config& config) {
    if (config.fixed_time) {
        return std::make_shared<FixedClock>(*config.fixed_time);
    }
    return system_clock();
}

std::shared_ptr<Backend> make_backend(const LMProfile& profile) {
    if (profile.endpoint_ref.rfind("script:", 0) == 0) {
        return ScriptedBackend::load(profile.endpoint_ref.substr(7), profile.lm_id);
    }
    if (profile.endpoint_ref.rfind("http://", 0) == 0 ||
        profile.endpoint_ref.rfind("https://", 0) == 0) {
        std::string mask_token;
        if (auto it = profile.extensions.find("mask_token"); it != profile.extensions.end()) {
            mask_token = it->second;
        }
        auto http = std::make_shared<HttpBackend>(profile.lm_id, profile.endpoint_ref,
                                                  std::chrono::seconds(30), mask_token);
        return std::make_shared<RetryingBackend>(std::move(http), RetryPolicy{});
    }
    throw ConfigError("unsupported endpoint_ref '" + profile.endpoint_ref + "' for LM '" +
                      profile.lm_id + "'");
}

KnowledgeNeed load_need(const std::filesystem::path& path) {
    const json doc = parse_file(path, "need");
    KnowledgeNeed need;
    try {
        need.task_name = doc.at("task_name").get<std::string>();
        need.domain_label = doc.value("domain_label", "");
        need.pscm_function = pscm_function_from_string(doc.at("pscm_function").get<std::string>());
        const json bindings = doc.value("bindings", json::object());
        for (const auto& [var, surface] : bindings.items()) {
            need.bindings.emplace(var, Term(surface.get<std::string>()));
        }
        need.prior_dialogue =
            doc.value("prior_dialogue", std::vector<std::string>{});
        if (doc.contains("required_as_of")) {
            need.required_as_of = doc.at("required_as_of").get<std::string>();
        }
        need.min_verified = doc.value("min_verified", 1);
    } catch (const json::exception& e) {
        throw ConfigError("bad need file '" + path.string() + "': " + e.what());
    }
    if (need.task_name.empty()) {
        throw ConfigError("need file '" + path.string() + "' has an empty task_name");
    }
    return need;
}

std::vector<std::map<std::string, Term>> load_bindings(const std::filesystem::path& path) {
    const json doc = parse_file(path, "bindings");
    if (!doc.is_array()) {
        throw ConfigError("bindings file '" + path.string() + "' must be a JSON array");
    }
    std::vector<std::map<std::string, Term>> out;
    try {
        for (const json& entry : doc) {
            std::map<std::string, Term> bindings;
            for (const auto& [var, surface] : entry.items()) {
                bindings.emplace(var, Term(surface.get<std::string>()));
            }
            out.push_back(std::move(bindings));
        }
    } catch (const json::exception& e) {
        throw ConfigError("bad bindings file '" + path.string() + "': " + e.what());
    }
    return out;
}

} // namespace lmkex
