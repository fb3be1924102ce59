#include "lmkex/usage_model.hpp"

#include "lmkex/errors.hpp"

#include <json.hpp>

#include <algorithm>
#include <array>
#include <fstream>

namespace lmkex {

using ordered_json = nlohmann::ordered_json;

namespace {

constexpr const char* kFormat = "lmkex-usage";
constexpr int kVersion = 1;

std::string record_key(const std::string& lm_id, StrategyKind strategy, PscmFunction fn) {
    return lm_id + "\x1f" + to_string(strategy) + "\x1f" + to_string(fn);
}

constexpr std::array<StrategyKind, 4> kPromptingStrategies = {
    StrategyKind::Template,
    StrategyKind::TemplateWithContext,
    StrategyKind::Analogical,
    StrategyKind::DialogueShaped,
};

int strategy_rank(StrategyKind s) {
    for (std::size_t i = 0; i < kPromptingStrategies.size(); ++i) {
        if (kPromptingStrategies[i] == s) {
            return static_cast<int>(i);
        }
    }
    return static_cast<int>(kPromptingStrategies.size());
}

ordered_json bounds_to_json(const ParameterBounds& b) {
    return ordered_json{{"max_tokens", {b.max_tokens.first, b.max_tokens.second}},
                        {"temperature", {b.temperature.first, b.temperature.second}},
                        {"top_k", {b.top_k.first, b.top_k.second}}};
}

ParameterBounds bounds_from_json(const ordered_json& j) {
    ParameterBounds b;
    b.max_tokens = {j.at("max_tokens").at(0).get<int>(), j.at("max_tokens").at(1).get<int>()};
    b.temperature = {j.at("temperature").at(0).get<double>(),
                     j.at("temperature").at(1).get<double>()};
    b.top_k = {j.at("top_k").at(0).get<int>(), j.at("top_k").at(1).get<int>()};
    return b;
}

} // namespace

void UsageModel::register_profile(LMProfile profile) {
    if (profile.lm_id.empty()) {
        throw ValidationError("LM profile needs a non-empty lm_id");
    }
    for (const LMProfile& p : profiles_) {
        if (p.lm_id == profile.lm_id) {
            throw ValidationError("duplicate LM profile '" + profile.lm_id + "'");
        }
    }
    profiles_.push_back(std::move(profile));
}

const LMProfile* UsageModel::find_profile(const std::string& lm_id) const {
    for (const LMProfile& p : profiles_) {
        if (p.lm_id == lm_id) {
            return &p;
        }
    }
    return nullptr;
}

double UsageModel::estimate_capability(const std::string& lm_id, StrategyKind strategy,
                                       PscmFunction fn) const {
    int successes = 0;
    int attempts = 0;
    if (const UsageRecord* r = find_record(lm_id, strategy, fn)) {
        successes = r->successes;
        attempts = r->attempts;
    }
    return (successes + 1.0) / (attempts + 2.0);
}

bool strategy_compatible(const LMProfile& profile, StrategyKind strategy, PscmFunction fn,
                         const TemplateAvailability& has_template) {
    switch (strategy) {
        case StrategyKind::Template:
        case StrategyKind::TemplateWithContext:
            return has_template && has_template(profile.model_class, fn);
        case StrategyKind::Analogical:
        case StrategyKind::DialogueShaped:
            // Case-based and dialogue prompts need free-text completion.
            return profile.model_class == ModelClass::Generative;
        case StrategyKind::HumanAmended:
            return false;
    }
    return false;
}

std::vector<Candidate> UsageModel::select(const KnowledgeNeed& need,
                                          const TemplateAvailability& has_template) const {
    if (profiles_.empty()) {
        throw ConfigError("no LM profiles registered");
    }
    std::vector<std::pair<Candidate, const LMProfile*>> ranked;
    for (const LMProfile& p : profiles_) {
        for (StrategyKind s : kPromptingStrategies) {
            if (!strategy_compatible(p, s, need.pscm_function, has_template)) {
                continue;
            }
            ranked.push_back(
                {Candidate{p.lm_id, s, estimate_capability(p.lm_id, s, need.pscm_function)}, &p});
        }
    }
    std::sort(ranked.begin(), ranked.end(), [](const auto& x, const auto& y) {
        if (x.first.capability != y.first.capability) {
            return x.first.capability > y.first.capability;
        }
        if (x.second->latency_class != y.second->latency_class) {
            return x.second->latency_class == LatencyClass::Local;
        }
        if (x.first.lm_id != y.first.lm_id) {
            return x.first.lm_id < y.first.lm_id;
        }
        return strategy_rank(x.first.strategy) < strategy_rank(y.first.strategy);
    });
    if (ranked.empty()) {
        throw ConfigError(std::string("no registered LM supports any strategy for ") +
                          to_string(need.pscm_function));
    }
    std::vector<Candidate> out;
    out.reserve(ranked.size());
    for (auto& [candidate, profile] : ranked) {
        (void)profile;
        out.push_back(std::move(candidate));
    }
    return out;
}

void UsageModel::record_outcome(const std::string& lm_id, StrategyKind strategy, PscmFunction fn,
                                bool success) {
    UsageRecord& r = records_[record_key(lm_id, strategy, fn)];
    r.lm_id = lm_id;
    r.strategy = strategy;
    r.pscm_function = fn;
    r.attempts += 1;
    if (success) {
        r.successes += 1;
    }
    log_.push_back({lm_id, strategy, fn, success});
}

void UsageModel::restore_record(const UsageRecord& record) {
    if (record.successes < 0 || record.attempts < 0 || record.successes > record.attempts) {
        throw ValidationError("usage record violates 0 <= successes <= attempts");
    }
    records_[record_key(record.lm_id, record.strategy, record.pscm_function)] = record;
}

std::vector<UsageRecord> UsageModel::records() const {
    std::vector<UsageRecord> out;
    out.reserve(records_.size());
    for (const auto& [key, r] : records_) {
        (void)key;
        out.push_back(r);
    }
    return out;
}

const UsageRecord* UsageModel::find_record(const std::string& lm_id, StrategyKind strategy,
                                           PscmFunction fn) const {
    auto it = records_.find(record_key(lm_id, strategy, fn));
    return it == records_.end() ? nullptr : &it->second;
}

bool UsageModel::has_records_for(PscmFunction fn) const {
    for (const auto& [key, r] : records_) {
        (void)key;
        if (r.pscm_function == fn && r.attempts > 0) {
            return true;
        }
    }
    return false;
}

Currency check_temporal_currency(const LMProfile& profile, const KnowledgeNeed& need) {
    if (!need.required_as_of || need.required_as_of->empty()) {
        return Currency::Unknown;
    }
    if (profile.training_cutoff.empty()) {
        return Currency::Unknown;
    }
    // ISO dates order lexicographically.
    return *need.required_as_of > profile.training_cutoff ? Currency::Stale : Currency::Current;
}

void UsageModel::save(const std::filesystem::path& path) const {
    std::ofstream out(path);
    if (!out) {
        throw ConfigError("cannot write usage-model file '" + path.string() + "'");
    }
    out << ordered_json{{"format", kFormat}, {"version", kVersion}}.dump() << "\n";
    for (const LMProfile& p : profiles_) {
        ordered_json j{{"kind", "profile"},
                       {"lm_id", p.lm_id},
                       {"model_class", to_string(p.model_class)},
                       {"training_cutoff", p.training_cutoff},
                       {"corpus_description", p.corpus_description},
                       {"endpoint_ref", p.endpoint_ref},
                       {"latency_class", to_string(p.latency_class)},
                       {"parameter_bounds", bounds_to_json(p.bounds)},
                       {"extensions", p.extensions}};
        out << j.dump() << "\n";
    }
    for (const auto& [key, r] : records_) {
        (void)key;
        ordered_json j{{"kind", "usage"},
                       {"lm_id", r.lm_id},
                       {"strategy", to_string(r.strategy)},
                       {"pscm_function", to_string(r.pscm_function)},
                       {"successes", r.successes},
                       {"attempts", r.attempts}};
        out << j.dump() << "\n";
    }
}

UsageModel UsageModel::load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw ConfigError("cannot read usage-model file '" + path.string() + "'");
    }
    UsageModel model;
    std::string line;
    int line_no = 0;
    bool saw_header = false;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) {
            continue;
        }
        ordered_json j;
        try {
            j = ordered_json::parse(line);
        } catch (const nlohmann::json::exception& e) {
            throw ParseError(std::string("bad JSON: ") + e.what(), line_no);
        }
        try {
            if (!saw_header) {
                if (!j.contains("format") || j.at("format") != kFormat) {
                    throw ParseError("missing usage-model header line", line_no);
                }
                saw_header = true;
                continue;
            }
            const std::string kind = j.at("kind").get<std::string>();
            if (kind == "profile") {
                LMProfile p;
                p.lm_id = j.at("lm_id").get<std::string>();
                p.model_class = model_class_from_string(j.at("model_class").get<std::string>());
                p.training_cutoff = j.at("training_cutoff").get<std::string>();
                p.corpus_description = j.at("corpus_description").get<std::string>();
                p.endpoint_ref = j.at("endpoint_ref").get<std::string>();
                p.latency_class = latency_class_from_string(j.at("latency_class").get<std::string>());
                p.bounds = bounds_from_json(j.at("parameter_bounds"));
                p.extensions = j.at("extensions").get<std::map<std::string, std::string>>();
                model.register_profile(std::move(p));
            } else if (kind == "usage") {
                UsageRecord r;
                r.lm_id = j.at("lm_id").get<std::string>();
                r.strategy = strategy_from_string(j.at("strategy").get<std::string>());
                r.pscm_function = pscm_function_from_string(j.at("pscm_function").get<std::string>());
                r.successes = j.at("successes").get<int>();
                r.attempts = j.at("attempts").get<int>();
                if (r.successes < 0 || r.attempts < 0 || r.successes > r.attempts) {
                    throw ParseError("usage record violates 0 <= successes <= attempts", line_no);
                }
                model.records_[record_key(r.lm_id, r.strategy, r.pscm_function)] = r;
            } else {
                throw ParseError("unknown usage-model record kind '" + kind + "'", line_no);
            }
        } catch (const nlohmann::json::exception& e) {
            throw ParseError(std::string("bad record: ") + e.what(), line_no);
        }
    }
    if (!saw_header) {
        throw ParseError("empty usage-model file: header line required", 1);
    }
    return model;
}

} // namespace lmkex
