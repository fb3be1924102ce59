#include "lmkex/store.hpp"

#include <json.hpp>

#include <algorithm>
#include <cinttypes>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace lmkex {

using ordered_json = nlohmann::ordered_json;

namespace {

constexpr const char* kFormat = "lmkex-store";
constexpr int kVersion = 1;

std::string make_id(const char* prefix, std::uint64_t n) {
    char buf[24];
    std::snprintf(buf, sizeof(buf), "%s-%06" PRIu64, prefix, n);
    return buf;
}

// Restores the id counter from ids already in a loaded file.
std::uint64_t id_number(const std::string& id) {
    const std::size_t dash = id.find('-');
    if (dash == std::string::npos) {
        return 0;
    }
    return std::strtoull(id.c_str() + dash + 1, nullptr, 10);
}

ordered_json params_to_json(const SamplingParams& p) {
    return ordered_json{{"max_tokens", p.max_tokens},
                        {"temperature", p.temperature},
                        {"n_samples", p.n_samples},
                        {"top_k", p.top_k}};
}

SamplingParams params_from_json(const ordered_json& j) {
    SamplingParams p;
    p.max_tokens = j.at("max_tokens").get<int>();
    p.temperature = j.at("temperature").get<double>();
    p.n_samples = j.at("n_samples").get<int>();
    p.top_k = j.at("top_k").get<int>();
    return p;
}

ordered_json prompt_to_json(const PromptRecord& r) {
    ordered_json j{{"kind", "prompt-record"},
                   {"id", r.id},
                   {"lm_id", r.lm_id},
                   {"text", r.text},
                   {"target_class", to_string(r.target_class)},
                   {"params", params_to_json(r.params)},
                   {"strategy", to_string(r.strategy)},
                   {"schema", to_string(r.schema)},
                   {"pscm_function", to_string(r.pscm_function)},
                   {"subject", r.subject.surface},
                   {"relation", r.relation ? ordered_json(to_string(*r.relation)) : ordered_json(nullptr)},
                   {"created_at", format_rfc3339(r.created_at)},
                   {"samples", r.samples},
                   {"candidates", ordered_json::array()},
                   {"notes", r.interpretation_notes}};
    for (const auto& [token, score] : r.candidates) {
        j["candidates"].push_back(ordered_json::array({token, score}));
    }
    return j;
}

PromptRecord prompt_from_json(const ordered_json& j) {
    PromptRecord r;
    r.id = j.at("id").get<std::string>();
    r.lm_id = j.at("lm_id").get<std::string>();
    r.text = j.at("text").get<std::string>();
    r.target_class = model_class_from_string(j.at("target_class").get<std::string>());
    r.params = params_from_json(j.at("params"));
    r.strategy = strategy_from_string(j.at("strategy").get<std::string>());
    r.schema = schema_from_string(j.at("schema").get<std::string>());
    r.pscm_function = pscm_function_from_string(j.at("pscm_function").get<std::string>());
    const std::string subject = j.at("subject").get<std::string>();
    if (!subject.empty()) {
        r.subject = Term(subject);
    }
    if (!j.at("relation").is_null()) {
        r.relation = relation_from_string(j.at("relation").get<std::string>());
    }
    r.created_at = parse_rfc3339(j.at("created_at").get<std::string>());
    r.samples = j.at("samples").get<std::vector<std::string>>();
    for (const auto& c : j.at("candidates")) {
        r.candidates.emplace_back(c.at(0).get<std::string>(), c.at(1).get<double>());
    }
    r.interpretation_notes = j.at("notes").get<std::vector<std::string>>();
    return r;
}

// Assertion record layout is fixed; loading is strict about it.
const std::vector<std::string> kAssertionFields = {
    "id",        "subject",      "relation",   "object",     "object_kind",
    "lm_id",     "prompt_id",    "strategy",   "sample_count", "status",
    "confidence", "created_at",  "updated_at"};

ordered_json assertion_to_json(const Assertion& a) {
    return ordered_json{{"id", a.id},
                        {"subject", a.subject.surface},
                        {"relation", to_string(a.relation)},
                        {"object", a.object.kind == ObjectValue::Kind::Term ? a.object.surface
                                                                            : a.object.text},
                        {"object_kind", a.object.kind == ObjectValue::Kind::Term ? "term" : "phrase"},
                        {"lm_id", a.provenance.lm_id},
                        {"prompt_id", a.provenance.prompt_id},
                        {"strategy", to_string(a.provenance.strategy)},
                        {"sample_count", a.provenance.sample_count},
                        {"status", to_string(a.status)},
                        {"confidence", a.confidence},
                        {"created_at", format_rfc3339(a.created_at)},
                        {"updated_at", format_rfc3339(a.updated_at)}};
}

Assertion assertion_from_json(const ordered_json& j, int line) {
    for (const auto& field : kAssertionFields) {
        if (!j.contains(field)) {
            throw ParseError("assertion record missing field '" + field + "'", line);
        }
    }
    for (const auto& [key, value] : j.items()) {
        (void)value;
        if (std::find(kAssertionFields.begin(), kAssertionFields.end(), key) ==
            kAssertionFields.end()) {
            throw ParseError("assertion record has unknown field '" + key + "'", line);
        }
    }
    Assertion a;
    a.id = j.at("id").get<std::string>();
    a.subject = Term(j.at("subject").get<std::string>());
    a.relation = relation_from_string(j.at("relation").get<std::string>());
    const std::string object_kind = j.at("object_kind").get<std::string>();
    if (object_kind == "term") {
        a.object = ObjectValue::term(Term(j.at("object").get<std::string>()));
    } else if (object_kind == "phrase") {
        a.object = ObjectValue::phrase(j.at("object").get<std::string>());
    } else {
        throw ParseError("bad object_kind '" + object_kind + "'", line);
    }
    a.provenance.lm_id = j.at("lm_id").get<std::string>();
    a.provenance.prompt_id = j.at("prompt_id").get<std::string>();
    a.provenance.strategy = strategy_from_string(j.at("strategy").get<std::string>());
    a.provenance.sample_count = j.at("sample_count").get<int>();
    a.status = status_from_string(j.at("status").get<std::string>());
    a.confidence = j.at("confidence").get<double>();
    a.created_at = parse_rfc3339(j.at("created_at").get<std::string>());
    a.updated_at = parse_rfc3339(j.at("updated_at").get<std::string>());
    a.provenance.extracted_at = a.created_at;
    return a;
}

} // namespace

KnowledgeStore::KnowledgeStore(std::shared_ptr<Clock> clock, double verification_threshold)
    : clock_(std::move(clock)), verification_threshold_(verification_threshold) {}

std::string KnowledgeStore::log_prompt(const PromptSpec& spec, const std::string& lm_id) {
    PromptRecord r;
    r.id = make_id("p", next_prompt_++);
    r.lm_id = lm_id;
    r.text = spec.text;
    r.target_class = spec.target_class;
    r.params = spec.params;
    r.strategy = spec.strategy;
    r.schema = spec.schema;
    r.pscm_function = spec.source_need.pscm_function;
    r.subject = spec.subject;
    r.relation = spec.relation;
    r.created_at = clock_->now();
    prompt_index_[r.id] = prompts_.size();
    prompts_.push_back(std::move(r));
    return prompts_.back().id;
}

PromptRecord* KnowledgeStore::find_prompt_mutable(const std::string& prompt_id) {
    auto it = prompt_index_.find(prompt_id);
    return it == prompt_index_.end() ? nullptr : &prompts_[it->second];
}

const PromptRecord* KnowledgeStore::find_prompt(const std::string& prompt_id) const {
    auto it = prompt_index_.find(prompt_id);
    return it == prompt_index_.end() ? nullptr : &prompts_[it->second];
}

void KnowledgeStore::record_samples(const std::string& prompt_id,
                                    const std::vector<std::string>& samples) {
    PromptRecord* r = find_prompt_mutable(prompt_id);
    if (!r) {
        throw NotFoundError("no prompt record '" + prompt_id + "'");
    }
    r->samples.insert(r->samples.end(), samples.begin(), samples.end());
}

void KnowledgeStore::record_candidates(
    const std::string& prompt_id, const std::vector<std::pair<std::string, double>>& candidates) {
    PromptRecord* r = find_prompt_mutable(prompt_id);
    if (!r) {
        throw NotFoundError("no prompt record '" + prompt_id + "'");
    }
    r->candidates.insert(r->candidates.end(), candidates.begin(), candidates.end());
}

void KnowledgeStore::add_interpretation_note(const std::string& prompt_id,
                                             const std::string& note) {
    PromptRecord* r = find_prompt_mutable(prompt_id);
    if (!r) {
        throw NotFoundError("no prompt record '" + prompt_id + "'");
    }
    r->interpretation_notes.push_back(note);
}

void KnowledgeStore::check_verified_confidence(AssertionStatus status, double confidence) const {
    if (confidence < 0.0 || confidence > 1.0) {
        throw ValidationError("confidence out of [0,1]: " + std::to_string(confidence));
    }
    if (status == AssertionStatus::Verified && confidence < verification_threshold_) {
        throw ValidationError("verified assertion needs confidence >= " +
                              std::to_string(verification_threshold_) + ", got " +
                              std::to_string(confidence));
    }
}

KnowledgeStore::AddResult KnowledgeStore::add_assertion(Assertion a) {
    if (!find_prompt(a.provenance.prompt_id)) {
        throw IntegrityError("assertion provenance references unknown prompt '" +
                             a.provenance.prompt_id + "'");
    }
    if (a.provenance.sample_count < 1) {
        throw ValidationError("provenance sample_count must be >= 1");
    }
    check_verified_confidence(a.status, a.confidence);
    const std::string key = a.dedup_key();
    if (auto it = dedup_index_.find(key); it != dedup_index_.end()) {
        return {assertions_[it->second].id, true};
    }
    a.id = make_id("a", next_assertion_++);
    a.created_at = clock_->now();
    a.updated_at = a.created_at;
    a.provenance.extracted_at = a.created_at;
    assertion_index_[a.id] = assertions_.size();
    dedup_index_[key] = assertions_.size();
    assertions_.push_back(std::move(a));
    return {assertions_.back().id, false};
}

const Assertion* KnowledgeStore::find(const std::string& id) const {
    auto it = assertion_index_.find(id);
    return it == assertion_index_.end() ? nullptr : &assertions_[it->second];
}

std::vector<const Assertion*> KnowledgeStore::query(const AssertionFilter& filter) const {
    std::vector<const Assertion*> out;
    const std::string subject_key = filter.subject ? canonicalize(*filter.subject) : "";
    for (const Assertion& a : assertions_) {
        if (filter.subject && a.subject.text != subject_key) continue;
        if (filter.relation && a.relation != *filter.relation) continue;
        if (filter.status && a.status != *filter.status) continue;
        if (filter.min_confidence && a.confidence < *filter.min_confidence) continue;
        out.push_back(&a);
    }
    std::stable_sort(out.begin(), out.end(), [](const Assertion* x, const Assertion* y) {
        if (x->created_at != y->created_at) return x->created_at < y->created_at;
        return x->id < y->id;
    });
    return out;
}

void KnowledgeStore::set_status(const std::string& id, AssertionStatus new_status,
                                double confidence) {
    auto it = assertion_index_.find(id);
    if (it == assertion_index_.end()) {
        throw NotFoundError("no assertion '" + id + "'");
    }
    Assertion& a = assertions_[it->second];
    const bool legal =
        (a.status == AssertionStatus::Potential && new_status == AssertionStatus::Verified) ||
        (a.status == AssertionStatus::Potential && new_status == AssertionStatus::Rejected) ||
        (a.status == AssertionStatus::Verified && new_status == AssertionStatus::Rejected);
    if (!legal) {
        throw StateError(std::string("illegal status transition ") + to_string(a.status) + " -> " +
                         to_string(new_status) + " for '" + id + "'");
    }
    check_verified_confidence(new_status, confidence);
    a.status = new_status;
    a.confidence = confidence;
    a.updated_at = clock_->now();
}

void KnowledgeStore::set_confidence(const std::string& id, double confidence) {
    auto it = assertion_index_.find(id);
    if (it == assertion_index_.end()) {
        throw NotFoundError("no assertion '" + id + "'");
    }
    Assertion& a = assertions_[it->second];
    check_verified_confidence(a.status, confidence);
    a.confidence = confidence;
    a.updated_at = clock_->now();
}

void KnowledgeStore::save(std::ostream& out) const {
    out << ordered_json{{"format", kFormat}, {"version", kVersion}}.dump() << "\n";
    for (const PromptRecord& r : prompts_) {
        out << prompt_to_json(r).dump() << "\n";
    }
    for (const Assertion& a : assertions_) {
        out << assertion_to_json(a).dump() << "\n";
    }
}

void KnowledgeStore::save(const std::filesystem::path& path) const {
    std::ofstream out(path);
    if (!out) {
        throw ConfigError("cannot write store file '" + path.string() + "'");
    }
    save(out);
}

KnowledgeStore KnowledgeStore::load(std::istream& in, std::shared_ptr<Clock> clock,
                                    double verification_threshold) {
    KnowledgeStore store(std::move(clock), verification_threshold);
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
                    throw ParseError("missing store header line", line_no);
                }
                if (j.at("version").get<int>() != kVersion) {
                    throw ParseError("unsupported store version", line_no);
                }
                saw_header = true;
                continue;
            }
            if (j.contains("kind")) {
                if (j.at("kind") != "prompt-record") {
                    throw ParseError("unknown record kind", line_no);
                }
                PromptRecord r = prompt_from_json(j);
                if (store.prompt_index_.count(r.id)) {
                    throw ParseError("duplicate prompt record id '" + r.id + "'", line_no);
                }
                store.next_prompt_ = std::max(store.next_prompt_, id_number(r.id) + 1);
                store.prompt_index_[r.id] = store.prompts_.size();
                store.prompts_.push_back(std::move(r));
            } else {
                Assertion a = assertion_from_json(j, line_no);
                if (!store.find_prompt(a.provenance.prompt_id)) {
                    throw IntegrityError("assertion '" + a.id + "' references unknown prompt '" +
                                         a.provenance.prompt_id + "'");
                }
                if (store.assertion_index_.count(a.id)) {
                    throw ParseError("duplicate assertion id '" + a.id + "'", line_no);
                }
                if (store.dedup_index_.count(a.dedup_key())) {
                    throw ParseError("duplicate assertion content for id '" + a.id + "'", line_no);
                }
                store.next_assertion_ = std::max(store.next_assertion_, id_number(a.id) + 1);
                store.assertion_index_[a.id] = store.assertions_.size();
                store.dedup_index_[a.dedup_key()] = store.assertions_.size();
                store.assertions_.push_back(std::move(a));
            }
        } catch (const nlohmann::json::exception& e) {
            throw ParseError(std::string("bad record: ") + e.what(), line_no);
        }
    }
    if (!saw_header) {
        throw ParseError("empty store file: header line required", 1);
    }
    return store;
}

KnowledgeStore KnowledgeStore::load(const std::filesystem::path& path,
                                    std::shared_ptr<Clock> clock, double verification_threshold) {
    std::ifstream in(path);
    if (!in) {
        throw ConfigError("cannot read store file '" + path.string() + "'");
    }
    return load(in, std::move(clock), verification_threshold);
}

} // namespace lmkex
