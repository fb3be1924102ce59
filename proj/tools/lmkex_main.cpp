// lmkex command-line tool: run extractions and exploration sweeps, review
// potential knowledge, and inspect the store.
//
// Exit codes: 0 ok/satisfied, 2 configuration error, 3 extraction
// exhausted, 4 backend failure.

#include "lmkex/config.hpp"
#include "lmkex/controller.hpp"
#include "lmkex/errors.hpp"
#include "lmkex/interpreter.hpp"
#include "lmkex/store.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <filesystem>
#include <iostream>
#include <map>
#include <memory>
#include <string>

namespace {

using namespace lmkex;

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitExhausted = 3;
constexpr int kExitBackend = 4;

class StdioReviewChannel : public ReviewChannel {
public:
    std::optional<std::string> ask(const std::string& line) override {
        std::cout << line << "\n[y/n/a <new-object>] > " << std::flush;
        std::string answer;
        if (!std::getline(std::cin, answer)) {
            return std::nullopt;
        }
        return answer;
    }
};

struct Session {
    Config config;
    std::shared_ptr<Clock> clock;
    KnowledgeStore store;
    UsageModel usage;
    TemplateLibrary templates = TemplateLibrary::builtins();

    explicit Session(const Config& cfg)
        : config(cfg),
          clock(make_clock(cfg)),
          store(std::filesystem::exists(cfg.store_path)
                    ? KnowledgeStore::load(cfg.store_path, clock, cfg.verification_threshold)
                    : KnowledgeStore(clock, cfg.verification_threshold)) {
        for (const LMProfile& profile : config.profiles) {
            usage.register_profile(profile);
        }
        if (std::filesystem::exists(config.usage_model_path)) {
            const UsageModel persisted = UsageModel::load(config.usage_model_path);
            for (const UsageRecord& record : persisted.records()) {
                usage.restore_record(record);
            }
        }
        for (const std::filesystem::path& file : config.template_files) {
            templates.load_file(file);
        }
    }

    BackendResolver resolver() {
        return [cache = std::map<std::string, std::shared_ptr<Backend>>{}](
                   const LMProfile& profile) mutable {
            auto it = cache.find(profile.lm_id);
            if (it != cache.end()) {
                return it->second;
            }
            std::shared_ptr<Backend> backend = make_backend(profile);
            cache[profile.lm_id] = backend;
            return backend;
        };
    }

    void persist() {
        store.save(config.store_path);
        usage.save(config.usage_model_path);
    }
};

void print_report(const ExtractionReport& report) {
    std::cout << "extraction " << to_string(report.final_status) << " for '"
              << report.need.task_name << "' (" << to_string(report.need.pscm_function) << ")\n";
    int i = 0;
    for (const AttemptRecord& a : report.attempts) {
        std::cout << "  attempt " << ++i << ": " << a.lm_id << " / " << to_string(a.strategy)
                  << " -> interpreted " << a.interpreted_count << ", verified "
                  << a.verified_count << ", rejected " << a.rejected_count;
        if (!a.note.empty()) {
            std::cout << " (" << a.note << ")";
        }
        std::cout << "\n";
    }
    std::cout << "encoded:";
    for (const std::string& id : report.encoded_assertion_ids) {
        std::cout << " " << id;
    }
    std::cout << "\n";
}

int cmd_extract(const std::string& config_path, const std::string& need_path, int samples,
                const std::string& backend_name, bool json_out, bool force_review) {
    Config config = Config::load(config_path);
    if (samples > 0) {
        config.policy.n_samples = samples;
    }
    if (force_review) {
        config.policy.require_human = true;
    }
    if (!backend_name.empty()) {
        std::vector<LMProfile> filtered;
        for (const LMProfile& p : config.profiles) {
            if (p.lm_id == backend_name) {
                filtered.push_back(p);
            }
        }
        if (filtered.empty()) {
            throw ConfigError("no profile named '" + backend_name + "'");
        }
        config.profiles = std::move(filtered);
    }
    if (config.profiles.empty()) {
        throw ConfigError("config registers no LM profiles");
    }

    Session session(config);
    const KnowledgeNeed need = load_need(need_path);
    StdioReviewChannel channel;
    Controller controller(session.store, session.usage, session.templates, session.resolver(),
                          {config.policy, config.max_attempts, config.analogical},
                          config.policy.require_human ? &channel : nullptr);
    const ExtractionReport report = controller.extract(need);
    session.persist();

    if (json_out) {
        std::cout << report_to_json(report) << "\n";
    } else {
        print_report(report);
    }
    switch (report.final_status) {
        case FinalStatus::Satisfied: return kExitOk;
        case FinalStatus::Exhausted: return kExitExhausted;
        case FinalStatus::Error: return kExitBackend;
    }
    return kExitExhausted;
}

int cmd_explore(const std::string& config_path, const std::string& lm_id,
                const std::string& templates_path, const std::string& bindings_path) {
    const Config config = Config::load(config_path);
    Session session(config);

    std::vector<PromptTemplate> sweep;
    if (templates_path.empty()) {
        sweep = session.templates.all();
    } else {
        TemplateLibrary extra = TemplateLibrary::empty();
        extra.load_file(templates_path);
        sweep = extra.all();
    }
    const std::vector<std::map<std::string, Term>> bindings_set = load_bindings(bindings_path);

    Controller controller(session.store, session.usage, session.templates, session.resolver(),
                          {config.policy, config.max_attempts, config.analogical});
    const std::vector<Outcome> deltas = controller.explore(lm_id, sweep, bindings_set);
    session.persist();

    std::cout << "explored " << deltas.size() << " prompt(s) against " << lm_id << "\n";
    int i = 0;
    for (const Outcome& d : deltas) {
        std::cout << "  " << ++i << ". " << to_string(d.pscm_function) << " "
                  << (d.success ? "hit" : "miss") << "\n";
    }
    std::cout << "capability estimates:\n";
    for (const UsageRecord& r : session.usage.records()) {
        if (r.lm_id != lm_id) {
            continue;
        }
        std::cout << "  " << to_string(r.strategy) << " / " << to_string(r.pscm_function) << ": "
                  << r.successes << "/" << r.attempts << " -> "
                  << session.usage.estimate_capability(r.lm_id, r.strategy, r.pscm_function)
                  << "\n";
    }
    return kExitOk;
}

int cmd_review(const std::string& config_path) {
    const Config config = Config::load(config_path);
    Session session(config);

    AssertionFilter filter;
    filter.status = AssertionStatus::Potential;
    std::vector<Assertion> pending;
    for (const Assertion* a : session.store.query(filter)) {
        pending.push_back(*a);
    }
    if (pending.empty()) {
        std::cout << "nothing to review\n";
        return kExitOk;
    }

    StdioReviewChannel channel;
    const std::map<std::string, ReviewDecision> decisions = human_review(pending, channel);
    const double threshold = session.store.verification_threshold();
    int accepted = 0;
    int rejected = 0;
    int amended = 0;
    for (const auto& [id, decision] : decisions) {
        const Assertion* found = session.store.find(id);
        if (!found) {
            continue;
        }
        const Assertion original = *found; // adding below may relocate store records
        switch (decision.action) {
            case ReviewAction::Accept:
                session.store.set_status(id, AssertionStatus::Verified,
                                         std::max(original.confidence, threshold));
                ++accepted;
                break;
            case ReviewAction::Reject:
                session.store.set_status(id, AssertionStatus::Rejected, original.confidence);
                ++rejected;
                break;
            case ReviewAction::Amend: {
                Assertion replacement = original;
                replacement.id.clear();
                if (auto term = Term::try_make(decision.new_object)) {
                    replacement.object = ObjectValue::term(*term);
                } else {
                    replacement.object = ObjectValue::phrase(decision.new_object);
                }
                replacement.provenance.strategy = StrategyKind::HumanAmended;
                replacement.status = AssertionStatus::Verified;
                replacement.confidence = std::max(original.confidence, threshold);
                session.store.add_assertion(replacement);
                session.store.set_status(id, AssertionStatus::Rejected, original.confidence);
                ++amended;
                break;
            }
        }
    }
    session.persist();
    std::cout << "reviewed " << decisions.size() << "/" << pending.size() << ": " << accepted
              << " accepted, " << rejected << " rejected, " << amended << " amended\n";
    return kExitOk;
}

int cmd_store_list(const Config& config, const AssertionFilter& filter, bool json_out) {
    Session session(config);
    const std::vector<const Assertion*> rows = session.store.query(filter);
    if (json_out) {
        nlohmann::ordered_json out = nlohmann::ordered_json::array();
        for (const Assertion* a : rows) {
            out.push_back(nlohmann::ordered_json{{"id", a->id},
                                                 {"subject", a->subject.text},
                                                 {"relation", to_string(a->relation)},
                                                 {"object", a->object.text},
                                                 {"status", to_string(a->status)},
                                                 {"confidence", a->confidence}});
        }
        std::cout << out.dump(2) << "\n";
        return kExitOk;
    }
    for (const Assertion* a : rows) {
        std::cout << a->id << "  " << a->subject.text << " | " << to_string(a->relation) << " | "
                  << a->object.text << "  [" << to_string(a->status) << " " << a->confidence
                  << "]\n";
    }
    std::cout << rows.size() << " assertion(s)\n";
    return kExitOk;
}

int cmd_store_show(const Config& config, const std::string& id) {
    Session session(config);
    const Assertion* a = session.store.find(id);
    if (!a) {
        throw NotFoundError("no assertion '" + id + "'");
    }
    std::cout << "id:         " << a->id << "\n"
              << "subject:    " << a->subject.text << " (surface: '" << a->subject.surface << "')\n"
              << "relation:   " << to_string(a->relation) << "\n"
              << "object:     " << a->object.text << " ["
              << (a->object.kind == ObjectValue::Kind::Term ? "term" : "phrase") << "]\n"
              << "status:     " << to_string(a->status) << "\n"
              << "confidence: " << a->confidence << "\n"
              << "created_at: " << format_rfc3339(a->created_at) << "\n"
              << "updated_at: " << format_rfc3339(a->updated_at) << "\n"
              << "provenance: lm=" << a->provenance.lm_id << " strategy="
              << to_string(a->provenance.strategy) << " samples=" << a->provenance.sample_count
              << "\n";
    if (const PromptRecord* p = session.store.find_prompt(a->provenance.prompt_id)) {
        std::cout << "prompt " << p->id << " (" << to_string(p->strategy) << ", "
                  << to_string(p->pscm_function) << "):\n  " << p->text << "\n";
        for (const std::string& s : p->samples) {
            std::cout << "  response: " << s << "\n";
        }
        if (!p->candidates.empty()) {
            std::cout << "  candidates:";
            for (const auto& [token, score] : p->candidates) {
                std::cout << " " << token << "(" << score << ")";
            }
            std::cout << "\n";
        }
    }
    return kExitOk;
}

int cmd_store_export(const Config& config) {
    Session session(config);
    session.store.save(std::cout);
    return kExitOk;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"lmkex: extract actionable task knowledge from language models"};
    app.require_subcommand(1);

    std::string config_path = "lmkex.json";
    app.add_option("--config", config_path, "config file (default ./lmkex.json)");

    auto* extract = app.add_subcommand("extract", "run the extraction pipeline for a need");
    std::string need_path;
    extract->add_option("need-file", need_path, "knowledge-need JSON file")->required();
    int samples = 0;
    extract->add_option("--samples", samples, "override verification sample count");
    std::string backend_name;
    extract->add_option("--backend", backend_name, "restrict to one LM profile");
    bool json_out = false;
    extract->add_flag("--json", json_out, "machine-readable report");
    bool force_review = false;
    extract->add_flag("--review", force_review, "require the human review loop");

    auto* explore = app.add_subcommand("explore", "systematic template sweep against one LM");
    std::string lm_id;
    explore->add_option("--lm", lm_id, "LM profile id")->required();
    std::string templates_path;
    explore->add_option("--templates", templates_path, "template file (default: built-ins)");
    std::string bindings_path;
    explore->add_option("--bindings", bindings_path, "bindings file")->required();

    app.add_subcommand("review", "interactively review potential assertions");

    auto* store_cmd = app.add_subcommand("store", "inspect the knowledge store");
    store_cmd->require_subcommand(1);
    auto* list = store_cmd->add_subcommand("list", "list assertions");
    std::string f_status;
    std::string f_subject;
    std::string f_relation;
    double f_min_confidence = -1.0;
    bool list_json = false;
    list->add_option("--status", f_status);
    list->add_option("--subject", f_subject);
    list->add_option("--relation", f_relation);
    list->add_option("--min-confidence", f_min_confidence);
    list->add_flag("--json", list_json);
    auto* show = store_cmd->add_subcommand("show", "show one assertion with provenance");
    std::string show_id;
    show->add_option("id", show_id)->required();
    store_cmd->add_subcommand("export", "emit the store file format on stdout");

    CLI11_PARSE(app, argc, argv);

    try {
        if (extract->parsed()) {
            return cmd_extract(config_path, need_path, samples, backend_name, json_out,
                               force_review);
        }
        if (explore->parsed()) {
            return cmd_explore(config_path, lm_id, templates_path, bindings_path);
        }
        if (app.get_subcommand("review")->parsed()) {
            return cmd_review(config_path);
        }
        if (store_cmd->parsed()) {
            const Config config = Config::load(config_path);
            if (list->parsed()) {
                AssertionFilter filter;
                if (!f_status.empty()) filter.status = status_from_string(f_status);
                if (!f_subject.empty()) filter.subject = f_subject;
                if (!f_relation.empty()) filter.relation = relation_from_string(f_relation);
                if (f_min_confidence >= 0.0) filter.min_confidence = f_min_confidence;
                return cmd_store_list(config, filter, list_json);
            }
            if (show->parsed()) {
                return cmd_store_show(config, show_id);
            }
            return cmd_store_export(config);
        }
    } catch (const BackendError& e) {
        std::cerr << "backend error: " << e.what() << "\n";
        return kExitBackend;
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitConfig;
    }
    return kExitConfig;
}
