#include "lmkex/controller.hpp"

#include "lmkex/errors.hpp"
#include "lmkex/interpreter.hpp"

#include <json.hpp>

#include <algorithm>
#include <map>
#include <set>

namespace lmkex {

using ordered_json = nlohmann::ordered_json;

namespace {

std::string substitute_label(std::string text, const std::string& var, const std::string& value) {
    std::size_t pos = 0;
    while ((pos = text.find(var, pos)) != std::string::npos) {
        text.replace(pos, var.size(), value);
        pos += value.size();
    }
    return text;
}

// Object for a human-supplied amendment: a term when it canonicalizes
// cleanly, a phrase otherwise.
ObjectValue amended_object(const std::string& text) {
    if (auto term = Term::try_make(text)) {
        return ObjectValue::term(*term);
    }
    return ObjectValue::phrase(text);
}

} // namespace

const char* to_string(FinalStatus s) {
    switch (s) {
        case FinalStatus::Satisfied: return "satisfied";
        case FinalStatus::Exhausted: return "exhausted";
        case FinalStatus::Error: return "error";
    }
    return "?";
}

std::string report_to_json(const ExtractionReport& report) {
    ordered_json attempts = ordered_json::array();
    for (const AttemptRecord& a : report.attempts) {
        attempts.push_back(ordered_json{{"lm_id", a.lm_id},
                                        {"strategy", to_string(a.strategy)},
                                        {"prompt_id", a.prompt_id},
                                        {"interpreted_count", a.interpreted_count},
                                        {"verified_count", a.verified_count},
                                        {"rejected_count", a.rejected_count},
                                        {"backend_failure", a.backend_failure},
                                        {"note", a.note}});
    }
    ordered_json bindings = ordered_json::object();
    for (const auto& [var, term] : report.need.bindings) {
        bindings[var] = term.surface;
    }
    ordered_json j{{"need",
                    ordered_json{{"task_name", report.need.task_name},
                                 {"domain_label", report.need.domain_label},
                                 {"pscm_function", to_string(report.need.pscm_function)},
                                 {"bindings", bindings},
                                 {"min_verified", report.need.min_verified}}},
                   {"attempts", attempts},
                   {"final_status", to_string(report.final_status)},
                   {"encoded_assertion_ids", report.encoded_assertion_ids}};
    return j.dump(2);
}

Controller::Controller(KnowledgeStore& store, UsageModel& usage, TemplateLibrary templates,
                       BackendResolver resolver, ControllerConfig config,
                       ReviewChannel* review_channel)
    : store_(store),
      usage_(usage),
      templates_(std::move(templates)),
      resolver_(std::move(resolver)),
      config_(std::move(config)),
      review_channel_(review_channel) {}

PromptSpec Controller::build_spec(StrategyKind strategy, const KnowledgeNeed& need,
                                  const LMProfile& profile) const {
    PromptSpec spec;
    switch (strategy) {
        case StrategyKind::Template:
        case StrategyKind::TemplateWithContext: {
            std::string prefix;
            if (strategy == StrategyKind::TemplateWithContext) {
                prefix = default_context_prefix(need);
                if (prefix.empty()) {
                    throw StrategyError("template-with-context needs a domain label");
                }
            }
            std::optional<PromptTemplate> chosen;
            for (PromptTemplate& t : templates_.templates_for(need.pscm_function)) {
                if (t.target_class != profile.model_class) {
                    continue;
                }
                const std::vector<std::string> vars = t.variables();
                const bool bound = std::all_of(vars.begin(), vars.end(), [&](const std::string& v) {
                    return need.bindings.count(v) > 0;
                });
                if (bound) {
                    chosen = std::move(t);
                    break;
                }
            }
            if (!chosen) {
                throw TemplateError("no " + std::string(to_string(profile.model_class)) +
                                    " template for " + to_string(need.pscm_function) +
                                    " satisfiable from the need's bindings");
            }
            spec = instantiate_template(*chosen, need.bindings, prefix);
            break;
        }
        case StrategyKind::Analogical: {
            if (!config_.analogical || config_.analogical->cases.empty()) {
                throw StrategyError("no analogical cases configured");
            }
            std::string stimulus = config_.analogical->stimulus_pattern;
            stimulus = substitute_label(stimulus, "?domain", need.domain_label);
            stimulus = substitute_label(stimulus, "?task", need.task_name);
            spec = build_analogical_prompt(config_.analogical->cases, stimulus,
                                           config_.analogical->qa_style);
            break;
        }
        case StrategyKind::DialogueShaped: {
            const std::string query = build_dialogue_query(need.bindings);
            spec = build_dialogue_shaped_prompt(need.prior_dialogue, query);
            break;
        }
        case StrategyKind::HumanAmended:
            throw StrategyError("human-amended is a provenance tag, not a prompting strategy");
    }
    spec.source_need = need;
    if (spec.subject.text.empty()) {
        if (auto subject = Term::try_make(need.task_name)) {
            spec.subject = *subject;
        }
    }
    apply_parameter_bounds(spec, profile);
    // Verification drives the sample count; for masked prompts this is the
    // number of fill-mask calls.
    spec.params.n_samples = config_.policy.n_samples;
    return spec;
}

Controller::AttemptOutcome Controller::run_attempt(const Candidate& candidate,
                                                   const KnowledgeNeed& need,
                                                   std::vector<std::string>& encoded_ids) {
    AttemptOutcome outcome;
    outcome.record.lm_id = candidate.lm_id;
    outcome.record.strategy = candidate.strategy;

    const LMProfile* profile = usage_.find_profile(candidate.lm_id);
    if (!profile) {
        throw ConfigError("no profile for LM '" + candidate.lm_id + "'");
    }

    PromptSpec spec = build_spec(candidate.strategy, need, *profile);
    spec.prompt_id = store_.log_prompt(spec, profile->lm_id);
    outcome.record.prompt_id = spec.prompt_id;

    std::shared_ptr<Backend> backend = resolver_(*profile);
    if (!backend) {
        throw ConfigError("no backend for LM '" + candidate.lm_id + "'");
    }

    // Sample, logging raw responses before any interpretation.
    std::vector<AssertionGroup> groups;
    if (spec.target_class == ModelClass::Generative) {
        GenerativeResponse resp = backend->complete(spec);
        store_.record_samples(spec.prompt_id, resp.samples);
        groups = interpret_samples(spec, resp);
    } else {
        for (int i = 0; i < config_.policy.n_samples; ++i) {
            MaskedResponse resp = backend->fill_mask(spec);
            store_.record_candidates(spec.prompt_id, resp.candidates);
            groups.push_back(interpret(spec, resp));
        }
    }

    // Encode every distinct interpretation as quarantined potential
    // knowledge, then let verification promote or reject.
    std::map<std::string, std::string> key_to_id;
    int interpreted = 0;
    for (const AssertionGroup& group : groups) {
        interpreted += static_cast<int>(group.size());
        for (const Assertion& a : group) {
            const std::string key = normalize_assertion_key(a);
            if (key_to_id.count(key)) {
                continue;
            }
            KnowledgeStore::AddResult added = store_.add_assertion(a);
            key_to_id[key] = added.id;
            if (spec.schema == SchemaKind::CausalClause) {
                const CausalInterpretation ci =
                    parse_causal_clause(a.subject.surface, a.object.text);
                if (!ci.sub_effects.empty()) {
                    std::string note = added.id + ": sub-effects:";
                    for (const std::string& effect : ci.sub_effects) {
                        note += " [" + effect + "]";
                    }
                    store_.add_interpretation_note(spec.prompt_id, note);
                }
            }
        }
    }
    outcome.record.interpreted_count = interpreted;

    // Re-key the groups on stored ids so verification results point at
    // real records.
    for (AssertionGroup& group : groups) {
        for (Assertion& a : group) {
            a.id = key_to_id[normalize_assertion_key(a)];
        }
    }

    std::vector<VerificationResult> results =
        verify(groups, config_.policy, store_, *profile, need);

    // When a human is required, route the machine-qualified candidates
    // through the review channel and re-verify with the decisions.
    std::map<std::string, ReviewDecision> review;
    if (config_.policy.require_human && review_channel_) {
        std::vector<Assertion> pending;
        for (const VerificationResult& r : results) {
            if (r.decision == AssertionStatus::Potential &&
                r.rationale == "awaiting human review") {
                if (const Assertion* a = store_.find(r.assertion_id)) {
                    pending.push_back(*a);
                }
            }
        }
        review = human_review(pending, *review_channel_);
        std::map<std::string, ReviewAction> by_key;
        for (const auto& [id, decision] : review) {
            if (const Assertion* a = store_.find(id)) {
                by_key[normalize_assertion_key(*a)] = decision.action;
            }
        }
        results = verify(groups, config_.policy, store_, *profile, need, &by_key);
    }

    for (const VerificationResult& r : results) {
        const Assertion* stored = store_.find(r.assertion_id);
        if (!stored) {
            continue;
        }
        switch (r.decision) {
            case AssertionStatus::Verified: {
                const double capability = usage_.estimate_capability(
                    candidate.lm_id, candidate.strategy, need.pscm_function);
                const double confidence = verified_confidence(r.agreement, capability,
                                                              store_.verification_threshold());
                if (stored->status == AssertionStatus::Potential) {
                    store_.set_status(r.assertion_id, AssertionStatus::Verified, confidence);
                } else if (stored->status == AssertionStatus::Verified) {
                    // Re-extraction of knowledge already on the books.
                    store_.set_confidence(r.assertion_id, confidence);
                } else {
                    break; // rejected is terminal; leave it
                }
                encoded_ids.push_back(r.assertion_id);
                outcome.record.verified_count += 1;
                break;
            }
            case AssertionStatus::Rejected:
                if (stored->status != AssertionStatus::Rejected) {
                    store_.set_status(r.assertion_id, AssertionStatus::Rejected,
                                      stored->confidence);
                }
                outcome.record.rejected_count += 1;
                break;
            case AssertionStatus::Potential:
                break;
        }
        store_.add_interpretation_note(spec.prompt_id,
                                       r.assertion_id + ": " + to_string(r.decision) + " (" +
                                           r.rationale + ")");
    }

    // Amendments replace the original assertion with the human's object.
    for (const auto& [id, decision] : review) {
        if (decision.action != ReviewAction::Amend) {
            continue;
        }
        const Assertion* found = store_.find(id);
        if (!found) {
            continue;
        }
        const Assertion original = *found; // adding below may relocate the store's records
        Assertion amended = original;
        amended.id.clear();
        amended.object = amended_object(decision.new_object);
        amended.provenance.strategy = StrategyKind::HumanAmended;
        amended.status = AssertionStatus::Verified;
        amended.confidence = std::max(original.confidence, store_.verification_threshold());
        KnowledgeStore::AddResult added = store_.add_assertion(amended);
        if (original.status != AssertionStatus::Rejected) {
            store_.set_status(id, AssertionStatus::Rejected, original.confidence);
        }
        encoded_ids.push_back(added.id);
        outcome.record.verified_count += 1;
    }

    outcome.newly_verified = outcome.record.verified_count;
    return outcome;
}

ExtractionReport Controller::extract(const KnowledgeNeed& need) {
    ExtractionReport report;
    report.need = need;

    // Throws ConfigError when no profiles exist or nothing is compatible.
    std::vector<Candidate> ranked = usage_.select(need, templates_.availability());

    // An LM trained before the facts the need requires cannot answer it;
    // such candidates are not appropriate resources for this need.
    std::erase_if(ranked, [&](const Candidate& c) {
        const LMProfile* p = usage_.find_profile(c.lm_id);
        return p && check_temporal_currency(*p, need) == Currency::Stale;
    });
    if (ranked.empty()) {
        throw ConfigError("every compatible LM has a training cutoff before the need's "
                          "required-as-of date " +
                          need.required_as_of.value_or("?") + "; a different source is needed");
    }

    // Bootstrap: with no track record at all for this function, one
    // analogical attempt goes first to gather initial hints.
    if (!usage_.has_records_for(need.pscm_function) && config_.analogical &&
        !config_.analogical->cases.empty()) {
        auto it = std::find_if(ranked.begin(), ranked.end(), [](const Candidate& c) {
            return c.strategy == StrategyKind::Analogical;
        });
        if (it != ranked.end()) {
            std::rotate(ranked.begin(), it, it + 1);
        }
    }

    const int min_verified = std::max(1, need.min_verified);
    int total_verified = 0;
    bool saw_backend_failure = false;

    for (const Candidate& candidate : ranked) {
        if (static_cast<int>(report.attempts.size()) >= config_.max_attempts) {
            break;
        }
        AttemptRecord record;
        record.lm_id = candidate.lm_id;
        record.strategy = candidate.strategy;
        bool success = false;
        try {
            AttemptOutcome outcome = run_attempt(candidate, need, report.encoded_assertion_ids);
            record = outcome.record;
            total_verified += outcome.newly_verified;
            success = outcome.newly_verified >= 1;
        } catch (const BackendError& e) {
            record.backend_failure = true;
            record.note = e.what();
            saw_backend_failure = true;
        } catch (const ConfigError&) {
            throw;
        } catch (const Error& e) {
            record.note = e.what();
        }
        report.attempts.push_back(record);
        usage_.record_outcome(candidate.lm_id, candidate.strategy, need.pscm_function, success);
        if (total_verified >= min_verified) {
            report.final_status = FinalStatus::Satisfied;
            return report;
        }
    }

    report.final_status = saw_backend_failure ? FinalStatus::Error : FinalStatus::Exhausted;
    return report;
}

void Controller::refine_from_use(const std::string& assertion_id, RefineOutcome outcome) {
    const Assertion* a = store_.find(assertion_id);
    if (!a) {
        throw NotFoundError("no assertion '" + assertion_id + "'");
    }
    if (a->status == AssertionStatus::Rejected) {
        throw StateError("assertion '" + assertion_id + "' is rejected; nothing to refine");
    }
    if (outcome == RefineOutcome::Worked) {
        store_.set_confidence(assertion_id, a->confidence + (1.0 - a->confidence) * 0.1);
        return;
    }
    // Contradicted by experience: demote, and count the miss against the
    // provenance triple that produced it.
    const Provenance provenance = a->provenance;
    store_.set_status(assertion_id, AssertionStatus::Rejected, a->confidence);
    const PromptRecord* prompt = store_.find_prompt(provenance.prompt_id);
    if (prompt) {
        usage_.record_outcome(provenance.lm_id, provenance.strategy, prompt->pscm_function, false);
    }
}

std::vector<Outcome> Controller::explore(const std::string& lm_id,
                                         const std::vector<PromptTemplate>& templates,
                                         const std::vector<std::map<std::string, Term>>& bindings_set) {
    const LMProfile* profile = usage_.find_profile(lm_id);
    if (!profile) {
        throw ConfigError("no profile for LM '" + lm_id + "'");
    }
    std::vector<Outcome> deltas;
    for (const PromptTemplate& tmpl : templates) {
        for (const std::map<std::string, Term>& bindings : bindings_set) {
            bool success = false;
            try {
                if (tmpl.target_class != profile->model_class) {
                    throw UsageError("template class does not match LM class");
                }
                PromptSpec spec = instantiate_template(tmpl, bindings);
                KnowledgeNeed probe;
                probe.pscm_function = tmpl.pscm_function;
                probe.task_name = spec.subject.text;
                spec.source_need = probe;
                apply_parameter_bounds(spec, *profile);
                spec.params.n_samples = 1;
                spec.prompt_id = store_.log_prompt(spec, lm_id);
                std::shared_ptr<Backend> backend = resolver_(*profile);
                if (!backend) {
                    throw ConfigError("no backend for LM '" + lm_id + "'");
                }
                std::size_t parsed = 0;
                if (spec.target_class == ModelClass::Generative) {
                    GenerativeResponse resp = backend->complete(spec);
                    store_.record_samples(spec.prompt_id, resp.samples);
                    parsed = interpret(spec, resp).size();
                } else {
                    MaskedResponse resp = backend->fill_mask(spec);
                    store_.record_candidates(spec.prompt_id, resp.candidates);
                    parsed = interpret(spec, resp).size();
                }
                success = parsed >= 1;
            } catch (const Error&) {
                success = false; // logged as a miss; exploration continues
            }
            usage_.record_outcome(lm_id, StrategyKind::Template, tmpl.pscm_function, success);
            deltas.push_back({lm_id, StrategyKind::Template, tmpl.pscm_function, success});
        }
    }
    return deltas;
}

} // namespace lmkex
