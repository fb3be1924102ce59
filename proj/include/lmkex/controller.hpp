// Orchestrates the extraction process: need -> LM/strategy selection ->
// prompt -> interpret -> verify -> encode, with bounded backtracking, and
// feeds every attempt's outcome back into the usage model.
#pragma once

#include "lmkex/backend.hpp"
#include "lmkex/prompt_engine.hpp"
#include "lmkex/store.hpp"
#include "lmkex/types.hpp"
#include "lmkex/usage_model.hpp"
#include "lmkex/verifier.hpp"

#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace lmkex {

struct AttemptRecord {
    std::string lm_id;
    StrategyKind strategy = StrategyKind::Template;
    std::string prompt_id; // empty when the attempt failed before prompting
    int interpreted_count = 0;
    int verified_count = 0;
    int rejected_count = 0;
    bool backend_failure = false;
    std::string note;
};

enum class FinalStatus { Satisfied, Exhausted, Error };

const char* to_string(FinalStatus s);

struct ExtractionReport {
    KnowledgeNeed need;
    std::vector<AttemptRecord> attempts;
    FinalStatus final_status = FinalStatus::Exhausted;
    std::vector<std::string> encoded_assertion_ids;
};

std::string report_to_json(const ExtractionReport& report);

// Cases the agent can lean on when it knows nothing about a task yet.
// The stimulus pattern may reference ?domain and ?task.
struct AnalogicalMaterial {
    std::vector<AnalogicalCase> cases;
    std::string stimulus_pattern;
    bool qa_style = false;
};

struct ControllerConfig {
    VerificationPolicy policy;
    int max_attempts = 5;
    std::optional<AnalogicalMaterial> analogical;
};

using BackendResolver = std::function<std::shared_ptr<Backend>(const LMProfile&)>;

enum class RefineOutcome { Worked, Contradicted };

class Controller {
public:
    Controller(KnowledgeStore& store, UsageModel& usage, TemplateLibrary templates,
               BackendResolver resolver, ControllerConfig config,
               ReviewChannel* review_channel = nullptr);

    // Runs the extraction loop for one need. Tries (lm, strategy) pairs in
    // usage-model rank order until enough assertions verify or attempts
    // run out. Throws ConfigError when no compatible LM exists.
    ExtractionReport extract(const KnowledgeNeed& need);

    // Step-6 feedback: knowledge that worked gains confidence; knowledge
    // contradicted by experience is demoted and counted against the
    // (lm, strategy, function) that produced it.
    void refine_from_use(const std::string& assertion_id, RefineOutcome outcome);

    // Systematic sweep: every template x binding set prompted once;
    // success means the interpreter produced at least one assertion. No
    // verification. Returns the recorded outcome deltas.
    std::vector<Outcome> explore(const std::string& lm_id,
                                 const std::vector<PromptTemplate>& templates,
                                 const std::vector<std::map<std::string, Term>>& bindings_set);

    const TemplateLibrary& templates() const { return templates_; }

private:
    struct AttemptOutcome {
        AttemptRecord record;
        int newly_verified = 0;
    };

    PromptSpec build_spec(StrategyKind strategy, const KnowledgeNeed& need,
                          const LMProfile& profile) const;
    AttemptOutcome run_attempt(const Candidate& candidate, const KnowledgeNeed& need,
                               std::vector<std::string>& encoded_ids);

    KnowledgeStore& store_;
    UsageModel& usage_;
    TemplateLibrary templates_;
    BackendResolver resolver_;
    ControllerConfig config_;
    ReviewChannel* review_channel_;
};

} // namespace lmkex
