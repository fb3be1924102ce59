// Meta-knowledge about each LM: what it is, what it has answered well via
// which strategy, and whether its training data is current enough for a
// given need. Drives LM/strategy selection.
#pragma once

#include "lmkex/types.hpp"

#include <filesystem>
#include <functional>
#include <map>
#include <string>
#include <vector>

namespace lmkex {

struct ParameterBounds {
    std::pair<int, int> max_tokens{1, 256};
    std::pair<double, double> temperature{0.0, 1.0};
    std::pair<int, int> top_k{1, 50};

    bool operator==(const ParameterBounds& other) const = default;
};

struct LMProfile {
    std::string lm_id;
    ModelClass model_class = ModelClass::Generative;
    std::string training_cutoff; // ISO date, e.g. "2019-10-01"
    std::string corpus_description;
    std::string endpoint_ref; // "script:<path>" or an http endpoint URL
    LatencyClass latency_class = LatencyClass::Remote;
    ParameterBounds bounds;
    // Key LM characteristics are still an open research question; anything
    // beyond the fixed fields goes here.
    std::map<std::string, std::string> extensions;

    bool operator==(const LMProfile& other) const = default;
};

// Track record of one (LM, strategy, PSCM function) combination.
struct UsageRecord {
    std::string lm_id;
    StrategyKind strategy = StrategyKind::Template;
    PscmFunction pscm_function = PscmFunction::StateLexicon;
    int successes = 0;
    int attempts = 0;

    bool operator==(const UsageRecord& other) const = default;
};

struct Outcome {
    std::string lm_id;
    StrategyKind strategy = StrategyKind::Template;
    PscmFunction pscm_function = PscmFunction::StateLexicon;
    bool success = false;
};

struct Candidate {
    std::string lm_id;
    StrategyKind strategy = StrategyKind::Template;
    double capability = 0.5;
};

// Tells select() whether any prompt template exists for a PSCM function
// renderable against a given model class. Provided by the prompt engine.
using TemplateAvailability = std::function<bool(ModelClass, PscmFunction)>;

class UsageModel {
public:
    void register_profile(LMProfile profile);
    const std::vector<LMProfile>& profiles() const { return profiles_; }
    const LMProfile* find_profile(const std::string& lm_id) const;

    // Laplace-smoothed success rate (successes+1)/(attempts+2); the
    // uninformed prior with zero attempts is 0.5.
    double estimate_capability(const std::string& lm_id, StrategyKind strategy,
                               PscmFunction fn) const;

    // Ranked (lm, strategy) candidates for a need, best first. Ties break
    // toward local LMs, then lexicographic lm-id, then strategy
    // declaration order, making the ranking a total order.
    std::vector<Candidate> select(const KnowledgeNeed& need,
                                  const TemplateAvailability& has_template) const;

    // Sole mutator of the track record.
    void record_outcome(const std::string& lm_id, StrategyKind strategy, PscmFunction fn,
                        bool success);
    // Reinstates a persisted record verbatim (load/merge path, not a
    // logged outcome).
    void restore_record(const UsageRecord& record);
    void record_outcome(const Outcome& o) {
        record_outcome(o.lm_id, o.strategy, o.pscm_function, o.success);
    }

    std::vector<UsageRecord> records() const;
    const UsageRecord* find_record(const std::string& lm_id, StrategyKind strategy,
                                   PscmFunction fn) const;
    const std::vector<Outcome>& outcome_log() const { return log_; }

    bool has_records_for(PscmFunction fn) const;

    void save(const std::filesystem::path& path) const;
    static UsageModel load(const std::filesystem::path& path);

    bool operator==(const UsageModel& other) const {
        return profiles_ == other.profiles_ && records_ == other.records_;
    }

private:
    std::vector<LMProfile> profiles_;
    std::map<std::string, UsageRecord> records_; // keyed lm\x1fstrategy\x1ffunction
    std::vector<Outcome> log_;
};

// Is a strategy usable at all with an LM of this class, given the
// available templates for the need's function?
bool strategy_compatible(const LMProfile& profile, StrategyKind strategy, PscmFunction fn,
                         const TemplateAvailability& has_template);

// Stale iff the need requires facts as of a date later than the LM's
// training cutoff; unknown when the need carries no date requirement.
Currency check_temporal_currency(const LMProfile& profile, const KnowledgeNeed& need);

} // namespace lmkex
