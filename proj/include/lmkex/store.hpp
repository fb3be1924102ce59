// Persistent store for extracted assertions and the prompt records that
// back their provenance.
//
// File format: line-delimited JSON with a leading header line
// {"format":"lmkex-store","version":1}. Prompt records carry a "kind"
// field; assertion records are flat objects with a fixed field set.
//
// Single-writer contract: mutations are not synchronized; concurrent
// reads are fine while no mutation is in flight.
#pragma once

#include "lmkex/prompt_spec.hpp"
#include "lmkex/types.hpp"

#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace lmkex {

// Trace of one prompt sent to an LM: the rendered spec plus the raw
// responses it produced, kept for audit and provenance resolution.
struct PromptRecord {
    std::string id;
    std::string lm_id;
    std::string text;
    ModelClass target_class = ModelClass::Generative;
    SamplingParams params;
    StrategyKind strategy = StrategyKind::Template;
    SchemaKind schema = SchemaKind::FreeText;
    PscmFunction pscm_function = PscmFunction::StateLexicon;
    Term subject;
    std::optional<RelationKind> relation;
    TimePoint created_at{};
    std::vector<std::string> samples;                       // generative raw responses
    std::vector<std::pair<std::string, double>> candidates; // masked (token, score)
    std::vector<std::string> interpretation_notes;

    bool operator==(const PromptRecord& other) const = default;
};

struct AssertionFilter {
    std::optional<std::string> subject; // matched after canonicalization
    std::optional<RelationKind> relation;
    std::optional<AssertionStatus> status;
    std::optional<double> min_confidence;
};

class KnowledgeStore {
public:
    explicit KnowledgeStore(std::shared_ptr<Clock> clock = system_clock(),
                            double verification_threshold = 0.7);

    // --- prompt records -------------------------------------------------
    std::string log_prompt(const PromptSpec& spec, const std::string& lm_id);
    void record_samples(const std::string& prompt_id, const std::vector<std::string>& samples);
    void record_candidates(const std::string& prompt_id,
                           const std::vector<std::pair<std::string, double>>& candidates);
    void add_interpretation_note(const std::string& prompt_id, const std::string& note);
    const PromptRecord* find_prompt(const std::string& prompt_id) const;
    const std::vector<PromptRecord>& prompt_records() const { return prompts_; }

    // --- assertions -----------------------------------------------------
    struct AddResult {
        std::string id;
        bool duplicate = false; // true: identical assertion already present, store unchanged
    };

    // Assigns id and timestamps. Throws IntegrityError when the assertion's
    // provenance.prompt_id does not resolve.
    AddResult add_assertion(Assertion a);

    const Assertion* find(const std::string& id) const;
    std::vector<const Assertion*> query(const AssertionFilter& filter) const;
    const std::vector<Assertion>& assertions() const { return assertions_; }

    // Legal transitions: potential->verified, potential->rejected,
    // verified->rejected. Anything else is a StateError.
    void set_status(const std::string& id, AssertionStatus new_status, double confidence);

    // Confidence-only update (step-6 refinement without status change).
    void set_confidence(const std::string& id, double confidence);

    double verification_threshold() const { return verification_threshold_; }

    // --- persistence ----------------------------------------------------
    void save(const std::filesystem::path& path) const;
    void save(std::ostream& out) const;
    static KnowledgeStore load(const std::filesystem::path& path,
                               std::shared_ptr<Clock> clock = system_clock(),
                               double verification_threshold = 0.7);
    static KnowledgeStore load(std::istream& in, std::shared_ptr<Clock> clock = system_clock(),
                               double verification_threshold = 0.7);

    bool operator==(const KnowledgeStore& other) const {
        return assertions_ == other.assertions_ && prompts_ == other.prompts_;
    }

private:
    PromptRecord* find_prompt_mutable(const std::string& prompt_id);
    void check_verified_confidence(AssertionStatus status, double confidence) const;

    std::shared_ptr<Clock> clock_;
    double verification_threshold_;
    std::vector<PromptRecord> prompts_;
    std::vector<Assertion> assertions_;
    std::map<std::string, std::size_t> assertion_index_; // id -> position
    std::map<std::string, std::size_t> prompt_index_;
    std::map<std::string, std::size_t> dedup_index_; // dedup_key -> position
    std::uint64_t next_assertion_ = 1;
    std::uint64_t next_prompt_ = 1;
};

} // namespace lmkex
