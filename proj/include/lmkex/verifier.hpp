// Decides whether interpreted assertions become verified knowledge:
// multi-sample agreement, store consistency, temporal currency, and an
// optional human review loop.
#pragma once

#include "lmkex/store.hpp"
#include "lmkex/types.hpp"
#include "lmkex/usage_model.hpp"

#include <map>
#include <optional>
#include <string>
#include <vector>

namespace lmkex {

struct VerificationPolicy {
    int n_samples = 3;
    double agreement_threshold = 0.6;
    bool require_human = false;
    // Promotion without a human in the loop needs at least this many samples.
    int auto_promote_min_samples = 3;
};

struct VerificationResult {
    std::string assertion_id;
    // Fraction of sample groups containing this assertion (1.0 = every
    // sample produced it).
    double agreement = 0.0;
    std::vector<std::string> conflicts; // ids of contradicting verified assertions
    Currency currency = Currency::Unknown;
    AssertionStatus decision = AssertionStatus::Potential;
    std::string rationale;
};

using AssertionGroup = std::vector<Assertion>;

// Canonical identity of an assertion for agreement matching: canonical
// subject, relation, canonical object. Strict full-phrase matching; no
// semantic looseness.
std::string normalize_assertion_key(const Assertion& a);

// Size of the modal equivalence class of normalized groups, over the
// number of groups. In (0, 1]; permutation-invariant.
double agreement_score(const std::vector<AssertionGroup>& sample_groups);

// Conflict rule table. Exclusive relations only: step-of clashes on the
// same index with a different action; causes clashes with a negated form
// of the same clause. also-known-as, can-do and the other list-like
// relations never conflict on differing objects.
bool assertions_conflict(const Assertion& a, const Assertion& b);

// Ids of verified assertions in the store that conflict with `a`.
std::vector<std::string> consistency_check(const Assertion& a, const KnowledgeStore& store);

enum class ReviewAction { Accept, Reject, Amend };

struct ReviewDecision {
    ReviewAction action = ReviewAction::Accept;
    std::string new_object; // Amend only
};

// One question out, one answer line back; nullopt when the channel closes.
class ReviewChannel {
public:
    virtual ~ReviewChannel() = default;
    virtual std::optional<std::string> ask(const std::string& prompt_line) = 0;
};

// Presents "subject | relation | object" per pending assertion and reads
// "y" / "n" / "a <new-object>". Assertions left unanswered when the
// channel closes get no decision and stay potential.
std::map<std::string, ReviewDecision> human_review(const std::vector<Assertion>& pending,
                                                   ReviewChannel& channel);

// Full verification of one attempt's interpreted samples. Human decisions,
// when supplied, are keyed by normalize_assertion_key().
std::vector<VerificationResult> verify(
    const std::vector<AssertionGroup>& assertions_per_sample, const VerificationPolicy& policy,
    const KnowledgeStore& store, const LMProfile& profile, const KnowledgeNeed& need,
    const std::map<std::string, ReviewAction>* human_decisions = nullptr);

// Confidence for a newly verified assertion. The measure itself is an
// open question; this placeholder maps agreement x capability into
// [floor, 1] so verified confidence never drops below the store's
// verification threshold. Monotone in both factors.
double verified_confidence(double agreement, double capability, double floor);

} // namespace lmkex
