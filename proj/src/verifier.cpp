#include "lmkex/verifier.hpp"

#include "lmkex/errors.hpp"

#include <algorithm>
#include <map>
#include <set>
#include <sstream>

namespace lmkex {

namespace {

std::set<std::string> group_key_set(const AssertionGroup& group) {
    std::set<std::string> keys;
    for (const Assertion& a : group) {
        keys.insert(normalize_assertion_key(a));
    }
    return keys;
}

std::vector<std::string> tokens_of(const std::string& canonical) {
    std::vector<std::string> tokens;
    std::istringstream in(canonical);
    std::string w;
    while (in >> w) {
        tokens.push_back(w);
    }
    return tokens;
}

bool is_negation(const std::string& token) {
    return token == "not" || token == "never" || token == "no" || token == "cannot";
}

// True when the clauses are the same modulo negation tokens but disagree
// on whether they are negated.
bool negation_opposed(const std::string& x, const std::string& y) {
    std::vector<std::string> xs;
    std::vector<std::string> ys;
    int x_neg = 0;
    int y_neg = 0;
    for (const std::string& t : tokens_of(canonical_phrase(x))) {
        if (is_negation(t)) {
            ++x_neg;
        } else {
            xs.push_back(t);
        }
    }
    for (const std::string& t : tokens_of(canonical_phrase(y))) {
        if (is_negation(t)) {
            ++y_neg;
        } else {
            ys.push_back(t);
        }
    }
    return xs == ys && (x_neg > 0) != (y_neg > 0);
}

} // namespace

std::string normalize_assertion_key(const Assertion& a) {
    return a.subject.text + "\x1f" + to_string(a.relation) + "\x1f" + a.object.match_key();
}

double agreement_score(const std::vector<AssertionGroup>& sample_groups) {
    if (sample_groups.empty()) {
        throw ValidationError("agreement_score needs at least one sample group");
    }
    std::map<std::set<std::string>, int> class_sizes;
    for (const AssertionGroup& group : sample_groups) {
        class_sizes[group_key_set(group)] += 1;
    }
    int modal = 0;
    for (const auto& [keys, count] : class_sizes) {
        (void)keys;
        modal = std::max(modal, count);
    }
    return static_cast<double>(modal) / static_cast<double>(sample_groups.size());
}

bool assertions_conflict(const Assertion& a, const Assertion& b) {
    if (a.subject.text != b.subject.text || a.relation != b.relation) {
        return false;
    }
    switch (a.relation) {
        case RelationKind::StepOf: {
            const auto ia = step_index_of(a.object.text);
            const auto ib = step_index_of(b.object.text);
            if (!ia || !ib || *ia != *ib) {
                return false;
            }
            return canonical_phrase(step_action_of(a.object.text)) !=
                   canonical_phrase(step_action_of(b.object.text));
        }
        case RelationKind::Causes:
            return negation_opposed(a.object.text, b.object.text);
        default:
            return false;
    }
}

std::vector<std::string> consistency_check(const Assertion& a, const KnowledgeStore& store) {
    std::vector<std::string> conflicts;
    for (const Assertion& existing : store.assertions()) {
        if (existing.status != AssertionStatus::Verified || existing.id == a.id) {
            continue;
        }
        if (assertions_conflict(a, existing)) {
            conflicts.push_back(existing.id);
        }
    }
    return conflicts;
}

std::map<std::string, ReviewDecision> human_review(const std::vector<Assertion>& pending,
                                                   ReviewChannel& channel) {
    std::map<std::string, ReviewDecision> decisions;
    for (const Assertion& a : pending) {
        const std::string line =
            a.subject.text + " | " + to_string(a.relation) + " | " + a.object.text;
        bool answered = false;
        while (!answered) {
            std::optional<std::string> answer = channel.ask(line);
            if (!answer) {
                return decisions; // channel closed; the rest stay potential
            }
            if (*answer == "y") {
                decisions[a.id] = {ReviewAction::Accept, ""};
                answered = true;
            } else if (*answer == "n") {
                decisions[a.id] = {ReviewAction::Reject, ""};
                answered = true;
            } else if (answer->rfind("a ", 0) == 0 && answer->size() > 2) {
                decisions[a.id] = {ReviewAction::Amend, answer->substr(2)};
                answered = true;
            }
            // anything else: ask again
        }
    }
    return decisions;
}

std::vector<VerificationResult> verify(const std::vector<AssertionGroup>& assertions_per_sample,
                                       const VerificationPolicy& policy,
                                       const KnowledgeStore& store, const LMProfile& profile,
                                       const KnowledgeNeed& need,
                                       const std::map<std::string, ReviewAction>* human_decisions) {
    if (static_cast<int>(assertions_per_sample.size()) != policy.n_samples) {
        throw ValidationError("verify() got " + std::to_string(assertions_per_sample.size()) +
                              " sample groups for a policy of " + std::to_string(policy.n_samples));
    }
    // Distinct assertions in first-seen order, plus how many groups
    // produced each.
    std::vector<std::pair<std::string, const Assertion*>> distinct;
    std::map<std::string, int> support_counts;
    for (const AssertionGroup& group : assertions_per_sample) {
        std::set<std::string> seen_in_group;
        for (const Assertion& a : group) {
            const std::string key = normalize_assertion_key(a);
            if (seen_in_group.insert(key).second) {
                support_counts[key] += 1;
                if (std::none_of(distinct.begin(), distinct.end(),
                                 [&](const auto& p) { return p.first == key; })) {
                    distinct.emplace_back(key, &a);
                }
            }
        }
    }

    const Currency currency = check_temporal_currency(profile, need);
    const int n = policy.n_samples;
    const bool can_auto_promote = policy.n_samples >= policy.auto_promote_min_samples;

    std::vector<VerificationResult> results;
    for (const auto& [key, assertion] : distinct) {
        VerificationResult r;
        r.assertion_id = assertion->id;
        r.agreement = static_cast<double>(support_counts[key]) / static_cast<double>(n);
        r.conflicts = consistency_check(*assertion, store);
        r.currency = currency;

        const ReviewAction* human = nullptr;
        if (human_decisions) {
            if (auto it = human_decisions->find(key); it != human_decisions->end()) {
                human = &it->second;
            }
        }

        std::ostringstream why;
        if (human && *human == ReviewAction::Reject) {
            r.decision = AssertionStatus::Rejected;
            why << "rejected by human review";
        } else if (!r.conflicts.empty()) {
            r.decision = AssertionStatus::Rejected;
            why << "conflicts with verified assertion(s):";
            for (const std::string& id : r.conflicts) {
                why << " " << id;
            }
        } else if (currency == Currency::Stale) {
            r.decision = AssertionStatus::Potential;
            why << "stale: need requires facts as of " << need.required_as_of.value_or("?")
                << " but LM training cutoff is " << profile.training_cutoff;
        } else if (r.agreement < policy.agreement_threshold) {
            r.decision = AssertionStatus::Potential;
            why << "low agreement " << r.agreement << " (threshold "
                << policy.agreement_threshold << ")";
        } else if (policy.require_human && !(human && *human == ReviewAction::Accept)) {
            r.decision = AssertionStatus::Potential;
            why << "awaiting human review";
        } else if (!policy.require_human && !can_auto_promote) {
            r.decision = AssertionStatus::Potential;
            why << "auto-promotion needs >= " << policy.auto_promote_min_samples
                << " samples, policy has " << policy.n_samples;
        } else {
            r.decision = AssertionStatus::Verified;
            why << "agreement " << r.agreement << " over " << n << " samples";
            if (human && *human == ReviewAction::Accept) {
                why << "; accepted by human review";
            }
        }
        r.rationale = why.str();
        results.push_back(std::move(r));
    }
    return results;
}

double verified_confidence(double agreement, double capability, double floor) {
    const double product = std::clamp(agreement, 0.0, 1.0) * std::clamp(capability, 0.0, 1.0);
    return std::clamp(floor + (1.0 - floor) * product, 0.0, 1.0);
}

} // namespace lmkex
