// Core vocabulary of extracted knowledge: terms, relations, assertions,
// provenance, and the knowledge-need that drives an extraction.
#pragma once

#include "lmkex/clock.hpp"
#include "lmkex/errors.hpp"

#include <map>
#include <optional>
#include <string>
#include <vector>

namespace lmkex {

// Lowercase, trim, collapse internal whitespace, strip leading articles
// ("a", "an", "the"). Idempotent.
std::string canonicalize(const std::string& s);

// canonicalize() plus trailing sentence punctuation removal; the matching
// key used when comparing free-phrase objects.
std::string canonical_phrase(const std::string& s);

// A lexicon entry: canonical text plus the surface string it came from.
struct Term {
    std::string text;    // canonical form, never empty
    std::string surface; // original spelling, articles and case preserved

    Term() = default;
    explicit Term(const std::string& surface_form);

    static std::optional<Term> try_make(const std::string& surface_form);

    bool operator==(const Term& other) const = default;
};

enum class RelationKind {
    AlsoKnownAs,
    IsATypeOf,
    PartOf,
    CanDo,
    UsedFor,
    Causes,
    GoalOf,
    StepOf,
    DescriptionOf,
    Guidance,
};

enum class StrategyKind {
    Template,
    TemplateWithContext,
    Analogical,
    DialogueShaped,
    // Not a prompting strategy: provenance tag for assertions rewritten
    // during human review.
    HumanAmended,
};

enum class PscmFunction {
    ProblemSpaceDescription,
    GoalDefinition,
    StateLexicon,
    TaxonomicRelation,
    OperatorLexicon,
    OperatorPrecondition,
    OperatorAction,
};

enum class AssertionStatus { Potential, Verified, Rejected };

enum class SchemaKind { MaskLexicon, NounList, StepSequence, CausalClause, GoalClause, FreeText };

enum class ModelClass { Masked, Generative };

enum class LatencyClass { Local, Remote };

enum class Currency { Current, Stale, Unknown };

const char* to_string(RelationKind k);
const char* to_string(StrategyKind k);
const char* to_string(PscmFunction k);
const char* to_string(AssertionStatus k);
const char* to_string(SchemaKind k);
const char* to_string(ModelClass k);
const char* to_string(LatencyClass k);
const char* to_string(Currency k);

RelationKind relation_from_string(const std::string& s);
StrategyKind strategy_from_string(const std::string& s);
PscmFunction pscm_function_from_string(const std::string& s);
AssertionStatus status_from_string(const std::string& s);
SchemaKind schema_from_string(const std::string& s);
ModelClass model_class_from_string(const std::string& s);
LatencyClass latency_class_from_string(const std::string& s);

// Object of an assertion: a lexicon term or a verbatim free phrase
// (operator actions and explanations come back as clauses, not nouns).
struct ObjectValue {
    enum class Kind { Term, Phrase };

    Kind kind = Kind::Term;
    std::string text;    // term: canonical form; phrase: verbatim clause
    std::string surface; // term only: original spelling

    static ObjectValue term(const Term& t);
    static ObjectValue phrase(const std::string& clause);

    // Key used for duplicate detection and agreement matching.
    std::string match_key() const;

    bool operator==(const ObjectValue& other) const = default;
};

struct Provenance {
    std::string lm_id;
    std::string prompt_id;
    StrategyKind strategy = StrategyKind::Template;
    int sample_count = 1;
    TimePoint extracted_at{};

    bool operator==(const Provenance& other) const = default;
};

// One unit of extracted knowledge.
struct Assertion {
    std::string id;
    Term subject;
    RelationKind relation = RelationKind::DescriptionOf;
    ObjectValue object;
    Provenance provenance;
    AssertionStatus status = AssertionStatus::Potential;
    double confidence = 0.0;
    TimePoint created_at{};
    TimePoint updated_at{};

    // subject+relation+object+prompt-id: unique within a store.
    std::string dedup_key() const;

    bool operator==(const Assertion& other) const = default;
};

// Step objects carry their position as a "step N: " prefix so the pinned
// store record schema stays flat. Returns the index when present.
std::optional<int> step_index_of(const std::string& object_text);
std::string make_step_object(int index, const std::string& phrase);
std::string step_action_of(const std::string& object_text);

// What the agent lacks: task context plus the PSCM function to fill.
struct KnowledgeNeed {
    std::string task_name;
    std::string domain_label; // e.g. household / office / warehouse
    PscmFunction pscm_function = PscmFunction::StateLexicon;
    std::map<std::string, Term> bindings; // "?object" -> term
    std::vector<std::string> prior_dialogue;
    std::optional<std::string> required_as_of; // ISO date the facts must be current as of
    int min_verified = 1;
};

} // namespace lmkex
