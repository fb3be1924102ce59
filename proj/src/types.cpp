#include "lmkex/types.hpp"

#include <algorithm>
#include <cctype>
#include <cstdio>
#include <sstream>

namespace lmkex {

namespace {

bool is_article(const std::string& word) {
    return word == "a" || word == "an" || word == "the";
}

std::vector<std::string> split_words(const std::string& s) {
    std::vector<std::string> words;
    std::istringstream in(s);
    std::string w;
    while (in >> w) {
        words.push_back(w);
    }
    return words;
}

} // namespace

std::string canonicalize(const std::string& s) {
    std::string lowered;
    lowered.reserve(s.size());
    for (unsigned char c : s) {
        lowered.push_back(static_cast<char>(std::tolower(c)));
    }
    std::vector<std::string> words = split_words(lowered);
    std::size_t start = 0;
    while (start < words.size() && is_article(words[start])) {
        ++start;
    }
    std::string out;
    for (std::size_t i = start; i < words.size(); ++i) {
        if (!out.empty()) {
            out.push_back(' ');
        }
        out += words[i];
    }
    return out;
}

std::string canonical_phrase(const std::string& s) {
    std::string c = canonicalize(s);
    while (!c.empty() && (c.back() == '.' || c.back() == '!' || c.back() == '?' || c.back() == ',' ||
                          c.back() == ';' || c.back() == ':')) {
        c.pop_back();
    }
    while (!c.empty() && c.back() == ' ') {
        c.pop_back();
    }
    return c;
}

Term::Term(const std::string& surface_form) : text(canonicalize(surface_form)), surface(surface_form) {
    if (text.empty()) {
        throw ValidationError("term canonicalizes to empty: '" + surface_form + "'");
    }
}

std::optional<Term> Term::try_make(const std::string& surface_form) {
    std::string canonical = canonicalize(surface_form);
    if (canonical.empty()) {
        return std::nullopt;
    }
    Term t;
    t.text = std::move(canonical);
    t.surface = surface_form;
    return t;
}

namespace {

template <typename E>
E lookup(const std::string& s, std::initializer_list<std::pair<const char*, E>> table,
         const char* what) {
    for (const auto& [name, value] : table) {
        if (s == name) {
            return value;
        }
    }
    throw ValidationError(std::string("unknown ") + what + ": '" + s + "'");
}

} // namespace

const char* to_string(RelationKind k) {
    switch (k) {
        case RelationKind::AlsoKnownAs: return "also-known-as";
        case RelationKind::IsATypeOf: return "is-a-type-of";
        case RelationKind::PartOf: return "part-of";
        case RelationKind::CanDo: return "can-do";
        case RelationKind::UsedFor: return "used-for";
        case RelationKind::Causes: return "causes";
        case RelationKind::GoalOf: return "goal-of";
        case RelationKind::StepOf: return "step-of";
        case RelationKind::DescriptionOf: return "description-of";
        case RelationKind::Guidance: return "guidance";
    }
    return "?";
}

RelationKind relation_from_string(const std::string& s) {
    return lookup<RelationKind>(s,
                                {{"also-known-as", RelationKind::AlsoKnownAs},
                                 {"is-a-type-of", RelationKind::IsATypeOf},
                                 {"part-of", RelationKind::PartOf},
                                 {"can-do", RelationKind::CanDo},
                                 {"used-for", RelationKind::UsedFor},
                                 {"causes", RelationKind::Causes},
                                 {"goal-of", RelationKind::GoalOf},
                                 {"step-of", RelationKind::StepOf},
                                 {"description-of", RelationKind::DescriptionOf},
                                 {"guidance", RelationKind::Guidance}},
                                "relation");
}

const char* to_string(StrategyKind k) {
    switch (k) {
        case StrategyKind::Template: return "template";
        case StrategyKind::TemplateWithContext: return "template-with-context";
        case StrategyKind::Analogical: return "analogical";
        case StrategyKind::DialogueShaped: return "dialogue-shaped";
        case StrategyKind::HumanAmended: return "human-amended";
    }
    return "?";
}

StrategyKind strategy_from_string(const std::string& s) {
    return lookup<StrategyKind>(s,
                                {{"template", StrategyKind::Template},
                                 {"template-with-context", StrategyKind::TemplateWithContext},
                                 {"analogical", StrategyKind::Analogical},
                                 {"dialogue-shaped", StrategyKind::DialogueShaped},
                                 {"human-amended", StrategyKind::HumanAmended}},
                                "strategy");
}

const char* to_string(PscmFunction k) {
    switch (k) {
        case PscmFunction::ProblemSpaceDescription: return "problem-space-description";
        case PscmFunction::GoalDefinition: return "goal-definition";
        case PscmFunction::StateLexicon: return "state-lexicon";
        case PscmFunction::TaxonomicRelation: return "taxonomic-relation";
        case PscmFunction::OperatorLexicon: return "operator-lexicon";
        case PscmFunction::OperatorPrecondition: return "operator-precondition";
        case PscmFunction::OperatorAction: return "operator-action";
    }
    return "?";
}

PscmFunction pscm_function_from_string(const std::string& s) {
    return lookup<PscmFunction>(
        s,
        {{"problem-space-description", PscmFunction::ProblemSpaceDescription},
         {"goal-definition", PscmFunction::GoalDefinition},
         {"state-lexicon", PscmFunction::StateLexicon},
         {"taxonomic-relation", PscmFunction::TaxonomicRelation},
         {"operator-lexicon", PscmFunction::OperatorLexicon},
         {"operator-precondition", PscmFunction::OperatorPrecondition},
         {"operator-action", PscmFunction::OperatorAction}},
        "pscm function");
}

const char* to_string(AssertionStatus k) {
    switch (k) {
        case AssertionStatus::Potential: return "potential";
        case AssertionStatus::Verified: return "verified";
        case AssertionStatus::Rejected: return "rejected";
    }
    return "?";
}

AssertionStatus status_from_string(const std::string& s) {
    return lookup<AssertionStatus>(s,
                                   {{"potential", AssertionStatus::Potential},
                                    {"verified", AssertionStatus::Verified},
                                    {"rejected", AssertionStatus::Rejected}},
                                   "status");
}

const char* to_string(SchemaKind k) {
    switch (k) {
        case SchemaKind::MaskLexicon: return "mask-lexicon";
        case SchemaKind::NounList: return "noun-list";
        case SchemaKind::StepSequence: return "step-sequence";
        case SchemaKind::CausalClause: return "causal-clause";
        case SchemaKind::GoalClause: return "goal-clause";
        case SchemaKind::FreeText: return "free-text";
    }
    return "?";
}

SchemaKind schema_from_string(const std::string& s) {
    return lookup<SchemaKind>(s,
                              {{"mask-lexicon", SchemaKind::MaskLexicon},
                               {"noun-list", SchemaKind::NounList},
                               {"step-sequence", SchemaKind::StepSequence},
                               {"causal-clause", SchemaKind::CausalClause},
                               {"goal-clause", SchemaKind::GoalClause},
                               {"free-text", SchemaKind::FreeText}},
                              "schema");
}

const char* to_string(ModelClass k) {
    return k == ModelClass::Masked ? "masked" : "generative";
}

ModelClass model_class_from_string(const std::string& s) {
    return lookup<ModelClass>(
        s, {{"masked", ModelClass::Masked}, {"generative", ModelClass::Generative}}, "model class");
}

const char* to_string(LatencyClass k) {
    return k == LatencyClass::Local ? "local" : "remote";
}

LatencyClass latency_class_from_string(const std::string& s) {
    return lookup<LatencyClass>(
        s, {{"local", LatencyClass::Local}, {"remote", LatencyClass::Remote}}, "latency class");
}

const char* to_string(Currency k) {
    switch (k) {
        case Currency::Current: return "current";
        case Currency::Stale: return "stale";
        case Currency::Unknown: return "unknown";
    }
    return "?";
}

ObjectValue ObjectValue::term(const Term& t) {
    ObjectValue v;
    v.kind = Kind::Term;
    v.text = t.text;
    v.surface = t.surface;
    return v;
}

ObjectValue ObjectValue::phrase(const std::string& clause) {
    ObjectValue v;
    v.kind = Kind::Phrase;
    v.text = clause;
    return v;
}

std::string ObjectValue::match_key() const {
    return kind == Kind::Term ? text : canonical_phrase(text);
}

std::string Assertion::dedup_key() const {
    return subject.text + "\x1f" + to_string(relation) + "\x1f" + object.match_key() + "\x1f" +
           provenance.prompt_id;
}

std::optional<int> step_index_of(const std::string& object_text) {
    int index = 0;
    int consumed = 0;
    if (std::sscanf(object_text.c_str(), "step %d:%n", &index, &consumed) == 1 && consumed > 0) {
        return index;
    }
    return std::nullopt;
}

std::string make_step_object(int index, const std::string& phrase) {
    return "step " + std::to_string(index) + ": " + phrase;
}

std::string step_action_of(const std::string& object_text) {
    const std::size_t colon = object_text.find(':');
    if (!step_index_of(object_text) || colon == std::string::npos) {
        return object_text;
    }
    std::size_t start = colon + 1;
    while (start < object_text.size() && object_text[start] == ' ') {
        ++start;
    }
    return object_text.substr(start);
}

} // namespace lmkex
