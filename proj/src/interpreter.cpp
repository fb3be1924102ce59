#include "lmkex/interpreter.hpp"

#include "lmkex/errors.hpp"

#include <algorithm>
#include <cctype>
#include <sstream>

namespace lmkex {

namespace {

std::string trim(const std::string& s) {
    std::size_t start = 0;
    std::size_t end = s.size();
    while (start < end && std::isspace(static_cast<unsigned char>(s[start]))) ++start;
    while (end > start && std::isspace(static_cast<unsigned char>(s[end - 1]))) --end;
    return s.substr(start, end - start);
}

std::string strip_terminal_punct(std::string s) {
    while (!s.empty() && (s.back() == '.' || s.back() == '!' || s.back() == '?' || s.back() == ',' ||
                          s.back() == ';')) {
        s.pop_back();
    }
    return trim(s);
}

std::vector<std::string> split_on(const std::string& text, const std::string& sep) {
    std::vector<std::string> parts;
    std::size_t start = 0;
    std::size_t pos;
    while ((pos = text.find(sep, start)) != std::string::npos) {
        parts.push_back(text.substr(start, pos - start));
        start = pos + sep.size();
    }
    parts.push_back(text.substr(start));
    return parts;
}

std::string first_word(const std::string& s) {
    std::istringstream in(s);
    std::string w;
    in >> w;
    std::string lowered;
    for (unsigned char c : w) {
        if (std::isalpha(c)) {
            lowered.push_back(static_cast<char>(std::tolower(c)));
        }
    }
    return lowered;
}

// Periods followed by whitespace (or end of text) close a sentence.
std::vector<std::string> split_sentences(const std::string& text) {
    std::vector<std::string> sentences;
    std::string current;
    for (std::size_t i = 0; i < text.size(); ++i) {
        current.push_back(text[i]);
        if (text[i] == '.' &&
            (i + 1 >= text.size() || std::isspace(static_cast<unsigned char>(text[i + 1])))) {
            std::string s = trim(current);
            if (!s.empty()) {
                sentences.push_back(std::move(s));
            }
            current.clear();
        }
    }
    std::string tail = trim(current);
    if (!tail.empty()) {
        sentences.push_back(std::move(tail));
    }
    return sentences;
}

bool is_terminator(const std::string& sentence) {
    return canonical_phrase(sentence) == "you are done";
}

// Sentences opening with a determiner or pronoun read as declarations,
// not commands.
bool looks_imperative(const std::string& sentence) {
    static const std::set<std::string> non_imperative_leads = {
        "the", "a",  "an",   "this", "that", "these", "those", "it", "there",
        "he",  "she", "they", "we",  "i",    "you",   "its"};
    return !non_imperative_leads.count(first_word(sentence));
}

Provenance provenance_for(const PromptSpec& spec, const std::string& lm_id) {
    Provenance p;
    p.lm_id = lm_id;
    p.prompt_id = spec.prompt_id;
    p.strategy = spec.strategy;
    p.sample_count = std::max(1, spec.params.n_samples);
    return p;
}

Term subject_for(const PromptSpec& spec) {
    if (!spec.subject.text.empty()) {
        return spec.subject;
    }
    if (auto t = Term::try_make(spec.source_need.task_name)) {
        return *t;
    }
    throw InterpretationError("prompt spec carries no subject term");
}

Assertion base_assertion(const PromptSpec& spec, const std::string& lm_id, RelationKind relation) {
    Assertion a;
    a.subject = subject_for(spec);
    a.relation = relation;
    a.provenance = provenance_for(spec, lm_id);
    a.status = AssertionStatus::Potential;
    a.confidence = 0.5;
    return a;
}

// Single generative sample -> assertions, by schema.
std::vector<Assertion> interpret_one(const PromptSpec& spec, const std::string& sample,
                                     const std::string& lm_id) {
    std::vector<Assertion> out;
    switch (spec.schema) {
        case SchemaKind::NounList: {
            for (const Term& t : parse_noun_list(sample)) {
                Assertion a = base_assertion(
                    spec, lm_id, spec.relation.value_or(RelationKind::DescriptionOf));
                a.object = ObjectValue::term(t);
                out.push_back(std::move(a));
            }
            break;
        }
        case SchemaKind::StepSequence: {
            const StepSequence seq = parse_step_sequence(sample);
            int index = 0;
            for (const Step& step : seq.steps) {
                Assertion a = base_assertion(spec, lm_id, RelationKind::StepOf);
                a.object = ObjectValue::phrase(make_step_object(++index, step.text));
                out.push_back(std::move(a));
            }
            break;
        }
        case SchemaKind::CausalClause: {
            if (trim(sample).empty()) {
                break; // nothing to assert from this sample
            }
            CausalInterpretation ci = parse_causal_clause(subject_for(spec).surface, sample);
            ci.assertion.provenance = provenance_for(spec, lm_id);
            ci.assertion.subject = subject_for(spec);
            out.push_back(std::move(ci.assertion));
            break;
        }
        case SchemaKind::GoalClause: {
            const std::string clause = strip_terminal_punct(trim(sample));
            if (clause.empty()) {
                break;
            }
            Assertion a = base_assertion(spec, lm_id, RelationKind::GoalOf);
            a.object = ObjectValue::phrase(clause);
            out.push_back(std::move(a));
            break;
        }
        case SchemaKind::FreeText: {
            const std::string text = trim(sample);
            if (text.empty()) {
                break;
            }
            Assertion a = base_assertion(
                spec, lm_id, spec.relation.value_or(RelationKind::DescriptionOf));
            a.object = ObjectValue::phrase(text);
            out.push_back(std::move(a));
            break;
        }
        case SchemaKind::MaskLexicon:
            throw UsageError("mask-lexicon schema cannot interpret a generative sample");
    }
    return out;
}

} // namespace

const std::set<std::string>& default_fillers() {
    static const std::set<std::string> fillers = {"more", "others", "other", "etc"};
    return fillers;
}

std::vector<Term> parse_noun_list(const std::string& text, const std::set<std::string>& fillers) {
    std::vector<Term> items;
    for (const std::string& comma_piece : split_on(text, ",")) {
        std::string piece = trim(comma_piece);
        if (piece.rfind("and ", 0) == 0) {
            piece = piece.substr(4);
        }
        for (const std::string& raw : split_on(piece, " and ")) {
            const std::string item = strip_terminal_punct(trim(raw));
            if (item.empty() || fillers.count(first_word(item))) {
                continue;
            }
            if (auto term = Term::try_make(item)) {
                items.push_back(std::move(*term));
            }
        }
    }
    return items;
}

StepSequence parse_step_sequence(const std::string& text) {
    StepSequence seq;
    for (const std::string& sentence : split_sentences(text)) {
        if (is_terminator(sentence)) {
            seq.terminated = true;
            continue;
        }
        Step step;
        step.text = strip_terminal_punct(sentence);
        step.imperative = looks_imperative(sentence);
        if (!step.text.empty()) {
            seq.steps.push_back(std::move(step));
        }
    }
    return seq;
}

std::vector<Assertion> candidates_to_assertions(const MaskedResponse& resp,
                                                const PromptTemplate& tmpl,
                                                const std::map<std::string, Term>& bindings,
                                                const KnowledgeNeed& need,
                                                const std::string& prompt_id) {
    if (tmpl.target_class != ModelClass::Masked) {
        throw UsageError("candidates_to_assertions needs a masked template");
    }
    auto subject_it = bindings.find(tmpl.subject_var);
    if (subject_it == bindings.end()) {
        throw InterpretationError("no binding for subject variable " + tmpl.subject_var);
    }
    std::vector<Assertion> out;
    if (resp.candidates.empty()) {
        return out;
    }
    const double top = resp.candidates.front().second;
    for (const auto& [token, score] : resp.candidates) {
        auto object = Term::try_make(token);
        if (!object) {
            continue;
        }
        Assertion a;
        a.subject = subject_it->second;
        a.relation = tmpl.relation;
        a.object = ObjectValue::term(*object);
        a.provenance.lm_id = resp.lm_id;
        a.provenance.prompt_id = prompt_id;
        a.provenance.strategy = StrategyKind::Template;
        a.provenance.sample_count = 1;
        a.status = AssertionStatus::Potential;
        a.confidence = top > 0.0 ? std::clamp(score / top, 0.0, 1.0) : 0.0;
        out.push_back(std::move(a));
    }
    (void)need;
    return out;
}

CausalInterpretation parse_causal_clause(const std::string& stimulus_action,
                                         const std::string& text) {
    const std::string clause = strip_terminal_punct(trim(text));
    if (clause.empty()) {
        throw InterpretationError("causal clause response is empty: nothing to assert");
    }
    CausalInterpretation out;
    out.assertion.subject = Term(stimulus_action);
    out.assertion.relation = RelationKind::Causes;
    out.assertion.object = ObjectValue::phrase(clause);
    out.assertion.status = AssertionStatus::Potential;
    out.assertion.confidence = 0.5;
    std::vector<std::string> parts;
    for (const std::string& raw : split_on(clause, " and ")) {
        const std::string part = trim(raw);
        if (!part.empty()) {
            parts.push_back(part);
        }
    }
    if (parts.size() >= 2) {
        out.sub_effects = std::move(parts);
    }
    return out;
}

std::vector<Assertion> interpret(const PromptSpec& spec, const MaskedResponse& resp) {
    if (spec.target_class != ModelClass::Masked || spec.schema != SchemaKind::MaskLexicon) {
        throw UsageError("masked response does not match the prompt's schema");
    }
    if (!spec.relation) {
        throw UsageError("masked prompt spec carries no relation");
    }
    const Term subject = subject_for(spec);
    std::vector<Assertion> out;
    if (resp.candidates.empty()) {
        return out;
    }
    const double top = resp.candidates.front().second;
    for (const auto& [token, score] : resp.candidates) {
        auto object = Term::try_make(token);
        if (!object) {
            continue;
        }
        Assertion a = base_assertion(spec, resp.lm_id, *spec.relation);
        a.subject = subject;
        a.object = ObjectValue::term(*object);
        a.confidence = top > 0.0 ? std::clamp(score / top, 0.0, 1.0) : 0.0;
        out.push_back(std::move(a));
    }
    return out;
}

std::vector<std::vector<Assertion>> interpret_samples(const PromptSpec& spec,
                                                      const GenerativeResponse& resp) {
    if (spec.target_class != ModelClass::Generative || spec.schema == SchemaKind::MaskLexicon) {
        throw UsageError("generative response does not match the prompt's schema");
    }
    std::vector<std::vector<Assertion>> groups;
    groups.reserve(resp.samples.size());
    for (const std::string& sample : resp.samples) {
        groups.push_back(interpret_one(spec, sample, resp.lm_id));
    }
    return groups;
}

std::vector<Assertion> interpret(const PromptSpec& spec, const GenerativeResponse& resp) {
    std::vector<Assertion> out;
    for (std::vector<Assertion>& group : interpret_samples(spec, resp)) {
        for (Assertion& a : group) {
            out.push_back(std::move(a));
        }
    }
    return out;
}

} // namespace lmkex
