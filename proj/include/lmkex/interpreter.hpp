// Converts raw LM text into assertions, using the prompt's schema to
// constrain parsing. Parsers are total over the restricted NL the
// templates elicit; quality judgment belongs to the verifier.
#pragma once

#include "lmkex/backend.hpp"
#include "lmkex/prompt_engine.hpp"
#include "lmkex/prompt_spec.hpp"
#include "lmkex/types.hpp"

#include <set>
#include <string>
#include <vector>

namespace lmkex {

struct Step {
    std::string text;
    // Leading-word heuristic; declarative sentences are kept as steps but
    // marked so downstream checks can weigh them.
    bool imperative = true;

    bool operator==(const Step& other) const = default;
};

struct StepSequence {
    std::vector<Step> steps;
    bool terminated = false; // the "You are done" terminator was present
};

// Items whose head word is a list filler ("and more", "other items").
const std::set<std::string>& default_fillers();

// "beds, tables, chairs, wardrobes, and more" -> beds/tables/chairs/wardrobes.
std::vector<Term> parse_noun_list(const std::string& text,
                                  const std::set<std::string>& fillers = default_fillers());

// Splits on sentence periods; "You are done" (any case, optional
// punctuation) terminates the sequence and is excluded from the steps.
StepSequence parse_step_sequence(const std::string& text);

// One potential assertion per candidate; confidence is the candidate
// score normalized by the top score.
std::vector<Assertion> candidates_to_assertions(const MaskedResponse& resp,
                                                const PromptTemplate& tmpl,
                                                const std::map<std::string, Term>& bindings,
                                                const KnowledgeNeed& need,
                                                const std::string& prompt_id = "");

struct CausalInterpretation {
    Assertion assertion;
    // Effect clauses when the response splits on "and" into two or more.
    std::vector<std::string> sub_effects;
};

CausalInterpretation parse_causal_clause(const std::string& stimulus_action,
                                         const std::string& text);

// Schema-dispatched interpretation of a full response.
std::vector<Assertion> interpret(const PromptSpec& spec, const MaskedResponse& resp);
std::vector<Assertion> interpret(const PromptSpec& spec, const GenerativeResponse& resp);

// Same, but keeps each generative sample's assertions separate; the
// verifier's agreement computation consumes these groups.
std::vector<std::vector<Assertion>> interpret_samples(const PromptSpec& spec,
                                                      const GenerativeResponse& resp);

} // namespace lmkex
