// Turns a knowledge need plus a chosen strategy into concrete prompt text
// and sampling parameters. Ships the built-in PSCM template set.
#pragma once

#include "lmkex/prompt_spec.hpp"
#include "lmkex/types.hpp"
#include "lmkex/usage_model.hpp"

#include <filesystem>
#include <map>
#include <string>
#include <vector>

namespace lmkex {

// Declared template variables; anything else in a binding set is an error.
const std::vector<std::string>& declared_variables();

struct PromptTemplate {
    std::string id;
    PscmFunction pscm_function = PscmFunction::StateLexicon;
    // May contain variables (?object, ?actor, ?task, ?action) and, for
    // masked targets, exactly one "<mask>" marker.
    std::string pattern;
    ModelClass target_class = ModelClass::Generative;
    SchemaKind schema = SchemaKind::FreeText;
    RelationKind relation = RelationKind::DescriptionOf;
    // Variable whose binding becomes the assertion subject.
    std::string subject_var = "?object";

    // Variables appearing in pattern, in order of first occurrence.
    std::vector<std::string> variables() const;
    // Throws TemplateError when the mask count contradicts target_class or
    // an undeclared variable appears in the pattern.
    void validate() const;
};

struct AnalogicalCase {
    std::string stimulus;
    std::string response; // may be empty for statement-style cases
};

class TemplateLibrary {
public:
    // Library preloaded with the built-in PSCM template set.
    static TemplateLibrary builtins();
    // Empty library (tests, fully user-defined setups).
    static TemplateLibrary empty();

    void register_template(PromptTemplate t);
    // Extends the library from a line-delimited JSON file of records
    // {id, pscm_function, pattern, target_class, schema}.
    void load_file(const std::filesystem::path& path);

    std::vector<PromptTemplate> templates_for(PscmFunction fn) const;
    bool has_template(ModelClass target_class, PscmFunction fn) const;
    const std::vector<PromptTemplate>& all() const { return templates_; }
    const PromptTemplate* find(const std::string& id) const;

    TemplateAvailability availability() const;

private:
    std::vector<PromptTemplate> templates_;
};

SamplingParams default_params(ModelClass target_class);

// Substitutes bindings into the pattern (surface forms, punctuation
// preserved) and prepends the context prefix verbatim. Deterministic.
PromptSpec instantiate_template(const PromptTemplate& tmpl,
                                const std::map<std::string, Term>& bindings,
                                const std::string& context_prefix = "");

// Case lines followed by the bare stimulus. Plain style puts each
// "stimulus response" pair on its own line and ends mid-line on the
// stimulus; QA style wraps lines in "Q:"/"A:" markers and ends right
// after "Q: <stimulus>\n" so the model continues with the answer.
PromptSpec build_analogical_prompt(const std::vector<AnalogicalCase>& cases,
                                   const std::string& stimulus, bool qa_style);

// Prior dialogue utterances in order, then the query.
PromptSpec build_dialogue_shaped_prompt(const std::vector<std::string>& prior_dialogue,
                                        const std::string& query);

// Query form used for dialogue-shaped prompting; needs ?task and ?action.
std::string build_dialogue_query(const std::map<std::string, Term>& bindings);

// Default context-prefix derived from the need's domain label
// ("warehouse" -> "warehouse robot. "); empty when no label is set.
std::string default_context_prefix(const KnowledgeNeed& need);

// Clamps spec params into the profile's legal ranges.
void apply_parameter_bounds(PromptSpec& spec, const LMProfile& profile);

} // namespace lmkex
