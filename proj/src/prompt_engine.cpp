#include "lmkex/prompt_engine.hpp"

#include "lmkex/errors.hpp"

#include <json.hpp>

#include <algorithm>
#include <cctype>
#include <fstream>

namespace lmkex {

using ordered_json = nlohmann::ordered_json;

const std::vector<std::string>& declared_variables() {
    static const std::vector<std::string> vars = {"?object", "?actor", "?task", "?action"};
    return vars;
}

int mask_count(const std::string& text) {
    int count = 0;
    std::size_t pos = 0;
    while ((pos = text.find(kMaskMarker, pos)) != std::string::npos) {
        ++count;
        pos += std::string(kMaskMarker).size();
    }
    return count;
}

namespace {

bool is_declared(const std::string& var) {
    const auto& vars = declared_variables();
    return std::find(vars.begin(), vars.end(), var) != vars.end();
}

// Variables are "?" followed by letters.
std::vector<std::string> scan_variables(const std::string& pattern) {
    std::vector<std::string> found;
    for (std::size_t i = 0; i < pattern.size(); ++i) {
        if (pattern[i] != '?' || i + 1 >= pattern.size() ||
            !std::isalpha(static_cast<unsigned char>(pattern[i + 1]))) {
            continue;
        }
        std::size_t end = i + 1;
        while (end < pattern.size() && std::isalpha(static_cast<unsigned char>(pattern[end]))) {
            ++end;
        }
        std::string var = pattern.substr(i, end - i);
        if (std::find(found.begin(), found.end(), var) == found.end()) {
            found.push_back(std::move(var));
        }
        i = end - 1;
    }
    return found;
}

std::string replace_all(std::string text, const std::string& from, const std::string& to) {
    std::size_t pos = 0;
    while ((pos = text.find(from, pos)) != std::string::npos) {
        text.replace(pos, from.size(), to);
        pos += to.size();
    }
    return text;
}

std::string default_subject_var(PscmFunction fn) {
    switch (fn) {
        case PscmFunction::ProblemSpaceDescription:
        case PscmFunction::GoalDefinition:
            return "?task";
        case PscmFunction::OperatorLexicon:
            return "?actor";
        case PscmFunction::OperatorAction:
            return "?action";
        default:
            return "?object";
    }
}

RelationKind default_relation(PscmFunction fn) {
    switch (fn) {
        case PscmFunction::ProblemSpaceDescription: return RelationKind::DescriptionOf;
        case PscmFunction::GoalDefinition: return RelationKind::GoalOf;
        case PscmFunction::StateLexicon: return RelationKind::AlsoKnownAs;
        case PscmFunction::TaxonomicRelation: return RelationKind::IsATypeOf;
        case PscmFunction::OperatorLexicon: return RelationKind::CanDo;
        case PscmFunction::OperatorPrecondition: return RelationKind::UsedFor;
        case PscmFunction::OperatorAction: return RelationKind::Causes;
    }
    return RelationKind::DescriptionOf;
}

PromptTemplate builtin(const char* id, PscmFunction fn, const char* pattern, ModelClass cls,
                       SchemaKind schema, RelationKind relation) {
    PromptTemplate t;
    t.id = id;
    t.pscm_function = fn;
    t.pattern = pattern;
    t.target_class = cls;
    t.schema = schema;
    t.relation = relation;
    t.subject_var = default_subject_var(fn);
    return t;
}

std::vector<PromptTemplate> make_builtins() {
    using PF = PscmFunction;
    using MC = ModelClass;
    using SK = SchemaKind;
    using RK = RelationKind;
    return {
        builtin("psd-explain", PF::ProblemSpaceDescription, "Explain how to ?task.",
                MC::Generative, SK::FreeText, RK::DescriptionOf),
        builtin("psd-how", PF::ProblemSpaceDescription, "How do you ?task", MC::Generative,
                SK::FreeText, RK::DescriptionOf),
        builtin("goal-completion", PF::GoalDefinition, "The goal of ?task is", MC::Generative,
                SK::GoalClause, RK::GoalOf),
        builtin("goal-question", PF::GoalDefinition, "What is the goal of ?task", MC::Generative,
                SK::GoalClause, RK::GoalOf),
        builtin("lexicon-aka", PF::StateLexicon, "?object is also known as a <mask>.", MC::Masked,
                SK::MaskLexicon, RK::AlsoKnownAs),
        builtin("taxonomy-type", PF::TaxonomicRelation, "?object is a type of <mask>.", MC::Masked,
                SK::MaskLexicon, RK::IsATypeOf),
        builtin("taxonomy-part", PF::TaxonomicRelation, "?object is part of a <mask>.", MC::Masked,
                SK::MaskLexicon, RK::PartOf),
        builtin("operator-can-a", PF::OperatorLexicon, "?actor can <mask> a ?object.", MC::Masked,
                SK::MaskLexicon, RK::CanDo),
        builtin("operator-can-an", PF::OperatorLexicon, "?actor can <mask> an ?object.",
                MC::Masked, SK::MaskLexicon, RK::CanDo),
        builtin("precondition-use", PF::OperatorPrecondition, "?object is used for <mask>.",
                MC::Masked, SK::MaskLexicon, RK::UsedFor),
        builtin("action-causes", PF::OperatorAction, "?action causes", MC::Generative,
                SK::CausalClause, RK::Causes),
    };
}

constexpr const char* kDialogueQueryPattern = "?task. What is the next goal or subtask of ?action?";

} // namespace

std::vector<std::string> PromptTemplate::variables() const {
    return scan_variables(pattern);
}

void PromptTemplate::validate() const {
    const int masks = mask_count(pattern);
    if (target_class == ModelClass::Masked && masks != 1) {
        throw TemplateError("masked template '" + id + "' must contain exactly one " + kMaskMarker);
    }
    if (target_class == ModelClass::Generative && masks != 0) {
        throw TemplateError("generative template '" + id + "' must not contain " + kMaskMarker);
    }
    for (const std::string& var : variables()) {
        if (!is_declared(var)) {
            throw TemplateError("template '" + id + "' uses undeclared variable " + var);
        }
    }
}

TemplateLibrary TemplateLibrary::builtins() {
    TemplateLibrary lib;
    for (PromptTemplate& t : make_builtins()) {
        lib.register_template(std::move(t));
    }
    return lib;
}

TemplateLibrary TemplateLibrary::empty() {
    return {};
}

void TemplateLibrary::register_template(PromptTemplate t) {
    t.validate();
    for (const PromptTemplate& existing : templates_) {
        if (existing.id == t.id) {
            throw TemplateError("duplicate template id '" + t.id + "'");
        }
    }
    templates_.push_back(std::move(t));
}

void TemplateLibrary::load_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw ConfigError("cannot read template file '" + path.string() + "'");
    }
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) {
            continue;
        }
        ordered_json j;
        try {
            j = ordered_json::parse(line);
        } catch (const nlohmann::json::exception& e) {
            throw ParseError(std::string("bad JSON: ") + e.what(), line_no);
        }
        try {
            PromptTemplate t;
            t.id = j.at("id").get<std::string>();
            t.pscm_function = pscm_function_from_string(j.at("pscm_function").get<std::string>());
            t.pattern = j.at("pattern").get<std::string>();
            t.target_class = model_class_from_string(j.at("target_class").get<std::string>());
            t.schema = schema_from_string(j.at("schema").get<std::string>());
            t.relation = j.contains("relation")
                             ? relation_from_string(j.at("relation").get<std::string>())
                             : default_relation(t.pscm_function);
            t.subject_var = j.contains("subject_var") ? j.at("subject_var").get<std::string>()
                                                      : default_subject_var(t.pscm_function);
            register_template(std::move(t));
        } catch (const nlohmann::json::exception& e) {
            throw ParseError(std::string("bad template record: ") + e.what(), line_no);
        }
    }
}

std::vector<PromptTemplate> TemplateLibrary::templates_for(PscmFunction fn) const {
    std::vector<PromptTemplate> out;
    for (const PromptTemplate& t : templates_) {
        if (t.pscm_function == fn) {
            out.push_back(t);
        }
    }
    return out;
}

bool TemplateLibrary::has_template(ModelClass target_class, PscmFunction fn) const {
    for (const PromptTemplate& t : templates_) {
        if (t.pscm_function == fn && t.target_class == target_class) {
            return true;
        }
    }
    return false;
}

const PromptTemplate* TemplateLibrary::find(const std::string& id) const {
    for (const PromptTemplate& t : templates_) {
        if (t.id == id) {
            return &t;
        }
    }
    return nullptr;
}

TemplateAvailability TemplateLibrary::availability() const {
    // Captures a snapshot by value; the library is cheap to copy and the
    // callback must outlive select() calls.
    TemplateLibrary copy = *this;
    return [copy](ModelClass cls, PscmFunction fn) { return copy.has_template(cls, fn); };
}

SamplingParams default_params(ModelClass target_class) {
    SamplingParams p;
    if (target_class == ModelClass::Masked) {
        p.max_tokens = 1;
        p.temperature = 0.0;
        p.n_samples = 1;
        p.top_k = 10;
    }
    return p;
}

PromptSpec instantiate_template(const PromptTemplate& tmpl,
                                const std::map<std::string, Term>& bindings,
                                const std::string& context_prefix) {
    tmpl.validate();
    for (const auto& [var, term] : bindings) {
        (void)term;
        if (!is_declared(var)) {
            throw TemplateError("binding for unknown variable " + var);
        }
    }
    std::string text = tmpl.pattern;
    for (const std::string& var : tmpl.variables()) {
        auto it = bindings.find(var);
        if (it == bindings.end()) {
            throw TemplateError("template '" + tmpl.id + "' needs a binding for " + var);
        }
        text = replace_all(text, var, it->second.surface);
    }
    PromptSpec spec;
    spec.text = context_prefix + text;
    spec.target_class = tmpl.target_class;
    spec.params = default_params(tmpl.target_class);
    spec.strategy =
        context_prefix.empty() ? StrategyKind::Template : StrategyKind::TemplateWithContext;
    spec.schema = tmpl.schema;
    spec.relation = tmpl.relation;
    if (auto it = bindings.find(tmpl.subject_var); it != bindings.end()) {
        spec.subject = it->second;
    }
    return spec;
}

PromptSpec build_analogical_prompt(const std::vector<AnalogicalCase>& cases,
                                   const std::string& stimulus, bool qa_style) {
    if (cases.empty()) {
        throw StrategyError("analogical prompting needs at least one case");
    }
    if (stimulus.empty()) {
        throw ValidationError("analogical prompting needs a non-empty stimulus");
    }
    for (const AnalogicalCase& c : cases) {
        if (c.stimulus.empty()) {
            throw ValidationError("analogical case with empty stimulus");
        }
    }
    auto tagged = [](const std::string& s, const char* tag) {
        return s.rfind(tag, 0) == 0 ? s : std::string(tag) + " " + s;
    };
    std::string text;
    if (qa_style) {
        for (const AnalogicalCase& c : cases) {
            text += tagged(c.stimulus, "Q:") + "\n";
            if (!c.response.empty()) {
                text += tagged(c.response, "A:") + "\n";
            }
        }
        text += tagged(stimulus, "Q:") + "\n";
    } else {
        for (const AnalogicalCase& c : cases) {
            text += c.stimulus;
            if (!c.response.empty()) {
                text += " " + c.response;
            }
            text += "\n";
        }
        text += stimulus; // incomplete final line; the LM continues here
    }
    PromptSpec spec;
    spec.text = std::move(text);
    spec.target_class = ModelClass::Generative;
    spec.params = default_params(ModelClass::Generative);
    spec.strategy = StrategyKind::Analogical;
    spec.schema = SchemaKind::FreeText;
    return spec;
}

PromptSpec build_dialogue_shaped_prompt(const std::vector<std::string>& prior_dialogue,
                                        const std::string& query) {
    if (query.empty()) {
        throw ValidationError("dialogue-shaped prompting needs a non-empty query");
    }
    std::string text;
    for (const std::string& utterance : prior_dialogue) {
        text += utterance + " ";
    }
    text += query;
    PromptSpec spec;
    spec.text = std::move(text);
    spec.target_class = ModelClass::Generative;
    spec.params = default_params(ModelClass::Generative);
    spec.strategy = StrategyKind::DialogueShaped;
    spec.schema = SchemaKind::StepSequence;
    return spec;
}

std::string build_dialogue_query(const std::map<std::string, Term>& bindings) {
    std::string text = kDialogueQueryPattern;
    for (const std::string& var : scan_variables(text)) {
        auto it = bindings.find(var);
        if (it == bindings.end()) {
            throw TemplateError("dialogue query needs a binding for " + var);
        }
        text = replace_all(text, var, it->second.surface);
    }
    return text;
}

std::string default_context_prefix(const KnowledgeNeed& need) {
    if (need.domain_label.empty()) {
        return "";
    }
    // Bare agent label, then ". " as the separator.
    return need.domain_label + " robot. ";
}

void apply_parameter_bounds(PromptSpec& spec, const LMProfile& profile) {
    const ParameterBounds& b = profile.bounds;
    spec.params.max_tokens = std::clamp(spec.params.max_tokens, b.max_tokens.first, b.max_tokens.second);
    spec.params.temperature =
        std::clamp(spec.params.temperature, b.temperature.first, b.temperature.second);
    spec.params.top_k = std::clamp(spec.params.top_k, b.top_k.first, b.top_k.second);
    spec.params.n_samples = std::max(1, spec.params.n_samples);
}

} // namespace lmkex
