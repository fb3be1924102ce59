#include "lmkex/prompt_engine.hpp"

#include <doctest.h>

#include "test_support.hpp"

#include <map>

using namespace lmkex;

namespace {

std::map<std::string, Term> bind(std::initializer_list<std::pair<const char*, const char*>> pairs) {
    std::map<std::string, Term> bindings;
    for (const auto& [var, surface] : pairs) {
        bindings.emplace(var, Term(surface));
    }
    return bindings;
}

const PromptTemplate& builtin(const TemplateLibrary& lib, const std::string& id) {
    const PromptTemplate* t = lib.find(id);
    REQUIRE(t != nullptr);
    return *t;
}

} // namespace

TEST_CASE("template instantiation substitutes surface forms verbatim") {
    const TemplateLibrary lib = TemplateLibrary::builtins();

    const PromptSpec aka = instantiate_template(builtin(lib, "lexicon-aka"),
                                                bind({{"?object", "A shelf"}}));
    CHECK(aka.text == "A shelf is also known as a <mask>.");
    CHECK(aka.target_class == ModelClass::Masked);
    CHECK(aka.strategy == StrategyKind::Template);
    CHECK(aka.schema == SchemaKind::MaskLexicon);
    CHECK(aka.relation == RelationKind::AlsoKnownAs);
    CHECK(aka.subject.text == "shelf");
    CHECK(aka.params.top_k == 10);

    const PromptSpec explain = instantiate_template(builtin(lib, "psd-explain"),
                                                    bind({{"?task", "patrol a warehouse"}}));
    CHECK(explain.text == "Explain how to patrol a warehouse.");
    CHECK(explain.target_class == ModelClass::Generative);
    CHECK(explain.params.max_tokens == 64);
    CHECK(explain.params.temperature == 0.7);
    CHECK(explain.params.n_samples == 1);
}

TEST_CASE("a context prefix is prepended verbatim and changes the strategy") {
    const TemplateLibrary lib = TemplateLibrary::builtins();
    const PromptSpec spec = instantiate_template(builtin(lib, "precondition-use"),
                                                 bind({{"?object", "A bay"}}), "warehouse robot. ");
    CHECK(spec.text == "warehouse robot. A bay is used for <mask>.");
    CHECK(spec.strategy == StrategyKind::TemplateWithContext);
}

TEST_CASE("built-in templates reproduce every contextualized example prompt") {
    const TemplateLibrary lib = TemplateLibrary::builtins();
    CHECK(instantiate_template(builtin(lib, "psd-explain"), bind({{"?task", "patrol a warehouse"}}))
              .text == "Explain how to patrol a warehouse.");
    CHECK(instantiate_template(builtin(lib, "goal-completion"),
                               bind({{"?task", "patrolling a warehouse"}}))
              .text == "The goal of patrolling a warehouse is");
    CHECK(instantiate_template(builtin(lib, "lexicon-aka"), bind({{"?object", "A shelf"}})).text ==
          "A shelf is also known as a <mask>.");
    CHECK(instantiate_template(builtin(lib, "taxonomy-part"), bind({{"?object", "A wall"}})).text ==
          "A wall is part of a <mask>.");
    CHECK(instantiate_template(builtin(lib, "operator-can-a"),
                               bind({{"?actor", "A robot"}, {"?object", "package"}}))
              .text == "A robot can <mask> a package.");
    CHECK(instantiate_template(builtin(lib, "precondition-use"), bind({{"?object", "A bay"}})).text ==
          "A bay is used for <mask>.");
    CHECK(instantiate_template(builtin(lib, "precondition-use"), bind({{"?object", "A bay"}}),
                               "warehouse robot. ")
              .text == "warehouse robot. A bay is used for <mask>.");
    CHECK(instantiate_template(builtin(lib, "action-causes"), bind({{"?action", "Pushing a box"}}))
              .text == "Pushing a box causes");
}

TEST_CASE("missing and undeclared bindings are template errors") {
    const TemplateLibrary lib = TemplateLibrary::builtins();
    CHECK_THROWS_AS(instantiate_template(builtin(lib, "lexicon-aka"), bind({})), TemplateError);
    CHECK_THROWS_AS(
        instantiate_template(builtin(lib, "lexicon-aka"), bind({{"?thing", "A shelf"}})),
        TemplateError);
    // Bindings for declared variables absent from the pattern are fine.
    CHECK(instantiate_template(builtin(lib, "lexicon-aka"),
                               bind({{"?object", "A shelf"}, {"?task", "stock shelves"}}))
              .text == "A shelf is also known as a <mask>.");
}

TEST_CASE("analogical prompts follow the statement-per-line layout") {
    const std::vector<AnalogicalCase> cases = {
        {"The household robot charges in the garage.", ""},
        {"The office robot charges in the maintenance closet.", ""},
    };
    const PromptSpec spec =
        build_analogical_prompt(cases, "The warehouse robot charges in the", false);
    CHECK(spec.text ==
          "The household robot charges in the garage.\n"
          "The office robot charges in the maintenance closet.\n"
          "The warehouse robot charges in the");
    CHECK(spec.strategy == StrategyKind::Analogical);
    CHECK(spec.target_class == ModelClass::Generative);
}

TEST_CASE("qa-style analogical prompts end right after the question line") {
    const std::vector<AnalogicalCase> cases = {
        {"Q: Where should a robot find a package in an office?", "A: the mail room"},
    };
    const PromptSpec spec = build_analogical_prompt(
        cases, "Where should a robot find a package in a warehouse?", true);
    CHECK(spec.text ==
          "Q: Where should a robot find a package in an office?\n"
          "A: the mail room\n"
          "Q: Where should a robot find a package in a warehouse?\n");
}

TEST_CASE("single plain case yields two lines, deterministically") {
    const std::vector<AnalogicalCase> cases = {{"The office robot docks at the wall.", ""}};
    const PromptSpec once = build_analogical_prompt(cases, "The warehouse robot docks at the", false);
    const PromptSpec twice =
        build_analogical_prompt(cases, "The warehouse robot docks at the", false);
    CHECK(once.text == twice.text);
    CHECK(once.text ==
          "The office robot docks at the wall.\nThe warehouse robot docks at the");
}

TEST_CASE("analogical prompting without cases is a strategy error") {
    CHECK_THROWS_AS(build_analogical_prompt({}, "stimulus", false), StrategyError);
    CHECK_THROWS_AS(build_analogical_prompt({{"", ""}}, "stimulus", false), ValidationError);
}

TEST_CASE("dialogue-shaped prompts concatenate prior dialogue before the query") {
    const std::vector<std::string> prior = {
        "Move the box onto the table.", "What is the next goal or subtask of move?",
        "Pick up the box.", "Put the box onto the table.", "You are done."};
    const std::string query =
        "Move the package into the cabinet. What is the next goal or subtask of move?";
    const PromptSpec with = build_dialogue_shaped_prompt(prior, query);
    CHECK(with.text ==
          "Move the box onto the table. What is the next goal or subtask of move? Pick up the "
          "box. Put the box onto the table. You are done. Move the package into the cabinet. "
          "What is the next goal or subtask of move?");
    CHECK(with.schema == SchemaKind::StepSequence);

    const PromptSpec without = build_dialogue_shaped_prompt({}, query);
    CHECK(without.text == query);

    CHECK_THROWS_AS(build_dialogue_shaped_prompt(prior, ""), ValidationError);
}

TEST_CASE("the dialogue query form needs task and action bindings") {
    CHECK(build_dialogue_query(bind({{"?task", "Move the package into the cabinet"},
                                     {"?action", "move"}})) ==
          "Move the package into the cabinet. What is the next goal or subtask of move?");
    CHECK_THROWS_AS(build_dialogue_query(bind({{"?task", "Move the package"}})), TemplateError);
}

TEST_CASE("every PSCM function ships at least one template") {
    const TemplateLibrary lib = TemplateLibrary::builtins();
    const PscmFunction fns[] = {
        PscmFunction::ProblemSpaceDescription, PscmFunction::GoalDefinition,
        PscmFunction::StateLexicon,            PscmFunction::TaxonomicRelation,
        PscmFunction::OperatorLexicon,         PscmFunction::OperatorPrecondition,
        PscmFunction::OperatorAction};
    for (PscmFunction fn : fns) {
        CHECK_FALSE(lib.templates_for(fn).empty());
    }

    auto patterns_for = [&](PscmFunction fn) {
        std::vector<std::string> out;
        for (const PromptTemplate& t : lib.templates_for(fn)) {
            out.push_back(t.pattern);
        }
        return out;
    };
    auto contains = [](const std::vector<std::string>& v, const std::string& s) {
        for (const std::string& x : v) {
            if (x == s) return true;
        }
        return false;
    };
    CHECK(contains(patterns_for(PscmFunction::StateLexicon),
                   "?object is also known as a <mask>."));
    CHECK(contains(patterns_for(PscmFunction::OperatorLexicon),
                   "?actor can <mask> an ?object."));
    CHECK(contains(patterns_for(PscmFunction::OperatorAction), "?action causes"));
}

TEST_CASE("user template files extend the built-ins") {
    testsupport::TempDir dir;
    testsupport::write_file(
        dir.file("extra.jsonl"),
        R"({"id":"user-guidance","pscm_function":"operator-precondition","pattern":"Prefer to ?action when the ?object is full.","target_class":"generative","schema":"free-text","relation":"guidance"})"
        "\n");
    TemplateLibrary lib = TemplateLibrary::builtins();
    const std::size_t before = lib.templates_for(PscmFunction::OperatorPrecondition).size();
    lib.load_file(dir.file("extra.jsonl"));
    const auto after = lib.templates_for(PscmFunction::OperatorPrecondition);
    CHECK(after.size() == before + 1);
    CHECK(after.back().relation == RelationKind::Guidance);
}

TEST_CASE("mask-count invariants hold for instantiated builtins") {
    const TemplateLibrary lib = TemplateLibrary::builtins();
    const auto bindings = bind({{"?object", "A shelf"},
                                {"?actor", "A robot"},
                                {"?task", "patrol a warehouse"},
                                {"?action", "Pushing a box"}});
    for (const PromptTemplate& t : lib.all()) {
        const PromptSpec spec = instantiate_template(t, bindings);
        if (t.target_class == ModelClass::Masked) {
            CHECK(mask_count(spec.text) == 1);
        } else {
            CHECK(mask_count(spec.text) == 0);
        }
        // Referential transparency.
        CHECK(instantiate_template(t, bindings).text == spec.text);
    }
}

TEST_CASE("invalid templates are rejected at registration") {
    TemplateLibrary lib = TemplateLibrary::empty();
    PromptTemplate bad;
    bad.id = "bad-generative";
    bad.pscm_function = PscmFunction::StateLexicon;
    bad.pattern = "?object is a <mask>.";
    bad.target_class = ModelClass::Generative;
    CHECK_THROWS_AS(lib.register_template(bad), TemplateError);

    bad.id = "bad-masked";
    bad.pattern = "?object is a thing.";
    bad.target_class = ModelClass::Masked;
    CHECK_THROWS_AS(lib.register_template(bad), TemplateError);

    bad.id = "bad-variable";
    bad.pattern = "?widget is a <mask>.";
    CHECK_THROWS_AS(lib.register_template(bad), TemplateError);
}

TEST_CASE("the default context prefix carries the domain label") {
    KnowledgeNeed need;
    need.task_name = "patrol a warehouse";
    need.domain_label = "warehouse";
    const std::string prefix = default_context_prefix(need);
    CHECK(prefix == "warehouse robot. ");
    CHECK(prefix.find(need.domain_label) != std::string::npos);

    need.domain_label.clear();
    CHECK(default_context_prefix(need).empty());
}

TEST_CASE("parameter bounds clamp sampling parameters") {
    LMProfile profile;
    profile.lm_id = "x";
    profile.bounds.max_tokens = {1, 32};
    profile.bounds.temperature = {0.0, 0.5};
    profile.bounds.top_k = {1, 5};
    PromptSpec spec;
    spec.params.max_tokens = 64;
    spec.params.temperature = 0.7;
    spec.params.top_k = 10;
    apply_parameter_bounds(spec, profile);
    CHECK(spec.params.max_tokens == 32);
    CHECK(spec.params.temperature == 0.5);
    CHECK(spec.params.top_k == 5);
}
