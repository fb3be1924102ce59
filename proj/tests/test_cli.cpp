// End-to-end tests against the built lmkex binary, offline via scripted
// backends.
#include "lmkex/store.hpp"

#include <doctest.h>
#include <json.hpp>

#include "test_support.hpp"

using namespace lmkex;
using testsupport::CommandResult;
using testsupport::run_command;
using testsupport::TempDir;

namespace {

std::string offline_config(const TempDir& dir, const std::string& extra_policy = "") {
    const std::string gpt3 = testsupport::fixture("script_gpt3.json").string();
    const std::string roberta = testsupport::fixture("script_roberta.json").string();
    std::string policy =
        R"("policy": {"n_samples": 3, "agreement_threshold": 0.6, "require_human": false, "auto_promote_min_samples": 3})";
    if (!extra_policy.empty()) {
        policy = extra_policy;
    }
    const std::string config = std::string("{\n") +
        R"("profiles": [
          {"lm_id": "gpt3-scripted", "model_class": "generative", "training_cutoff": "2019-10-01",
           "corpus_description": "web crawl snapshot", "endpoint_ref": "script:)" + gpt3 + R"(",
           "latency_class": "local"},
          {"lm_id": "roberta-scripted", "model_class": "masked", "training_cutoff": "2019-07-01",
           "corpus_description": "web crawl snapshot", "endpoint_ref": "script:)" + roberta + R"(",
           "latency_class": "local"}
        ],
        "store_path": "store.jsonl",
        "usage_model_path": "usage.jsonl",
        )" + policy + R"(,
        "max_attempts": 5,
        "fixed_time": "2022-01-31T09:00:00Z"
      })";
    testsupport::write_file(dir.file("lmkex.json"), config);
    return dir.file("lmkex.json").string();
}

std::string cli(const std::string& config, const std::string& rest) {
    return testsupport::cli_path() + " --config " + config + " " + rest;
}

} // namespace

TEST_CASE("extract on the patrol scenario exits 0 and encodes the goal") {
    TempDir dir;
    const std::string config = offline_config(dir);
    const CommandResult r =
        run_command(cli(config, "extract " + testsupport::fixture("need_patrol.json").string()));
    CHECK(r.exit_code == 0);
    CHECK(r.output.find("satisfied") != std::string::npos);
    CHECK(r.output.find("a-000001") != std::string::npos);

    const KnowledgeStore store = KnowledgeStore::load(dir.file("store.jsonl"));
    REQUIRE(store.assertions().size() >= 1);
    const Assertion& a = store.assertions().front();
    CHECK(a.relation == RelationKind::GoalOf);
    CHECK(a.status == AssertionStatus::Verified);
    REQUIRE(store.find_prompt(a.provenance.prompt_id));
}

TEST_CASE("extract --json emits a machine-readable report") {
    TempDir dir;
    const std::string config = offline_config(dir);
    const CommandResult r = run_command(
        cli(config, "extract --json " + testsupport::fixture("need_patrol.json").string()));
    CHECK(r.exit_code == 0);
    const auto doc = nlohmann::json::parse(r.output);
    CHECK(doc.at("final_status") == "satisfied");
    CHECK(doc.at("encoded_assertion_ids").size() == 1);
    CHECK(doc.at("attempts").at(0).at("strategy") == "template");
    CHECK(doc.at("need").at("pscm_function") == "goal-definition");
}

TEST_CASE("a missing config file is a configuration error") {
    TempDir dir;
    const CommandResult r =
        run_command(cli((dir.path() / "nope.json").string(),
                          "extract " + testsupport::fixture("need_patrol.json").string()));
    CHECK(r.exit_code == 2);
}

TEST_CASE("a need no script can answer exhausts its attempts") {
    TempDir dir;
    const std::string config = offline_config(dir);
    testsupport::write_file(dir.file("need_miss.json"), R"({
        "task_name": "sweep the floor",
        "domain_label": "warehouse",
        "pscm_function": "goal-definition",
        "bindings": {"?task": "sweeping the floor"}
    })");
    const CommandResult r =
        run_command(cli(config, "extract " + dir.file("need_miss.json").string()));
    CHECK(r.exit_code == 3);
}

TEST_CASE("explore prints one row per prompt and doubles attempts on repeat") {
    TempDir dir;
    const std::string config = offline_config(dir);
    const std::string cmd = cli(
        config, "explore --lm gpt3-scripted --templates " +
                    testsupport::fixture("templates_seven.json").string() + " --bindings " +
                    testsupport::fixture("bindings_one.json").string());

    const CommandResult first = run_command(cmd);
    CHECK(first.exit_code == 0);
    CHECK(first.output.find("explored 7 prompt(s)") != std::string::npos);
    int rows = 0;
    for (int i = 1; i <= 7; ++i) {
        if (first.output.find("  " + std::to_string(i) + ". ") != std::string::npos) {
            ++rows;
        }
    }
    CHECK(rows == 7);

    const CommandResult second = run_command(cmd);
    CHECK(second.exit_code == 0);
    const std::string usage = testsupport::read_file(dir.file("usage.jsonl"));
    CHECK(usage.find("\"attempts\":2") != std::string::npos);
    CHECK(usage.find("\"attempts\":1") == std::string::npos);
}

TEST_CASE("explore with an unknown LM id fails as configuration") {
    TempDir dir;
    const std::string config = offline_config(dir);
    const CommandResult r = run_command(
        cli(config, "explore --lm missing-lm --bindings " +
                          testsupport::fixture("bindings_one.json").string()));
    CHECK(r.exit_code == 2);
}

TEST_CASE("review promotes, rejects, or amends pending assertions") {
    TempDir dir;
    // n_samples=1 stays below the auto-promotion floor, so the goal-clause
    // interpretation lands as potential knowledge.
    const std::string config = offline_config(
        dir,
        R"("policy": {"n_samples": 1, "agreement_threshold": 0.6, "require_human": false, "auto_promote_min_samples": 3})");
    const CommandResult seeded =
        run_command(cli(config, "extract " + testsupport::fixture("need_patrol.json").string()));
    CHECK(seeded.exit_code == 3); // nothing verified yet

    SUBCASE("accepting verifies") {
        const CommandResult r = run_command("printf 'y\\n' | " + cli(config, "review"));
        CHECK(r.exit_code == 0);
        CHECK(r.output.find("1 accepted") != std::string::npos);
        const KnowledgeStore store = KnowledgeStore::load(dir.file("store.jsonl"));
        CHECK(store.query({std::nullopt, std::nullopt, AssertionStatus::Verified, std::nullopt})
                  .size() == 1);

        const CommandResult again = run_command("printf 'y\\n' | " + cli(config, "review"));
        CHECK(again.output.find("nothing to review") != std::string::npos);
    }

    SUBCASE("rejecting quarantines permanently") {
        const CommandResult r = run_command("printf 'n\\n' | " + cli(config, "review"));
        CHECK(r.exit_code == 0);
        const KnowledgeStore store = KnowledgeStore::load(dir.file("store.jsonl"));
        CHECK(store.query({std::nullopt, std::nullopt, AssertionStatus::Rejected, std::nullopt})
                  .size() == 1);
    }

    SUBCASE("amending creates a human-amended replacement") {
        const CommandResult r =
            run_command("printf 'a to keep the site safe\\n' | " + cli(config, "review"));
        CHECK(r.exit_code == 0);
        CHECK(r.output.find("1 amended") != std::string::npos);
        const KnowledgeStore store = KnowledgeStore::load(dir.file("store.jsonl"));
        const auto verified =
            store.query({std::nullopt, std::nullopt, AssertionStatus::Verified, std::nullopt});
        REQUIRE(verified.size() == 1);
        CHECK(verified[0]->object.text == "to keep the site safe");
        CHECK(verified[0]->provenance.strategy == StrategyKind::HumanAmended);
        CHECK(store.query({std::nullopt, std::nullopt, AssertionStatus::Rejected, std::nullopt})
                  .size() == 1);
    }
}

TEST_CASE("store list filters and store show resolves provenance") {
    TempDir dir;
    const std::string config = offline_config(dir);

    const CommandResult empty_list = run_command(cli(config, "store list --status verified"));
    CHECK(empty_list.exit_code == 0);
    CHECK(empty_list.output.find("0 assertion(s)") != std::string::npos);

    run_command(cli(config, "extract " + testsupport::fixture("need_patrol.json").string()));

    const CommandResult listed = run_command(cli(config, "store list --status verified"));
    CHECK(listed.output.find("goal-of") != std::string::npos);
    CHECK(listed.output.find("1 assertion(s)") != std::string::npos);

    const CommandResult listed_json =
        run_command(cli(config, "store list --status verified --json"));
    const auto rows = nlohmann::json::parse(listed_json.output);
    REQUIRE(rows.size() == 1);
    CHECK(rows[0].at("relation") == "goal-of");
    CHECK(rows[0].at("status") == "verified");

    const CommandResult shown = run_command(cli(config, "store show a-000001"));
    CHECK(shown.exit_code == 0);
    CHECK(shown.output.find("The goal of patrolling a warehouse is") != std::string::npos);
    CHECK(shown.output.find("provenance") != std::string::npos);

    const CommandResult missing = run_command(cli(config, "store show a-999999"));
    CHECK(missing.exit_code == 2);
}

TEST_CASE("store export round-trips through re-import") {
    TempDir dir;
    const std::string config = offline_config(dir);
    run_command(cli(config, "extract " + testsupport::fixture("need_patrol.json").string()));

    const CommandResult exported = run_command(cli(config, "store export"));
    CHECK(exported.exit_code == 0);
    testsupport::write_file(dir.file("exported.jsonl"), exported.output);

    const KnowledgeStore original = KnowledgeStore::load(dir.file("store.jsonl"));
    const KnowledgeStore reimported = KnowledgeStore::load(dir.file("exported.jsonl"));
    CHECK(original == reimported);
}

TEST_CASE("identical offline runs produce identical store files") {
    TempDir dir_a;
    TempDir dir_b;
    const std::string config_a = offline_config(dir_a);
    const std::string config_b = offline_config(dir_b);
    const std::string need = testsupport::fixture("need_patrol.json").string();
    CHECK(run_command(cli(config_a, "extract " + need)).exit_code == 0);
    CHECK(run_command(cli(config_b, "extract " + need)).exit_code == 0);
    CHECK(testsupport::read_file(dir_a.file("store.jsonl")) ==
          testsupport::read_file(dir_b.file("store.jsonl")));
    CHECK(testsupport::read_file(dir_a.file("usage.jsonl")) ==
          testsupport::read_file(dir_b.file("usage.jsonl")));
}
