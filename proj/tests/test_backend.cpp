#include "lmkex/backend.hpp"

#include "lmkex/errors.hpp"

#include <doctest.h>

#include "test_support.hpp"

using namespace lmkex;

namespace {

PromptSpec generative_spec(const std::string& text, int n = 1) {
    PromptSpec spec;
    spec.text = text;
    spec.target_class = ModelClass::Generative;
    spec.schema = SchemaKind::FreeText;
    spec.params.n_samples = n;
    return spec;
}

PromptSpec masked_spec(const std::string& text, int top_k = 10) {
    PromptSpec spec;
    spec.text = text;
    spec.target_class = ModelClass::Masked;
    spec.schema = SchemaKind::MaskLexicon;
    spec.relation = RelationKind::AlsoKnownAs;
    spec.params.top_k = top_k;
    return spec;
}

std::shared_ptr<ScriptedBackend> gpt3() {
    return ScriptedBackend::load(testsupport::fixture("script_gpt3.json"), "gpt3-scripted");
}

std::shared_ptr<ScriptedBackend> roberta() {
    return ScriptedBackend::load(testsupport::fixture("script_roberta.json"), "roberta-scripted");
}

} // namespace

TEST_CASE("the scripted backend replays recorded completions") {
    auto backend = gpt3();
    const GenerativeResponse resp =
        backend->complete(generative_spec("Explain how to patrol a warehouse."));
    REQUIRE(resp.samples.size() == 1);
    CHECK(resp.samples[0] ==
          "Walk around the warehouse to inspect it and make sure that it is free of people. "
          "Search the warehouse for dangerous items like weapons or hazardous materials.");
    CHECK(resp.lm_id == "gpt3-scripted");
}

TEST_CASE("recorded completions replay verbatim across models") {
    auto gpt3_backend = gpt3();
    CHECK(gpt3_backend
              ->complete(generative_spec(
                  "Many household furniture items are stored in the warehouse including"))
              .samples[0] == "beds, tables, chairs, wardrobes, and more");
    CHECK(gpt3_backend
              ->complete(
                  generative_spec("Many furniture items are stored in the warehouse including"))
              .samples[0] == "tables, chairs, and other items");
    auto gpt2_backend =
        ScriptedBackend::load(testsupport::fixture("script_gpt2.json"), "gpt2-scripted");
    CHECK(gpt2_backend
              ->complete(generative_spec(
                  "Many household furniture items are stored in the warehouse including"))
              .samples[0] == "household towels");
}

TEST_CASE("unmatched prompts are not found") {
    auto backend = gpt3();
    CHECK_THROWS_AS(backend->complete(generative_spec("Explain how to bake bread.")),
                    NotFoundError);
}

TEST_CASE("requesting n samples cycles through the listed responses in order") {
    auto backend = gpt3();
    const std::string prompt =
        "Normal operating hours for the warehouse is 6am-9pm on weekdays (closed on weekends). "
        "Staff should not generally be in the building once the 9pm shift ends. Staff will begin "
        "arriving just before 6. Because we are closed on the weekends, staff";
    const GenerativeResponse four = backend->complete(generative_spec(prompt, 4));
    REQUIRE(four.samples.size() == 4);
    CHECK(four.samples[0] == "should not be in the building on weekends");
    CHECK(four.samples[1] == "can't arrive at the start of their shift");
    CHECK(four.samples[2] == "typically do not arrive between 6-9 on the subsequent Monday");
    CHECK(four.samples[3] == "will not be in the building on Saturday or Sunday");

    const GenerativeResponse five = backend->complete(generative_spec(prompt, 5));
    REQUIRE(five.samples.size() == 5);
    CHECK(five.samples[4] == five.samples[0]);
}

TEST_CASE("fill_mask returns the recorded candidates in rank order") {
    auto backend = roberta();
    const MaskedResponse resp = backend->fill_mask(masked_spec("A robot can <mask> a package."));
    REQUIRE(resp.candidates.size() == 10);
    const std::vector<std::string> expected = {"open",     "deliver",  "inspect", "carry",
                                               "assemble", "sort",     "transport", "handle",
                                               "check",    "sniff"};
    for (std::size_t i = 0; i < expected.size(); ++i) {
        CHECK(resp.candidates[i].first == expected[i]);
        if (i > 0) {
            CHECK(resp.candidates[i].second <= resp.candidates[i - 1].second);
        }
    }
}

TEST_CASE("the context prefix selects a different scripted distribution") {
    auto backend = roberta();
    const MaskedResponse plain = backend->fill_mask(masked_spec("A bay is used for <mask>."));
    const MaskedResponse contextual =
        backend->fill_mask(masked_spec("warehouse robot. A bay is used for <mask>."));
    CHECK(plain.candidates.front().first == "navigation");
    CHECK(contextual.candidates.front().first == "storage");
}

TEST_CASE("top_k truncates the candidate list") {
    auto backend = roberta();
    const MaskedResponse resp =
        backend->fill_mask(masked_spec("A shelf is also known as a <mask>.", 3));
    REQUIRE(resp.candidates.size() == 3);
    CHECK(resp.candidates[0].first == "cabinet");
    CHECK(resp.candidates[2].first == "shelf");
}

TEST_CASE("an empty script answers nothing") {
    auto backend = ScriptedBackend::from_json_text("[]", "empty");
    CHECK_THROWS_AS(backend->complete(generative_spec("anything")), NotFoundError);
    CHECK_THROWS_AS(backend->fill_mask(masked_spec("anything <mask>.")), NotFoundError);
}

TEST_CASE("duplicate prompt keys are a parse error") {
    const std::string script = R"([
      {"prompt": "A bay is used for <mask>.", "candidates": [["storage", 1.0]]},
      {"prompt": "A bay   is used for <mask>.", "candidates": [["docking", 1.0]]}
    ])";
    CHECK_THROWS_AS(ScriptedBackend::from_json_text(script, "dup"), ParseError);
}

TEST_CASE("malformed scripts report the offending line") {
    const std::string script = "[\n  {\"prompt\": \"x\", \"responses\": [\"y\"]},\n  {broken}\n]";
    try {
        ScriptedBackend::from_json_text(script, "bad");
        FAIL("expected ParseError");
    } catch (const ParseError& e) {
        CHECK(e.line() == 3);
    }
}

TEST_CASE("prompt matching normalizes whitespace") {
    auto backend = gpt3();
    const GenerativeResponse resp = backend->complete(generative_spec(
        "The household robot charges in the garage. The office robot charges in the maintenance "
        "closet. The warehouse robot charges in the"));
    REQUIRE(resp.samples.size() == 1);
    CHECK(resp.samples[0] == "storage room");
}

TEST_CASE("identical requests get identical responses") {
    auto backend = roberta();
    const PromptSpec spec = masked_spec("A wall is part of a <mask>.");
    const MaskedResponse a = backend->fill_mask(spec);
    const MaskedResponse b = backend->fill_mask(spec);
    CHECK(a.candidates == b.candidates);
}

TEST_CASE("request kind must match the prompt class") {
    auto backend = gpt3();
    CHECK_THROWS_AS(backend->complete(masked_spec("A wall is part of a <mask>.")), UsageError);
    CHECK_THROWS_AS(backend->fill_mask(generative_spec("Explain how to patrol a warehouse.")),
                    UsageError);
    // Exactly one mask marker.
    CHECK_THROWS_AS(roberta()->fill_mask(masked_spec("No mask here.")), UsageError);
    CHECK_THROWS_AS(roberta()->fill_mask(masked_spec("Two <mask> and <mask>.")), UsageError);
}

namespace {

// Counts calls and fails a configured number of times before succeeding.
class FlakyBackend : public Backend {
public:
    FlakyBackend(int failures_before_success, bool retryable)
        : failures_(failures_before_success), retryable_(retryable) {}

    const std::string& lm_id() const override { return id_; }

    GenerativeResponse complete(const PromptSpec& spec) override {
        ++calls_;
        if (calls_ <= failures_) {
            if (retryable_) {
                throw TimeoutError("flaky timeout");
            }
            throw UsageError("permanent misuse");
        }
        GenerativeResponse resp;
        resp.lm_id = id_;
        resp.samples.assign(spec.params.n_samples, "ok");
        return resp;
    }

    MaskedResponse fill_mask(const PromptSpec&) override {
        throw UsageError("masked not supported");
    }

    int calls() const { return calls_; }

private:
    std::string id_ = "flaky";
    int failures_;
    bool retryable_;
    int calls_ = 0;
};

} // namespace

TEST_CASE("retries recover from transient failures within the attempt budget") {
    auto flaky = std::make_shared<FlakyBackend>(2, true);
    RetryingBackend wrapped(flaky, RetryPolicy{3, std::chrono::milliseconds(1), 2.0},
                            /*sleep_between=*/false);
    const GenerativeResponse resp = wrapped.complete(generative_spec("x"));
    CHECK(resp.samples.size() == 1);
    CHECK(flaky->calls() == 3);
}

TEST_CASE("retries stop at the attempt budget") {
    auto flaky = std::make_shared<FlakyBackend>(10, true);
    RetryingBackend wrapped(flaky, RetryPolicy{3, std::chrono::milliseconds(1), 2.0}, false);
    CHECK_THROWS_AS(wrapped.complete(generative_spec("x")), BackendError);
    CHECK(flaky->calls() == 3);
}

TEST_CASE("non-retryable errors are never retried") {
    auto flaky = std::make_shared<FlakyBackend>(10, false);
    RetryingBackend wrapped(flaky, RetryPolicy{3, std::chrono::milliseconds(1), 2.0}, false);
    CHECK_THROWS_AS(wrapped.complete(generative_spec("x")), UsageError);
    CHECK(flaky->calls() == 1);
}

TEST_CASE("the mask marker translates to a native mask token") {
    CHECK(apply_mask_token("A bay is used for <mask>.", "[MASK]") ==
          "A bay is used for [MASK].");
    CHECK(apply_mask_token("A bay is used for <mask>.", "") == "A bay is used for <mask>.");
    CHECK(apply_mask_token("no marker here", "[MASK]") == "no marker here");
}
