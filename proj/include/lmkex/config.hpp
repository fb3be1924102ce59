// Tool configuration and the JSON file loaders shared by the CLI.
#pragma once

#include "lmkex/backend.hpp"
#include "lmkex/controller.hpp"
#include "lmkex/types.hpp"
#include "lmkex/usage_model.hpp"
#include "lmkex/verifier.hpp"

#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace lmkex {

struct Config {
    std::vector<LMProfile> profiles;
    std::filesystem::path store_path = "lmkex.store.jsonl";
    std::filesystem::path usage_model_path = "lmkex.usage.jsonl";
    VerificationPolicy policy;
    int max_attempts = 5;
    double verification_threshold = 0.7;
    // Pins every timestamp for reproducible offline runs.
    std::optional<std::string> fixed_time;
    std::optional<AnalogicalMaterial> analogical;
    std::vector<std::filesystem::path> template_files;

    // Relative paths inside the file resolve against its directory.
    static Config load(const std::filesystem::path& path);
};

std::shared_ptr<Clock> make_clock(const Config& config);

// "script:<path>" endpoints load the scripted backend; "http://..."
// endpoints get the HTTP client wrapped in the retry policy.
std::shared_ptr<Backend> make_backend(const LMProfile& profile);

// Need file: {task_name, domain_label, pscm_function, bindings,
// prior_dialogue, required_as_of?, min_verified?}.
KnowledgeNeed load_need(const std::filesystem::path& path);

// Bindings file for exploration sweeps: JSON array of {"?var": "surface"}.
std::vector<std::map<std::string, Term>> load_bindings(const std::filesystem::path& path);

} // namespace lmkex
