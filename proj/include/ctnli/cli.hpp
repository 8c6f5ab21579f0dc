#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "ctnli/corpus.hpp"
#include "ctnli/llmclient.hpp"

namespace ctnli::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;
inline constexpr int kExitInput = 2;
inline constexpr int kExitTransport = 3;

struct ProviderSettings {
    // "" or "none": cache only. "replay:<file>": canned responses.
    // Otherwise an http(s) chat-completions URL.
    std::string endpoint;
    std::string model_name = "gpt-3.5-turbo";
    std::size_t parallelism = 4;
    double temperature = 0.0;
    int max_tokens = 512;
    int retry_attempts = 3;
    int backoff_ms = 500;
    std::string api_key_env = "CTNLI_API_KEY";
};

struct SplitSpec {
    std::string name;
    std::filesystem::path statements;
    std::optional<std::filesystem::path> manifest;
};

struct RunConfig {
    std::filesystem::path trials_dir;
    std::filesystem::path statements;
    std::optional<std::filesystem::path> manifest;
    std::optional<std::filesystem::path> embeddings;
    std::optional<std::filesystem::path> pos_lexicon;
    std::optional<std::filesystem::path> stop_words;
    std::optional<std::filesystem::path> tfidf_statements;
    std::optional<std::filesystem::path> vocab_allow_list;
    std::filesystem::path cache_dir = "cache";
    std::filesystem::path output_dir = "out";

    ProviderSettings provider;

    bool nqa = true;
    bool sp = true;
    bool vr = true;
    std::size_t limit = 0;  // 0 = every entailed statement

    double lambda = 1.0;
    std::uint64_t seed = 0;

    SchemaMapping schema;
    std::vector<SplitSpec> splits;
};

// Reads a JSON config; relative paths resolve against the file's directory.
// Throws InputError.
RunConfig load_config(const std::filesystem::path& path);

enum class Command { Augment, Evaluate, Stats };

// Throws InputError describing the first violated constraint.
void validate_config(const RunConfig& config, Command command);

enum class Method { Nqa, Sp, Vr };

// Runs the selected augmentation methods and writes nqa.jsonl, sp.jsonl,
// vr.jsonl, multitask.jsonl (+ .meta.json) and skips.jsonl under
// config.output_dir. `transport` overrides config.provider.endpoint when set.
int cmd_augment(const RunConfig& config, const std::set<Method>& methods, Transport* transport,
                std::ostream& out, std::ostream& err);

struct EvaluateArgs {
    std::filesystem::path predictions;
    std::optional<std::filesystem::path> report_path;  // default output_dir/report.json
    bool strict_n = false;
};

int cmd_evaluate(const RunConfig& config, const EvaluateArgs& args, std::ostream& out,
                 std::ostream& err);

int cmd_stats(const RunConfig& config, std::ostream& out, std::ostream& err);

// Full command-line entry point (argv[0] excluded from `args`).
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err,
        Transport* transport = nullptr);

}  // namespace ctnli::cli
