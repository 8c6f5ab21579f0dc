#pragma once

#include <array>
#include <cstddef>
#include <filesystem>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "ctnli/corpus.hpp"
#include "ctnli/embed.hpp"
#include "ctnli/keyword.hpp"
#include "ctnli/llmclient.hpp"

namespace ctnli {

inline constexpr int kDatasetSchemaVersion = 1;

// Raised by parse_nqa_response; section() is one of "question", "choices",
// "correct answer".
class NqaParseError : public std::runtime_error {
public:
    NqaParseError(std::string section, const std::string& what)
        : std::runtime_error(section + ": " + what), section_(std::move(section)) {}
    const std::string& section() const { return section_; }

private:
    std::string section_;
};

struct ParsedNqa {
    std::string question;
    std::array<std::string, 3> choices;
    std::size_t correct_index = 0;
};

// Parses a "Question: / Choices: 1. 2. 3. / Correct Answer:" completion.
ParsedNqa parse_nqa_response(std::string_view response);

struct TrialReference {
    std::string primary_trial_id;
    std::optional<std::string> secondary_trial_id;
    Section section = Section::Results;
};

struct NqaItem {
    std::string source_uuid;
    std::string question;
    std::array<std::string, 3> choices;
    std::size_t correct_index = 0;
    TrialReference trial_reference;
    std::string cache_key;
};

enum class AugmentMethod { SemanticEntail, SemanticContradict, VocabReplace };

std::string_view method_name(AugmentMethod m);

struct VocabProvenance {
    std::string replaced_word;  // surface form in the source
    std::string replacement;    // as spliced, casing applied
    double similarity = 0.0;
    CharSpan span;              // span of the replaced token in the source
};

struct AugmentedStatement {
    std::string source_uuid;
    AugmentMethod method = AugmentMethod::SemanticEntail;
    std::string text;
    Label label = Label::Entailment;
    std::optional<VocabProvenance> vocab;  // VocabReplace only
    std::string cache_key;                 // semantic methods only
};

struct Skip {
    std::string uuid;
    std::string reason;
};

// Result of an augmentation pass. When a transport failure aborts the pass,
// `items` holds the outputs of every statement ordered before the failing
// one and `abort_reason` is set.
template <typename T>
struct AugmentResult {
    std::vector<T> items;
    std::vector<Skip> skips;
    std::optional<std::string> abort_reason;
    int abort_status = 0;
};

// Entailed instances in uuid order.
std::vector<const NliInstance*> entailed_instances(const Corpus& corpus);

struct GenerationSettings {
    std::string model_name = "gpt-3.5-turbo";
    Decoding decoding;
};

AugmentResult<NqaItem> augment_nqa(const Corpus& corpus, LlmClient& client,
                                   const GenerationSettings& settings = {},
                                   std::span<const NliInstance* const> sources = {});

enum class SemanticMode { Entail, Contradict };

AugmentResult<AugmentedStatement> augment_semantic(const Corpus& corpus, LlmClient& client,
                                                   SemanticMode mode,
                                                   const GenerationSettings& settings = {},
                                                   std::span<const NliInstance* const> sources = {});

struct VocabSettings {
    const StopWords* stop_words = &StopWords::bundled();
    NeighborQuery neighbor_query;
};

// Keyword by TF-IDF, replacement by nearest same-POS embedding neighbor.
// When the top keyword is out of vocabulary the next-ranked one is tried.
AugmentResult<AugmentedStatement> augment_vocab(const Corpus& corpus, const TfidfModel& tfidf,
                                                const EmbeddingStore& store,
                                                const VocabSettings& settings = {},
                                                std::span<const NliInstance* const> sources = {});

// Capitalizes the replacement iff the original's first character is uppercase.
std::string match_casing(std::string_view original, std::string_view replacement);

enum class Task { Nli, Nqa };

struct MultiTaskRecord {
    Task task = Task::Nli;
    std::string serialized_input;
    int target = 0;  // NLI: 1 = Entailment, 0 = Contradiction; NQA: 1 = correct choice
    std::string source_uuid;
    std::string method;  // "original", "semantic_entail", ... , "nqa"
    std::string provenance_json;
};

std::string serialize_nli_input(std::string_view ctr, std::string_view claim);
std::string serialize_nqa_input(std::string_view ctr, std::string_view question,
                                std::string_view choice);

// Builds the records without writing them. Originals first (input order),
// then augmented statements, then three records per NQA item.
std::vector<MultiTaskRecord> build_multitask_records(std::span<const NliInstance> nli,
                                                     std::span<const AugmentedStatement> augmented,
                                                     std::span<const NqaItem> nqa,
                                                     const Corpus& corpus);

// Writes a schema header line plus one JSON record per line to `out`, and
// `<out>.meta.json` carrying lambda. Returns the record count.
std::size_t emit_multitask_dataset(std::span<const NliInstance> nli,
                                   std::span<const AugmentedStatement> augmented,
                                   std::span<const NqaItem> nqa, const Corpus& corpus,
                                   double lambda, const std::filesystem::path& out);

// Per-method output files share the same header line convention.
std::string dataset_header(std::string_view kind);
std::string to_json_line(const NqaItem& item);
std::string to_json_line(const AugmentedStatement& s);

}  // namespace ctnli
