#pragma once

#include <array>
#include <cstddef>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "ctnli/error.hpp"

namespace ctnli {

enum class Section { Intervention, Eligibility, Results, AdverseEvents };

inline constexpr std::array<Section, 4> kAllSections = {
    Section::Intervention, Section::Eligibility, Section::Results, Section::AdverseEvents};

std::string_view section_name(Section s);
std::optional<Section> parse_section(std::string_view name);

enum class Label { Entailment, Contradiction };

std::string_view label_name(Label l);
std::optional<Label> parse_label(std::string_view name);

enum class InstanceType { Single, Comparison };

enum class Intervention { Preserving, Altering };

std::string_view intervention_name(Intervention i);
std::optional<Intervention> parse_intervention(std::string_view name);

struct ClinicalTrialRecord {
    std::string trial_id;
    std::map<Section, std::vector<std::string>> sections;

    // Lines of one section; empty when the record lacks it.
    const std::vector<std::string>& lines(Section s) const;

    bool operator==(const ClinicalTrialRecord&) const = default;
};

struct NliInstance {
    std::string uuid;
    std::string statement;
    std::optional<Label> label;  // nullopt for unlabeled (test-time) data
    InstanceType type = InstanceType::Single;
    Section section = Section::Results;
    std::string primary_trial_id;
    std::optional<std::string> secondary_trial_id;

    bool operator==(const NliInstance&) const = default;
};

struct ContrastPair {
    std::string perturbed_uuid;
    std::string base_uuid;
    Intervention intervention = Intervention::Preserving;

    bool operator==(const ContrastPair&) const = default;
};

// uuid -> predicted label
using PredictionSet = std::map<std::string, Label>;

// Field names used when reading and writing dataset files. Defaults follow
// the public NLI4CT layout.
struct SchemaMapping {
    std::string trial_id = "Clinical Trial ID";
    std::map<Section, std::string> section_keys = {
        {Section::Intervention, "Intervention"},
        {Section::Eligibility, "Eligibility"},
        {Section::Results, "Results"},
        {Section::AdverseEvents, "Adverse Events"},
    };
    std::string type = "Type";
    std::string section_id = "Section_id";
    std::string primary_id = "Primary_id";
    std::string secondary_id = "Secondary_id";
    std::string statement = "Statement";
    std::string label = "Label";
    std::string prediction = "Prediction";
    std::string perturbed_uuid = "perturbed_uuid";
    std::string base_uuid = "base_uuid";
    std::string intervention = "intervention";
    std::string trial_file_extension = ".json";
};

// Validated, immutable collection of trials and statements. Instances are
// kept in lexicographic uuid order.
class Corpus {
public:
    Corpus() = default;
    Corpus(std::vector<ClinicalTrialRecord> trials, std::vector<NliInstance> instances);

    const std::vector<NliInstance>& instances() const { return instances_; }
    const std::map<std::string, ClinicalTrialRecord>& trials() const { return trials_; }

    const NliInstance* find(std::string_view uuid) const;
    const ClinicalTrialRecord* trial(std::string_view trial_id) const;

    std::size_t size() const { return instances_.size(); }
    bool empty() const { return instances_.empty(); }

    bool operator==(const Corpus&) const = default;

private:
    std::map<std::string, ClinicalTrialRecord> trials_;
    std::vector<NliInstance> instances_;
};

// Reads one trial file per trial from trials_dir and the statement map from
// statements_file. Throws InputError naming the file, field, or uuid at fault.
Corpus load_corpus(const std::filesystem::path& trials_dir,
                   const std::filesystem::path& statements_file,
                   const SchemaMapping& schema = {});

// Parses the statement map alone, without resolving trial references.
std::vector<NliInstance> load_statements(const std::filesystem::path& statements_file,
                                         const SchemaMapping& schema = {});

// Writes the corpus back out in the same layout load_corpus reads.
void save_corpus(const Corpus& corpus, const std::filesystem::path& trials_dir,
                 const std::filesystem::path& statements_file, const SchemaMapping& schema = {});

std::vector<ContrastPair> load_contrast_manifest(const std::filesystem::path& manifest_file,
                                                 const Corpus& corpus,
                                                 const SchemaMapping& schema = {});

// Validates pairs against the corpus; row numbers in errors are 1-based.
std::vector<ContrastPair> validate_contrast_pairs(std::vector<ContrastPair> pairs,
                                                  const Corpus& corpus);

void save_contrast_manifest(const std::vector<ContrastPair>& pairs,
                            const std::filesystem::path& manifest_file,
                            const SchemaMapping& schema = {});

PredictionSet load_predictions(const std::filesystem::path& predictions_file, const Corpus& corpus,
                               const SchemaMapping& schema = {});

void save_predictions(const PredictionSet& preds, const std::filesystem::path& predictions_file,
                      const SchemaMapping& schema = {});

struct CorpusStats {
    // Control instances: those that are not the perturbed member of a pair.
    std::size_t entailment = 0;
    std::size_t contradiction = 0;
    std::size_t unlabeled = 0;
    std::size_t altering = 0;
    std::size_t preserving = 0;
    std::size_t total = 0;

    bool operator==(const CorpusStats&) const = default;
};

CorpusStats corpus_stats(const Corpus& corpus, const std::vector<ContrastPair>& pairs);

// CTR premise text for an instance: the referenced section's lines joined by
// newlines, primary trial first, then the secondary trial for comparisons.
std::string premise_text(const Corpus& corpus, const NliInstance& instance);

}  // namespace ctnli
