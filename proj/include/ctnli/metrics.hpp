#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>

#include "ctnli/corpus.hpp"

namespace ctnli {

// Thrown when faithfulness has no altering pair whose base prediction is
// correct. Distinct from missing-data errors (InputError).
class NoEligiblePairs : public std::runtime_error {
public:
    NoEligiblePairs() : std::runtime_error("faithfulness: no eligible pairs (no base prediction is correct)") {}
};

// Entailment -> 1, Contradiction -> 0.
inline int encode_label(Label l) { return l == Label::Entailment ? 1 : 0; }

struct ControlScores {
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
};

// F1 from precision and recall; 0 when both are 0.
double f1_score(double precision, double recall);

// Positive class is Entailment. Throws InputError for unlabeled gold
// instances or a missing prediction (naming the uuid).
ControlScores control_scores(std::span<const NliInstance> gold, const PredictionSet& preds);
ControlScores control_scores(std::span<const NliInstance* const> gold, const PredictionSet& preds);

// Mean agreement over preserving pairs. Throws std::invalid_argument on an
// empty list or a non-preserving pair; InputError on missing predictions.
double consistency(std::span<const ContrastPair> pairs, const PredictionSet& preds);

struct FaithfulnessResult {
    double value = 0.0;
    std::size_t eligible_n = 0;     // altering pairs whose base prediction is correct
    std::size_t denominator = 0;    // eligible_n, or all altering pairs under strict_n
};

// Fraction of eligible altering pairs on which the prediction flips. With
// strict_n the denominator is every altering pair instead.
FaithfulnessResult faithfulness(std::span<const ContrastPair> pairs, const Corpus& gold,
                                const PredictionSet& preds, bool strict_n = false);

struct EvalReport {
    double f1 = 0.0;
    double precision = 0.0;
    double recall = 0.0;
    std::optional<double> consistency;   // absent without preserving pairs
    std::optional<double> faithfulness;  // absent without altering pairs
    std::size_t control_n = 0;
    std::size_t preserving_n = 0;
    std::size_t altering_n = 0;
    std::size_t faithfulness_eligible_n = 0;
};

// Control set = instances that are not the perturbed member of any pair.
EvalReport full_report(const Corpus& corpus, std::span<const ContrastPair> pairs,
                       const PredictionSet& preds, bool strict_n = false);

// "F1 Prec. Rec. Faith. Con." as percentages with two decimals; absent
// metrics print as "-".
std::string format_table_row(const EvalReport& report);

// Structured form (JSON text).
std::string report_to_json(const EvalReport& report);

}  // namespace ctnli
