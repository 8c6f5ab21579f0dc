#pragma once

#include <array>

namespace ctnli {

// Probabilities are clamped to [kProbEpsilon, 1 - kProbEpsilon] before the log.
inline constexpr double kProbEpsilon = 1e-7;

struct ChoiceScore {
    double probability;  // model's belief that this choice is the correct answer
    bool is_correct;
};

struct LossBreakdown {
    double l_nli;
    double l_nqa;
    double lambda;
    double total;
};

// Binary cross-entropy for one choice: -ln(g) for the correct answer,
// -ln(1 - g) otherwise.
double nqa_choice_loss(const ChoiceScore& score);

// Mean of the three per-choice losses. Throws std::invalid_argument unless
// exactly one choice is flagged correct.
double nqa_question_loss(const std::array<ChoiceScore, 3>& scores);

// total = l_nli + lambda * l_nqa. Inputs must be finite and non-negative.
LossBreakdown combined_loss(double l_nli, double l_nqa, double lambda);

}  // namespace ctnli
