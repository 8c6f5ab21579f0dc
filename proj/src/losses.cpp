#include "ctnli/losses.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace ctnli {

double nqa_choice_loss(const ChoiceScore& score) {
    if (std::isnan(score.probability)) throw std::invalid_argument("probability is NaN");
    const double g = std::clamp(score.probability, kProbEpsilon, 1.0 - kProbEpsilon);
    return score.is_correct ? -std::log(g) : -std::log1p(-g);
}

double nqa_question_loss(const std::array<ChoiceScore, 3>& scores) {
    const auto correct = std::count_if(scores.begin(), scores.end(),
                                       [](const ChoiceScore& s) { return s.is_correct; });
    if (correct != 1)
        throw std::invalid_argument("NQA question needs exactly one correct choice, got " +
                                    std::to_string(correct));
    double sum = 0.0;
    for (const auto& s : scores) sum += nqa_choice_loss(s);
    return sum / 3.0;
}

LossBreakdown combined_loss(double l_nli, double l_nqa, double lambda) {
    for (double x : {l_nli, l_nqa, lambda})
        if (!std::isfinite(x) || x < 0.0)
            throw std::invalid_argument("combined_loss inputs must be finite and non-negative");
    return {l_nli, l_nqa, lambda, l_nli + lambda * l_nqa};
}

}  // namespace ctnli
