#include "ctnli/metrics.hpp"

#include <cstdio>
#include <cstdlib>
#include <set>
#include <vector>

#include <json.hpp>

namespace ctnli {

namespace {

Label prediction_for(const PredictionSet& preds, const std::string& uuid) {
    auto it = preds.find(uuid);
    if (it == preds.end()) throw InputError("missing prediction for uuid " + uuid);
    return it->second;
}

}  // namespace

double f1_score(double precision, double recall) {
    const double denom = precision + recall;
    return denom > 0.0 ? 2.0 * precision * recall / denom : 0.0;
}

ControlScores control_scores(std::span<const NliInstance* const> gold, const PredictionSet& preds) {
    std::size_t tp = 0, fp = 0, fn = 0;
    for (const auto* inst : gold) {
        if (!inst->label)
            throw InputError("control scoring needs gold labels; " + inst->uuid + " is unlabeled");
        const bool gold_pos = *inst->label == Label::Entailment;
        const bool pred_pos = prediction_for(preds, inst->uuid) == Label::Entailment;
        if (pred_pos && gold_pos) ++tp;
        if (pred_pos && !gold_pos) ++fp;
        if (!pred_pos && gold_pos) ++fn;
    }
    ControlScores s;
    s.precision = tp + fp ? static_cast<double>(tp) / static_cast<double>(tp + fp) : 0.0;
    s.recall = tp + fn ? static_cast<double>(tp) / static_cast<double>(tp + fn) : 0.0;
    s.f1 = f1_score(s.precision, s.recall);
    return s;
}

ControlScores control_scores(std::span<const NliInstance> gold, const PredictionSet& preds) {
    std::vector<const NliInstance*> ptrs;
    ptrs.reserve(gold.size());
    for (const auto& inst : gold) ptrs.push_back(&inst);
    return control_scores(std::span<const NliInstance* const>(ptrs), preds);
}

double consistency(std::span<const ContrastPair> pairs, const PredictionSet& preds) {
    if (pairs.empty()) throw std::invalid_argument("consistency: no preserving pairs");
    double sum = 0.0;
    for (const auto& p : pairs) {
        if (p.intervention != Intervention::Preserving)
            throw std::invalid_argument("consistency: pair " + p.perturbed_uuid + " is not preserving");
        const int base = encode_label(prediction_for(preds, p.base_uuid));
        const int perturbed = encode_label(prediction_for(preds, p.perturbed_uuid));
        sum += 1.0 - std::abs(perturbed - base);
    }
    return sum / static_cast<double>(pairs.size());
}

FaithfulnessResult faithfulness(std::span<const ContrastPair> pairs, const Corpus& gold,
                                const PredictionSet& preds, bool strict_n) {
    if (pairs.empty()) throw std::invalid_argument("faithfulness: no altering pairs");
    FaithfulnessResult r;
    double flips = 0.0;
    for (const auto& p : pairs) {
        if (p.intervention != Intervention::Altering)
            throw std::invalid_argument("faithfulness: pair " + p.perturbed_uuid + " is not altering");
        const auto* base = gold.find(p.base_uuid);
        if (!base) throw InputError("faithfulness: unknown base uuid " + p.base_uuid);
        if (!base->label) throw InputError("faithfulness: base " + p.base_uuid + " is unlabeled");
        const Label base_pred = prediction_for(preds, p.base_uuid);
        const Label perturbed_pred = prediction_for(preds, p.perturbed_uuid);
        if (base_pred != *base->label) continue;
        ++r.eligible_n;
        flips += std::abs(encode_label(perturbed_pred) - encode_label(base_pred));
    }
    r.denominator = strict_n ? pairs.size() : r.eligible_n;
    if (r.denominator == 0) throw NoEligiblePairs();
    r.value = flips / static_cast<double>(r.denominator);
    return r;
}

EvalReport full_report(const Corpus& corpus, std::span<const ContrastPair> pairs,
                       const PredictionSet& preds, bool strict_n) {
    std::set<std::string_view> perturbed;
    std::vector<ContrastPair> preserving, altering;
    for (const auto& p : pairs) {
        perturbed.insert(p.perturbed_uuid);
        (p.intervention == Intervention::Preserving ? preserving : altering).push_back(p);
    }
    std::vector<const NliInstance*> control;
    for (const auto& inst : corpus.instances())
        if (!perturbed.contains(inst.uuid)) control.push_back(&inst);

    EvalReport r;
    const auto scores = control_scores(std::span<const NliInstance* const>(control), preds);
    r.precision = scores.precision;
    r.recall = scores.recall;
    r.f1 = scores.f1;
    r.control_n = control.size();
    r.preserving_n = preserving.size();
    r.altering_n = altering.size();
    if (!preserving.empty()) r.consistency = consistency(preserving, preds);
    if (!altering.empty()) {
        const auto faith = faithfulness(altering, corpus, preds, strict_n);
        r.faithfulness = faith.value;
        r.faithfulness_eligible_n = faith.eligible_n;
    }
    return r;
}

std::string format_table_row(const EvalReport& report) {
    auto pct = [](std::optional<double> v) -> std::string {
        if (!v) return "-";
        char buf[32];
        std::snprintf(buf, sizeof buf, "%.2f", *v * 100.0);
        return buf;
    };
    return pct(report.f1) + " " + pct(report.precision) + " " + pct(report.recall) + " " +
           pct(report.faithfulness) + " " + pct(report.consistency);
}

std::string report_to_json(const EvalReport& report) {
    nlohmann::ordered_json doc;
    doc["schema_version"] = 1;
    doc["f1"] = report.f1;
    doc["precision"] = report.precision;
    doc["recall"] = report.recall;
    doc["faithfulness"] = report.faithfulness ? nlohmann::ordered_json(*report.faithfulness) : nullptr;
    doc["consistency"] = report.consistency ? nlohmann::ordered_json(*report.consistency) : nullptr;
    doc["counts"] = {{"control_n", report.control_n},
                     {"preserving_n", report.preserving_n},
                     {"altering_n", report.altering_n},
                     {"faithfulness_eligible_n", report.faithfulness_eligible_n}};
    doc["table_row"] = format_table_row(report);
    return doc.dump(2) + "\n";
}

}  // namespace ctnli
