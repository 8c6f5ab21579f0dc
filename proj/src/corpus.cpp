#include "ctnli/corpus.hpp"

#include <algorithm>
#include <set>

#include "json_io.hpp"

namespace ctnli {

using detail::json;

std::string_view section_name(Section s) {
    switch (s) {
        case Section::Intervention: return "Intervention";
        case Section::Eligibility: return "Eligibility";
        case Section::Results: return "Results";
        case Section::AdverseEvents: return "Adverse Events";
    }
    return "";
}

std::optional<Section> parse_section(std::string_view name) {
    for (auto s : kAllSections)
        if (section_name(s) == name) return s;
    return std::nullopt;
}

std::string_view label_name(Label l) {
    return l == Label::Entailment ? "Entailment" : "Contradiction";
}

std::optional<Label> parse_label(std::string_view name) {
    const auto lower = detail::to_lower(detail::trim(name));
    if (lower == "entailment") return Label::Entailment;
    if (lower == "contradiction") return Label::Contradiction;
    return std::nullopt;
}

std::string_view intervention_name(Intervention i) {
    return i == Intervention::Preserving ? "preserving" : "altering";
}

std::optional<Intervention> parse_intervention(std::string_view name) {
    const auto lower = detail::to_lower(detail::trim(name));
    if (lower == "preserving") return Intervention::Preserving;
    if (lower == "altering") return Intervention::Altering;
    return std::nullopt;
}

const std::vector<std::string>& ClinicalTrialRecord::lines(Section s) const {
    static const std::vector<std::string> kEmpty;
    auto it = sections.find(s);
    return it == sections.end() ? kEmpty : it->second;
}

Corpus::Corpus(std::vector<ClinicalTrialRecord> trials, std::vector<NliInstance> instances) {
    for (auto& t : trials) {
        if (t.trial_id.empty()) throw InputError("trial record with empty trial id");
        auto id = t.trial_id;
        if (!trials_.emplace(id, std::move(t)).second)
            throw InputError("duplicate trial id " + id);
    }
    std::sort(instances.begin(), instances.end(),
              [](const NliInstance& a, const NliInstance& b) { return a.uuid < b.uuid; });
    for (std::size_t i = 1; i < instances.size(); ++i)
        if (instances[i].uuid == instances[i - 1].uuid)
            throw InputError("duplicate uuid " + instances[i].uuid);

    for (const auto& inst : instances) {
        if (detail::trim(inst.statement).empty())
            throw InputError("statement " + inst.uuid + ": empty statement text");
        if ((inst.type == InstanceType::Comparison) != inst.secondary_trial_id.has_value())
            throw InputError("statement " + inst.uuid +
                             ": Comparison type requires exactly one secondary trial id");
        auto check_trial = [&](const std::string& id) {
            auto it = trials_.find(id);
            if (it == trials_.end())
                throw InputError("statement " + inst.uuid + " references missing trial " + id);
            if (!it->second.sections.contains(inst.section))
                throw InputError("statement " + inst.uuid + ": trial " + id + " has no section " +
                                 std::string(section_name(inst.section)));
        };
        check_trial(inst.primary_trial_id);
        if (inst.secondary_trial_id) check_trial(*inst.secondary_trial_id);
    }
    instances_ = std::move(instances);
}

const NliInstance* Corpus::find(std::string_view uuid) const {
    auto it = std::lower_bound(instances_.begin(), instances_.end(), uuid,
                               [](const NliInstance& a, std::string_view u) { return a.uuid < u; });
    if (it == instances_.end() || it->uuid != uuid) return nullptr;
    return &*it;
}

const ClinicalTrialRecord* Corpus::trial(std::string_view trial_id) const {
    auto it = trials_.find(std::string(trial_id));
    return it == trials_.end() ? nullptr : &it->second;
}

namespace {

ClinicalTrialRecord parse_trial(const json& doc, const std::filesystem::path& file,
                                const SchemaMapping& schema) {
    auto fail = [&](const std::string& field, const std::string& msg) -> InputError {
        return InputError(file.string() + ": field \"" + field + "\": " + msg);
    };
    if (!doc.is_object()) throw InputError(file.string() + ": trial record must be an object");
    ClinicalTrialRecord rec;
    auto id = doc.find(schema.trial_id);
    if (id == doc.end() || !id->is_string()) throw fail(schema.trial_id, "missing or not a string");
    rec.trial_id = id->get<std::string>();
    if (detail::trim(rec.trial_id).empty()) throw fail(schema.trial_id, "empty trial id");

    bool any_lines = false;
    for (const auto& [section, key] : schema.section_keys) {
        auto it = doc.find(key);
        if (it == doc.end() || it->is_null()) continue;
        if (!it->is_array()) throw fail(key, "expected a list of strings");
        std::vector<std::string> lines;
        for (const auto& line : *it) {
            if (!line.is_string()) throw fail(key, "expected a list of strings");
            lines.push_back(line.get<std::string>());
        }
        any_lines = any_lines || !lines.empty();
        rec.sections.emplace(section, std::move(lines));
    }
    if (!any_lines) throw InputError(file.string() + ": trial record has no non-empty section");
    return rec;
}

std::optional<std::string> optional_string(const json& obj, const std::string& key,
                                           const std::string& where) {
    auto it = obj.find(key);
    if (it == obj.end() || it->is_null()) return std::nullopt;
    if (!it->is_string()) throw InputError(where + ": field \"" + key + "\" must be a string");
    return it->get<std::string>();
}

NliInstance parse_instance(const std::string& uuid, const json& obj,
                           const std::filesystem::path& file, const SchemaMapping& schema) {
    const std::string where = file.string() + ": statement " + uuid;
    if (!obj.is_object()) throw InputError(where + ": expected an object");
    auto required = [&](const std::string& key) {
        auto v = optional_string(obj, key, where);
        if (!v) throw InputError(where + ": missing field \"" + key + "\"");
        return *v;
    };
    NliInstance inst;
    inst.uuid = uuid;
    inst.statement = required(schema.statement);

    const auto type = detail::to_lower(detail::trim(required(schema.type)));
    if (type == "single")
        inst.type = InstanceType::Single;
    else if (type == "comparison")
        inst.type = InstanceType::Comparison;
    else
        throw InputError(where + ": field \"" + schema.type + "\" has unknown value " + type);

    const auto section = required(schema.section_id);
    auto parsed = parse_section(detail::trim(section));
    if (!parsed)
        throw InputError(where + ": field \"" + schema.section_id + "\" has unknown section " +
                         section);
    inst.section = *parsed;

    inst.primary_trial_id = required(schema.primary_id);
    inst.secondary_trial_id = optional_string(obj, schema.secondary_id, where);

    if (auto label = optional_string(obj, schema.label, where)) {
        inst.label = parse_label(*label);
        if (!inst.label)
            throw InputError(where + ": field \"" + schema.label + "\" has unknown label " +
                             *label);
    }
    return inst;
}

}  // namespace

std::vector<NliInstance> load_statements(const std::filesystem::path& statements_file,
                                         const SchemaMapping& schema) {
    const json doc = detail::read_json_file(statements_file, true);
    if (!doc.is_object())
        throw InputError(statements_file.string() + ": statement file must map uuid to fields");
    std::vector<NliInstance> out;
    out.reserve(doc.size());
    for (const auto& [uuid, obj] : doc.items())
        out.push_back(parse_instance(uuid, obj, statements_file, schema));
    return out;
}

Corpus load_corpus(const std::filesystem::path& trials_dir,
                   const std::filesystem::path& statements_file, const SchemaMapping& schema) {
    if (!std::filesystem::is_directory(trials_dir))
        throw InputError("trials directory not found: " + trials_dir.string());
    std::vector<std::filesystem::path> files;
    for (const auto& entry : std::filesystem::directory_iterator(trials_dir))
        if (entry.is_regular_file() && entry.path().extension() == schema.trial_file_extension)
            files.push_back(entry.path());
    std::sort(files.begin(), files.end());

    std::vector<ClinicalTrialRecord> trials;
    trials.reserve(files.size());
    for (const auto& f : files) trials.push_back(parse_trial(detail::read_json_file(f), f, schema));
    return Corpus(std::move(trials), load_statements(statements_file, schema));
}

void save_corpus(const Corpus& corpus, const std::filesystem::path& trials_dir,
                 const std::filesystem::path& statements_file, const SchemaMapping& schema) {
    std::filesystem::create_directories(trials_dir);
    for (const auto& [id, rec] : corpus.trials()) {
        json doc = json::object();
        doc[schema.trial_id] = id;
        for (const auto& [section, lines] : rec.sections)
            doc[schema.section_keys.at(section)] = lines;
        detail::write_file_atomic(trials_dir / (id + schema.trial_file_extension),
                                  doc.dump(4) + "\n");
    }
    json statements = json::object();
    for (const auto& inst : corpus.instances()) {
        json obj = json::object();
        obj[schema.type] = inst.type == InstanceType::Comparison ? "Comparison" : "Single";
        obj[schema.section_id] = section_name(inst.section);
        obj[schema.primary_id] = inst.primary_trial_id;
        if (inst.secondary_trial_id) obj[schema.secondary_id] = *inst.secondary_trial_id;
        obj[schema.statement] = inst.statement;
        if (inst.label) obj[schema.label] = label_name(*inst.label);
        statements[inst.uuid] = std::move(obj);
    }
    detail::write_file_atomic(statements_file, statements.dump(4) + "\n");
}

std::vector<ContrastPair> validate_contrast_pairs(std::vector<ContrastPair> pairs,
                                                  const Corpus& corpus) {
    std::set<std::string> perturbed_seen;
    for (std::size_t i = 0; i < pairs.size(); ++i) {
        const auto& p = pairs[i];
        const std::string row = "contrast manifest row " + std::to_string(i + 1) + ": ";
        const auto* perturbed = corpus.find(p.perturbed_uuid);
        const auto* base = corpus.find(p.base_uuid);
        if (!perturbed) throw InputError(row + "unknown perturbed uuid " + p.perturbed_uuid);
        if (!base) throw InputError(row + "unknown base uuid " + p.base_uuid);
        if (p.perturbed_uuid == p.base_uuid)
            throw InputError(row + "pair links " + p.base_uuid + " to itself");
        if (!perturbed_seen.insert(p.perturbed_uuid).second)
            throw InputError(row + "perturbed uuid " + p.perturbed_uuid + " appears twice");
        if (!perturbed->label || !base->label)
            throw InputError(row + "both members need gold labels");
        const bool same = *perturbed->label == *base->label;
        if (p.intervention == Intervention::Preserving && !same)
            throw InputError(row + "preserving pair " + p.base_uuid + " -> " + p.perturbed_uuid +
                             " has different gold labels");
        if (p.intervention == Intervention::Altering && same)
            throw InputError(row + "altering pair " + p.base_uuid + " -> " + p.perturbed_uuid +
                             " has equal gold labels");
    }
    return pairs;
}

std::vector<ContrastPair> load_contrast_manifest(const std::filesystem::path& manifest_file,
                                                 const Corpus& corpus,
                                                 const SchemaMapping& schema) {
    const json doc = detail::read_json_file(manifest_file);
    if (!doc.is_array())
        throw InputError(manifest_file.string() + ": contrast manifest must be an array of rows");
    std::vector<ContrastPair> pairs;
    pairs.reserve(doc.size());
    for (std::size_t i = 0; i < doc.size(); ++i) {
        const std::string where = manifest_file.string() + ": row " + std::to_string(i + 1);
        const auto& row = doc[i];
        if (!row.is_object()) throw InputError(where + ": expected an object");
        auto field = [&](const std::string& key) {
            auto v = optional_string(row, key, where);
            if (!v) throw InputError(where + ": missing field \"" + key + "\"");
            return *v;
        };
        ContrastPair p;
        p.perturbed_uuid = field(schema.perturbed_uuid);
        p.base_uuid = field(schema.base_uuid);
        const auto kind = field(schema.intervention);
        auto parsed = parse_intervention(kind);
        if (!parsed) throw InputError(where + ": unknown intervention " + kind);
        p.intervention = *parsed;
        pairs.push_back(std::move(p));
    }
    return validate_contrast_pairs(std::move(pairs), corpus);
}

void save_contrast_manifest(const std::vector<ContrastPair>& pairs,
                            const std::filesystem::path& manifest_file,
                            const SchemaMapping& schema) {
    json doc = json::array();
    for (const auto& p : pairs)
        doc.push_back({{schema.perturbed_uuid, p.perturbed_uuid},
                       {schema.base_uuid, p.base_uuid},
                       {schema.intervention, intervention_name(p.intervention)}});
    detail::write_file_atomic(manifest_file, doc.dump(2) + "\n");
}

PredictionSet load_predictions(const std::filesystem::path& predictions_file, const Corpus& corpus,
                               const SchemaMapping& schema) {
    const json doc = detail::read_json_file(predictions_file, true);
    if (!doc.is_object())
        throw InputError(predictions_file.string() + ": predictions must map uuid to objects");
    PredictionSet preds;
    for (const auto& [uuid, value] : doc.items()) {
        const std::string where = predictions_file.string() + ": uuid " + uuid;
        if (!corpus.find(uuid)) throw InputError(where + ": not in the evaluated corpus");
        std::string text;
        if (value.is_string()) {
            text = value.get<std::string>();
        } else if (value.is_object() && value.contains(schema.prediction) &&
                   value[schema.prediction].is_string()) {
            text = value[schema.prediction].get<std::string>();
        } else {
            throw InputError(where + ": missing \"" + schema.prediction + "\" string");
        }
        auto label = parse_label(text);
        if (!label) throw InputError(where + ": unknown prediction " + text);
        preds.emplace(uuid, *label);
    }
    return preds;
}

void save_predictions(const PredictionSet& preds, const std::filesystem::path& predictions_file,
                      const SchemaMapping& schema) {
    json doc = json::object();
    for (const auto& [uuid, label] : preds) doc[uuid] = {{schema.prediction, label_name(label)}};
    detail::write_file_atomic(predictions_file, doc.dump(2) + "\n");
}

CorpusStats corpus_stats(const Corpus& corpus, const std::vector<ContrastPair>& pairs) {
    CorpusStats s;
    std::set<std::string_view> perturbed;
    for (const auto& p : pairs) {
        perturbed.insert(p.perturbed_uuid);
        (p.intervention == Intervention::Altering ? s.altering : s.preserving)++;
    }
    for (const auto& inst : corpus.instances()) {
        if (perturbed.contains(inst.uuid)) continue;
        if (!inst.label)
            ++s.unlabeled;
        else if (*inst.label == Label::Entailment)
            ++s.entailment;
        else
            ++s.contradiction;
    }
    s.total = s.entailment + s.contradiction + s.unlabeled + s.altering + s.preserving;
    return s;
}

std::string premise_text(const Corpus& corpus, const NliInstance& instance) {
    auto section_text = [&](const std::string& id) {
        const auto* rec = corpus.trial(id);
        if (!rec) throw InputError("statement " + instance.uuid + " references missing trial " + id);
        std::string out;
        for (const auto& line : rec->lines(instance.section)) {
            if (!out.empty()) out += '\n';
            out += line;
        }
        return out;
    };
    std::string text = section_text(instance.primary_trial_id);
    if (instance.secondary_trial_id) text += "\n" + section_text(*instance.secondary_trial_id);
    return text;
}

}  // namespace ctnli
