#include "ctnli/augment.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <regex>

#include "ctnli/log.hpp"
#include "ctnli/metrics.hpp"
#include "json_io.hpp"

namespace ctnli {

using ojson = nlohmann::ordered_json;

namespace {

std::vector<std::string> nonblank_lines(std::string_view text) {
    std::vector<std::string> lines;
    std::size_t pos = 0;
    while (pos <= text.size()) {
        auto nl = text.find('\n', pos);
        if (nl == std::string_view::npos) nl = text.size();
        auto line = detail::trim(text.substr(pos, nl - pos));
        if (!line.empty()) lines.push_back(std::move(line));
        pos = nl + 1;
    }
    return lines;
}

// Lowercased, whitespace collapsed, one trailing period (and any space before it) dropped.
std::string normalize_answer(std::string_view s) {
    std::string out;
    bool space = false;
    for (char c : detail::trim(s)) {
        if (std::isspace(static_cast<unsigned char>(c))) {
            space = true;
            continue;
        }
        if (space && !out.empty()) out += ' ';
        space = false;
        out += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    }
    if (!out.empty() && out.back() == '.') out.pop_back();
    if (!out.empty() && out.back() == ' ') out.pop_back();
    return out;
}

// If `line` starts with `label` (case-insensitive, optional markdown
// emphasis), returns the text after it.
std::optional<std::string> after_label(std::string_view line, std::string_view label) {
    std::size_t i = 0;
    while (i < line.size() && (line[i] == '*' || line[i] == '#' || line[i] == '_')) ++i;
    if (line.size() - i < label.size()) return std::nullopt;
    for (std::size_t k = 0; k < label.size(); ++k)
        if (std::tolower(static_cast<unsigned char>(line[i + k])) != label[k]) return std::nullopt;
    i += label.size();
    while (i < line.size() && (line[i] == '*' || line[i] == '_')) ++i;
    return detail::trim(line.substr(i));
}

const std::regex& choice_line() {
    static const std::regex re(R"(^\(?([0-9]+)\s*[.):]\s*(.*)$)");
    return re;
}

}  // namespace

ParsedNqa parse_nqa_response(std::string_view response) {
    enum class Where { Start, Question, Choices, Done };
    Where where = Where::Start;
    std::optional<std::string> question;
    bool saw_choices = false;
    std::array<std::optional<std::string>, 3> choices;
    std::optional<std::string> answer;

    auto add_choice = [&](const std::string& text) {
        std::smatch m;
        if (!std::regex_match(text, m, choice_line())) return false;
        const auto digits = m[1].str();
        if (digits.size() != 1 || digits[0] < '1' || digits[0] > '3')
            throw NqaParseError("choices", "choice number " + digits + " outside 1..3");
        auto& slot = choices[static_cast<std::size_t>(digits[0] - '1')];
        if (slot) throw NqaParseError("choices", "choice " + digits + " listed twice");
        slot = detail::trim(m[2].str());
        return true;
    };

    for (const auto& line : nonblank_lines(response)) {
        if (auto rest = after_label(line, "question:")) {
            if (question) throw NqaParseError("question", "more than one question line");
            question = *rest;
            where = Where::Question;
        } else if (auto rest = after_label(line, "choices:")) {
            saw_choices = true;
            where = Where::Choices;
            if (!rest->empty() && !add_choice(*rest))
                throw NqaParseError("choices", "unnumbered choice text");
        } else if (auto rest = after_label(line, "correct answer:")) {
            if (answer) throw NqaParseError("correct answer", "more than one answer line");
            answer = *rest;
            where = Where::Done;
        } else if (where == Where::Question) {
            *question += " " + line;
        } else if (where == Where::Choices) {
            if (!add_choice(line)) throw NqaParseError("choices", "unnumbered line inside choices");
        }
        // Anything before the question or after the answer is ignored.
    }

    if (!question || question->empty()) throw NqaParseError("question", "missing question");
    if (!saw_choices) throw NqaParseError("choices", "missing choices");
    ParsedNqa out;
    out.question = *question;
    for (std::size_t i = 0; i < 3; ++i) {
        if (!choices[i] || choices[i]->empty())
            throw NqaParseError("choices", "expected 3 choices, choice " + std::to_string(i + 1) +
                                               " missing");
        out.choices[i] = *choices[i];
    }
    for (std::size_t i = 0; i < 3; ++i)
        for (std::size_t j = i + 1; j < 3; ++j)
            if (normalize_answer(out.choices[i]) == normalize_answer(out.choices[j]))
                throw NqaParseError("choices", "choices are not distinct");
    if (!answer || answer->empty()) throw NqaParseError("correct answer", "missing correct answer");

    const auto norm = normalize_answer(*answer);
    for (std::size_t i = 0; i < 3; ++i) {
        if (normalize_answer(out.choices[i]) == norm) {
            out.correct_index = i;
            return out;
        }
    }
    static const std::regex by_number(R"(^(?:choice\s*)?\(?([1-3])(?:[.):]|\s|$).*)");
    std::smatch m;
    if (std::regex_match(norm, m, by_number)) {
        out.correct_index = static_cast<std::size_t>(m[1].str()[0] - '1');
        return out;
    }
    throw NqaParseError("correct answer", "answer \"" + *answer + "\" matches no choice");
}

std::string_view method_name(AugmentMethod m) {
    switch (m) {
        case AugmentMethod::SemanticEntail: return "semantic_entail";
        case AugmentMethod::SemanticContradict: return "semantic_contradict";
        case AugmentMethod::VocabReplace: return "vocab_replace";
    }
    return "";
}

std::vector<const NliInstance*> entailed_instances(const Corpus& corpus) {
    std::vector<const NliInstance*> out;
    for (const auto& inst : corpus.instances())
        if (inst.label == Label::Entailment) out.push_back(&inst);
    return out;
}

namespace {

std::vector<const NliInstance*> resolve_sources(const Corpus& corpus,
                                                std::span<const NliInstance* const> sources) {
    if (sources.empty()) return entailed_instances(corpus);
    std::vector<const NliInstance*> out;
    for (const auto* inst : sources)
        if (inst->label == Label::Entailment) out.push_back(inst);
    std::sort(out.begin(), out.end(),
              [](const NliInstance* a, const NliInstance* b) { return a->uuid < b->uuid; });
    return out;
}

void record_skip(std::vector<Skip>& skips, const std::string& uuid, std::string reason) {
    log::info("augment-skip", {{"uuid", uuid}, {"reason", reason}});
    skips.push_back({uuid, std::move(reason)});
}

// Classifies a failed generation: true when it must abort the whole pass.
template <typename T>
bool handle_failure(const std::exception_ptr& err, const std::string& uuid, AugmentResult<T>& out) {
    try {
        std::rethrow_exception(err);
    } catch (const TransportError& e) {
        out.abort_reason = "statement " + uuid + ": " + e.what();
        out.abort_status = e.status();
        log::event(log::Level::Error, "augment-abort", {{"uuid", uuid}, {"reason", e.what()}});
        return true;
    } catch (const std::exception& e) {
        record_skip(out.skips, uuid, std::string("generation-error: ") + e.what());
    }
    return false;
}

std::vector<GenerationRequest> make_requests(std::span<const NliInstance* const> sources,
                                             TemplateName tmpl, const GenerationSettings& settings) {
    std::vector<GenerationRequest> reqs;
    reqs.reserve(sources.size());
    for (const auto* inst : sources)
        reqs.push_back({tmpl, inst->statement, settings.decoding, settings.model_name});
    return reqs;
}

std::string clean_generation(std::string_view text) {
    auto t = detail::trim(text);
    if (t.size() >= 2 && t.front() == '"' && t.back() == '"') t = detail::trim(t.substr(1, t.size() - 2));
    return t;
}

}  // namespace

AugmentResult<NqaItem> augment_nqa(const Corpus& corpus, LlmClient& client,
                                   const GenerationSettings& settings,
                                   std::span<const NliInstance* const> sources) {
    const auto eligible = resolve_sources(corpus, sources);
    const auto reqs = make_requests(eligible, TemplateName::NqaGenerate, settings);
    const auto outcomes = client.generate_all(reqs);

    AugmentResult<NqaItem> out;
    for (std::size_t i = 0; i < eligible.size(); ++i) {
        const auto& inst = *eligible[i];
        if (const auto* err = std::get_if<std::exception_ptr>(&outcomes[i])) {
            if (handle_failure(*err, inst.uuid, out)) break;
            continue;
        }
        const auto& gen = std::get<Generation>(outcomes[i]);
        try {
            auto parsed = parse_nqa_response(gen.text);
            NqaItem item;
            item.source_uuid = inst.uuid;
            item.question = std::move(parsed.question);
            item.choices = std::move(parsed.choices);
            item.correct_index = parsed.correct_index;
            item.trial_reference = {inst.primary_trial_id, inst.secondary_trial_id, inst.section};
            item.cache_key = gen.cache_key;
            out.items.push_back(std::move(item));
        } catch (const NqaParseError& e) {
            record_skip(out.skips, inst.uuid, std::string("parse-error: ") + e.what());
        }
    }
    return out;
}

AugmentResult<AugmentedStatement> augment_semantic(const Corpus& corpus, LlmClient& client,
                                                   SemanticMode mode,
                                                   const GenerationSettings& settings,
                                                   std::span<const NliInstance* const> sources) {
    const auto eligible = resolve_sources(corpus, sources);
    const bool entail = mode == SemanticMode::Entail;
    const auto reqs = make_requests(
        eligible, entail ? TemplateName::SpEntail : TemplateName::SpContradict, settings);
    const auto outcomes = client.generate_all(reqs);

    AugmentResult<AugmentedStatement> out;
    for (std::size_t i = 0; i < eligible.size(); ++i) {
        const auto& inst = *eligible[i];
        if (const auto* err = std::get_if<std::exception_ptr>(&outcomes[i])) {
            if (handle_failure(*err, inst.uuid, out)) break;
            continue;
        }
        const auto& gen = std::get<Generation>(outcomes[i]);
        auto text = clean_generation(gen.text);
        if (text.empty() || normalize_answer(text) == normalize_answer(inst.statement)) {
            record_skip(out.skips, inst.uuid, "identical-to-source");
            continue;
        }
        AugmentedStatement s;
        s.source_uuid = inst.uuid;
        s.method = entail ? AugmentMethod::SemanticEntail : AugmentMethod::SemanticContradict;
        s.text = std::move(text);
        s.label = entail ? Label::Entailment : Label::Contradiction;
        s.cache_key = gen.cache_key;
        out.items.push_back(std::move(s));
    }
    return out;
}

std::string match_casing(std::string_view original, std::string_view replacement) {
    std::string out(replacement);
    if (!original.empty() && std::isupper(static_cast<unsigned char>(original.front())) && !out.empty())
        out.front() = static_cast<char>(std::toupper(static_cast<unsigned char>(out.front())));
    return out;
}

AugmentResult<AugmentedStatement> augment_vocab(const Corpus& corpus, const TfidfModel& tfidf,
                                                const EmbeddingStore& store,
                                                const VocabSettings& settings,
                                                std::span<const NliInstance* const> sources) {
    AugmentResult<AugmentedStatement> out;
    for (const auto* inst : resolve_sources(corpus, sources)) {
        const auto tokens = tokenize(inst->statement, *settings.stop_words, inst->uuid);
        const auto ranked = rank_keywords(tokens, tfidf);
        if (ranked.empty()) {
            record_skip(out.skips, inst->uuid, "no-keyword");
            continue;
        }
        // The top keyword, then one fallback if it is out of vocabulary.
        std::optional<std::string> skip_reason = "oov";
        for (std::size_t r = 0; r < std::min<std::size_t>(2, ranked.size()); ++r) {
            const auto& kw = ranked[r];
            if (!store.index_of(kw.token)) continue;
            auto neighbor = nearest_same_pos(store, kw.token, settings.neighbor_query);
            if (!neighbor) {
                skip_reason = "no-candidate";
                break;
            }
            const auto& tok = tokens.tokens[kw.index];
            const auto replacement = match_casing(tok.surface, neighbor->word);
            AugmentedStatement s;
            s.source_uuid = inst->uuid;
            s.method = AugmentMethod::VocabReplace;
            s.text = inst->statement.substr(0, tok.span.begin) + replacement +
                     inst->statement.substr(tok.span.end);
            s.label = Label::Entailment;
            s.vocab = VocabProvenance{tok.surface, replacement, neighbor->similarity, tok.span};
            out.items.push_back(std::move(s));
            skip_reason.reset();
            break;
        }
        if (skip_reason) record_skip(out.skips, inst->uuid, *skip_reason);
    }
    return out;
}

std::string serialize_nli_input(std::string_view ctr, std::string_view claim) {
    std::string out = "[CLS] ";
    out.append(ctr).append(" [SEP] ").append(claim).append(" [SEP]");
    return out;
}

std::string serialize_nqa_input(std::string_view ctr, std::string_view question,
                                std::string_view choice) {
    std::string out = "[CLS] ";
    out.append(ctr).append(" [SEP] ").append(question).append(" [SEP] ").append(choice).append(" [SEP]");
    return out;
}

namespace {

ojson trial_reference_json(const TrialReference& ref) {
    ojson j;
    j["primary_trial_id"] = ref.primary_trial_id;
    j["secondary_trial_id"] = ref.secondary_trial_id ? ojson(*ref.secondary_trial_id) : ojson(nullptr);
    j["section"] = section_name(ref.section);
    return j;
}

std::string premise_for(const Corpus& corpus, const std::string& uuid, const TrialReference& ref) {
    NliInstance probe;
    probe.uuid = uuid;
    probe.primary_trial_id = ref.primary_trial_id;
    probe.secondary_trial_id = ref.secondary_trial_id;
    probe.section = ref.section;
    return premise_text(corpus, probe);
}

ojson augmented_provenance(const AugmentedStatement& s) {
    ojson p;
    if (s.vocab) {
        p["replaced_word"] = s.vocab->replaced_word;
        p["replacement"] = s.vocab->replacement;
        p["similarity"] = s.vocab->similarity;
        p["span"] = {s.vocab->span.begin, s.vocab->span.end};
    } else {
        p["cache_key"] = s.cache_key;
    }
    return p;
}

}  // namespace

std::vector<MultiTaskRecord> build_multitask_records(std::span<const NliInstance> nli,
                                                     std::span<const AugmentedStatement> augmented,
                                                     std::span<const NqaItem> nqa,
                                                     const Corpus& corpus) {
    std::vector<MultiTaskRecord> records;
    records.reserve(nli.size() + augmented.size() + 3 * nqa.size());
    for (const auto& inst : nli) {
        if (!inst.label) throw InputError("training instance " + inst.uuid + " is unlabeled");
        records.push_back({Task::Nli, serialize_nli_input(premise_text(corpus, inst), inst.statement),
                           encode_label(*inst.label), inst.uuid, "original", "null"});
    }
    for (const auto& s : augmented) {
        const auto* src = corpus.find(s.source_uuid);
        if (!src) throw InputError("augmented statement references unknown uuid " + s.source_uuid);
        records.push_back({Task::Nli, serialize_nli_input(premise_text(corpus, *src), s.text),
                           encode_label(s.label), s.source_uuid, std::string(method_name(s.method)),
                           augmented_provenance(s).dump()});
    }
    for (const auto& item : nqa) {
        const auto ctr = premise_for(corpus, item.source_uuid, item.trial_reference);
        for (std::size_t c = 0; c < 3; ++c) {
            ojson p;
            p["cache_key"] = item.cache_key;
            p["question"] = item.question;
            p["choice_index"] = c;
            p["correct_index"] = item.correct_index;
            p["trial_reference"] = trial_reference_json(item.trial_reference);
            records.push_back({Task::Nqa, serialize_nqa_input(ctr, item.question, item.choices[c]),
                               c == item.correct_index ? 1 : 0, item.source_uuid, "nqa", p.dump()});
        }
    }
    return records;
}

std::string dataset_header(std::string_view kind) {
    ojson h;
    h["schema"] = "ctnli." + std::string(kind);
    h["schema_version"] = kDatasetSchemaVersion;
    return h.dump() + "\n";
}

std::size_t emit_multitask_dataset(std::span<const NliInstance> nli,
                                   std::span<const AugmentedStatement> augmented,
                                   std::span<const NqaItem> nqa, const Corpus& corpus,
                                   double lambda, const std::filesystem::path& out) {
    if (!std::isfinite(lambda) || lambda < 0.0)
        throw std::invalid_argument("lambda must be finite and non-negative");
    const auto records = build_multitask_records(nli, augmented, nqa, corpus);

    std::string text = dataset_header("multitask");
    std::size_t nli_n = 0, nqa_n = 0;
    for (const auto& r : records) {
        ojson j;
        j["task"] = r.task == Task::Nli ? "nli" : "nqa";
        j["serialized_input"] = r.serialized_input;
        j["target"] = r.target;
        j["source_uuid"] = r.source_uuid;
        j["method"] = r.method;
        j["provenance"] = ojson::parse(r.provenance_json);
        text += j.dump() + "\n";
        (r.task == Task::Nli ? nli_n : nqa_n)++;
    }
    if (out.has_parent_path() && !std::filesystem::is_directory(out.parent_path()))
        throw InputError("output directory does not exist: " + out.parent_path().string());
    detail::write_file_atomic(out, text);

    ojson meta;
    meta["schema"] = "ctnli.multitask.meta";
    meta["schema_version"] = kDatasetSchemaVersion;
    meta["lambda"] = lambda;
    meta["record_count"] = records.size();
    meta["nli_records"] = nli_n;
    meta["nqa_records"] = nqa_n;
    auto meta_path = out;
    meta_path += ".meta.json";
    detail::write_file_atomic(meta_path, meta.dump(2) + "\n");
    return records.size();
}

std::string to_json_line(const NqaItem& item) {
    ojson j;
    j["source_uuid"] = item.source_uuid;
    j["question"] = item.question;
    j["choices"] = item.choices;
    j["correct_index"] = item.correct_index;
    j["trial_reference"] = trial_reference_json(item.trial_reference);
    j["cache_key"] = item.cache_key;
    return j.dump() + "\n";
}

std::string to_json_line(const AugmentedStatement& s) {
    ojson j;
    j["source_uuid"] = s.source_uuid;
    j["method"] = method_name(s.method);
    j["text"] = s.text;
    j["label"] = label_name(s.label);
    j["provenance"] = augmented_provenance(s);
    return j.dump() + "\n";
}

}  // namespace ctnli
