#pragma once

// Shared helpers for the unit and acceptance tests: scratch directories,
// random fixture generators and brute-force oracles. The oracles are written
// from the definitions, not from the library code.

#include <algorithm>
#include <array>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <unistd.h>
#include <vector>

#include <json.hpp>

#include "ctnli/corpus.hpp"
#include "ctnli/embed.hpp"
#include "ctnli/llmclient.hpp"

namespace ctnli::testing {

namespace fs = std::filesystem;
using nlohmann::json;

class TempDir {
public:
    explicit TempDir(const std::string& tag = "t") {
        static std::atomic<int> counter{0};
        path_ = fs::temp_directory_path() /
                ("ctnli-" + tag + "-" + std::to_string(::getpid()) + "-" +
                 std::to_string(counter.fetch_add(1)));
        fs::remove_all(path_);
        fs::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        fs::remove_all(path_, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    const fs::path& path() const { return path_; }
    fs::path operator/(const std::string& rel) const { return path_ / rel; }

private:
    fs::path path_;
};

inline void write_text(const fs::path& p, const std::string& text) {
    if (p.has_parent_path()) fs::create_directories(p.parent_path());
    std::ofstream out(p, std::ios::binary);
    out << text;
}

inline std::string read_text(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

// All regular files under dir, relative path -> bytes.
inline std::map<std::string, std::string> snapshot(const fs::path& dir) {
    std::map<std::string, std::string> out;
    if (!fs::exists(dir)) return out;
    for (const auto& e : fs::recursive_directory_iterator(dir))
        if (e.is_regular_file()) out[fs::relative(e.path(), dir).string()] = read_text(e.path());
    return out;
}

inline fs::path fixture_dir() { return fs::path(CTNLI_FIXTURE_DIR); }

// ---- random NLI fixtures -------------------------------------------------

struct RandomFixture {
    Corpus corpus;
    std::vector<ContrastPair> pairs;
    PredictionSet preds;
};

// One trial, n labeled instances, up to max_pairs valid contrast pairs and
// random predictions for every instance.
inline RandomFixture random_fixture(std::mt19937_64& rng, std::size_t max_instances,
                                    std::size_t max_pairs) {
    std::uniform_int_distribution<std::size_t> n_dist(1, max_instances);
    std::bernoulli_distribution coin(0.5);
    const std::size_t n = n_dist(rng);

    ClinicalTrialRecord trial{"NCT1", {{Section::Results, {"line"}}}};
    std::vector<NliInstance> instances;
    for (std::size_t i = 0; i < n; ++i) {
        NliInstance inst;
        inst.uuid = "u" + std::to_string(i);
        inst.statement = "statement " + std::to_string(i);
        inst.label = coin(rng) ? Label::Entailment : Label::Contradiction;
        inst.primary_trial_id = "NCT1";
        instances.push_back(inst);
    }

    RandomFixture f;
    std::set<std::size_t> perturbed;
    std::uniform_int_distribution<std::size_t> pick(0, n - 1);
    const std::size_t want = std::uniform_int_distribution<std::size_t>(0, max_pairs)(rng);
    for (std::size_t tries = 0; f.pairs.size() < want && tries < want * 4; ++tries) {
        const auto p = pick(rng), b = pick(rng);
        if (p == b || perturbed.contains(p)) continue;
        perturbed.insert(p);
        const auto kind = instances[p].label == instances[b].label ? Intervention::Preserving
                                                                   : Intervention::Altering;
        f.pairs.push_back({instances[p].uuid, instances[b].uuid, kind});
    }
    for (const auto& inst : instances)
        f.preds[inst.uuid] = coin(rng) ? Label::Entailment : Label::Contradiction;
    f.corpus = Corpus({trial}, std::move(instances));
    return f;
}

// ---- metric oracles -------------------------------------------------------

struct Confusion {
    std::size_t tp = 0, fp = 0, fn = 0, tn = 0;
};

inline Confusion control_confusion(const RandomFixture& f) {
    std::set<std::string> perturbed;
    for (const auto& p : f.pairs) perturbed.insert(p.perturbed_uuid);
    Confusion c;
    for (const auto& inst : f.corpus.instances()) {
        if (perturbed.contains(inst.uuid)) continue;
        const bool g = inst.label == Label::Entailment;
        const bool y = f.preds.at(inst.uuid) == Label::Entailment;
        if (g && y) ++c.tp;
        else if (!g && y) ++c.fp;
        else if (g && !y) ++c.fn;
        else ++c.tn;
    }
    return c;
}

// {agreeing, total} over preserving pairs
inline std::pair<std::size_t, std::size_t> consistency_counts(const RandomFixture& f) {
    std::size_t agree = 0, total = 0;
    for (const auto& p : f.pairs) {
        if (p.intervention != Intervention::Preserving) continue;
        ++total;
        if (f.preds.at(p.base_uuid) == f.preds.at(p.perturbed_uuid)) ++agree;
    }
    return {agree, total};
}

// {flipped, eligible, altering}
struct FaithCounts {
    std::size_t flipped = 0, eligible = 0, altering = 0;
};

inline FaithCounts faithfulness_counts(const RandomFixture& f) {
    FaithCounts c;
    for (const auto& p : f.pairs) {
        if (p.intervention != Intervention::Altering) continue;
        ++c.altering;
        const auto gold = f.corpus.find(p.base_uuid)->label;
        if (f.preds.at(p.base_uuid) != gold) continue;
        ++c.eligible;
        if (f.preds.at(p.perturbed_uuid) != f.preds.at(p.base_uuid)) ++c.flipped;
    }
    return c;
}

// ---- TF-IDF oracle ---------------------------------------------------------

// A toy document is a list of lowercase alphabetic words (no stop words).
using ToyDoc = std::vector<std::string>;

struct OracleKeyword {
    std::string word;
    std::size_t position;  // index of the first occurrence in the doc
    double score;
};

// Scores every word of `doc` against `docs` straight from the definition and
// keeps the best one; ties go to the earliest position.
inline std::optional<OracleKeyword> oracle_keyword(const ToyDoc& doc, const std::vector<ToyDoc>& docs) {
    if (doc.empty()) return std::nullopt;
    std::optional<OracleKeyword> best;
    for (std::size_t i = 0; i < doc.size(); ++i) {
        const auto& w = doc[i];
        const double tf = static_cast<double>(std::count(doc.begin(), doc.end(), w)) /
                          static_cast<double>(doc.size());
        std::size_t df = 0;
        for (const auto& d : docs)
            if (std::find(d.begin(), d.end(), w) != d.end()) ++df;
        const double idf = std::log((1.0 + docs.size()) / (1.0 + df)) + 1.0;
        const double score = tf * idf;
        if (!best || score > best->score + 1e-12) best = OracleKeyword{w, i, score};
    }
    return best;
}

inline std::string join_words(const ToyDoc& doc) {
    std::string s;
    for (const auto& w : doc) {
        if (!s.empty()) s += ' ';
        s += w;
    }
    return s;
}

// ---- embedding oracle -------------------------------------------------------

inline bool plural_variant(const std::string& a, const std::string& b) {
    return (a.size() == b.size() + 1 && a.back() == 's' && a.compare(0, b.size(), b) == 0) ||
           (b.size() == a.size() + 1 && b.back() == 's' && b.compare(0, a.size(), a) == 0);
}

inline std::optional<Neighbor> oracle_nearest(const EmbeddingStore& store, const std::string& query) {
    const auto q = *store.index_of(query);
    auto norm = [](std::span<const float> v) {
        long double s = 0;
        for (float x : v) s += static_cast<long double>(x) * x;
        return std::sqrt(s);
    };
    const auto qv = store.vector(q);
    const long double qn = norm(qv);
    if (qn == 0) return std::nullopt;
    std::optional<Neighbor> best;
    long double best_sim = -2;
    for (std::size_t i = 0; i < store.size(); ++i) {
        const auto& w = store.word(i);
        if (i == q || store.pos(i) != store.pos(q) || plural_variant(w, query)) continue;
        const auto v = store.vector(i);
        const long double vn = norm(v);
        if (vn == 0) continue;
        long double dot = 0;
        for (std::size_t k = 0; k < v.size(); ++k) dot += static_cast<long double>(qv[k]) * v[k];
        const long double sim = dot / (qn * vn);
        if (!best || sim > best_sim || (sim == best_sim && w < best->word)) {
            best = Neighbor{w, static_cast<double>(sim)};
            best_sim = sim;
        }
    }
    return best;
}

inline std::string random_word(std::mt19937_64& rng, std::size_t min_len, std::size_t max_len) {
    std::uniform_int_distribution<std::size_t> len(min_len, max_len);
    std::uniform_int_distribution<int> letter('a', 'z');
    std::string w(len(rng), 'a');
    for (auto& c : w) c = static_cast<char>(letter(rng));
    return w;
}

// Random store with a few exact duplicate vectors (tie cases) and plural pairs.
inline EmbeddingStore random_store(std::mt19937_64& rng, std::size_t words, std::size_t dim) {
    EmbeddingStore store(dim);
    std::normal_distribution<float> g(0.0f, 1.0f);
    std::uniform_int_distribution<int> pos_dist(0, 3);
    std::vector<float> prev(dim);
    while (store.size() < words) {
        std::string w = random_word(rng, 3, 9);
        std::vector<float> v(dim);
        const auto roll = rng() % 20;
        if (roll == 0 && store.size() > 0)
            v = prev;  // exact tie with the previous word
        else
            for (auto& x : v) x = g(rng);
        const auto pos = static_cast<CoarsePos>(pos_dist(rng));
        if (!store.add(w, v, pos)) continue;
        if (roll == 1 && store.size() < words) {
            auto near = v;
            near[0] += 1e-3f;
            store.add(w + "s", near, pos);  // plural variant, must never be returned
        }
        prev = v;
    }
    return store;
}

// ---- transports --------------------------------------------------------------

// Answers every template for any statement with deterministic text.
inline TransportResponse echo_style_response(const TransportRequest& r) {
    switch (r.template_name) {
        case TemplateName::NqaGenerate:
            return {200, "Question: How many items does \"" + r.statement +
                             "\" mention?\nChoices: 1. 1\n2. 2\n3. 3\nCorrect Answer: 2."};
        case TemplateName::SpEntail: return {200, "In other words, " + r.statement};
        case TemplateName::SpContradict: return {200, "It is false that " + r.statement};
    }
    return {500, ""};
}

}  // namespace ctnli::testing

namespace ctnli::testing {

// ---- NQA responses -------------------------------------------------------------

struct NqaSample {
    std::string text;
    std::string question;
    std::array<std::string, 3> choices;
    std::size_t correct = 0;
};

// Template-conformant completions with some harmless surface variety
// (label case, choice numbering style, answer by text or by number).
inline NqaSample conformant_nqa(std::mt19937_64& rng, int i) {
    NqaSample s;
    const int base = 10 + static_cast<int>(rng() % 90);
    s.question = "How many patients in cohort " + std::to_string(i) + " had a response?";
    s.choices = {std::to_string(base), std::to_string(base + 7), std::to_string(base * 3)};
    if (i % 4 == 3) s.choices = {"Less than half", "About half", "More than half"};
    s.correct = static_cast<std::size_t>(rng() % 3);

    const char* styles[] = {". ", ") ", ": "};
    const char* style = styles[i % 3];
    std::string answer = s.choices[s.correct];
    if (i % 5 == 1) answer = std::to_string(s.correct + 1);
    if (i % 5 == 2) answer = "Choice " + std::to_string(s.correct + 1);
    std::string q_label = i % 6 == 4 ? "**Question:**" : "Question:";
    std::string a_label = i % 7 == 5 ? "correct answer:" : "Correct Answer:";

    s.text = q_label + " " + s.question + "\nChoices: 1" + style + s.choices[0] + "\n2" + style +
             s.choices[1] + "\n3" + style + s.choices[2] + "\n" + (i % 2 ? "\n" : "") + a_label +
             " " + answer + (i % 3 == 0 ? "." : "");
    return s;
}

// One random mutation of a template-conformant response.
inline std::string mutate_nqa(std::mt19937_64& rng, const std::string& text) {
    std::vector<std::string> lines;
    {
        std::size_t pos = 0;
        while (true) {
            const auto nl = text.find('\n', pos);
            lines.push_back(text.substr(pos, nl == std::string::npos ? std::string::npos : nl - pos));
            if (nl == std::string::npos) break;
            pos = nl + 1;
        }
    }
    auto join = [&] {
        std::string out;
        for (std::size_t i = 0; i < lines.size(); ++i) out += (i ? "\n" : "") + lines[i];
        return out;
    };
    auto any = [&](std::size_t n) { return static_cast<std::size_t>(rng() % std::max<std::size_t>(n, 1)); };
    std::string s = text;
    switch (rng() % 14) {
        case 0: if (!lines.empty()) lines.erase(lines.begin() + static_cast<long>(any(lines.size()))); return join();
        case 1: { auto l = lines[any(lines.size())]; lines.insert(lines.begin() + static_cast<long>(any(lines.size())), l); return join(); }
        case 2: std::swap(lines[any(lines.size())], lines[any(lines.size())]); return join();
        case 3: if (!s.empty()) s.erase(any(s.size()), 1 + any(8)); return s;
        case 4: s.insert(any(s.size() + 1), 1, static_cast<char>(rng() % 256)); return s;
        case 5: return s.substr(0, any(s.size()));
        case 6: for (auto& c : s) if (c >= '1' && c <= '3' && rng() % 2) c = static_cast<char>('0' + rng() % 10); return s;
        case 7: { auto& l = lines[any(lines.size())]; l = l.substr(l.find(':') == std::string::npos ? 0 : l.find(':') + 1); return join(); }
        case 8: { std::string junk; for (std::size_t k = any(60); k > 0; --k) junk += static_cast<char>(rng() % 256); return junk; }
        case 9: return "";
        case 10: for (auto& l : lines) l = "\t*" + l + "*\r"; return join();
        case 11: lines.push_back("4. an extra choice"); return join();
        case 12: { std::string big; for (int k = 0; k < 20; ++k) big += text + "\n"; return big; }
        default: lines[any(lines.size())] = "Correct Answer: none of the above"; return join();
    }
}

}  // namespace ctnli::testing

namespace ctnli::testing {

// Control set with P = 0.9 and R = 0.75 (TP 9, FP 1, FN 3, TN 2), four
// preserving pairs of which three agree, and two altering pairs with correct
// base predictions of which one flips.
inline RandomFixture table3_fixture() {
    constexpr auto E = Label::Entailment, C = Label::Contradiction;
    std::vector<std::pair<std::string, std::pair<Label, Label>>> rows;  // uuid, gold, pred
    for (int i = 0; i < 12; ++i) rows.push_back({"e" + std::to_string(i), {E, i < 9 ? E : C}});
    rows.push_back({"c0", {C, C}});
    rows.push_back({"c1", {C, C}});
    rows.push_back({"c2", {C, E}});
    for (int i = 0; i < 4; ++i) rows.push_back({"pp" + std::to_string(i), {E, i < 3 ? E : C}});
    rows.push_back({"pa0", {C, C}});
    rows.push_back({"pa1", {E, C}});

    RandomFixture f;
    std::vector<NliInstance> inst;
    for (const auto& [uuid, gp] : rows) {
        NliInstance n;
        n.uuid = uuid;
        n.statement = "Statement " + uuid + ".";
        n.label = gp.first;
        n.primary_trial_id = "NCT1";
        inst.push_back(n);
        f.preds[uuid] = gp.second;
    }
    f.corpus = Corpus({ClinicalTrialRecord{"NCT1", {{Section::Results, {"Result line."}}}}}, inst);
    for (int i = 0; i < 4; ++i)
        f.pairs.push_back({"pp" + std::to_string(i), "e" + std::to_string(i), Intervention::Preserving});
    f.pairs.push_back({"pa0", "e4", Intervention::Altering});
    f.pairs.push_back({"pa1", "c0", Intervention::Altering});
    return f;
}

// Writes trials/, statements.json, manifest.json and predictions.json.
inline void write_fixture(const fs::path& dir, const RandomFixture& f) {
    save_corpus(f.corpus, dir / "trials", dir / "statements.json");
    save_contrast_manifest(f.pairs, dir / "manifest.json");
    save_predictions(f.preds, dir / "predictions.json");
}

}  // namespace ctnli::testing
