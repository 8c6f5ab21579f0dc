#include "ctnli/embed.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include "bundled_resources.hpp"
#include "ctnli/error.hpp"
#include "ctnli/log.hpp"
#include "json_io.hpp"

namespace ctnli {

std::string_view pos_name(CoarsePos pos) {
    switch (pos) {
        case CoarsePos::Noun: return "Noun";
        case CoarsePos::Verb: return "Verb";
        case CoarsePos::Adj: return "Adj";
        case CoarsePos::Adv: return "Adv";
        case CoarsePos::Other: return "Other";
    }
    return "Other";
}

std::optional<CoarsePos> parse_pos(std::string_view name) {
    const auto lower = detail::to_lower(detail::trim(name));
    if (lower == "noun") return CoarsePos::Noun;
    if (lower == "verb") return CoarsePos::Verb;
    if (lower == "adj") return CoarsePos::Adj;
    if (lower == "adv") return CoarsePos::Adv;
    if (lower == "other") return CoarsePos::Other;
    return std::nullopt;
}

const PosLexicon& PosLexicon::bundled() {
    static const PosLexicon lexicon = from_text(resources::kPosLexicon);
    return lexicon;
}

PosLexicon PosLexicon::from_text(std::string_view text) {
    std::unordered_map<std::string, CoarsePos> entries;
    std::size_t pos = 0;
    std::size_t line_no = 0;
    while (pos < text.size()) {
        auto nl = text.find('\n', pos);
        if (nl == std::string_view::npos) nl = text.size();
        auto line = text.substr(pos, nl - pos);
        pos = nl + 1;
        ++line_no;
        if (detail::trim(line).empty() || detail::trim(line).front() == '#') continue;
        auto tab = line.find('\t');
        if (tab == std::string_view::npos)
            throw InputError("POS lexicon line " + std::to_string(line_no) + ": expected word<TAB>tag");
        auto word = detail::to_lower(detail::trim(line.substr(0, tab)));
        auto tag = parse_pos(line.substr(tab + 1));
        if (word.empty() || !tag)
            throw InputError("POS lexicon line " + std::to_string(line_no) + ": bad entry");
        entries.emplace(std::move(word), *tag);
    }
    return PosLexicon(std::move(entries));
}

PosLexicon PosLexicon::from_file(const std::filesystem::path& path) {
    return from_text(detail::read_text_file(path));
}

std::optional<CoarsePos> PosLexicon::lookup(std::string_view word) const {
    auto it = entries_.find(detail::to_lower(word));
    if (it == entries_.end()) return std::nullopt;
    return it->second;
}

CoarsePos tag_pos(std::string_view word, const PosLexicon& lexicon) {
    if (auto hit = lexicon.lookup(word)) return *hit;
    const auto w = detail::to_lower(word);
    auto ends = [&](std::string_view suffix) {
        return w.size() > suffix.size() && w.ends_with(suffix);
    };
    if (ends("ly")) return CoarsePos::Adv;
    for (auto s : {"ous", "al", "ive", "ic"})
        if (ends(s)) return CoarsePos::Adj;
    for (auto s : {"ize", "ate"})
        if (ends(s)) return CoarsePos::Verb;
    return CoarsePos::Noun;
}

namespace {

template <typename T>
double cosine_impl(std::span<const T> u, std::span<const T> v) {
    if (u.size() != v.size()) throw std::invalid_argument("cosine_similarity: dimension mismatch");
    double dot = 0.0, uu = 0.0, vv = 0.0;
    for (std::size_t i = 0; i < u.size(); ++i) {
        const double a = u[i], b = v[i];
        dot += a * b;
        uu += a * a;
        vv += b * b;
    }
    if (uu == 0.0 || vv == 0.0) throw std::invalid_argument("cosine_similarity: zero vector");
    return std::clamp(dot / (std::sqrt(uu) * std::sqrt(vv)), -1.0, 1.0);
}

bool is_zero(std::span<const float> v) {
    for (float x : v)
        if (x != 0.0f) return false;
    return true;
}

// The query, and its bare plural or singular form.
bool excluded(std::string_view candidate, std::string_view query) {
    if (candidate == query) return true;
    if (candidate.size() == query.size() + 1 && candidate.back() == 's' &&
        candidate.starts_with(query))
        return true;
    if (query.size() == candidate.size() + 1 && query.back() == 's' && query.starts_with(candidate))
        return true;
    return false;
}

bool better(const Neighbor& cand, const std::optional<Neighbor>& best) {
    if (!best) return true;
    if (cand.similarity != best->similarity) return cand.similarity > best->similarity;
    return cand.word < best->word;
}

}  // namespace

double cosine_similarity(std::span<const float> u, std::span<const float> v) {
    return cosine_impl(u, v);
}

double cosine_similarity(std::span<const double> u, std::span<const double> v) {
    return cosine_impl(u, v);
}

EmbeddingStore::EmbeddingStore(std::size_t dimension) : dimension_(dimension) {
    if (dimension_ == 0) throw std::invalid_argument("embedding dimension must be positive");
}

bool EmbeddingStore::add(std::string_view word, std::span<const float> vector, CoarsePos pos) {
    if (vector.size() != dimension_)
        throw std::invalid_argument("vector for '" + std::string(word) + "' has " +
                                    std::to_string(vector.size()) + " components, expected " +
                                    std::to_string(dimension_));
    for (float x : vector)
        if (!std::isfinite(x))
            throw std::invalid_argument("non-finite component in vector for '" + std::string(word) + "'");
    auto key = detail::to_lower(word);
    if (key.empty()) throw std::invalid_argument("empty embedding word");
    if (index_.contains(key)) return false;
    index_.emplace(key, words_.size());
    words_.push_back(std::move(key));
    pos_.push_back(pos);
    data_.insert(data_.end(), vector.begin(), vector.end());
    return true;
}

std::optional<std::size_t> EmbeddingStore::index_of(std::string_view word) const {
    auto it = index_.find(detail::to_lower(word));
    if (it == index_.end()) return std::nullopt;
    return it->second;
}

EmbeddingStore load_embeddings(const std::filesystem::path& path, const PosLexicon& lexicon) {
    std::ifstream in(path);
    if (!in) throw InputError("cannot open embeddings " + path.string());
    auto fail = [&](std::size_t line_no, const std::string& msg) {
        return InputError(path.string() + ":" + std::to_string(line_no) + ": " + msg);
    };

    std::string line;
    if (!std::getline(in, line)) throw fail(1, "missing header");
    std::size_t count = 0, dim = 0;
    {
        std::istringstream header(line);
        std::string extra;
        if (!(header >> count >> dim) || (header >> extra) || dim == 0)
            throw fail(1, "header must be \"count dimension\"");
    }

    EmbeddingStore store(dim);
    std::vector<float> vec(dim);
    std::size_t line_no = 1, rows = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (detail::trim(line).empty()) continue;
        ++rows;
        if (rows > count) throw fail(line_no, "more rows than the header count " + std::to_string(count));

        const char* p = line.data();
        const char* end = line.data() + line.size();
        while (p < end && *p == ' ') ++p;
        const char* word_begin = p;
        while (p < end && *p != ' ' && *p != '\t') ++p;
        std::string_view word(word_begin, static_cast<std::size_t>(p - word_begin));

        std::size_t n = 0;
        while (true) {
            while (p < end && (*p == ' ' || *p == '\t')) ++p;
            if (p == end) break;
            if (n == dim) throw fail(line_no, "more than " + std::to_string(dim) + " components");
            float x = 0.0f;
            auto [next, ec] = std::from_chars(p, end, x);
            if (ec != std::errc() || (next < end && *next != ' ' && *next != '\t'))
                throw fail(line_no, "malformed float");
            if (!std::isfinite(x)) throw fail(line_no, "non-finite component");
            vec[n++] = x;
            p = next;
        }
        if (n != dim)
            throw fail(line_no, "expected " + std::to_string(dim) + " components, found " +
                                    std::to_string(n));
        if (!store.add(word, vec, tag_pos(word, lexicon)))
            log::warn("duplicate-embedding-word",
                      {{"word", detail::to_lower(word)}, {"line", std::to_string(line_no)}});
    }
    if (rows != count)
        throw fail(line_no, "header declares " + std::to_string(count) + " rows, found " +
                                std::to_string(rows));
    return store;
}

std::optional<Neighbor> nearest_same_pos(const EmbeddingStore& store, std::string_view query_word,
                                         const NeighborQuery& options) {
    auto q = store.index_of(query_word);
    if (!q) throw OutOfVocabulary(detail::to_lower(query_word));
    const auto query_vec = store.vector(*q);
    if (is_zero(query_vec)) return std::nullopt;
    const auto& query = store.word(*q);
    const auto query_pos = store.pos(*q);

    std::optional<Neighbor> best;
    for (std::size_t i = 0; i < store.size(); ++i) {
        if (store.pos(i) != query_pos) continue;
        const auto& w = store.word(i);
        if (excluded(w, query)) continue;
        if (options.allow_list && !options.allow_list->contains(w)) continue;
        const auto v = store.vector(i);
        if (is_zero(v)) continue;
        Neighbor cand{w, cosine_similarity(query_vec, v)};
        if (better(cand, best)) best = std::move(cand);
    }
    return best;
}

NormalizedIndex::NormalizedIndex(const EmbeddingStore& store)
    : store_(&store), unit_(store.size() * store.dimension(), 0.0) {
    const auto dim = store.dimension();
    for (std::size_t i = 0; i < store.size(); ++i) {
        const auto v = store.vector(i);
        double norm = 0.0;
        for (float x : v) norm += static_cast<double>(x) * x;
        norm = std::sqrt(norm);
        if (norm == 0.0) continue;
        for (std::size_t k = 0; k < dim; ++k) unit_[i * dim + k] = v[k] / norm;
    }
}

std::optional<Neighbor> NormalizedIndex::nearest_same_pos(std::string_view query_word,
                                                          const NeighborQuery& options) const {
    const auto& store = *store_;
    auto q = store.index_of(query_word);
    if (!q) throw OutOfVocabulary(detail::to_lower(query_word));
    const auto dim = store.dimension();
    const double* qv = unit_.data() + *q * dim;
    if (is_zero(store.vector(*q))) return std::nullopt;
    const auto& query = store.word(*q);
    const auto query_pos = store.pos(*q);

    std::optional<Neighbor> best;
    for (std::size_t i = 0; i < store.size(); ++i) {
        if (store.pos(i) != query_pos) continue;
        const auto& w = store.word(i);
        if (excluded(w, query)) continue;
        if (options.allow_list && !options.allow_list->contains(w)) continue;
        if (is_zero(store.vector(i))) continue;
        const double* cv = unit_.data() + i * dim;
        double dot = 0.0;
        for (std::size_t k = 0; k < dim; ++k) dot += qv[k] * cv[k];
        Neighbor cand{w, std::clamp(dot, -1.0, 1.0)};
        if (better(cand, best)) best = std::move(cand);
    }
    return best;
}

}  // namespace ctnli
