#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <vector>

namespace ctnli {

enum class CoarsePos { Noun, Verb, Adj, Adv, Other };

std::string_view pos_name(CoarsePos pos);
std::optional<CoarsePos> parse_pos(std::string_view name);

class PosLexicon {
public:
    static const PosLexicon& bundled();

    // "word TAB tag" lines; '#' starts a comment line.
    static PosLexicon from_file(const std::filesystem::path& path);
    static PosLexicon from_text(std::string_view text);

    PosLexicon() = default;
    explicit PosLexicon(std::unordered_map<std::string, CoarsePos> entries)
        : entries_(std::move(entries)) {}

    std::optional<CoarsePos> lookup(std::string_view word) const;
    const std::unordered_map<std::string, CoarsePos>& entries() const { return entries_; }

private:
    std::unordered_map<std::string, CoarsePos> entries_;
};

// Lexicon first, then suffix rules, then Noun.
CoarsePos tag_pos(std::string_view word, const PosLexicon& lexicon = PosLexicon::bundled());

// Throws std::invalid_argument on mismatched dimensions or a zero vector.
double cosine_similarity(std::span<const float> u, std::span<const float> v);
double cosine_similarity(std::span<const double> u, std::span<const double> v);

// Raised when a query word is not in the store (distinct from "no candidate").
class OutOfVocabulary : public std::runtime_error {
public:
    explicit OutOfVocabulary(const std::string& word)
        : std::runtime_error("word not in embedding vocabulary: " + word), word_(word) {}
    const std::string& word() const { return word_; }

private:
    std::string word_;
};

struct Neighbor {
    std::string word;
    double similarity;

    bool operator==(const Neighbor&) const = default;
};

class EmbeddingStore {
public:
    explicit EmbeddingStore(std::size_t dimension);

    // Lowercases the word; returns false (and stores nothing) if it is
    // already present. Throws std::invalid_argument on bad arity or
    // non-finite components.
    bool add(std::string_view word, std::span<const float> vector, CoarsePos pos);

    std::size_t dimension() const { return dimension_; }
    std::size_t size() const { return words_.size(); }

    std::optional<std::size_t> index_of(std::string_view word) const;
    const std::string& word(std::size_t i) const { return words_[i]; }
    CoarsePos pos(std::size_t i) const { return pos_[i]; }
    std::span<const float> vector(std::size_t i) const {
        return {data_.data() + i * dimension_, dimension_};
    }

private:
    std::size_t dimension_;
    std::vector<std::string> words_;
    std::vector<CoarsePos> pos_;
    std::vector<float> data_;
    std::unordered_map<std::string, std::size_t> index_;
};

// Word-vector text format: "count dimension" header, then one word and
// `dimension` floats per line. Duplicate words keep their first entry.
EmbeddingStore load_embeddings(const std::filesystem::path& path,
                               const PosLexicon& lexicon = PosLexicon::bundled());

struct NeighborQuery {
    // When set, only these words are candidates.
    const std::unordered_set<std::string>* allow_list = nullptr;
};

// Most similar word sharing the query's POS tag, excluding the query and its
// bare-plural variant. Ties go to the lexicographically smallest word.
// Throws OutOfVocabulary if the query is absent.
std::optional<Neighbor> nearest_same_pos(const EmbeddingStore& store, std::string_view query_word,
                                         const NeighborQuery& options = {});

// Pre-normalized dot-product index over a store. Agrees with
// nearest_same_pos on inputs without near-ties.
class NormalizedIndex {
public:
    explicit NormalizedIndex(const EmbeddingStore& store);

    std::optional<Neighbor> nearest_same_pos(std::string_view query_word,
                                             const NeighborQuery& options = {}) const;

private:
    const EmbeddingStore* store_;
    std::vector<double> unit_;  // row-major, one unit vector per word
};

}  // namespace ctnli
