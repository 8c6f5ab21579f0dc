#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <vector>

namespace ctnli {

class StopWords {
public:
    // The bundled English list (179 entries).
    static const StopWords& bundled();

    // Plain text, one token per line; '#' starts a comment.
    static StopWords from_file(const std::filesystem::path& path);
    static StopWords from_text(std::string_view text);

    explicit StopWords(std::unordered_set<std::string> words) : words_(std::move(words)) {}

    bool contains(std::string_view normalized) const {
        return words_.contains(std::string(normalized));
    }
    std::size_t size() const { return words_.size(); }

private:
    std::unordered_set<std::string> words_;
};

struct CharSpan {
    std::size_t begin = 0;
    std::size_t end = 0;  // exclusive

    bool operator==(const CharSpan&) const = default;
};

struct Token {
    std::string surface;
    std::string normalized;
    CharSpan span;
};

struct TokenizedStatement {
    std::string uuid;
    std::vector<Token> tokens;
    std::vector<std::size_t> content_indices;
};

// Splits on maximal runs of non-alphanumeric ASCII characters (bytes >= 0x80
// are kept inside tokens). Throws std::invalid_argument on blank input.
TokenizedStatement tokenize(std::string_view statement,
                            const StopWords& stop_words = StopWords::bundled(),
                            std::string uuid = {});

class TfidfModel {
public:
    TfidfModel(std::size_t document_count, std::unordered_map<std::string, std::size_t> df);

    std::size_t document_count() const { return document_count_; }
    std::size_t document_frequency(std::string_view normalized) const;
    const std::unordered_map<std::string, std::size_t>& vocabulary() const { return df_; }

    // ln((1 + N) / (1 + df)) + 1
    double idf(std::string_view normalized) const;

private:
    std::size_t document_count_;
    std::unordered_map<std::string, std::size_t> df_;
};

// Document frequency counts statements, not occurrences.
TfidfModel fit_tfidf(std::span<const TokenizedStatement> statements);

struct KeywordChoice {
    std::string token;   // normalized form
    std::size_t index;   // position in TokenizedStatement::tokens
    double score;

    bool operator==(const KeywordChoice&) const = default;
};

// Content-token TF-IDF score, with TF normalized by the content-token count.
double tfidf_score(const TokenizedStatement& statement, const TfidfModel& model,
                   std::size_t token_index);

// Distinct content words ordered by descending score; ties go to the word
// that occurs first. Each entry carries the word's first occurrence.
std::vector<KeywordChoice> rank_keywords(const TokenizedStatement& statement,
                                         const TfidfModel& model);

std::optional<KeywordChoice> select_keyword(const TokenizedStatement& statement,
                                            const TfidfModel& model);

}  // namespace ctnli
