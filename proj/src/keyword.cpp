#include "ctnli/keyword.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <stdexcept>

#include "bundled_resources.hpp"
#include "json_io.hpp"

namespace ctnli {

const StopWords& StopWords::bundled() {
    static const StopWords words = from_text(resources::kStopWords);
    return words;
}

StopWords StopWords::from_text(std::string_view text) {
    std::unordered_set<std::string> words;
    std::size_t pos = 0;
    while (pos <= text.size()) {
        auto nl = text.find('\n', pos);
        if (nl == std::string_view::npos) nl = text.size();
        auto line = text.substr(pos, nl - pos);
        if (auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
        auto word = detail::to_lower(detail::trim(line));
        if (!word.empty()) words.insert(std::move(word));
        pos = nl + 1;
    }
    return StopWords(std::move(words));
}

StopWords StopWords::from_file(const std::filesystem::path& path) {
    return from_text(detail::read_text_file(path));
}

namespace {

bool is_token_char(char c) {
    auto u = static_cast<unsigned char>(c);
    return u >= 0x80 || std::isalnum(u);
}

bool has_alpha(std::string_view s) {
    return std::any_of(s.begin(), s.end(), [](char c) {
        auto u = static_cast<unsigned char>(c);
        return u >= 0x80 || std::isalpha(u);
    });
}

}  // namespace

TokenizedStatement tokenize(std::string_view statement, const StopWords& stop_words,
                            std::string uuid) {
    if (detail::trim(statement).empty()) throw std::invalid_argument("empty statement");
    TokenizedStatement out;
    out.uuid = std::move(uuid);
    std::size_t i = 0;
    while (i < statement.size()) {
        if (!is_token_char(statement[i])) {
            ++i;
            continue;
        }
        std::size_t j = i;
        while (j < statement.size() && is_token_char(statement[j])) ++j;
        Token tok;
        tok.surface = std::string(statement.substr(i, j - i));
        tok.normalized = detail::to_lower(tok.surface);
        tok.span = {i, j};
        if (has_alpha(tok.normalized) && !stop_words.contains(tok.normalized))
            out.content_indices.push_back(out.tokens.size());
        out.tokens.push_back(std::move(tok));
        i = j;
    }
    return out;
}

TfidfModel::TfidfModel(std::size_t document_count,
                       std::unordered_map<std::string, std::size_t> df)
    : document_count_(document_count), df_(std::move(df)) {
    if (document_count_ == 0) throw std::invalid_argument("TF-IDF model needs documents");
    for (const auto& [word, count] : df_)
        if (count == 0 || count > document_count_)
            throw std::invalid_argument("document frequency out of range for " + word);
}

std::size_t TfidfModel::document_frequency(std::string_view normalized) const {
    auto it = df_.find(std::string(normalized));
    return it == df_.end() ? 0 : it->second;
}

double TfidfModel::idf(std::string_view normalized) const {
    const double n = static_cast<double>(document_count_);
    const double df = static_cast<double>(document_frequency(normalized));
    return std::log((1.0 + n) / (1.0 + df)) + 1.0;
}

TfidfModel fit_tfidf(std::span<const TokenizedStatement> statements) {
    if (statements.empty()) throw std::invalid_argument("cannot fit TF-IDF on no statements");
    std::unordered_map<std::string, std::size_t> df;
    for (const auto& st : statements) {
        std::unordered_set<std::string_view> seen;
        for (auto idx : st.content_indices) {
            const auto& word = st.tokens[idx].normalized;
            if (seen.insert(word).second) ++df[word];
        }
    }
    return TfidfModel(statements.size(), std::move(df));
}

double tfidf_score(const TokenizedStatement& statement, const TfidfModel& model,
                   std::size_t token_index) {
    const auto& word = statement.tokens.at(token_index).normalized;
    std::size_t count = 0;
    for (auto idx : statement.content_indices)
        if (statement.tokens[idx].normalized == word) ++count;
    const double tf =
        static_cast<double>(count) / static_cast<double>(statement.content_indices.size());
    return tf * model.idf(word);
}

std::vector<KeywordChoice> rank_keywords(const TokenizedStatement& statement,
                                         const TfidfModel& model) {
    std::vector<KeywordChoice> ranked;
    std::unordered_set<std::string_view> seen;
    for (auto idx : statement.content_indices) {
        const auto& word = statement.tokens[idx].normalized;
        if (!seen.insert(word).second) continue;
        ranked.push_back({word, idx, tfidf_score(statement, model, idx)});
    }
    std::stable_sort(ranked.begin(), ranked.end(),
                     [](const KeywordChoice& a, const KeywordChoice& b) { return a.score > b.score; });
    return ranked;
}

std::optional<KeywordChoice> select_keyword(const TokenizedStatement& statement,
                                            const TfidfModel& model) {
    auto ranked = rank_keywords(statement, model);
    if (ranked.empty()) return std::nullopt;
    return ranked.front();
}

}  // namespace ctnli
