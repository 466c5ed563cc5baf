#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace contrastscore::baselines {

/// Lowercased words; Unicode whitespace separates, punctuation becomes its own token.
std::vector<std::string> tokenize(std::string_view text);

/// Unicode code points of `text` (invalid UTF-8 bytes pass through as single units).
std::vector<char32_t> code_points(std::string_view text);

struct NGramStats {
    int order = 1;
    long matched = 0;
    long total = 0;
};

struct BaselineResult {
    double score = 0.0;
    bool empty_hypothesis = false; // score forced to 0
};

/// Clipped n-gram statistics of `hyp` against the per-n-gram max count over `refs`.
std::vector<NGramStats> ngram_stats(const std::vector<std::string> &hyp,
                                    const std::vector<std::vector<std::string>> &refs, int max_order);

/// Sentence BLEU. Orders longer than the hypothesis are skipped; a zero precision at
/// order >= 2 becomes 1e-9 / total; no unigram overlap scores 0. Throws EmptyReference
/// when no reference has any token.
BaselineResult bleu(std::string_view hypothesis, const std::vector<std::string> &references, int max_order = 4);

/// Character n-gram F-beta (whitespace removed, case kept), max over references.
BaselineResult chrf(std::string_view hypothesis, const std::vector<std::string> &references, int char_order = 6,
                    double beta = 2.0);

enum class RougeVariant { r1, r2, rl };

/// ROUGE-N F1 or LCS-based F1, max over references.
BaselineResult rouge(std::string_view hypothesis, const std::vector<std::string> &references, RougeVariant variant);

/// Length of the longest common subsequence.
std::size_t lcs_length(const std::vector<std::string> &a, const std::vector<std::string> &b);

} // namespace contrastscore::baselines
