#include "contrastscore/baselines.hpp"
#include "contrastscore/error.hpp"

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <random>

using namespace contrastscore;
using namespace contrastscore::baselines;

namespace {

using Words = std::vector<std::string>;

// Counts n-grams by materialising each window as a vector key.
std::map<Words, long> windows(const Words &w, std::size_t n) {
    std::map<Words, long> out;
    for (std::size_t i = 0; i + n <= w.size(); ++i) ++out[Words(w.begin() + i, w.begin() + i + n)];
    return out;
}

double oracle_bleu(const Words &hyp, const std::vector<Words> &refs) {
    long double log_sum = 0;
    int orders = 0;
    for (std::size_t n = 1; n <= 4; ++n) {
        const auto h = windows(hyp, n);
        long matched = 0, totals = 0;
        for (const auto &[g, c] : h) {
            long best = 0;
            for (const auto &r : refs) {
                const auto rc = windows(r, n);
                const auto it = rc.find(g);
                if (it != rc.end()) best = std::max(best, it->second);
            }
            matched += std::min(c, best);
            totals += c;
        }
        if (totals == 0) continue;
        if (n == 1 && matched == 0) return 0.0;
        log_sum += std::log(matched ? static_cast<long double>(matched) / totals : 1e-9L / totals);
        ++orders;
    }
    std::size_t r = refs[0].size();
    for (const auto &ref : refs) {
        const auto d = [&](std::size_t len) { return len > hyp.size() ? len - hyp.size() : hyp.size() - len; };
        if (d(ref.size()) < d(r) || (d(ref.size()) == d(r) && ref.size() < r)) r = ref.size();
    }
    const long double bp = hyp.size() > r ? 1.0L : std::exp(1.0L - static_cast<long double>(r) / hyp.size());
    return static_cast<double>(bp * std::exp(log_sum / orders));
}

// LCS by exhaustive recursion (inputs kept short).
std::size_t oracle_lcs(const Words &a, std::size_t i, const Words &b, std::size_t j) {
    if (i == a.size() || j == b.size()) return 0;
    if (a[i] == b[j]) return 1 + oracle_lcs(a, i + 1, b, j + 1);
    return std::max(oracle_lcs(a, i + 1, b, j), oracle_lcs(a, i, b, j + 1));
}

std::string join(const Words &w) {
    std::string s;
    for (const auto &t : w) s += (s.empty() ? "" : " ") + t;
    return s;
}

Words random_words(std::mt19937_64 &rng, std::size_t n) {
    static const Words vocab{"a", "b", "c", "d", "e", "f"};
    std::uniform_int_distribution<std::size_t> pick(0, vocab.size() - 1);
    Words w;
    for (std::size_t i = 0; i < n; ++i) w.push_back(vocab[pick(rng)]);
    return w;
}

} // namespace

TEST_CASE("tokenizer lowercases and splits punctuation") {
    CHECK(tokenize("Hello, World!") == Words{"hello", ",", "world", "!"});
    CHECK(tokenize("  Straße ÄBC  ") == Words{"straße", "äbc"});
    CHECK(tokenize("Привет мир") == Words{"привет", "мир"});
    CHECK(tokenize("anti-feiting") == Words{"anti", "-", "feiting"});
    CHECK(tokenize("").empty());
}

TEST_CASE("code points decode UTF-8 and pass invalid bytes through") {
    CHECK(code_points("a\xC3\xA9") == std::vector<char32_t>{U'a', 0xE9});
    CHECK(code_points("\xE4\xBA\xA7") == std::vector<char32_t>{0x4EA7});
    CHECK(code_points("\xFF") == std::vector<char32_t>{0xFF});
}

TEST_CASE("bleu matches n-gram enumeration on random sentences") {
    std::mt19937_64 rng(13);
    std::uniform_int_distribution<std::size_t> len(1, 12);
    for (int trial = 0; trial < 300; ++trial) {
        const auto hyp = random_words(rng, len(rng));
        std::vector<Words> refs{random_words(rng, len(rng)), random_words(rng, len(rng))};
        const auto got = bleu(join(hyp), {join(refs[0]), join(refs[1])});
        CHECK(got.score == doctest::Approx(oracle_bleu(hyp, refs)).epsilon(1e-12));
    }
}

TEST_CASE("bleu edge cases") {
    CHECK(bleu("the cat sat on the mat", {"the cat sat on the mat"}).score == doctest::Approx(1.0));
    CHECK(bleu("dog", {"the cat"}).score == 0.0);
    const auto empty = bleu("", {"a b"});
    CHECK(empty.empty_hypothesis);
    CHECK(empty.score == 0.0);
    CHECK_THROWS_AS(bleu("a", {"", "   "}), Error);
    // one-word hypothesis uses unigram precision only, times the brevity penalty
    CHECK(bleu("cat", {"the cat"}).score == doctest::Approx(std::exp(1.0 - 2.0)));
}

TEST_CASE("ngram statistics clip by the best reference count") {
    const auto s = ngram_stats({"the", "the", "the"}, {{"the", "cat"}, {"the", "the", "dog"}}, 2);
    CHECK(s[0].matched == 2);
    CHECK(s[0].total == 3);
    CHECK(s[1].matched == 1);
    CHECK(s[1].total == 2);
}

TEST_CASE("chrf on a hand-worked pair") {
    // hyp "ab", ref "abc" with char order 2:
    // n=1: overlap 2, P=2/2, R=2/3; n=2: overlap 1, P=1/1, R=1/2
    const double p = 1.0, r = (2.0 / 3.0 + 0.5) / 2.0;
    const double want = 5.0 * p * r / (4.0 * p + r);
    CHECK(chrf("a b", {"abc"}, 2).score == doctest::Approx(want).epsilon(1e-14));
    CHECK(chrf("same text", {"sametext"}).score == doctest::Approx(1.0));
    CHECK(chrf("Case", {"case"}).score < 1.0);
    CHECK(chrf("xyz", {"abc", "xyz"}).score == doctest::Approx(1.0));
    CHECK(chrf("", {"abc"}).empty_hypothesis);
    CHECK_THROWS_AS(chrf("abc", {" "}), Error);
}

TEST_CASE("rouge-L uses the longest common subsequence") {
    std::mt19937_64 rng(21);
    std::uniform_int_distribution<std::size_t> len(1, 9);
    for (int trial = 0; trial < 200; ++trial) {
        const auto a = random_words(rng, len(rng)), b = random_words(rng, len(rng));
        const auto l = oracle_lcs(a, 0, b, 0);
        CHECK(lcs_length(a, b) == l);
        const double want = l == 0 ? 0.0 : 2.0 * l / static_cast<double>(a.size() + b.size());
        CHECK(rouge(join(a), {join(b)}, RougeVariant::rl).score == doctest::Approx(want).epsilon(1e-14));
    }
}

TEST_CASE("rouge-1 and rouge-2 F1 by hand") {
    // hyp: the cat sat; ref: the cat ran away
    CHECK(rouge("the cat sat", {"the cat ran away"}, RougeVariant::r1).score ==
          doctest::Approx(2.0 * (2.0 / 3.0) * 0.5 / (2.0 / 3.0 + 0.5)));
    CHECK(rouge("the cat sat", {"the cat ran away"}, RougeVariant::r2).score ==
          doctest::Approx(2.0 * 0.5 * (1.0 / 3.0) / (0.5 + 1.0 / 3.0)));
    CHECK(rouge("x y", {"a b", "x y"}, RougeVariant::r2).score == doctest::Approx(1.0));
}
