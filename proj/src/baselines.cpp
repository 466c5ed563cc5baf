#include "contrastscore/baselines.hpp"

#include "contrastscore/error.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_map>

namespace contrastscore::baselines {

namespace {

bool is_space(char32_t c) {
    switch (c) {
    case U' ': case U'\t': case U'\n': case U'\v': case U'\f': case U'\r':
    case 0x85: case 0xA0: case 0x1680: case 0x2028: case 0x2029: case 0x202F: case 0x205F: case 0x3000:
        return true;
    default:
        return c >= 0x2000 && c <= 0x200A;
    }
}

bool is_punct(char32_t c) {
    if (c < 0x80) return (c >= 0x21 && c <= 0x2F) || (c >= 0x3A && c <= 0x40) || (c >= 0x5B && c <= 0x60) ||
                         (c >= 0x7B && c <= 0x7E);
    if (c == 0xA1 || c == 0xA7 || c == 0xAB || c == 0xB6 || c == 0xB7 || c == 0xBB || c == 0xBF) return true;
    if (c >= 0x2010 && c <= 0x2027) return true;
    if (c >= 0x2030 && c <= 0x205E) return true;
    if (c >= 0x3001 && c <= 0x303F) return true;
    return (c >= 0xFF01 && c <= 0xFF0F) || (c >= 0xFF1A && c <= 0xFF20) || (c >= 0xFF3B && c <= 0xFF40) ||
           (c >= 0xFF5B && c <= 0xFF65);
}

// Simple case folding for Latin, Latin-1, Greek and Cyrillic capitals.
char32_t to_lower(char32_t c) {
    if (c >= U'A' && c <= U'Z') return c + 0x20;
    if ((c >= 0xC0 && c <= 0xDE && c != 0xD7) || (c >= 0x391 && c <= 0x3A9 && c != 0x3A2) ||
        (c >= 0x410 && c <= 0x42F))
        return c + 0x20;
    if (c >= 0x400 && c <= 0x40F) return c + 0x50;
    return c;
}

void append_utf8(std::string &out, char32_t c) {
    if (c < 0x80) {
        out += static_cast<char>(c);
    } else if (c < 0x800) {
        out += static_cast<char>(0xC0 | (c >> 6));
        out += static_cast<char>(0x80 | (c & 0x3F));
    } else if (c < 0x10000) {
        out += static_cast<char>(0xE0 | (c >> 12));
        out += static_cast<char>(0x80 | ((c >> 6) & 0x3F));
        out += static_cast<char>(0x80 | (c & 0x3F));
    } else {
        out += static_cast<char>(0xF0 | (c >> 18));
        out += static_cast<char>(0x80 | ((c >> 12) & 0x3F));
        out += static_cast<char>(0x80 | ((c >> 6) & 0x3F));
        out += static_cast<char>(0x80 | (c & 0x3F));
    }
}

template <typename Seq> using CountMap = std::unordered_map<Seq, long>;

std::string join_ngram(const std::vector<std::string> &toks, std::size_t start, int n) {
    std::string key;
    for (int k = 0; k < n; ++k) {
        if (k) key += '\x1f';
        key += toks[start + static_cast<std::size_t>(k)];
    }
    return key;
}

CountMap<std::string> word_ngrams(const std::vector<std::string> &toks, int n) {
    CountMap<std::string> counts;
    if (toks.size() < static_cast<std::size_t>(n)) return counts;
    for (std::size_t i = 0; i + static_cast<std::size_t>(n) <= toks.size(); ++i) ++counts[join_ngram(toks, i, n)];
    return counts;
}

CountMap<std::u32string> char_ngrams(const std::u32string &chars, int n) {
    CountMap<std::u32string> counts;
    if (chars.size() < static_cast<std::size_t>(n)) return counts;
    for (std::size_t i = 0; i + static_cast<std::size_t>(n) <= chars.size(); ++i)
        ++counts[chars.substr(i, static_cast<std::size_t>(n))];
    return counts;
}

template <typename K> long overlap(const CountMap<K> &hyp, const CountMap<K> &ref) {
    long matched = 0;
    for (const auto &[g, c] : hyp) {
        const auto it = ref.find(g);
        if (it != ref.end()) matched += std::min(c, it->second);
    }
    return matched;
}

template <typename K> long total(const CountMap<K> &m) {
    long t = 0;
    for (const auto &[g, c] : m) t += c;
    return t;
}

std::vector<std::vector<std::string>> tokenize_refs(const std::vector<std::string> &references) {
    std::vector<std::vector<std::string>> refs;
    for (const auto &r : references) {
        auto toks = tokenize(r);
        if (!toks.empty()) refs.push_back(std::move(toks));
    }
    if (refs.empty()) throw Error(ErrorKind::EmptyReference, "no non-empty reference");
    return refs;
}

double f_score(double precision, double recall, double beta) {
    if (precision <= 0.0 && recall <= 0.0) return 0.0;
    const double b2 = beta * beta;
    return (1.0 + b2) * precision * recall / (b2 * precision + recall);
}

} // namespace

std::vector<char32_t> code_points(std::string_view text) {
    std::vector<char32_t> out;
    out.reserve(text.size());
    std::size_t i = 0;
    while (i < text.size()) {
        const auto b0 = static_cast<unsigned char>(text[i]);
        int len = 1;
        char32_t c = b0;
        if (b0 >= 0xF0 && b0 < 0xF8) {
            len = 4;
            c = b0 & 0x07;
        } else if (b0 >= 0xE0) {
            len = b0 < 0xF0 ? 3 : 1;
            c = b0 & 0x0F;
        } else if (b0 >= 0xC0) {
            len = 2;
            c = b0 & 0x1F;
        }
        if (len > 1 && i + static_cast<std::size_t>(len) <= text.size()) {
            bool valid = true;
            for (int k = 1; k < len; ++k) {
                const auto b = static_cast<unsigned char>(text[i + static_cast<std::size_t>(k)]);
                if ((b & 0xC0) != 0x80) valid = false;
                c = (c << 6) | (b & 0x3F);
            }
            if (valid) {
                out.push_back(c);
                i += static_cast<std::size_t>(len);
                continue;
            }
        }
        out.push_back(b0);
        ++i;
    }
    return out;
}

std::vector<std::string> tokenize(std::string_view text) {
    std::vector<std::string> tokens;
    std::string current;
    auto flush = [&] {
        if (!current.empty()) tokens.push_back(std::move(current));
        current.clear();
    };
    for (const char32_t c : code_points(text)) {
        if (is_space(c)) {
            flush();
        } else if (is_punct(c)) {
            flush();
            std::string p;
            append_utf8(p, c);
            tokens.push_back(std::move(p));
        } else {
            append_utf8(current, to_lower(c));
        }
    }
    flush();
    return tokens;
}

std::vector<NGramStats> ngram_stats(const std::vector<std::string> &hyp,
                                    const std::vector<std::vector<std::string>> &refs, int max_order) {
    std::vector<NGramStats> stats;
    for (int n = 1; n <= max_order; ++n) {
        const auto h = word_ngrams(hyp, n);
        CountMap<std::string> max_ref;
        for (const auto &r : refs)
            for (const auto &[g, c] : word_ngrams(r, n)) max_ref[g] = std::max(max_ref[g], c);
        stats.push_back({n, overlap(h, max_ref), total(h)});
    }
    return stats;
}

BaselineResult bleu(std::string_view hypothesis, const std::vector<std::string> &references, int max_order) {
    if (max_order < 1) throw Error(ErrorKind::Config, "max_order must be >= 1");
    const auto refs = tokenize_refs(references);
    const auto hyp = tokenize(hypothesis);
    if (hyp.empty()) return {0.0, true};

    const auto stats = ngram_stats(hyp, refs, max_order);
    if (stats.front().matched == 0) return {0.0, false};
    constexpr double eps = 1e-9;
    double log_sum = 0.0;
    int effective = 0;
    for (const auto &s : stats) {
        if (s.total == 0) continue;
        const double p = s.matched == 0 ? eps / static_cast<double>(s.total)
                                        : static_cast<double>(s.matched) / static_cast<double>(s.total);
        log_sum += std::log(p);
        ++effective;
    }
    // closest reference length, shorter one on ties
    const auto c = static_cast<long>(hyp.size());
    long r = static_cast<long>(refs.front().size());
    for (const auto &ref : refs) {
        const long len = static_cast<long>(ref.size());
        if (std::labs(len - c) < std::labs(r - c) || (std::labs(len - c) == std::labs(r - c) && len < r)) r = len;
    }
    const double bp = c > r ? 1.0 : std::exp(1.0 - static_cast<double>(r) / static_cast<double>(c));
    return {bp * std::exp(log_sum / effective), false};
}

BaselineResult chrf(std::string_view hypothesis, const std::vector<std::string> &references, int char_order,
                    double beta) {
    if (char_order < 1) throw Error(ErrorKind::Config, "char_order must be >= 1");
    auto strip = [](std::string_view s) {
        std::u32string out;
        for (const char32_t c : code_points(s))
            if (!is_space(c)) out += c;
        return out;
    };
    const auto hyp = strip(hypothesis);
    std::vector<std::u32string> refs;
    for (const auto &r : references) {
        auto s = strip(r);
        if (!s.empty()) refs.push_back(std::move(s));
    }
    if (refs.empty()) throw Error(ErrorKind::EmptyReference, "no non-empty reference");
    if (hyp.empty()) return {0.0, true};

    double best = 0.0;
    for (const auto &ref : refs) {
        double p_sum = 0.0, r_sum = 0.0;
        int effective = 0;
        for (int n = 1; n <= char_order; ++n) {
            const auto h = char_ngrams(hyp, n);
            const auto g = char_ngrams(ref, n);
            const long th = total(h), tr = total(g);
            if (th == 0 || tr == 0) continue;
            const long m = overlap(h, g);
            p_sum += static_cast<double>(m) / static_cast<double>(th);
            r_sum += static_cast<double>(m) / static_cast<double>(tr);
            ++effective;
        }
        if (effective == 0) continue;
        best = std::max(best, f_score(p_sum / effective, r_sum / effective, beta));
    }
    return {best, false};
}

std::size_t lcs_length(const std::vector<std::string> &a, const std::vector<std::string> &b) {
    std::vector<std::size_t> prev(b.size() + 1, 0), cur(b.size() + 1, 0);
    for (std::size_t i = 1; i <= a.size(); ++i) {
        for (std::size_t j = 1; j <= b.size(); ++j)
            cur[j] = a[i - 1] == b[j - 1] ? prev[j - 1] + 1 : std::max(prev[j], cur[j - 1]);
        std::swap(prev, cur);
    }
    return prev[b.size()];
}

BaselineResult rouge(std::string_view hypothesis, const std::vector<std::string> &references, RougeVariant variant) {
    const auto refs = tokenize_refs(references);
    const auto hyp = tokenize(hypothesis);
    if (hyp.empty()) return {0.0, true};

    double best = 0.0;
    for (const auto &ref : refs) {
        double matched = 0.0, hyp_total = 0.0, ref_total = 0.0;
        if (variant == RougeVariant::rl) {
            matched = static_cast<double>(lcs_length(hyp, ref));
            hyp_total = static_cast<double>(hyp.size());
            ref_total = static_cast<double>(ref.size());
        } else {
            const int n = variant == RougeVariant::r1 ? 1 : 2;
            const auto h = word_ngrams(hyp, n);
            const auto g = word_ngrams(ref, n);
            matched = static_cast<double>(overlap(h, g));
            hyp_total = static_cast<double>(total(h));
            ref_total = static_cast<double>(total(g));
        }
        if (hyp_total == 0.0 || ref_total == 0.0 || matched == 0.0) continue;
        best = std::max(best, f_score(matched / hyp_total, matched / ref_total, 1.0));
    }
    return {best, false};
}

} // namespace contrastscore::baselines
