#pragma once

#include <algorithm>
#include <cctype>
#include <cmath>
#include <map>
#include <set>
#include <span>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <utility>
#include <vector>

#include "json.hpp"

#include "averify/corpus.hpp"

namespace averify {

/// Shipped English function-word list (version 1). Matching is case-insensitive
/// for ASCII letters.
inline const std::vector<std::string>& default_function_words() {
    static const std::vector<std::string> words = {
        "a",       "about",   "above",   "after",   "again",   "against", "all",     "almost",  "along",
        "also",    "although", "am",     "among",   "an",      "and",     "another", "any",     "anyone",
        "anything", "are",    "around",  "as",      "at",      "be",      "because", "been",    "before",
        "behind",  "being",   "below",   "beside",  "between", "beyond",  "both",    "but",     "by",
        "can",     "cannot",  "could",   "did",     "do",      "does",    "doing",   "down",    "during",
        "each",    "either",  "enough",  "even",    "ever",    "every",   "few",     "for",     "from",
        "further", "had",     "has",     "have",    "having",  "he",      "her",     "here",    "hers",
        "herself", "him",     "himself", "his",     "how",     "however", "i",       "if",      "in",
        "inside",  "into",    "is",      "it",      "its",     "itself",  "just",    "least",   "less",
        "like",    "many",    "may",     "me",      "might",   "mine",    "more",    "most",    "much",
        "must",    "my",      "myself",  "near",    "neither", "never",   "no",      "nobody",  "none",
        "nor",     "not",     "nothing", "now",     "of",      "off",     "often",   "on",      "once",
        "one",     "only",    "onto",    "or",      "other",   "others",  "ought",   "our",     "ours",
        "ourselves", "out",   "outside", "over",    "own",     "past",    "per",     "perhaps", "quite",
        "rather",  "same",    "shall",   "she",     "should",  "since",   "so",      "some",    "somebody",
        "something", "such",  "than",    "that",    "the",     "their",   "theirs",  "them",    "themselves",
        "then",    "there",   "these",   "they",    "this",    "those",   "though",  "through", "thus",
        "till",    "to",      "too",     "toward",  "towards", "under",   "unless",  "until",   "up",
        "upon",    "us",      "very",    "via",     "was",     "we",      "were",    "what",    "whatever",
        "when",    "where",   "whether", "which",   "while",   "who",     "whoever", "whom",    "whose",
        "why",     "will",    "with",    "within",  "without", "would",   "yet",     "you",     "your",
        "yours",   "yourself", "yourselves"};
    return words;
}

struct FeatureSpec {
    std::set<int> char_ngram_orders{2, 3, 4};
    bool include_punctuation = true;
    bool include_function_words = true;
    std::vector<std::string> function_words = default_function_words();
    bool keep_all_features = true;
    std::size_t top_k = 300;  // per family, only consulted when keep_all_features is false
    // global: weights are counts over the total count of all enabled families
    // family: each family is normalised on its own and sums to 1
    enum class Normalization { global, family } normalization = Normalization::global;

    void validate() const {
        for (int n : char_ngram_orders)
            if (n < 1 || n > 8) throw ValidationError("character n-gram order " + std::to_string(n) + " outside 1..8");
        if (char_ngram_orders.empty() && !include_punctuation && !include_function_words)
            throw ValidationError("feature spec enables no feature family");
        if (include_function_words && function_words.empty())
            throw ValidationError("function-word family enabled with an empty word list");
        if (!keep_all_features && top_k == 0) throw ValidationError("top_k must be positive");
    }
};

/// Feature keys are namespaced by family, e.g. "char3:the", "punct:,", "fw:and".
/// Entries are kept sorted by key, which fixes the summation order of every
/// reduction below and makes the results bit-reproducible.
class SparseVector {
public:
    using Entry = std::pair<std::string, double>;

    SparseVector() = default;

    explicit SparseVector(std::vector<Entry> entries) : entries_(std::move(entries)) {
        auto by_key = [](const Entry& a, const Entry& b) { return a.first < b.first; };
        if (!std::is_sorted(entries_.begin(), entries_.end(), by_key)) std::sort(entries_.begin(), entries_.end(), by_key);
        for (std::size_t i = 0; i < entries_.size(); ++i) {
            if (!(entries_[i].second >= 0.0) || !std::isfinite(entries_[i].second))
                throw ValidationError("feature weight for '" + entries_[i].first + "' must be finite and >= 0");
            if (i > 0 && entries_[i].first == entries_[i - 1].first)
                throw ValidationError("duplicate feature key '" + entries_[i].first + "'");
        }
        std::erase_if(entries_, [](const Entry& e) { return e.second == 0.0; });
    }

    SparseVector(std::initializer_list<Entry> entries) : SparseVector(std::vector<Entry>(entries)) {}

    const std::vector<Entry>& entries() const noexcept { return entries_; }
    std::size_t size() const noexcept { return entries_.size(); }
    bool empty() const noexcept { return entries_.empty(); }
    auto begin() const noexcept { return entries_.begin(); }
    auto end() const noexcept { return entries_.end(); }

    double get(std::string_view key) const {
        auto it = std::lower_bound(entries_.begin(), entries_.end(), key,
                                   [](const Entry& e, std::string_view k) { return e.first < k; });
        return (it != entries_.end() && it->first == key) ? it->second : 0.0;
    }

    /// Entries whose key starts with "<family>:".
    SparseVector family(std::string_view name) const {
        std::string prefix = std::string(name) + ":";
        std::vector<Entry> out;
        for (const auto& e : entries_)
            if (e.first.compare(0, prefix.size(), prefix) == 0) out.push_back(e);
        return SparseVector(std::move(out));
    }

    friend bool operator==(const SparseVector&, const SparseVector&) = default;

private:
    std::vector<Entry> entries_;
};

inline std::string_view family_of(std::string_view key) { return key.substr(0, key.find(':')); }

namespace detail {

inline bool is_punctuation(char32_t c) {
    if (c < 0x80) return c > 0x20 && c < 0x7F && !std::isalnum(static_cast<int>(c));
    return c == 0xA1 || c == 0xA7 || c == 0xAB || c == 0xB6 || c == 0xB7 || c == 0xBB || c == 0xBF ||
           (c >= 0x2010 && c <= 0x2027) || (c >= 0x2030 && c <= 0x205E) || (c >= 0x3001 && c <= 0x3003) ||
           (c >= 0x3008 && c <= 0x3011);
}

inline bool is_space(char32_t c) {
    return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v' || c == 0xA0 ||
           c == 0x2028 || c == 0x2029 || (c >= 0x2000 && c <= 0x200A) || c == 0x3000;
}

inline bool is_word_char(char32_t c) {
    if (c == '\'') return true;
    if (c < 0x80) return std::isalnum(static_cast<int>(c)) != 0;
    return !is_space(c) && !is_punctuation(c);
}

/// Word tokens: maximal runs of letters, digits and apostrophes.
inline std::vector<std::u32string> words(std::u32string_view text) {
    std::vector<std::u32string> out;
    std::u32string cur;
    for (char32_t c : text) {
        if (is_word_char(c)) {
            cur.push_back(c);
        } else if (!cur.empty()) {
            out.push_back(std::move(cur));
            cur.clear();
        }
    }
    if (!cur.empty()) out.push_back(std::move(cur));
    return out;
}

inline std::string ascii_lower(std::string s) {
    for (auto& ch : s)
        if (ch >= 'A' && ch <= 'Z') ch = static_cast<char>(ch - 'A' + 'a');
    return s;
}

struct FamilyCounts {
    std::string family;
    std::vector<std::pair<std::string, std::size_t>> items;  // sorted by key
    std::size_t total = 0;
};

template <class Map>
void add_family(std::vector<FamilyCounts>& out, const std::string& family, const Map& counts, const FeatureSpec& spec) {
    if (counts.empty()) return;
    std::vector<std::pair<std::string_view, std::size_t>> items(counts.begin(), counts.end());
    std::sort(items.begin(), items.end());
    if (!spec.keep_all_features && items.size() > spec.top_k) {
        std::stable_sort(items.begin(), items.end(), [](const auto& a, const auto& b) { return a.second > b.second; });
        items.resize(spec.top_k);
        std::sort(items.begin(), items.end());
    }
    FamilyCounts f{family, {}, 0};
    f.items.reserve(items.size());
    for (const auto& [k, c] : items) {
        f.items.emplace_back(std::string(k), c);
        f.total += c;
    }
    out.push_back(std::move(f));
}

}  // namespace detail

/// Relative-frequency feature vector of `text`. By default every count is
/// divided by the total count over all enabled families (weights sum to 1);
/// Normalization::family makes each family sum to 1 instead.
inline SparseVector extract_features(std::string_view text, const FeatureSpec& spec) {
    spec.validate();
    auto decoded = decode_utf8(text);
    if (!decoded) throw ValidationError("text is not valid UTF-8");
    const std::u32string& cps = *decoded;
    if (cps.empty()) throw ValidationError("cannot extract features from empty text");

    // n-grams are counted as views into the UTF-8 text, cut at code point boundaries
    std::vector<std::size_t> at;
    at.reserve(cps.size() + 1);
    for (std::size_t i = 0; i < text.size(); ++i)
        if ((static_cast<unsigned char>(text[i]) & 0xC0) != 0x80) at.push_back(i);
    at.push_back(text.size());

    std::vector<detail::FamilyCounts> families;
    for (int n : spec.char_ngram_orders) {
        const auto order = static_cast<std::size_t>(n);
        if (cps.size() < order) continue;
        std::unordered_map<std::string_view, std::size_t> counts;
        counts.reserve(cps.size());
        for (std::size_t i = 0; i + order <= cps.size(); ++i) ++counts[text.substr(at[i], at[i + order] - at[i])];
        detail::add_family(families, "char" + std::to_string(n), counts, spec);
    }
    if (spec.include_function_words) {
        std::unordered_set<std::string> lexicon;
        for (const auto& w : spec.function_words) lexicon.insert(detail::ascii_lower(w));
        std::unordered_map<std::string, std::size_t> counts;
        for (const auto& w : detail::words(cps)) {
            std::string lw = detail::ascii_lower(encode_utf8(w));
            if (lexicon.count(lw)) ++counts[lw];
        }
        detail::add_family(families, "fw", counts, spec);
    }
    if (spec.include_punctuation) {
        std::unordered_map<std::string_view, std::size_t> counts;
        for (std::size_t i = 0; i < cps.size(); ++i)
            if (detail::is_punctuation(cps[i])) ++counts[text.substr(at[i], at[i + 1] - at[i])];
        detail::add_family(families, "punct", counts, spec);
    }
    if (families.empty()) throw ValidationError("text too short: no enabled feature family applies");
    std::size_t grand = 0;
    for (const auto& f : families) grand += f.total;
    // families are emitted in key order (char2.. < fw < punct), so entries arrive sorted
    std::size_t size = 0;
    for (const auto& f : families) size += f.items.size();
    std::vector<SparseVector::Entry> entries;
    entries.reserve(size);
    for (const auto& f : families) {
        const double denom = double(spec.normalization == FeatureSpec::Normalization::global ? grand : f.total);
        const std::string prefix = f.family + ":";
        for (const auto& [k, c] : f.items) entries.emplace_back(prefix + k, double(c) / denom);
    }
    return SparseVector(std::move(entries));
}

inline SparseVector extract_features(const Document& doc, const FeatureSpec& spec) {
    try {
        return extract_features(doc.text(), spec);
    } catch (const ValidationError& e) {
        throw ValidationError("document '" + doc.id() + "': " + e.what());
    }
}

// ---------------------------------------------------------------------------
// measures

namespace detail {

/// Calls fn(key, a_weight, b_weight) over the union of keys in ascending order.
template <class Fn>
void merge_walk(const SparseVector& a, const SparseVector& b, Fn&& fn) {
    auto ia = a.begin(), ib = b.begin();
    while (ia != a.end() || ib != b.end()) {
        if (ib == b.end() || (ia != a.end() && ia->first < ib->first)) {
            fn(ia->first, ia->second, 0.0);
            ++ia;
        } else if (ia == a.end() || ib->first < ia->first) {
            fn(ib->first, 0.0, ib->second);
            ++ib;
        } else {
            fn(ia->first, ia->second, ib->second);
            ++ia;
            ++ib;
        }
    }
}

}  // namespace detail

inline double manhattan(const SparseVector& a, const SparseVector& b) {
    double sum = 0.0;
    detail::merge_walk(a, b, [&](const std::string&, double x, double y) { sum += std::abs(x - y); });
    return sum;
}

/// Ruzicka (min-max) similarity: sum of minima over sum of maxima.
inline double ruzicka(const SparseVector& a, const SparseVector& b) {
    if (a.empty() && b.empty()) throw ValidationError("ruzicka similarity of two empty vectors is undefined");
    double mins = 0.0, maxs = 0.0;
    detail::merge_walk(a, b, [&](const std::string&, double x, double y) {
        mins += std::min(x, y);
        maxs += std::max(x, y);
    });
    return mins / maxs;
}

inline double cosine(const SparseVector& a, const SparseVector& b) {
    double dot = 0.0, na = 0.0, nb = 0.0;
    detail::merge_walk(a, b, [&](const std::string&, double x, double y) {
        dot += x * y;
        na += x * x;
        nb += y * y;
    });
    if (na == 0.0 || nb == 0.0) return 0.0;
    return dot / (std::sqrt(na) * std::sqrt(nb));
}

/// Keys of the `length` heaviest entries (ties broken by key), ascending.
inline std::vector<std::string> top_keys(const SparseVector& v, std::size_t length) {
    std::vector<const SparseVector::Entry*> ptrs;
    for (const auto& e : v) ptrs.push_back(&e);
    std::stable_sort(ptrs.begin(), ptrs.end(), [](auto* x, auto* y) { return x->second > y->second; });
    if (ptrs.size() > length) ptrs.resize(length);
    std::vector<std::string> keys;
    for (auto* p : ptrs) keys.push_back(p->first);
    std::sort(keys.begin(), keys.end());
    return keys;
}

/// Common-n-gram profile dissimilarity over the union of both top-L profiles:
/// sum of (2(a-b)/(a+b))^2.
inline double cng_profile_dissimilarity(const SparseVector& a, const SparseVector& b, std::size_t profile_length) {
    if (profile_length == 0) throw ValidationError("profile length must be positive");
    auto ka = top_keys(a, profile_length);
    auto kb = top_keys(b, profile_length);
    std::vector<std::string> keys;
    std::set_union(ka.begin(), ka.end(), kb.begin(), kb.end(), std::back_inserter(keys));
    double sum = 0.0;
    for (const auto& k : keys) {
        double x = a.get(k), y = b.get(k);
        if (x + y == 0.0) continue;
        double t = 2.0 * (x - y) / (x + y);
        sum += t * t;
    }
    return sum;
}

/// Keywise arithmetic mean.
inline SparseVector centroid(std::span<const SparseVector> vectors) {
    if (vectors.empty()) throw ValidationError("centroid of an empty list");
    std::map<std::string, double> acc;
    for (const auto& v : vectors)
        for (const auto& [k, w] : v) acc[k] += w;
    std::vector<SparseVector::Entry> out;
    out.reserve(acc.size());
    const double n = double(vectors.size());
    for (auto& [k, w] : acc) out.emplace_back(k, w / n);
    return SparseVector(std::move(out));
}

/// One JSON object per line: {"feature": key, "weight": w}.
inline std::string features_to_jsonl(const SparseVector& v) {
    std::string out;
    for (const auto& [k, w] : v) out += nlohmann::json{{"feature", k}, {"weight", w}}.dump() + "\n";
    return out;
}

// ---------------------------------------------------------------------------
// measure selection

enum class DistanceKind { manhattan, ruzicka, cng_profile };

inline DistanceKind parse_distance_kind(std::string_view s) {
    if (s == "manhattan") return DistanceKind::manhattan;
    if (s == "ruzicka") return DistanceKind::ruzicka;
    if (s == "cng-profile") return DistanceKind::cng_profile;
    throw ValidationError("unknown distance '" + std::string(s) + "' (expected manhattan, ruzicka or cng-profile)");
}

inline const char* to_string(DistanceKind k) {
    switch (k) {
        case DistanceKind::manhattan: return "manhattan";
        case DistanceKind::ruzicka: return "ruzicka";
        case DistanceKind::cng_profile: return "cng-profile";
    }
    return "?";
}

struct DistanceSpec {
    DistanceKind kind = DistanceKind::manhattan;
    std::size_t profile_length = 300;

    double operator()(const SparseVector& a, const SparseVector& b) const {
        switch (kind) {
            case DistanceKind::manhattan: return manhattan(a, b);
            case DistanceKind::ruzicka: return 1.0 - ruzicka(a, b);
            case DistanceKind::cng_profile: return cng_profile_dissimilarity(a, b, profile_length);
        }
        return 0.0;
    }
};

/// Similarity used by the threshold verifiers; higher means more alike.
///   manhattan-sim  1 / (1 + manhattan)
///   ruzicka        ruzicka
///   cng-profile    1 / (1 + cng dissimilarity), parameter profile_length (L)
///   cbc            1 - compression based cosine (needs the texts, see binary.hpp)
enum class SimilarityKind { manhattan_sim, ruzicka, cbc, cng_profile };

inline SimilarityKind parse_similarity_kind(std::string_view s) {
    if (s == "manhattan-sim") return SimilarityKind::manhattan_sim;
    if (s == "ruzicka") return SimilarityKind::ruzicka;
    if (s == "cbc") return SimilarityKind::cbc;
    if (s == "cng-profile") return SimilarityKind::cng_profile;
    throw ValidationError("unknown similarity '" + std::string(s) +
                          "' (expected manhattan-sim, ruzicka, cbc or cng-profile)");
}

inline const char* to_string(SimilarityKind k) {
    switch (k) {
        case SimilarityKind::manhattan_sim: return "manhattan-sim";
        case SimilarityKind::ruzicka: return "ruzicka";
        case SimilarityKind::cbc: return "cbc";
        case SimilarityKind::cng_profile: return "cng-profile";
    }
    return "?";
}

struct SimilaritySpec {
    SimilarityKind kind = SimilarityKind::manhattan_sim;
    std::map<std::string, double> parameters;

    SimilaritySpec() = default;
    SimilaritySpec(SimilarityKind k, std::map<std::string, double> params = {}) : kind(k), parameters(std::move(params)) {
        validate();
    }

    std::size_t profile_length() const {
        auto it = parameters.find("profile_length");
        return it == parameters.end() ? 300 : static_cast<std::size_t>(it->second);
    }

    std::size_t compression_order() const {
        auto it = parameters.find("order");
        return it == parameters.end() ? 5 : static_cast<std::size_t>(it->second);
    }

    void validate() const {
        for (const auto& [name, value] : parameters) {
            bool ok = (kind == SimilarityKind::cng_profile && name == "profile_length") ||
                      (kind == SimilarityKind::cbc && name == "order");
            if (!ok) throw ValidationError("parameter '" + name + "' not valid for similarity " + to_string(kind));
            if (!(value >= 1) || value != std::floor(value))
                throw ValidationError("parameter '" + name + "' must be a positive integer");
        }
        if (kind == SimilarityKind::cbc && compression_order() > 8)
            throw ValidationError("compression order must lie in 1..8");
    }
};

}  // namespace averify
