#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>
#include <numeric>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <utility>
#include <vector>

#include "averify/common.hpp"
#include "averify/trace.hpp"

namespace averify {

enum class Label { Y, N };

inline const char* to_string(Label l) { return l == Label::Y ? "Y" : "N"; }

inline Label parse_label(std::string_view s) {
    if (s == "Y") return Label::Y;
    if (s == "N") return Label::N;
    throw ValidationError("invalid label '" + std::string(s) + "' (expected Y or N)");
}

/// A text with an identifier and, optionally, the id of its true author.
/// Reads of the text are reported to the active trace recorder.
class Document {
public:
    Document(std::string id, std::string text, std::optional<std::string> author_hint = std::nullopt)
        : id_(std::move(id)), text_(std::move(text)), author_hint_(std::move(author_hint)) {
        if (id_.empty()) throw ValidationError("document id must not be empty");
        if (text_.empty()) throw ValidationError("document '" + id_ + "' has empty text");
    }

    const std::string& id() const noexcept { return id_; }
    const std::optional<std::string>& author_hint() const noexcept { return author_hint_; }

    const std::string& text() const {
        trace::note_document(id_);
        return text_;
    }

    friend bool operator==(const Document& a, const Document& b) {
        return a.id_ == b.id_ && a.text_ == b.text_ && a.author_hint_ == b.author_hint_;
    }

private:
    std::string id_;
    std::string text_;
    std::optional<std::string> author_hint_;
};

/// The unlabeled part of a problem: everything a verifier may legitimately see.
struct ProblemView {
    const Document& unknown;
    std::span<const Document> known;
};

/// One verification instance: an unknown document and the reference set of
/// the candidate author, optionally labeled.
class Problem {
public:
    Problem(std::string id, Document unknown, std::vector<Document> known, std::optional<Label> label = std::nullopt)
        : id_(std::move(id)), unknown_(std::move(unknown)), known_(std::move(known)), label_(label) {
        if (id_.empty()) throw ValidationError("problem id must not be empty");
        if (known_.empty()) throw ValidationError("problem '" + id_ + "': empty known set");
        std::set<std::string> ids;
        for (const auto& d : known_) {
            if (!ids.insert(d.id()).second)
                throw ValidationError("problem '" + id_ + "': duplicate known document id '" + d.id() + "'");
        }
        if (ids.count(unknown_.id()))
            throw ValidationError("problem '" + id_ + "': unknown document '" + unknown_.id() +
                                  "' also appears in the known set");
    }

    const std::string& id() const noexcept { return id_; }
    const Document& unknown() const noexcept { return unknown_; }
    const std::vector<Document>& known() const noexcept { return known_; }
    bool labeled() const noexcept { return label_.has_value(); }

    /// The ground truth. Traced: verifiers touching this outside of fitting
    /// fail the category audit.
    const std::optional<Label>& label() const {
        trace::note_label(id_);
        return label_;
    }

    ProblemView view() const { return ProblemView{unknown_, std::span<const Document>(known_)}; }

    friend bool operator==(const Problem& a, const Problem& b) {
        return a.id_ == b.id_ && a.unknown_ == b.unknown_ && a.known_ == b.known_ && a.label_ == b.label_;
    }

private:
    std::string id_;
    Document unknown_;
    std::vector<Document> known_;
    std::optional<Label> label_;
};

/// Label counts read without touching the trace.
struct LabelCounts {
    std::size_t y = 0;
    std::size_t n = 0;
    std::size_t unlabeled = 0;
};

class Corpus {
public:
    Corpus() = default;
    Corpus(std::string id, std::vector<Problem> problems) : id_(std::move(id)), problems_(std::move(problems)) {
        validate();
    }

    const std::string& id() const noexcept { return id_; }
    const std::vector<Problem>& problems() const noexcept { return problems_; }
    std::size_t size() const noexcept { return problems_.size(); }
    bool empty() const noexcept { return problems_.empty(); }
    const Problem& operator[](std::size_t i) const { return problems_[i]; }

    LabelCounts label_counts() const {
        trace::Pause untraced;
        LabelCounts c;
        for (const auto& p : problems_) {
            const auto& l = p.label();
            if (!l) ++c.unlabeled;
            else if (*l == Label::Y) ++c.y;
            else ++c.n;
        }
        return c;
    }

    bool fully_labeled() const { return label_counts().unlabeled == 0; }

    /// True iff every problem is labeled and |Y| = |N|.
    bool balanced() const {
        auto c = label_counts();
        return c.unlabeled == 0 && c.y == c.n;
    }

    std::optional<std::size_t> index_of(std::string_view problem_id) const {
        for (std::size_t i = 0; i < problems_.size(); ++i)
            if (problems_[i].id() == problem_id) return i;
        return std::nullopt;
    }

    const Problem& at(std::string_view problem_id) const {
        auto i = index_of(problem_id);
        if (!i) throw ValidationError("unknown problem id '" + std::string(problem_id) + "'");
        return problems_[*i];
    }

    friend bool operator==(const Corpus& a, const Corpus& b) {
        return a.id_ == b.id_ && a.problems_ == b.problems_;
    }

private:
    void validate() const {
        trace::Pause untraced;
        std::set<std::string> ids;
        std::unordered_map<std::string, const Document*> docs;
        auto check_doc = [&](const Problem& p, const Document& d) {
            auto [it, fresh] = docs.emplace(d.id(), &d);
            if (!fresh && !(*it->second == d))
                throw ValidationError("problem '" + p.id() + "': document id '" + d.id() +
                                      "' refers to different content elsewhere in the corpus");
        };
        for (const auto& p : problems_) {
            if (!ids.insert(p.id()).second) throw ValidationError("duplicate problem id '" + p.id() + "'");
            check_doc(p, p.unknown());
            for (const auto& d : p.known()) check_doc(p, d);
        }
        auto c = label_counts();
        if (c.unlabeled != 0 && c.unlabeled != problems_.size())
            throw ValidationError("corpus '" + id_ + "' mixes labeled and unlabeled problems");
    }

    std::string id_;
    std::vector<Problem> problems_;
};

// ---------------------------------------------------------------------------
// impostor pools

/// Documents standing in for the outlier class of one problem. Non-owning:
/// the pool refers into the corpus it was built from.
struct ImpostorPool {
    std::string problem_id;
    std::vector<std::reference_wrapper<const Document>> documents;

    std::size_t size() const noexcept { return documents.size(); }
    bool empty() const noexcept { return documents.empty(); }
};

/// The unknown documents of every other problem, minus the target's own
/// documents and anything by the reference author(s) (by hint of the known
/// documents). The unknown's hint is deliberately not consulted: its author is
/// part of the outlier class whenever the problem is a true N.
inline ImpostorPool impostor_pool_for(const Corpus& corpus, std::string_view problem_id) {
    const Problem& target = corpus.at(problem_id);
    std::set<std::string> own_ids{target.unknown().id()};
    std::set<std::string> excluded_authors;
    for (const auto& d : target.known()) {
        own_ids.insert(d.id());
        if (d.author_hint()) excluded_authors.insert(*d.author_hint());
    }

    ImpostorPool pool{std::string(problem_id), {}};
    std::set<std::string> seen;
    for (const auto& p : corpus.problems()) {
        if (p.id() == target.id()) continue;
        const Document& u = p.unknown();
        if (own_ids.count(u.id())) continue;
        if (u.author_hint() && excluded_authors.count(*u.author_hint())) continue;
        if (!seen.insert(u.id()).second) continue;
        pool.documents.emplace_back(u);
    }
    return pool;
}

// ---------------------------------------------------------------------------
// resampling

namespace detail {

struct AuthorIndex {
    std::vector<const Document*> docs;             // distinct documents, first-appearance order
    std::vector<std::string> authors;              // sorted author ids
    std::vector<std::vector<std::size_t>> by_author;  // author -> doc indices (ascending)
    std::vector<std::size_t> author_of;            // doc -> author
};

inline AuthorIndex index_authors(const Corpus& corpus) {
    trace::Pause untraced;
    AuthorIndex idx;
    std::unordered_map<std::string, std::size_t> doc_pos;
    std::vector<std::string> doc_author;

    bool all_hinted = true;
    for (const auto& p : corpus.problems()) {
        if (!p.unknown().author_hint()) all_hinted = false;
        for (const auto& d : p.known())
            if (!d.author_hint()) all_hinted = false;
    }
    if (!all_hinted && !corpus.fully_labeled())
        throw ValidationError("resampling needs a fully labeled corpus or author hints on every document");
    if (!all_hinted && !corpus.empty())
        warn("corpus lacks author hints; deriving pseudo-authors from problem labels");

    auto add = [&](const Document& d, const std::string& author) {
        if (doc_pos.emplace(d.id(), idx.docs.size()).second) {
            idx.docs.push_back(&d);
            doc_author.push_back(author);
        }
    };
    for (const auto& p : corpus.problems()) {
        std::string known_author = all_hinted ? *p.known().front().author_hint() : "~known/" + p.id();
        for (const auto& d : p.known()) add(d, all_hinted ? *d.author_hint() : known_author);
        std::string unknown_author;
        if (all_hinted) unknown_author = *p.unknown().author_hint();
        else unknown_author = (*p.label() == Label::Y) ? known_author : "~unknown/" + p.id();
        add(p.unknown(), unknown_author);
    }

    std::set<std::string> names(doc_author.begin(), doc_author.end());
    idx.authors.assign(names.begin(), names.end());
    std::unordered_map<std::string, std::size_t> author_pos;
    for (std::size_t i = 0; i < idx.authors.size(); ++i) author_pos[idx.authors[i]] = i;
    idx.by_author.resize(idx.authors.size());
    idx.author_of.resize(idx.docs.size());
    for (std::size_t i = 0; i < idx.docs.size(); ++i) {
        std::size_t a = author_pos[doc_author[i]];
        idx.author_of[i] = a;
        idx.by_author[a].push_back(i);
    }
    return idx;
}

inline double binomial(std::size_t n, std::size_t k) {
    if (k > n) return 0.0;
    return std::round(std::exp(std::lgamma(double(n) + 1) - std::lgamma(double(k) + 1) - std::lgamma(double(n - k) + 1)));
}

struct Candidate {
    std::vector<std::size_t> known;  // doc indices, ascending
    std::size_t unknown;
    bool operator<(const Candidate& o) const { return std::tie(unknown, known) < std::tie(o.unknown, o.known); }
};

inline void for_each_subset(const std::vector<std::size_t>& items, std::size_t k,
                            const std::function<void(const std::vector<std::size_t>&)>& fn) {
    if (k > items.size()) return;
    std::vector<std::size_t> pick(k);
    std::iota(pick.begin(), pick.end(), 0);
    std::vector<std::size_t> subset(k);
    while (true) {
        for (std::size_t i = 0; i < k; ++i) subset[i] = items[pick[i]];
        fn(subset);
        std::size_t i = k;
        while (i > 0 && pick[i - 1] == items.size() - k + i - 1) --i;
        if (i == 0) return;
        ++pick[i - 1];
        for (std::size_t j = i; j < k; ++j) pick[j] = pick[j - 1] + 1;
    }
}

inline std::vector<std::size_t> sample_subset(Rng& rng, const std::vector<std::size_t>& items, std::size_t k) {
    std::vector<std::size_t> pool = items;
    for (std::size_t i = 0; i < k; ++i) std::swap(pool[i], pool[i + uniform_index(rng, pool.size() - i)]);
    std::vector<std::size_t> out(pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(k));
    std::sort(out.begin(), out.end());
    return out;
}

}  // namespace detail

struct ResampleOptions {
    std::size_t known_per_problem = 3;
    std::string id = "resampled";
};

/// Largest balanced corpus resample_balanced can build from this material.
inline std::size_t max_balanced_size(const Corpus& corpus, std::size_t known_per_problem) {
    auto idx = detail::index_authors(corpus);
    double cap_y = 0, cap_n = 0;
    const double total = double(idx.docs.size());
    for (const auto& docs : idx.by_author) {
        double subsets = detail::binomial(docs.size(), known_per_problem);
        cap_y += subsets * double(docs.size() >= known_per_problem ? docs.size() - known_per_problem : 0);
        cap_n += subsets * (total - double(docs.size()));
    }
    double half = std::min(cap_y, cap_n);
    if (half > 1e15) half = 1e15;
    return 2 * static_cast<std::size_t>(half);
}

/// Builds a balanced corpus of `target_size` problems (half Y, half N) from
/// the documents of `corpus`, grouped by author. N-problems pair a known set
/// of author X with an unknown document of some author Y != X. No
/// (unknown, known-set) combination is used twice. Pure in (corpus, size, seed).
inline Corpus resample_balanced(const Corpus& corpus, std::size_t target_size, std::uint64_t seed,
                                const ResampleOptions& opts = {}) {
    if (target_size % 2 != 0) throw ValidationError("target size must be even, got " + std::to_string(target_size));
    const std::size_t k = opts.known_per_problem;
    if (k == 0) throw ValidationError("known documents per problem must be positive");
    if (target_size == 0) return Corpus(opts.id, {});

    auto idx = detail::index_authors(corpus);
    const std::size_t maximum = max_balanced_size(corpus, k);
    if (target_size > maximum)
        throw ValidationError("target size " + std::to_string(target_size) +
                              " unreachable; maximum achievable balanced size is " + std::to_string(maximum));
    const std::size_t half = target_size / 2;
    const std::size_t n_docs = idx.docs.size();

    Rng rng(derive_seed(seed, "resample"));

    // Per-author capacities, used as sampling weights so that every candidate
    // problem is equally likely.
    std::vector<double> w_y, w_n;
    double cap_y = 0, cap_n = 0;
    for (const auto& docs : idx.by_author) {
        double subsets = detail::binomial(docs.size(), k);
        w_y.push_back(subsets * double(docs.size() >= k ? docs.size() - k : 0));
        w_n.push_back(subsets * double(n_docs - docs.size()));
        cap_y += w_y.back();
        cap_n += w_n.back();
    }

    auto others_of = [&](std::size_t author) {
        std::vector<std::size_t> out;
        for (std::size_t d = 0; d < n_docs; ++d)
            if (idx.author_of[d] != author) out.push_back(d);
        return out;
    };

    auto draw = [&](bool same, double capacity, const std::vector<double>& weights) {
        std::vector<detail::Candidate> chosen;
        constexpr double enumerate_limit = 1e6;
        if (capacity <= enumerate_limit) {
            std::vector<detail::Candidate> all;
            for (std::size_t a = 0; a < idx.by_author.size(); ++a) {
                if (weights[a] == 0) continue;
                const auto& mine = idx.by_author[a];
                std::vector<std::size_t> targets = same ? std::vector<std::size_t>{} : others_of(a);
                detail::for_each_subset(mine, k, [&](const std::vector<std::size_t>& ks) {
                    if (same) {
                        for (std::size_t u : mine)
                            if (!std::binary_search(ks.begin(), ks.end(), u)) all.push_back({ks, u});
                    } else {
                        for (std::size_t u : targets) all.push_back({ks, u});
                    }
                });
            }
            for (std::size_t i = 0; i < half; ++i) std::swap(all[i], all[i + uniform_index(rng, all.size() - i)]);
            chosen.assign(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(half));
        } else {
            std::discrete_distribution<std::size_t> pick_author(weights.begin(), weights.end());
            std::set<detail::Candidate> used;
            std::size_t attempts = 0;
            while (chosen.size() < half) {
                if (++attempts > 100 * half + 10000)
                    throw Error("resampling failed to find enough distinct problems");
                std::size_t a = pick_author(rng);
                const auto& mine = idx.by_author[a];
                detail::Candidate c;
                if (same) {
                    auto picked = detail::sample_subset(rng, mine, k + 1);
                    std::size_t u_pos = uniform_index(rng, picked.size());
                    c.unknown = picked[u_pos];
                    picked.erase(picked.begin() + static_cast<std::ptrdiff_t>(u_pos));
                    c.known = std::move(picked);
                } else {
                    c.known = detail::sample_subset(rng, mine, k);
                    std::size_t u;
                    do u = uniform_index(rng, n_docs);
                    while (idx.author_of[u] == a);
                    c.unknown = u;
                }
                if (used.insert(c).second) chosen.push_back(std::move(c));
            }
        }
        return chosen;
    };

    auto ys = draw(true, cap_y, w_y);
    auto ns = draw(false, cap_n, w_n);

    std::vector<std::pair<detail::Candidate, Label>> all;
    for (auto& c : ys) all.emplace_back(std::move(c), Label::Y);
    for (auto& c : ns) all.emplace_back(std::move(c), Label::N);
    std::shuffle(all.begin(), all.end(), rng);

    const std::size_t width = std::to_string(target_size).size();
    std::vector<Problem> problems;
    problems.reserve(all.size());
    trace::Pause untraced;
    auto copy_doc = [&](std::size_t i) {
        const Document& d = *idx.docs[i];
        return Document(d.id(), d.text(), d.author_hint());
    };
    for (std::size_t i = 0; i < all.size(); ++i) {
        std::string num = std::to_string(i + 1);
        std::string pid = opts.id + "-" + std::string(width - num.size(), '0') + num;
        std::vector<Document> known;
        for (std::size_t d : all[i].first.known) known.push_back(copy_doc(d));
        problems.emplace_back(pid, copy_doc(all[i].first.unknown), std::move(known), all[i].second);
    }
    return Corpus(opts.id, std::move(problems));
}

// ---------------------------------------------------------------------------
// train / eval split

/// Splits a labeled corpus into (train, eval). Problems sharing an author (by
/// hint) always land on the same side; within that constraint labels are
/// stratified so balanced inputs give balanced splits where sizes permit.
inline std::pair<Corpus, Corpus> split_train_eval(const Corpus& corpus, double train_fraction, std::uint64_t seed) {
    if (!(train_fraction > 0.0 && train_fraction < 1.0))
        throw ValidationError("train fraction must lie in (0, 1)");
    if (!corpus.fully_labeled() || corpus.empty()) throw ValidationError("split requires a non-empty labeled corpus");

    trace::Pause untraced;
    const auto& probs = corpus.problems();
    const std::size_t n = probs.size();

    // union-find over problems, joined through shared author hints
    std::vector<std::size_t> parent(n);
    std::iota(parent.begin(), parent.end(), 0);
    std::function<std::size_t(std::size_t)> find = [&](std::size_t x) {
        while (parent[x] != x) x = parent[x] = parent[parent[x]];
        return x;
    };
    std::unordered_map<std::string, std::size_t> first_with_author;
    for (std::size_t i = 0; i < n; ++i) {
        auto link = [&](const Document& d) {
            if (!d.author_hint()) return;
            auto [it, fresh] = first_with_author.emplace(*d.author_hint(), i);
            if (!fresh) parent[find(i)] = find(it->second);
        };
        link(probs[i].unknown());
        for (const auto& d : probs[i].known()) link(d);
    }
    std::map<std::size_t, std::vector<std::size_t>> groups;
    for (std::size_t i = 0; i < n; ++i) groups[find(i)].push_back(i);
    std::vector<std::vector<std::size_t>> components;
    for (auto& [root, members] : groups) components.push_back(std::move(members));

    Rng rng(derive_seed(seed, "split"));
    std::shuffle(components.begin(), components.end(), rng);

    auto counts = corpus.label_counts();
    const auto target_y = static_cast<std::size_t>(std::llround(train_fraction * double(counts.y)));
    const auto target_n = static_cast<std::size_t>(std::llround(train_fraction * double(counts.n)));

    std::vector<bool> in_train(n, false);
    std::size_t got_y = 0, got_n = 0;
    for (const auto& comp : components) {
        std::size_t cy = 0, cn = 0;
        for (std::size_t i : comp) (*probs[i].label() == Label::Y ? cy : cn)++;
        if (got_y + cy <= target_y && got_n + cn <= target_n) {
            got_y += cy;
            got_n += cn;
            for (std::size_t i : comp) in_train[i] = true;
        }
    }

    std::vector<Problem> train, eval;
    for (std::size_t i = 0; i < n; ++i) (in_train[i] ? train : eval).push_back(probs[i]);
    if (train.empty() || eval.empty())
        throw ValidationError("train fraction " + std::to_string(train_fraction) + " yields an empty " +
                              (train.empty() ? "train" : "eval") + " split (" + std::to_string(components.size()) +
                              " author-disjoint group(s) of problems)");
    if (got_y != target_y || got_n != target_n)
        warn("author-disjoint split could not reach the requested sizes exactly");
    return {Corpus(corpus.id() + "-train", std::move(train)), Corpus(corpus.id() + "-eval", std::move(eval))};
}

}  // namespace averify
