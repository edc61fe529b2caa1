#pragma once

#include <array>
#include <random>
#include <string>
#include <vector>

#include "averify/corpus.hpp"

// Synthetic labeled corpora with a controllable ground truth. Every author is
// an order-2 character Markov chain whose transition rows mix a shared base
// model with an author-specific Dirichlet draw:
//     P_author = (1 - separation) * P_base + separation * P_own
// separation = 0 makes all authors identical; separation = 1 makes them fully
// independent chains.

namespace averify {

struct SynthOptions {
    std::size_t authors = 50;
    std::size_t problems = 200;       // must be even; half Y, half N
    std::size_t known_per_problem = 3;
    std::size_t doc_len = 3000;       // characters per known document
    std::size_t unknown_len = 0;      // characters of the unknown document; 0 = doc_len
    double separation = 0.9;
    double concentration = 0.3;       // Dirichlet parameter of every transition row
    std::uint64_t seed = 1;
    std::string id;                   // corpus id; default "synth-s<seed>"
};

inline constexpr std::string_view kSynthAlphabet = "abcdefghijklmnopqrstuvwxyz ,.";

/// Order-2 character Markov chain over kSynthAlphabet.
class MarkovAuthor {
public:
    static constexpr std::size_t kSymbols = kSynthAlphabet.size();

    static MarkovAuthor dirichlet(Rng& rng, double concentration) {
        MarkovAuthor m;
        std::gamma_distribution<double> gamma(concentration, 1.0);
        for (auto& row : m.rows_) {
            double sum = 0.0;
            for (auto& p : row) sum += (p = gamma(rng) + 1e-12);
            for (auto& p : row) p /= sum;
        }
        return m;
    }

    static MarkovAuthor mix(const MarkovAuthor& base, const MarkovAuthor& own, double weight) {
        MarkovAuthor m;
        for (std::size_t r = 0; r < m.rows_.size(); ++r)
            for (std::size_t s = 0; s < kSymbols; ++s)
                m.rows_[r][s] = (1.0 - weight) * base.rows_[r][s] + weight * own.rows_[r][s];
        return m;
    }

    std::string generate(Rng& rng, std::size_t length) const {
        std::string out;
        out.reserve(length);
        std::size_t a = kSymbols - 3, b = kSymbols - 3;  // start after two spaces
        std::uniform_real_distribution<double> unit(0.0, 1.0);
        while (out.size() < length) {
            const auto& row = rows_[a * kSymbols + b];
            double u = unit(rng), acc = 0.0;
            std::size_t s = kSymbols - 1;
            for (std::size_t i = 0; i < kSymbols; ++i) {
                acc += row[i];
                if (u < acc) {
                    s = i;
                    break;
                }
            }
            out.push_back(kSynthAlphabet[s]);
            a = b;
            b = s;
        }
        return out;
    }

private:
    std::vector<std::array<double, kSymbols>> rows_ = std::vector<std::array<double, kSymbols>>(kSymbols * kSymbols);
};

inline Corpus synthesize_corpus(const SynthOptions& o) {
    if (o.problems % 2 != 0) throw ValidationError("--problems must be even to build a balanced corpus");
    if (o.authors < 2) throw ValidationError("at least two authors are needed for different-author problems");
    if (o.known_per_problem == 0) throw ValidationError("known documents per problem must be positive");
    if (o.doc_len == 0) throw ValidationError("document length must be positive");
    if (!(o.separation >= 0.0 && o.separation <= 1.0)) throw ValidationError("separation must lie in [0, 1]");
    if (!(o.concentration > 0.0)) throw ValidationError("concentration must be positive");

    const std::string tag = "s" + std::to_string(o.seed);
    const std::string corpus_id = o.id.empty() ? "synth-" + tag : o.id;
    Rng rng(derive_seed(o.seed, "synth/models"));
    const MarkovAuthor base = MarkovAuthor::dirichlet(rng, o.concentration);
    std::vector<MarkovAuthor> authors;
    authors.reserve(o.authors);
    for (std::size_t a = 0; a < o.authors; ++a)
        authors.push_back(MarkovAuthor::mix(base, MarkovAuthor::dirichlet(rng, o.concentration), o.separation));

    Rng plan(derive_seed(o.seed, "synth/plan"));
    std::vector<Label> labels(o.problems / 2, Label::Y);
    labels.resize(o.problems, Label::N);
    std::shuffle(labels.begin(), labels.end(), plan);

    const std::size_t width = std::max<std::size_t>(3, std::to_string(o.problems).size());
    const std::size_t unknown_len = o.unknown_len ? o.unknown_len : o.doc_len;
    auto author_id = [&](std::size_t a) { return tag + "-a" + std::to_string(a); };
    auto make_doc = [&](const std::string& id, std::size_t author, std::size_t length) {
        Rng doc_rng(derive_seed(o.seed, "synth/doc/" + id));
        return Document(id, authors[author].generate(doc_rng, length), author_id(author));
    };

    std::vector<Problem> problems;
    problems.reserve(o.problems);
    for (std::size_t i = 0; i < o.problems; ++i) {
        std::string num = std::to_string(i + 1);
        std::string pid = "p" + std::string(width - num.size(), '0') + num;
        const std::size_t x = uniform_index(plan, o.authors);
        std::size_t y = x;
        if (labels[i] == Label::N) {
            y = uniform_index(plan, o.authors - 1);
            if (y >= x) ++y;
        }
        std::vector<Document> known;
        for (std::size_t k = 0; k < o.known_per_problem; ++k)
            known.push_back(make_doc(pid + "-k" + std::to_string(k + 1), x, o.doc_len));
        problems.emplace_back(pid, make_doc(pid + "-u", y, unknown_len), std::move(known), labels[i]);
    }
    return Corpus(corpus_id, std::move(problems));
}

}  // namespace averify
