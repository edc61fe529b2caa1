#pragma once

#include <filesystem>
#include <fstream>
#include <sstream>

#include "json.hpp"

#include "averify/corpus.hpp"

// On-disk corpus layouts.
//
// pan-dirs:
//   <corpus>/<problem-id>/known01.txt ... knownNN.txt
//   <corpus>/<problem-id>/unknown.txt
//   <corpus>/truth.jsonl   {"problem": "<id>", "label": "Y"|"N"}       (optional)
//   <corpus>/meta.jsonl    {"problem": "<id>", "unknown": {"id", "author_hint"},
//                           "known": [{"id", "author_hint"}, ...]}    (optional)
// meta.jsonl is written by write_corpus so that document ids, author hints and
// problem order survive a round trip; without it ids default to
// "<problem>/unknown" and "<problem>/knownNN".
//
// jsonl: one problem per line
//   {"id", "unknown": {"id", "text", "author_hint"?}, "known": [{"id", "text", "author_hint"?}],
//    "label": "Y"|"N"|null, "author_hint": <hint shared by the known documents>|null}

namespace averify {

enum class Layout { pan_dirs, jsonl };

inline Layout parse_layout(std::string_view s) {
    if (s == "pan-dirs") return Layout::pan_dirs;
    if (s == "jsonl") return Layout::jsonl;
    throw ValidationError("unknown corpus layout '" + std::string(s) + "' (expected pan-dirs or jsonl)");
}

inline Layout detect_layout(const std::filesystem::path& path) {
    return std::filesystem::is_directory(path) ? Layout::pan_dirs : Layout::jsonl;
}

namespace io {

using json = nlohmann::json;

inline std::string read_file(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    if (!in) throw ValidationError("cannot read '" + p.string() + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

/// Writes via a sibling temporary file and rename, so readers never observe a
/// partially written file.
inline void write_file_atomic(const std::filesystem::path& p, std::string_view content) {
    if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path());
    auto tmp = p;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw Error("cannot write '" + tmp.string() + "'");
        out.write(content.data(), static_cast<std::streamsize>(content.size()));
        if (!out) throw Error("failed writing '" + tmp.string() + "'");
    }
    std::filesystem::rename(tmp, p);
}

/// Parses a JSON-lines file; blank lines are skipped. `where` prefixes errors.
inline std::vector<json> read_jsonl(const std::filesystem::path& p) {
    std::istringstream in(read_file(p));
    std::vector<json> out;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        try {
            out.push_back(json::parse(line));
        } catch (const json::parse_error& e) {
            throw ValidationError(p.string() + ":" + std::to_string(lineno) + ": invalid JSON: " + e.what());
        }
    }
    return out;
}

inline std::string checked_text(std::string text, const std::string& doc_id, const std::string& problem_id) {
    if (!decode_utf8(text))
        throw ValidationError("problem '" + problem_id + "': document '" + doc_id + "' is not valid UTF-8");
    if (text.empty()) throw ValidationError("problem '" + problem_id + "': document '" + doc_id + "' is empty");
    return text;
}

inline std::optional<std::string> optional_string(const json& obj, const char* key) {
    auto it = obj.find(key);
    if (it == obj.end() || it->is_null()) return std::nullopt;
    if (!it->is_string()) throw ValidationError(std::string("field '") + key + "' must be a string");
    return it->get<std::string>();
}

inline std::string required_string(const json& obj, const char* key, const std::string& context) {
    auto it = obj.find(key);
    if (it == obj.end() || !it->is_string())
        throw ValidationError(context + ": missing or non-string field '" + key + "'");
    return it->get<std::string>();
}

inline void check_path_component(const std::string& id) {
    if (id == "." || id == ".." || id.find_first_of("/\\") != std::string::npos || id.empty())
        throw ValidationError("problem id '" + id + "' cannot be used as a directory name");
}

// -- jsonl ------------------------------------------------------------------

inline Corpus load_jsonl(const std::filesystem::path& path) {
    std::vector<Problem> problems;
    std::istringstream in(read_file(path));
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        json obj;
        try {
            obj = json::parse(line);
        } catch (const json::parse_error& e) {
            throw ValidationError(path.string() + ":" + std::to_string(lineno) + ": invalid JSON: " + e.what());
        }
        std::string where = path.string() + ":" + std::to_string(lineno);
        if (!obj.is_object()) throw ValidationError(where + ": expected an object");
        std::string pid = required_string(obj, "id", where);
        where = "problem '" + pid + "'";
        try {
            auto shared_hint = optional_string(obj, "author_hint");
            auto doc = [&](const json& d, std::optional<std::string> fallback_hint) {
                if (!d.is_object()) throw ValidationError(where + ": document must be an object");
                std::string did = required_string(d, "id", where);
                auto hint = d.contains("author_hint") ? optional_string(d, "author_hint") : std::move(fallback_hint);
                return Document(did, checked_text(required_string(d, "text", where), did, pid), hint);
            };
            if (!obj.contains("unknown")) throw ValidationError(where + ": missing 'unknown'");
            Document unknown = doc(obj["unknown"], std::nullopt);
            if (!obj.contains("known") || !obj["known"].is_array())
                throw ValidationError(where + ": missing or non-array 'known'");
            std::vector<Document> known;
            for (const auto& d : obj["known"]) known.push_back(doc(d, shared_hint));
            std::optional<Label> label;
            if (auto l = optional_string(obj, "label")) label = parse_label(*l);
            problems.emplace_back(pid, std::move(unknown), std::move(known), label);
        } catch (const ValidationError& e) {
            std::string msg = e.what();
            if (msg.find(pid) == std::string::npos) msg = where + ": " + msg;
            throw ValidationError(msg);
        }
    }
    return Corpus(path.stem().string(), std::move(problems));
}

inline std::string to_jsonl(const Corpus& corpus) {
    trace::Pause untraced;
    std::string out;
    for (const auto& p : corpus.problems()) {
        json obj;
        obj["id"] = p.id();
        json u = {{"id", p.unknown().id()}, {"text", p.unknown().text()}};
        if (p.unknown().author_hint()) u["author_hint"] = *p.unknown().author_hint();
        obj["unknown"] = u;

        const auto& first_hint = p.known().front().author_hint();
        bool shared = std::all_of(p.known().begin(), p.known().end(),
                                  [&](const Document& d) { return d.author_hint() == first_hint; });
        json known = json::array();
        for (const auto& d : p.known()) {
            json k = {{"id", d.id()}, {"text", d.text()}};
            if (!shared) k["author_hint"] = d.author_hint() ? json(*d.author_hint()) : json(nullptr);
            known.push_back(k);
        }
        obj["known"] = known;
        obj["label"] = p.label() ? json(to_string(*p.label())) : json(nullptr);
        obj["author_hint"] = (shared && first_hint) ? json(*first_hint) : json(nullptr);
        out += obj.dump();
        out += '\n';
    }
    return out;
}

// -- pan-dirs ---------------------------------------------------------------

inline Corpus load_pan_dirs(const std::filesystem::path& root) {
    namespace fs = std::filesystem;
    if (!fs::is_directory(root)) throw ValidationError("'" + root.string() + "' is not a directory");

    std::vector<std::string> dirs;
    for (const auto& e : fs::directory_iterator(root))
        if (e.is_directory()) dirs.push_back(e.path().filename().string());
    std::sort(dirs.begin(), dirs.end());
    if (dirs.empty()) throw ValidationError("'" + root.string() + "' contains no problem folders");
    std::set<std::string> dir_set(dirs.begin(), dirs.end());

    std::map<std::string, Label> labels;
    std::vector<std::string> order;
    const bool has_truth = fs::exists(root / "truth.jsonl");
    if (has_truth) {
        for (const auto& obj : read_jsonl(root / "truth.jsonl")) {
            std::string pid = required_string(obj, "problem", "truth.jsonl");
            if (!dir_set.count(pid)) throw ValidationError("truth.jsonl references missing problem folder '" + pid + "'");
            if (labels.count(pid)) throw ValidationError("duplicate problem id '" + pid + "' in truth.jsonl");
            labels[pid] = parse_label(required_string(obj, "label", "problem '" + pid + "'"));
            order.push_back(pid);
        }
        for (const auto& d : dirs)
            if (!labels.count(d)) throw ValidationError("problem '" + d + "' has no entry in truth.jsonl");
    }

    std::map<std::string, json> meta;
    if (fs::exists(root / "meta.jsonl")) {
        order.clear();
        for (auto& obj : read_jsonl(root / "meta.jsonl")) {
            std::string pid = required_string(obj, "problem", "meta.jsonl");
            if (!dir_set.count(pid)) throw ValidationError("meta.jsonl references missing problem folder '" + pid + "'");
            order.push_back(pid);
            meta[pid] = std::move(obj);
        }
    }
    if (order.empty()) order = dirs;
    if (order.size() != dirs.size()) {
        for (const auto& d : dirs)
            if (std::find(order.begin(), order.end(), d) == order.end())
                throw ValidationError("problem '" + d + "' is missing from meta.jsonl");
    }

    std::vector<Problem> problems;
    for (const auto& pid : order) {
        fs::path dir = root / pid;
        const std::string where = "problem '" + pid + "'";
        if (!fs::exists(dir / "unknown.txt")) throw ValidationError(where + ": missing unknown.txt");
        std::vector<std::string> known_files;
        for (const auto& e : fs::directory_iterator(dir)) {
            std::string name = e.path().filename().string();
            if (e.is_regular_file() && name.rfind("known", 0) == 0 && e.path().extension() == ".txt")
                known_files.push_back(name);
        }
        std::sort(known_files.begin(), known_files.end());
        if (known_files.empty()) throw ValidationError(where + ": empty known set");

        const json* m = meta.count(pid) ? &meta[pid] : nullptr;
        if (m && (!m->contains("known") || (*m)["known"].size() != known_files.size()))
            throw ValidationError(where + ": meta.jsonl disagrees with the number of known files");
        auto meta_doc = [&](const json* d, std::string default_id) {
            std::pair<std::string, std::optional<std::string>> r{std::move(default_id), std::nullopt};
            if (d) {
                if (auto id = optional_string(*d, "id")) r.first = *id;
                r.second = optional_string(*d, "author_hint");
            }
            return r;
        };

        auto [uid, uhint] = meta_doc(m ? &(*m)["unknown"] : nullptr, pid + "/unknown");
        Document unknown(uid, checked_text(read_file(dir / "unknown.txt"), uid, pid), uhint);
        std::vector<Document> known;
        for (std::size_t i = 0; i < known_files.size(); ++i) {
            std::string stem = fs::path(known_files[i]).stem().string();
            auto [kid, khint] = meta_doc(m ? &(*m)["known"][i] : nullptr, pid + "/" + stem);
            known.emplace_back(kid, checked_text(read_file(dir / known_files[i]), kid, pid), khint);
        }
        std::optional<Label> label;
        if (has_truth) label = labels.at(pid);
        problems.emplace_back(pid, std::move(unknown), std::move(known), label);
    }
    return Corpus(root.filename().string(), std::move(problems));
}

inline void write_pan_dirs(const Corpus& corpus, const std::filesystem::path& root) {
    namespace fs = std::filesystem;
    trace::Pause untraced;
    fs::create_directories(root);
    std::string truth, meta;
    const bool labeled = !corpus.empty() && corpus.fully_labeled();
    for (const auto& p : corpus.problems()) {
        check_path_component(p.id());
        fs::path dir = root / p.id();
        fs::create_directories(dir);
        write_file_atomic(dir / "unknown.txt", p.unknown().text());
        const std::size_t width = std::max<std::size_t>(2, std::to_string(p.known().size()).size());
        json mk = json::array();
        for (std::size_t i = 0; i < p.known().size(); ++i) {
            std::string num = std::to_string(i + 1);
            write_file_atomic(dir / ("known" + std::string(width - num.size(), '0') + num + ".txt"), p.known()[i].text());
            const auto& d = p.known()[i];
            mk.push_back({{"id", d.id()}, {"author_hint", d.author_hint() ? json(*d.author_hint()) : json(nullptr)}});
        }
        const auto& u = p.unknown();
        json m = {{"problem", p.id()},
                  {"unknown", {{"id", u.id()}, {"author_hint", u.author_hint() ? json(*u.author_hint()) : json(nullptr)}}},
                  {"known", mk}};
        meta += m.dump() + "\n";
        if (labeled) truth += json{{"problem", p.id()}, {"label", to_string(*p.label())}}.dump() + "\n";
    }
    write_file_atomic(root / "meta.jsonl", meta);
    if (labeled) write_file_atomic(root / "truth.jsonl", truth);
}

}  // namespace io

/// An output directory of the CLI (manifest.json next to corpus.jsonl or
/// corpus/) stands for the corpus inside it; other paths are returned as is.
inline std::filesystem::path resolve_corpus_path(const std::filesystem::path& path) {
    namespace fs = std::filesystem;
    if (!fs::is_directory(path)) return path;
    if (fs::is_regular_file(path / "corpus.jsonl")) return path / "corpus.jsonl";
    if (fs::is_regular_file(path / "manifest.json") && fs::is_directory(path / "corpus")) return path / "corpus";
    return path;
}

inline Corpus load_corpus(const std::filesystem::path& path, std::optional<Layout> layout = std::nullopt) {
    if (!std::filesystem::exists(path)) throw ValidationError("corpus path '" + path.string() + "' does not exist");
    const auto resolved = layout ? path : resolve_corpus_path(path);
    Layout l = layout.value_or(detect_layout(resolved));
    Corpus c = l == Layout::pan_dirs ? io::load_pan_dirs(resolved) : io::load_jsonl(resolved);
    if (resolved == path) return c;
    auto dir = path.lexically_normal();
    if (dir.filename().empty()) dir = dir.parent_path();
    return Corpus(dir.filename().string(), c.problems());  // named after the output directory
}

inline void write_corpus(const Corpus& corpus, const std::filesystem::path& path, Layout layout) {
    if (layout == Layout::jsonl) io::write_file_atomic(path, io::to_jsonl(corpus));
    else io::write_pan_dirs(corpus, path);
}

}  // namespace averify
