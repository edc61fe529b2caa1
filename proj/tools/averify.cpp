// averify: command-line front end for corpora, verifiers, evaluation and audit.
//
// Exit codes: 0 success, 2 invalid input or failed audit, 3 internal error.
// Every error is reported on stderr as one line starting with "error:".

#include <charconv>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <memory>
#include <set>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "averify/averify.hpp"

namespace fs = std::filesystem;
using json = nlohmann::json;
using namespace averify;

namespace {

constexpr const char* kVersion = "0.1.0";

// ---------------------------------------------------------------------------
// config files: one "key = value" per line, '#' starts a comment

const std::set<std::string>& general_keys() {
    static const std::set<std::string> keys{"method",  "seed",     "runs",        "jobs",       "size",
                                            "fraction", "known",   "layout",      "authors",    "problems",
                                            "doc_len", "unknown_len", "separation", "format",   "seeds"};
    return keys;
}

ParamMap read_config(const std::string& path) {
    ParamMap out;
    if (path.empty()) return out;
    std::istringstream in(io::read_file(path));
    std::string line;
    std::size_t line_no = 0;
    auto trim = [](std::string s) {
        const auto b = s.find_first_not_of(" \t\r");
        if (b == std::string::npos) return std::string();
        return s.substr(b, s.find_last_not_of(" \t\r") - b + 1);
    };
    while (std::getline(in, line)) {
        ++line_no;
        if (auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        const std::string where = path + ":" + std::to_string(line_no);
        if (eq == std::string::npos) throw ValidationError(where + ": expected key = value");
        std::string key = trim(line.substr(0, eq)), value = trim(line.substr(eq + 1));
        if (key.empty()) throw ValidationError(where + ": empty key");
        if (!general_keys().count(key)) {
            try {
                validate_parameter_keys({{key, value}});
            } catch (const ValidationError&) {
                throw ValidationError(where + ": unknown config key '" + key + "'");
            }
        }
        if (!out.emplace(key, value).second) throw ValidationError(where + ": duplicate key '" + key + "'");
    }
    return out;
}

/// Fills unset flags from the config; flags given on the command line win.
class Settings {
public:
    Settings(CLI::App& app, const ParamMap& config) : app_(app), config_(config) {}

    template <class T>
    void fill(const std::string& flag, const std::string& key, T& field) const {
        if (app_.count(flag) > 0) return;
        auto it = config_.find(key);
        if (it == config_.end()) return;
        const std::string& v = it->second;
        bool ok = true;
        if constexpr (std::is_same_v<T, std::string>) {
            field = v;
        } else if constexpr (std::is_same_v<T, double>) {
            try {
                std::size_t used = 0;
                field = std::stod(v, &used);
                ok = used == v.size();
            } catch (const std::exception&) {
                ok = false;
            }
        } else {
            auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), field);
            ok = ec == std::errc() && p == v.data() + v.size();
        }
        if (!ok) throw ValidationError("config key '" + key + "' has an invalid value '" + v + "'");
    }

    /// Namespaced method parameters: config first, then --param overrides.
    ParamMap method_params(const std::vector<std::string>& flags) const {
        ParamMap p;
        for (const auto& [k, v] : config_)
            if (!general_keys().count(k)) p[k] = v;
        for (const auto& item : flags) {
            const auto eq = item.find('=');
            if (eq == std::string::npos || eq == 0)
                throw ValidationError("--param expects key=value, got '" + item + "'");
            p[item.substr(0, eq)] = item.substr(eq + 1);
        }
        validate_parameter_keys(p);
        return p;
    }

private:
    CLI::App& app_;
    const ParamMap& config_;
};

// ---------------------------------------------------------------------------
// artifacts

json manifest(const std::string& command, json parameters, json inputs, json outputs) {
    return {{"tool", "averify"},
            {"version", kVersion},
            {"libraries",
             {{"nlohmann_json", std::to_string(NLOHMANN_JSON_VERSION_MAJOR) + "." +
                                    std::to_string(NLOHMANN_JSON_VERSION_MINOR) + "." +
                                    std::to_string(NLOHMANN_JSON_VERSION_PATCH)},
              {"CLI11", CLI11_VERSION}}},
            {"command", command},
            {"parameters", std::move(parameters)},
            {"inputs", std::move(inputs)},
            {"outputs", std::move(outputs)}};
}

void write_json(const fs::path& p, const json& j) { io::write_file_atomic(p, j.dump(2) + "\n"); }

fs::path require_out(const std::string& out) {
    if (out.empty()) throw ValidationError("--out directory is required");
    fs::create_directories(out);
    return out;
}

/// Writes the corpus under dir as corpus.jsonl or corpus/; returns the path.
fs::path write_corpus_artifact(const Corpus& c, const fs::path& dir, const std::string& name, Layout layout) {
    fs::path p = dir / (layout == Layout::jsonl ? name + ".jsonl" : name);
    if (layout == Layout::pan_dirs && fs::exists(p)) fs::remove_all(p);
    write_corpus(c, p, layout);
    return p;
}

std::string summary_line(const Corpus& c) {
    auto n = c.label_counts();
    return "problems=" + std::to_string(c.size()) + " balanced=" + (c.balanced() ? "true" : "false") +
           " y=" + std::to_string(n.y) + " n=" + std::to_string(n.n) + " unlabeled=" + std::to_string(n.unlabeled) +
           " corpus=" + c.id();
}

std::string metrics_line(const MetricsReport& r) {
    std::string s = "accuracy=" + format3(r.mean.accuracy) + " kappa=" + format3(r.mean.kappa) +
                    " f1=" + format3(r.mean.f1) + " tp=" + std::to_string(r.matrix.tp) +
                    " fn=" + std::to_string(r.matrix.fn) + " fp=" + std::to_string(r.matrix.fp) +
                    " tn=" + std::to_string(r.matrix.tn);
    if (r.dispersion)
        s += " runs=" + std::to_string(r.runs) + " sd_accuracy=" + format3(r.dispersion->accuracy) +
             " sd_kappa=" + format3(r.dispersion->kappa) + " sd_f1=" + format3(r.dispersion->f1);
    return s;
}

std::vector<VerdictRecord> read_verdicts(const fs::path& p) {
    return parse_verdicts_jsonl(io::read_file(p), p.string());
}

/// Verdict files of a run directory: verdicts.jsonl or verdicts-run1..N.jsonl.
std::vector<fs::path> verdict_files(const fs::path& dir) {
    if (fs::is_regular_file(dir / "verdicts.jsonl")) return {dir / "verdicts.jsonl"};
    std::vector<fs::path> out;
    for (std::size_t r = 1; fs::is_regular_file(dir / ("verdicts-run" + std::to_string(r) + ".jsonl")); ++r)
        out.push_back(dir / ("verdicts-run" + std::to_string(r) + ".jsonl"));
    if (out.empty()) throw ValidationError("no verdict files in '" + dir.string() + "'");
    return out;
}

MetricsReport report_from_files(const Corpus& corpus, const std::vector<fs::path>& files) {
    std::vector<ConfusionMatrix> matrices;
    for (const auto& f : files) {
        try {
            matrices.push_back(score_verdicts(corpus, read_verdicts(f)));
        } catch (const ValidationError& e) {
            throw ValidationError(f.string() + ": " + e.what());
        }
    }
    return aggregate(matrices);
}

ConfusionMatrix parse_matrix(const std::string& s) {
    std::vector<std::uint64_t> v;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ',')) {
        std::uint64_t x = 0;
        auto [p, ec] = std::from_chars(item.data(), item.data() + item.size(), x);
        if (ec != std::errc() || p != item.data() + item.size() || item.empty())
            throw ValidationError("--matrix expects tp,fn,fp,tn as non-negative integers, got '" + s + "'");
        v.push_back(x);
    }
    if (v.size() != 4) throw ValidationError("--matrix expects exactly four counts tp,fn,fp,tn");
    return {v[0], v[1], v[2], v[3]};
}

std::vector<std::uint64_t> parse_seeds(const std::string& s) {
    std::vector<std::uint64_t> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ',')) {
        std::uint64_t x = 0;
        auto [p, ec] = std::from_chars(item.data(), item.data() + item.size(), x);
        if (ec != std::errc() || p != item.data() + item.size() || item.empty())
            throw ValidationError("--seeds expects comma-separated integers, got '" + s + "'");
        out.push_back(x);
    }
    return out;
}

Layout output_layout(const std::string& s) { return parse_layout(s); }

// ---------------------------------------------------------------------------
// commands

struct Global {
    std::string config;
    std::size_t jobs = 1;
};

struct Ingest {
    std::string corpus;
    bool require_labels = false;
    void operator()(CLI::App&, const ParamMap&, const Global&) const {
        Corpus c = load_corpus(corpus);
        if (require_labels && !c.fully_labeled())
            throw ValidationError("corpus '" + corpus + "' has " + std::to_string(c.label_counts().unlabeled) +
                                  " problem(s) without truth labels (missing or incomplete truth file)");
        std::cout << summary_line(c) << "\n";
    }
};

struct Resample {
    std::string corpus, out, layout = "jsonl";
    std::size_t size = 0, known = 3;
    std::uint64_t seed = 1;
    void operator()(CLI::App& app, const ParamMap& cfg, const Global&) {
        Settings s(app, cfg);
        s.fill("--size", "size", size);
        s.fill("--seed", "seed", seed);
        s.fill("--known", "known", known);
        s.fill("--layout", "layout", layout);
        if (app.count("--size") == 0 && !cfg.count("size")) throw ValidationError("--size is required");
        const Layout l = output_layout(layout);
        const fs::path dir = require_out(out);
        Corpus src = load_corpus(corpus);
        Corpus r = resample_balanced(src, size, seed, {known, src.id() + "-resampled-" + std::to_string(size)});
        auto path = write_corpus_artifact(r, dir, "corpus", l);
        write_json(dir / "manifest.json",
                   manifest("resample", {{"size", size}, {"seed", seed}, {"known", known}, {"layout", layout}},
                            {{"corpus", corpus}}, {{"corpus", path.string()}}));
        std::cout << summary_line(r) << "\n";
    }
};

struct Split {
    std::string corpus, out, layout = "jsonl";
    double fraction = 0.3;
    std::uint64_t seed = 1;
    void operator()(CLI::App& app, const ParamMap& cfg, const Global&) {
        Settings s(app, cfg);
        s.fill("--fraction", "fraction", fraction);
        s.fill("--seed", "seed", seed);
        s.fill("--layout", "layout", layout);
        const Layout l = output_layout(layout);
        const fs::path dir = require_out(out);
        auto [train, eval] = split_train_eval(load_corpus(corpus), fraction, seed);
        auto tp = write_corpus_artifact(train, dir, "train", l);
        auto ep = write_corpus_artifact(eval, dir, "eval", l);
        write_json(dir / "manifest.json",
                   manifest("split", {{"fraction", fraction}, {"seed", seed}, {"layout", layout}}, {{"corpus", corpus}},
                            {{"train", tp.string()}, {"eval", ep.string()}}));
        std::cout << "train: " << summary_line(train) << "\neval: " << summary_line(eval) << "\n";
    }
};

struct Train {
    std::string corpus, method, out;
    std::vector<std::string> params;
    std::uint64_t seed = 1;
    void operator()(CLI::App& app, const ParamMap& cfg, const Global& g) {
        Settings s(app, cfg);
        s.fill("--method", "method", method);
        s.fill("--seed", "seed", seed);
        if (method.empty()) throw ValidationError("--method is required");
        auto p = s.method_params(params);
        const fs::path dir = require_out(out);
        auto v = make_verifier(method, p);
        set_fit_jobs(*v, g.jobs);
        Corpus train = load_corpus(corpus);
        if (auto* i = dynamic_cast<IntrinsicVerifier*>(v.get()))
            i->fit(train, seed);
        else if (auto* e = dynamic_cast<ExtrinsicVerifier*>(v.get()); e && e->tunable())
            e->fit(train, seed);
        else
            throw ValidationError(v->descriptor().name + " has no trainable decision criterion");
        write_json(dir / "model.json", save_model(*v, {train.id(), train.size(), seed}));
        write_json(dir / "manifest.json",
                   manifest("train", {{"method", v->descriptor().name}, {"seed", seed}, {"parameters", v->parameters()}},
                            {{"corpus", corpus}}, {{"model", (dir / "model.json").string()}}));
        std::cout << "model: " << (dir / "model.json").string() << "\n";
    }
};

struct Run {
    std::string corpus, method, model, train, out;
    std::vector<std::string> params;
    std::uint64_t seed = 1;
    std::size_t runs = 1;
    void operator()(CLI::App& app, const ParamMap& cfg, const Global& g) {
        Settings s(app, cfg);
        s.fill("--method", "method", method);
        s.fill("--seed", "seed", seed);
        s.fill("--runs", "runs", runs);
        if (runs == 0) throw ValidationError("--runs must be at least 1");
        if (method.empty() == model.empty()) throw ValidationError("give exactly one of --method or --model");
        const fs::path dir = require_out(out);
        Corpus c = load_corpus(corpus);

        std::unique_ptr<Verifier> v;
        if (!model.empty()) {
            if (!params.empty()) throw ValidationError("--param cannot override a saved model");
            json j;
            try {
                j = json::parse(io::read_file(model));
            } catch (const json::exception& e) {
                throw ValidationError("'" + model + "' is not valid JSON: " + e.what());
            }
            v = load_model(j);
        } else {
            v = make_verifier(method, s.method_params(params), &c);
            if (!train.empty()) {
                Corpus t = load_corpus(train);
                set_fit_jobs(*v, g.jobs);
                if (auto* i = dynamic_cast<IntrinsicVerifier*>(v.get()))
                    i->fit(t, seed);
                else if (auto* e = dynamic_cast<ExtrinsicVerifier*>(v.get()); e && e->tunable())
                    e->fit(t, seed);
                else
                    throw ValidationError(v->descriptor().name + " has no trainable decision criterion");
            }
        }
        const MethodDescriptor d = v->descriptor();
        if (runs > 1 && d.deterministic)
            warn(d.name + " is deterministic; " + std::to_string(runs) + " runs will repeat identical results");

        std::vector<std::vector<VerdictRecord>> all;
        const auto start = std::chrono::steady_clock::now();
        for (std::size_t r = 0; r < runs; ++r) all.push_back(run_verifier(*v, c, seed, r, g.jobs));
        const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

        json files = json::array();
        for (std::size_t r = 0; r < runs; ++r) {
            fs::path f = dir / (runs == 1 ? "verdicts.jsonl" : "verdicts-run" + std::to_string(r + 1) + ".jsonl");
            io::write_file_atomic(f, verdicts_to_jsonl(all[r]));
            files.push_back(f.string());
        }
        json outputs{{"verdicts", files}};
        if (c.fully_labeled() && !c.empty()) {
            std::vector<ConfusionMatrix> matrices;
            for (const auto& vs : all) matrices.push_back(score_verdicts(c, vs));
            MetricsReport rep = aggregate(matrices);
            rep.method = d.name;
            rep.markers = d.markers();
            rep.runtime_seconds = seconds;
            json j = rep.to_json();
            j.erase("runtime_seconds");  // wall clock lives in timing.json so reports stay reproducible
            write_json(dir / "report.json", j);
            outputs["report"] = (dir / "report.json").string();
            std::cout << d.name << d.markers() << " " << metrics_line(rep) << "\n";
        } else {
            std::cout << d.name << d.markers() << " verdicts=" << c.size() << " runs=" << runs << "\n";
        }
        write_json(dir / "timing.json", {{"runtime_seconds", seconds}, {"runs", runs}, {"jobs", g.jobs}});
        outputs["timing"] = (dir / "timing.json").string();
        write_json(dir / "manifest.json",
                   manifest("run",
                            {{"method", d.name},
                             {"descriptor", d.summary()},
                             {"seed", seed},
                             {"runs", runs},
                             {"parameters", v->parameters()},
                             {"criterion", v->criterion().to_json()}},
                            {{"corpus", corpus}, {"model", model}, {"train", train}}, outputs));
    }
};

struct Eval {
    std::string corpus, matrix, out;
    std::vector<std::string> verdicts;
    void operator()(CLI::App&, const ParamMap&, const Global&) const {
        MetricsReport rep;
        if (!matrix.empty()) {
            if (!verdicts.empty() || !corpus.empty()) throw ValidationError("--matrix cannot be combined with verdicts");
            rep = aggregate({parse_matrix(matrix)});
        } else {
            if (corpus.empty() || verdicts.empty())
                throw ValidationError("eval needs a corpus and at least one --verdicts file (or --matrix)");
            std::vector<fs::path> files;
            for (const auto& v : verdicts) {
                if (fs::is_directory(v)) {
                    auto more = verdict_files(v);
                    files.insert(files.end(), more.begin(), more.end());
                } else {
                    files.emplace_back(v);
                }
            }
            rep = report_from_files(load_corpus(corpus), files);
        }
        std::cout << metrics_line(rep) << "\n";
        if (!out.empty()) write_json(require_out(out) / "report.json", rep.to_json());
    }
};

struct Compare {
    std::string corpus, format = "markdown", out;
    std::vector<std::string> entries;
    void operator()(CLI::App& app, const ParamMap& cfg, const Global&) {
        Settings(app, cfg).fill("--format", "format", format);
        if (format != "markdown" && format != "tsv") throw ValidationError("--format must be markdown or tsv");
        if (entries.empty()) throw ValidationError("compare needs at least one [name=]path entry");
        Corpus c = load_corpus(corpus);
        std::vector<MetricsReport> reports;
        std::set<std::string> names;
        for (const auto& entry : entries) {
            std::string name;
            fs::path path = entry;
            if (auto eq = entry.find('='); eq != std::string::npos) name = entry.substr(0, eq), path = entry.substr(eq + 1);
            std::vector<fs::path> files;
            std::string method;
            double runtime = 0.0;
            if (fs::is_directory(path)) {
                files = verdict_files(path);
                if (fs::is_regular_file(path / "manifest.json"))
                    method = json::parse(io::read_file(path / "manifest.json")).at("parameters").value("method", "");
                if (fs::is_regular_file(path / "timing.json"))
                    runtime = json::parse(io::read_file(path / "timing.json")).value("runtime_seconds", 0.0);
            } else {
                files = {path};
            }
            if (name.empty()) name = !method.empty() ? method : path.stem().string();
            if (!names.insert(name).second) throw ValidationError("duplicate compare entry '" + name + "'");
            MetricsReport r = report_from_files(c, files);
            r.method = name;
            r.runtime_seconds = runtime;
            const std::string probe = !method.empty() ? method : name;
            try {
                r.markers = make_verifier(probe)->descriptor().markers();
            } catch (const ValidationError&) {
                // not a shipped method: no markers
            }
            reports.push_back(std::move(r));
        }
        auto ranked = rank_report(std::move(reports));
        std::cout << (format == "tsv" ? rank_table_tsv(ranked) : rank_table_markdown(ranked));
        if (!out.empty()) {
            const fs::path dir = require_out(out);
            io::write_file_atomic(dir / "ranking.tsv", rank_table_tsv(ranked));
            io::write_file_atomic(dir / "ranking.md", rank_table_markdown(ranked));
        }
    }
};

struct Synth {
    SynthOptions o;
    std::string out, layout = "jsonl";
    void operator()(CLI::App& app, const ParamMap& cfg, const Global&) {
        Settings s(app, cfg);
        s.fill("--authors", "authors", o.authors);
        s.fill("--problems", "problems", o.problems);
        s.fill("--doc-len", "doc_len", o.doc_len);
        s.fill("--unknown-len", "unknown_len", o.unknown_len);
        s.fill("--known", "known", o.known_per_problem);
        s.fill("--separation", "separation", o.separation);
        s.fill("--seed", "seed", o.seed);
        s.fill("--layout", "layout", layout);
        const Layout l = output_layout(layout);
        Corpus c = synthesize_corpus(o);
        const fs::path dir = require_out(out);
        auto path = write_corpus_artifact(c, dir, "corpus", l);
        write_json(dir / "manifest.json", manifest("synth",
                                                   {{"authors", o.authors},
                                                    {"problems", o.problems},
                                                    {"doc_len", o.doc_len},
                                                    {"unknown_len", o.unknown_len},
                                                    {"known", o.known_per_problem},
                                                    {"separation", o.separation},
                                                    {"concentration", o.concentration},
                                                    {"seed", o.seed},
                                                    {"layout", layout}},
                                                   json::object(), {{"corpus", path.string()}}));
        std::cout << summary_line(c) << "\n";
    }
};

struct Audit {
    std::string method, probe, train, seeds = "11,23,47";
    std::vector<std::string> params;
    void operator()(CLI::App& app, const ParamMap& cfg, const Global&) {
        Settings s(app, cfg);
        s.fill("--method", "method", method);
        s.fill("--seeds", "seeds", seeds);
        if (method.empty()) throw ValidationError("--method is required");
        Corpus p;
        if (!probe.empty()) {
            p = load_corpus(probe);
        } else {
            SynthOptions o;
            o.authors = 8;
            o.problems = 12;
            o.doc_len = 800;
            o.seed = 5;
            o.id = "audit-probe";
            p = synthesize_corpus(o);
        }
        std::optional<Corpus> t;
        if (!train.empty()) t = load_corpus(train);
        auto v = make_verifier(method, s.method_params(params), &p);
        AuditOptions ao;
        ao.seeds = parse_seeds(seeds);
        if (t) ao.training = &*t;
        AuditReport r = audit_category(*v, p, ao);
        std::cout << r.observed.name << ": " << r.observed.summary() << "\n";
        for (const auto& n : r.notes) std::cout << "note: " << n << "\n";
        if (!r.passed()) {
            std::string all;
            for (const auto& f : r.failures) all += (all.empty() ? "" : "; ") + f;
            throw ValidationError("audit failed for " + r.declared.name + ": " + all);
        }
    }
};

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Authorship verification toolkit: corpora, verifiers, evaluation and audit", "averify"};
    app.set_version_flag("--version", kVersion);
    app.require_subcommand(1);
    Global g;
    app.add_option("--config", g.config, "key = value file; command-line flags win")->check(CLI::ExistingFile);
    app.add_option("--jobs", g.jobs, "worker threads (0 = all cores)");

    Ingest ingest;
    auto* c_ingest = app.add_subcommand("ingest", "load and validate a corpus, print a summary");
    c_ingest->add_option("corpus", ingest.corpus, "corpus directory (pan-dirs) or .jsonl file")->required();
    c_ingest->add_flag("--require-labels", ingest.require_labels, "fail unless every problem has a truth label");

    Resample resample;
    auto* c_resample = app.add_subcommand("resample", "build a balanced corpus of a given size");
    c_resample->add_option("corpus", resample.corpus)->required();
    c_resample->add_option("--size", resample.size, "number of problems (even)");
    c_resample->add_option("--seed", resample.seed);
    c_resample->add_option("--known", resample.known, "known documents per problem");
    c_resample->add_option("--layout", resample.layout, "output layout: jsonl or pan-dirs");
    c_resample->add_option("--out", resample.out, "output directory")->required();

    Split split;
    auto* c_split = app.add_subcommand("split", "author-disjoint train/eval split");
    c_split->add_option("corpus", split.corpus)->required();
    c_split->add_option("--fraction", split.fraction, "training share of problems");
    c_split->add_option("--seed", split.seed);
    c_split->add_option("--layout", split.layout, "output layout: jsonl or pan-dirs");
    c_split->add_option("--out", split.out, "output directory")->required();

    Train train;
    auto* c_train = app.add_subcommand("train", "fit a verifier's decision criterion and save the model");
    c_train->add_option("corpus", train.corpus, "labeled training corpus")->required();
    c_train->add_option("--method", train.method);
    c_train->add_option("-p,--param", train.params, "method parameter key=value (repeatable)");
    c_train->add_option("--seed", train.seed);
    c_train->add_option("--out", train.out, "output directory")->required();

    Run run;
    auto* c_run = app.add_subcommand("run", "apply a verifier to every problem and write verdicts");
    c_run->add_option("corpus", run.corpus)->required();
    c_run->add_option("--method", run.method);
    c_run->add_option("--model", run.model, "model file written by train")->check(CLI::ExistingFile);
    c_run->add_option("--train", run.train, "fit on this corpus before running");
    c_run->add_option("-p,--param", run.params, "method parameter key=value (repeatable)");
    c_run->add_option("--seed", run.seed);
    c_run->add_option("--runs", run.runs, "repetitions for non-deterministic methods");
    c_run->add_option("--out", run.out, "output directory")->required();

    Eval eval;
    auto* c_eval = app.add_subcommand("eval", "score verdicts against the truth");
    c_eval->add_option("corpus", eval.corpus);
    c_eval->add_option("--verdicts", eval.verdicts, "verdict file or run directory (repeatable: one per run)");
    c_eval->add_option("--matrix", eval.matrix, "score a confusion matrix tp,fn,fp,tn directly");
    c_eval->add_option("--out", eval.out, "write report.json here");

    Compare compare;
    auto* c_compare = app.add_subcommand("compare", "rank several methods' verdicts");
    c_compare->add_option("corpus", compare.corpus)->required();
    c_compare->add_option("entries", compare.entries, "[name=]verdict file or run directory")->required();
    c_compare->add_option("--format", compare.format, "markdown or tsv");
    c_compare->add_option("--out", compare.out, "write ranking.tsv and ranking.md here");

    Synth synth;
    auto* c_synth = app.add_subcommand("synth", "generate a synthetic labeled corpus");
    c_synth->add_option("--authors", synth.o.authors);
    c_synth->add_option("--problems", synth.o.problems);
    c_synth->add_option("--doc-len", synth.o.doc_len, "characters per known document");
    c_synth->add_option("--unknown-len", synth.o.unknown_len, "characters of the unknown document (0 = doc-len)");
    c_synth->add_option("--known", synth.o.known_per_problem, "known documents per problem");
    c_synth->add_option("--separation", synth.o.separation, "0 = indistinguishable authors, 1 = independent");
    c_synth->add_option("--seed", synth.o.seed);
    c_synth->add_option("--layout", synth.layout, "output layout: jsonl or pan-dirs");
    c_synth->add_option("--out", synth.out, "output directory")->required();

    Audit audit;
    auto* c_audit = app.add_subcommand("audit", "check a method's declared category and determinism");
    c_audit->add_option("--method", audit.method);
    c_audit->add_option("-p,--param", audit.params, "method parameter key=value (repeatable)");
    c_audit->add_option("--probe", audit.probe, "probe corpus (default: a small synthetic one)");
    c_audit->add_option("--train", audit.train, "training corpus for intrinsic methods (default: the probe)");
    c_audit->add_option("--seeds", audit.seeds, "comma-separated seeds, at least two");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForVersion& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }

    try {
        const ParamMap cfg = read_config(g.config);
        Settings(app, cfg).fill("--jobs", "jobs", g.jobs);
        if (*c_ingest) ingest(*c_ingest, cfg, g);
        else if (*c_resample) resample(*c_resample, cfg, g);
        else if (*c_split) split(*c_split, cfg, g);
        else if (*c_train) train(*c_train, cfg, g);
        else if (*c_run) run(*c_run, cfg, g);
        else if (*c_eval) eval(*c_eval, cfg, g);
        else if (*c_compare) compare(*c_compare, cfg, g);
        else if (*c_synth) synth(*c_synth, cfg, g);
        else if (*c_audit) audit(*c_audit, cfg, g);
        return 0;
    } catch (const ValidationError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: internal: " << e.what() << "\n";
        return 3;
    }
}
