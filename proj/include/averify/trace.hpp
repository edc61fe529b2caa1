#pragma once

#include <set>
#include <string>

// Data-access tracing used by the category audit. Corpus accessors report
// document-text and label reads to the recorder installed on the current
// thread; with no recorder installed the hooks are a single branch.

namespace averify::trace {

struct Recorder {
    std::set<std::string> documents;  // ids of documents whose text was read
    std::set<std::string> labels;     // ids of problems whose label was read
};

inline thread_local Recorder* active_recorder = nullptr;

inline void note_document(const std::string& id) {
    if (active_recorder) active_recorder->documents.insert(id);
}

inline void note_label(const std::string& problem_id) {
    if (active_recorder) active_recorder->labels.insert(problem_id);
}

/// Installs a recorder for the lifetime of the scope (nesting restores the outer one).
class Scope {
public:
    explicit Scope(Recorder& r) : previous_(active_recorder) { active_recorder = &r; }
    ~Scope() { active_recorder = previous_; }
    Scope(const Scope&) = delete;
    Scope& operator=(const Scope&) = delete;

private:
    Recorder* previous_;
};

/// Suspends tracing, e.g. while the harness itself inspects labels.
class Pause {
public:
    Pause() : previous_(active_recorder) { active_recorder = nullptr; }
    ~Pause() { active_recorder = previous_; }
    Pause(const Pause&) = delete;
    Pause& operator=(const Pause&) = delete;

private:
    Recorder* previous_;
};

}  // namespace averify::trace
