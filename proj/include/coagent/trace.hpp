#pragma once

#include <stdexcept>
#include <vector>

namespace coagent {

enum class CoagentKind { policy, termination };

/// Identifies one coagent: an option's policy or its termination function.
struct CoagentId {
    CoagentKind kind = CoagentKind::policy;
    int option = 0;  // option index in the network enumeration (root = 0)

    bool operator==(const CoagentId&) const = default;
};

/// One coagent decision inside an execution path. For policies the action is
/// the chosen child (or primitive action at the bottom); for terminations it
/// is 1 = terminate, 0 = continue.
struct ExecutionStep {
    CoagentId coagent;
    int state_key = 0;
    int action = 0;

    bool operator==(const ExecutionStep&) const = default;
};

/// The coagent decisions between two consecutive primitive actions.
struct ExecutionPath {
    std::vector<ExecutionStep> steps;
    int primitive = -1;
};

/// Receives execution steps as the network runs. The default sink drops
/// everything so long experiments pay nothing for tracing.
class TraceSink {
public:
    virtual ~TraceSink() = default;
    /// Appends a step; primitive_action = true closes the current path.
    virtual void record(const ExecutionStep& step, bool primitive_action) = 0;
};

class NullSink final : public TraceSink {
public:
    void record(const ExecutionStep&, bool) override {}
};

class RecordingSink final : public TraceSink {
public:
    void record(const ExecutionStep& step, bool primitive_action) override {
        current_.steps.push_back(step);
        if (primitive_action) {
            current_.primitive = step.action;
            paths_.push_back(std::move(current_));
            current_ = {};
        }
    }

    /// Force-closes the open path; a path must contain at least one step.
    void close() {
        if (current_.steps.empty())
            throw std::logic_error("cannot close an empty execution path");
        paths_.push_back(std::move(current_));
        current_ = {};
    }

    const std::vector<ExecutionPath>& paths() const { return paths_; }
    bool open() const { return !current_.steps.empty(); }
    void clear() {
        paths_.clear();
        current_ = {};
    }

private:
    ExecutionPath current_;
    std::vector<ExecutionPath> paths_;
};

}  // namespace coagent
