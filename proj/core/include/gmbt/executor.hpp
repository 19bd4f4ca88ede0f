#pragma once

#include <string>
#include <string_view>

namespace gmbt {

/// Which part of a transition a step belongs to when it is executed.
enum class Phase { Precondition, Action, Postcondition };

std::string_view to_string(Phase phase);

/// Outcome of executing a single step. `fail` on a precondition means "not
/// enabled"; on a postcondition it means the test failed; on an action it is
/// escalated to an executor error by the engine.
struct StepResult {
    enum class Kind { Ok, Fail, Error };

    Kind kind = Kind::Ok;
    std::string reason;

    static StepResult ok() { return {Kind::Ok, {}}; }
    static StepResult fail(std::string reason) { return {Kind::Fail, std::move(reason)}; }
    static StepResult error(std::string reason) { return {Kind::Error, std::move(reason)}; }

    bool is_ok() const { return kind == Kind::Ok; }
    bool is_fail() const { return kind == Kind::Fail; }
    bool is_error() const { return kind == Kind::Error; }

    bool operator==(const StepResult&) const = default;
};

/// Anything that can perform steps against a system under test: the
/// child-process protocol client, the in-process simulator, test fakes.
/// Calls are strictly serialized; implementations may throw ProcessError
/// for transport-level trouble.
class StepExecutor {
public:
    virtual ~StepExecutor() = default;

    /// Returns the system under test to its initial state.
    virtual StepResult reset() = 0;

    /// Executes one step. test_index and path_index say which generated test
    /// and which position within its path the step belongs to.
    virtual StepResult step(Phase phase, const std::string& text, int test_index,
                            int path_index) = 0;
};

}  // namespace gmbt
