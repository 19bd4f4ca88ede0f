#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "gmbt/executor.hpp"
#include "gmbt/model.hpp"

namespace gmbt {

struct GenConfig {
    std::uint64_t seed = 0;
    int num_tests = 100;
    int max_length = 10;
    int shrink_budget = 256;       // candidate replay attempts during shrinking
    bool precondition_probe = true;

    bool operator==(const GenConfig&) const = default;
};

/// A generated test: a connected path of transition ids starting at a start
/// state. May be empty.
struct TestCase {
    std::vector<int> path;

    bool operator==(const TestCase&) const = default;
};

enum class Outcome { Pass, PostconditionFailed, ExecutorError, Exhausted };

std::string_view to_string(Outcome outcome);

/// Result of executing one test case. failed_at is present exactly for
/// PostconditionFailed and ExecutorError; it indexes the transition being
/// processed, or equals path.size() when the executor errored before a
/// transition fired (during a probe or a reset).
struct Verdict {
    Outcome outcome = Outcome::Pass;
    std::optional<int> failed_at;
    std::optional<std::string> failed_step;
    std::string detail;

    bool operator==(const Verdict&) const = default;
};

struct CoverageStats {
    std::vector<std::string> states_visited;  // canonical names, sorted
    std::vector<int> transitions_fired;       // sorted ids
    double transition_coverage = 0.0;         // |fired| / |transitions|, 0 for empty models

    bool operator==(const CoverageStats&) const = default;
};

struct RunReport {
    GenConfig config;
    std::vector<std::pair<TestCase, Verdict>> executed;
    std::optional<TestCase> first_failure;
    std::optional<TestCase> shrunk_failure;
    CoverageStats coverage;
    double wall_time_seconds = 0.0;
};

/// Explains why a path violates the TestCase invariants against this model,
/// or nullopt when it is valid. Purely structural, no execution.
std::optional<std::string> path_invalid_reason(const Model& model, const TestCase& test_case);

/// Runs up to config.num_tests random tests online against the executor.
/// Each test resets the SUT, picks a seeded start state, then repeatedly
/// gathers the outgoing transitions of the current state, keeps those whose
/// preconditions all probe ok (all of them when probing is off), fires a
/// seeded uniform choice, and checks its postconditions. A postcondition
/// failure ends the run (after shrinking, when shrink_budget > 0); running
/// out of enabled transitions ends the test as Exhausted, which counts as a
/// pass. Throws NoStartStateError when the model has no start state.
RunReport generate_and_run(const Model& model, StepExecutor& executor, const GenConfig& config);

/// Executes exactly the given path with the same step semantics as
/// generate_and_run but no random choices. A precondition that probes fail
/// yields Exhausted (the index is in the detail). Throws InvalidPathError
/// for structurally invalid paths.
Verdict replay(const Model& model, StepExecutor& executor, const TestCase& test_case,
               int test_index = 0);

/// Searches for a shorter test case failing with the same transition id:
/// first repeatedly elides subpaths that start and end at the same state,
/// then tries BFS-shortest paths from each start state to the failing
/// transition's origin, appending the failing transition, in increasing
/// length. Each candidate replay consumes budget. Returns the best (shortest,
/// then lexicographically smallest) failing case found, or the input
/// unchanged. Throws NotFailingError when the input does not fail on replay.
TestCase shrink(const Model& model, StepExecutor& executor, const TestCase& failing, int budget);

/// All valid nonempty test cases of length <= max_len, in length-then-id
/// order. Exponential; intended as a brute-force oracle on small fixtures.
std::vector<TestCase> enumerate_paths(const Model& model, int max_len);

}  // namespace gmbt
