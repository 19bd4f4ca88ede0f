#include "gmbt/engine.hpp"

#include <algorithm>
#include <chrono>
#include <deque>
#include <set>

#include "gmbt/errors.hpp"
#include "gmbt/random.hpp"

namespace gmbt {

std::string_view to_string(Phase phase) {
    switch (phase) {
        case Phase::Precondition: return "precondition";
        case Phase::Action: return "action";
        case Phase::Postcondition: return "postcondition";
    }
    return "unknown";
}

std::string_view to_string(Outcome outcome) {
    switch (outcome) {
        case Outcome::Pass: return "pass";
        case Outcome::PostconditionFailed: return "postcondition_failed";
        case Outcome::ExecutorError: return "executor_error";
        case Outcome::Exhausted: return "exhausted";
    }
    return "unknown";
}

std::optional<std::string> path_invalid_reason(const Model& model, const TestCase& test_case) {
    const Transition* previous = nullptr;
    for (std::size_t i = 0; i < test_case.path.size(); ++i) {
        int id = test_case.path[i];
        const Transition* t = model.find_transition(id);
        if (t == nullptr) {
            return "unknown transition id " + std::to_string(id) + " at index " +
                   std::to_string(i);
        }
        if (previous == nullptr) {
            const ModelState* origin = model.find_state(t->origin);
            if (origin == nullptr || !origin->is_start) {
                return "path does not begin at a start state ('" + t->origin + "')";
            }
        } else if (previous->target != t->origin) {
            return "path is disconnected at index " + std::to_string(i) + ": '" +
                   previous->target + "' != '" + t->origin + "'";
        }
        previous = t;
    }
    return std::nullopt;
}

namespace {

/// Runs one transition's action and postcondition steps. Returns nullopt on
/// success, otherwise the verdict ending the test.
std::optional<Verdict> fire_transition(const Transition& transition, StepExecutor& executor,
                                       int test_index, int path_index) {
    for (const std::string& text : transition.actions) {
        StepResult result = executor.step(Phase::Action, text, test_index, path_index);
        if (!result.is_ok()) {
            Verdict verdict;
            verdict.outcome = Outcome::ExecutorError;
            verdict.failed_at = path_index;
            verdict.failed_step = text;
            verdict.detail = result.is_fail() ? "action step failed: " + result.reason
                                              : result.reason;
            return verdict;
        }
    }
    for (const std::string& text : transition.postconditions) {
        StepResult result = executor.step(Phase::Postcondition, text, test_index, path_index);
        if (result.is_fail()) {
            Verdict verdict;
            verdict.outcome = Outcome::PostconditionFailed;
            verdict.failed_at = path_index;
            verdict.failed_step = text;
            verdict.detail = result.reason;
            return verdict;
        }
        if (result.is_error()) {
            Verdict verdict;
            verdict.outcome = Outcome::ExecutorError;
            verdict.failed_at = path_index;
            verdict.failed_step = text;
            verdict.detail = result.reason;
            return verdict;
        }
    }
    return std::nullopt;
}

Verdict reset_error(const StepResult& result, int path_index) {
    Verdict verdict;
    verdict.outcome = Outcome::ExecutorError;
    verdict.failed_at = path_index;
    verdict.detail = "reset: " + (result.reason.empty() ? "executor reported failure"
                                                        : result.reason);
    return verdict;
}

Verdict transport_error(const ProcessError& error, int path_index) {
    Verdict verdict;
    verdict.outcome = Outcome::ExecutorError;
    verdict.failed_at = path_index;
    verdict.detail = error.what();
    return verdict;
}

struct TestRun {
    TestCase test_case;
    Verdict verdict;
};

TestRun run_one_test(const Model& model, StepExecutor& executor, const GenConfig& config,
                     int test_index, const std::vector<std::string>& starts,
                     std::set<std::string>& visited, std::set<int>& fired) {
    SplitMix64 rng = per_test_rng(config.seed, static_cast<std::uint64_t>(test_index));
    TestRun run;
    try {
        StepResult reset = executor.reset();
        if (!reset.is_ok()) {
            run.verdict = reset_error(reset, 0);
            return run;
        }

        std::string current = starts[rng.below(starts.size())];
        visited.insert(current);

        while (static_cast<int>(run.test_case.path.size()) < config.max_length) {
            int frontier = static_cast<int>(run.test_case.path.size());
            std::vector<int> enabled;
            for (int id : model.outgoing(current)) {
                bool keep = true;
                if (config.precondition_probe) {
                    for (const std::string& text : model.find_transition(id)->preconditions) {
                        StepResult probe =
                            executor.step(Phase::Precondition, text, test_index, frontier);
                        if (probe.is_ok()) continue;
                        if (probe.is_fail()) {
                            keep = false;
                            break;
                        }
                        run.verdict.outcome = Outcome::ExecutorError;
                        run.verdict.failed_at = frontier;
                        run.verdict.failed_step = text;
                        run.verdict.detail = probe.reason;
                        return run;
                    }
                }
                if (keep) enabled.push_back(id);
            }

            if (enabled.empty()) {
                run.verdict.outcome = Outcome::Exhausted;
                run.verdict.detail = "no enabled transition out of '" + current + "'";
                return run;
            }

            int pick = enabled[rng.below(enabled.size())];
            const Transition& transition = *model.find_transition(pick);
            run.test_case.path.push_back(pick);
            fired.insert(pick);
            visited.insert(transition.origin);
            visited.insert(transition.target);

            auto failure = fire_transition(transition, executor, test_index, frontier);
            if (failure) {
                run.verdict = std::move(*failure);
                return run;
            }
            current = transition.target;
        }
    } catch (const ProcessError& error) {
        run.verdict = transport_error(error, static_cast<int>(run.test_case.path.size()));
    }
    return run;
}

}  // namespace

RunReport generate_and_run(const Model& model, StepExecutor& executor, const GenConfig& config) {
    std::vector<std::string> starts = model.start_states();
    if (starts.empty()) {
        throw NoStartStateError("model has no start state, cannot generate tests");
    }

    auto begin = std::chrono::steady_clock::now();
    RunReport report;
    report.config = config;

    std::set<std::string> visited;
    std::set<int> fired;

    for (int test_index = 0; test_index < config.num_tests; ++test_index) {
        TestRun run = run_one_test(model, executor, config, test_index, starts, visited, fired);
        Outcome outcome = run.verdict.outcome;
        report.executed.emplace_back(run.test_case, std::move(run.verdict));

        if (outcome == Outcome::PostconditionFailed) {
            report.first_failure = run.test_case;
            if (config.shrink_budget > 0) {
                try {
                    report.shrunk_failure =
                        shrink(model, executor, run.test_case, config.shrink_budget);
                } catch (const NotFailingError&) {
                    report.shrunk_failure = run.test_case;  // flaky failure, keep the original
                }
            }
            break;
        }
        if (outcome == Outcome::ExecutorError) break;
    }

    report.coverage.states_visited.assign(visited.begin(), visited.end());
    report.coverage.transitions_fired.assign(fired.begin(), fired.end());
    if (!model.transitions().empty()) {
        report.coverage.transition_coverage =
            static_cast<double>(fired.size()) / static_cast<double>(model.transitions().size());
    }
    report.wall_time_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - begin).count();
    return report;
}

Verdict replay(const Model& model, StepExecutor& executor, const TestCase& test_case,
               int test_index) {
    if (auto reason = path_invalid_reason(model, test_case)) {
        throw InvalidPathError(*reason);
    }

    Verdict verdict;
    int progress = 0;
    try {
        StepResult reset = executor.reset();
        if (!reset.is_ok()) return reset_error(reset, 0);

        for (std::size_t i = 0; i < test_case.path.size(); ++i) {
            progress = static_cast<int>(i);
            const Transition& transition = *model.find_transition(test_case.path[i]);

            for (const std::string& text : transition.preconditions) {
                StepResult probe = executor.step(Phase::Precondition, text, test_index,
                                                 progress);
                if (probe.is_ok()) continue;
                if (probe.is_fail()) {
                    verdict.outcome = Outcome::Exhausted;
                    verdict.detail = "precondition not enabled at index " + std::to_string(i) +
                                     ": '" + text + "'";
                    return verdict;
                }
                verdict.outcome = Outcome::ExecutorError;
                verdict.failed_at = progress;
                verdict.failed_step = text;
                verdict.detail = probe.reason;
                return verdict;
            }

            auto failure = fire_transition(transition, executor, test_index, progress);
            if (failure) return *failure;
        }
    } catch (const ProcessError& error) {
        return transport_error(error, progress);
    }
    return verdict;
}

namespace {

/// True when the replayed candidate fails on the watched transition id;
/// truncates the candidate to the failing index so later occurrences of the
/// same id still produce minimal results.
bool fails_on(const Model& model, StepExecutor& executor, TestCase& candidate, int fail_id) {
    Verdict verdict = replay(model, executor, candidate);
    if (verdict.outcome != Outcome::PostconditionFailed) return false;
    auto at = static_cast<std::size_t>(*verdict.failed_at);
    if (candidate.path[at] != fail_id) return false;
    candidate.path.resize(at + 1);
    return true;
}

bool better(const TestCase& a, const TestCase& b) {
    if (a.path.size() != b.path.size()) return a.path.size() < b.path.size();
    return a.path < b.path;
}

}  // namespace

TestCase shrink(const Model& model, StepExecutor& executor, const TestCase& failing, int budget) {
    Verdict verdict = replay(model, executor, failing);
    if (verdict.outcome != Outcome::PostconditionFailed) {
        throw NotFailingError("test case does not fail on replay (outcome: " +
                              std::string(to_string(verdict.outcome)) + ")");
    }

    // The verification replay already proved the prefix up to the failure, so
    // dropping anything after it is free.
    TestCase best = failing;
    best.path.resize(static_cast<std::size_t>(*verdict.failed_at) + 1);
    int fail_id = best.path.back();

    // Phase 1: elide cycles. Removing path[i..j) when both transitions leave
    // the same state keeps the path connected.
    bool improved = true;
    while (improved && budget > 0) {
        improved = false;
        std::size_t n = best.path.size();
        for (std::size_t i = 0; i + 1 < n && !improved; ++i) {
            const std::string& origin_i = model.find_transition(best.path[i])->origin;
            for (std::size_t j = n - 1; j > i && budget > 0; --j) {
                if (model.find_transition(best.path[j])->origin != origin_i) continue;
                TestCase candidate;
                candidate.path.assign(best.path.begin(), best.path.begin() + i);
                candidate.path.insert(candidate.path.end(), best.path.begin() + j,
                                      best.path.end());
                --budget;
                if (fails_on(model, executor, candidate, fail_id) &&
                    better(candidate, best)) {
                    best = std::move(candidate);
                    improved = true;
                    break;
                }
            }
        }
    }

    // Phase 2: breadth-first search for short prefixes from a start state to
    // the failing transition's origin, shortest first and within a length in
    // ascending id order, so the first hit is the best possible one.
    const std::string& fail_origin = model.find_transition(fail_id)->origin;
    std::size_t expansion_cap = std::max<std::size_t>(
        10'000, 50u * static_cast<std::size_t>(std::max(budget, 0)));
    std::size_t expanded = 0;

    struct Node {
        std::vector<int> prefix;
        std::string at;
    };
    std::deque<Node> level;
    for (const std::string& start : model.start_states()) {
        level.push_back({{}, start});
    }

    while (!level.empty() && budget > 0 && expanded < expansion_cap) {
        // Stop once even a hit at this level could not improve on best.
        if (level.front().prefix.size() + 1 >= best.path.size()) break;

        for (const Node& node : level) {
            if (node.at != fail_origin) continue;
            TestCase candidate;
            candidate.path = node.prefix;
            candidate.path.push_back(fail_id);
            --budget;
            if (fails_on(model, executor, candidate, fail_id) && better(candidate, best)) {
                return candidate;
            }
            if (budget == 0) break;
        }

        std::deque<Node> next;
        for (const Node& node : level) {
            for (int id : model.outgoing(node.at)) {
                if (expanded >= expansion_cap) break;
                ++expanded;
                Node child = node;
                child.prefix.push_back(id);
                child.at = model.find_transition(id)->target;
                next.push_back(std::move(child));
            }
        }
        level = std::move(next);
    }
    return best;
}

std::vector<TestCase> enumerate_paths(const Model& model, int max_len) {
    std::vector<TestCase> all;
    if (max_len <= 0) return all;

    std::vector<std::vector<int>> level;
    for (const Transition& t : model.transitions()) {
        const ModelState* origin = model.find_state(t.origin);
        if (origin != nullptr && origin->is_start) level.push_back({t.id});
    }
    std::sort(level.begin(), level.end());

    for (int len = 1; len <= max_len && !level.empty(); ++len) {
        for (const std::vector<int>& path : level) {
            all.push_back({path});
        }
        if (len == max_len) break;
        std::vector<std::vector<int>> next;
        for (const std::vector<int>& path : level) {
            const Transition& last = *model.find_transition(path.back());
            for (int id : model.outgoing(last.target)) {
                std::vector<int> extended = path;
                extended.push_back(id);
                next.push_back(std::move(extended));
            }
        }
        std::sort(next.begin(), next.end());
        level = std::move(next);
    }
    return all;
}

}  // namespace gmbt
