// Acceptance gate: one check per release criterion, one PASS/FAIL line each.
// Exits nonzero when any criterion fails or overruns its time budget.
#include <sys/wait.h>
#include <unistd.h>

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

#include "generators.hpp"
#include "gmbt/engine.hpp"
#include "gmbt/errors.hpp"
#include "gmbt/export.hpp"
#include "gmbt/gherkin.hpp"
#include "gmbt/model.hpp"
#include "gmbt/protocol.hpp"
#include "gmbt/random.hpp"
#include "gmbt/sim.hpp"

namespace fs = std::filesystem;
using namespace gmbt;

namespace {

struct CheckFailure {
    std::string message;
};

void check(bool condition, const std::string& message) {
    if (!condition) throw CheckFailure{message};
}

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    check(in.good(), "cannot read " + path);
    std::ostringstream buffer;
    buffer << in.rdbuf();
    return buffer.str();
}

void write_file(const fs::path& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    out << content;
    check(out.good(), "cannot write " + path.string());
}

std::string fixture(const std::string& rel) {
    return std::string(GMBT_FIXTURE_DIR) + "/" + rel;
}

Model build_fixture_model(const std::string& name) {
    std::string path = fixture("features/" + name);
    Feature feature = parse_feature(read_file(path), path);
    BuildReport report = build_model(feature.scenarios, ConventionConfig{}, feature.name);
    check(report.errors.empty(), name + " built with errors");
    return report.model;
}

struct CommandResult {
    int exit_code = -1;
    std::string output;
};

CommandResult run_command(const std::string& command) {
    CommandResult result;
    FILE* pipe = popen((command + " 2>&1").c_str(), "r");
    check(pipe != nullptr, "popen failed");
    char chunk[4096];
    std::size_t n = 0;
    while ((n = fread(chunk, 1, sizeof(chunk), pipe)) > 0) result.output.append(chunk, n);
    int status = pclose(pipe);
    result.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    return result;
}

int g_failures = 0;

void criterion(int number, const std::string& label, double budget_seconds,
               const std::function<void()>& body) {
    auto begin = std::chrono::steady_clock::now();
    std::optional<std::string> failure;
    try {
        body();
    } catch (const CheckFailure& f) {
        failure = f.message;
    } catch (const std::exception& e) {
        failure = std::string("unexpected exception: ") + e.what();
    }
    double elapsed =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - begin).count();
    if (!failure && elapsed > budget_seconds) {
        std::ostringstream over;
        over.setf(std::ios::fixed);
        over.precision(1);
        over << "exceeded the " << budget_seconds << " s budget";
        failure = over.str();
    }

    std::cout.setf(std::ios::fixed);
    std::cout.precision(2);
    std::cout << "criterion " << number << " (" << label << "): "
              << (failure ? "FAIL" : "PASS") << " [" << elapsed << " s]";
    if (failure) {
        std::cout << " " << *failure;
        ++g_failures;
    }
    std::cout << "\n" << std::flush;
}

// --- criterion bodies -------------------------------------------------------

void golden_model() {
    Model model = build_fixture_model("ehealth.feature");
    check(model.states().size() == 2, "expected exactly 2 states");
    check(model.start_states() == std::vector<std::string>{"doctors landing page"},
          "expected the single start state 'doctors landing page'");
    check(model.transitions().size() == 2, "expected exactly 2 transitions");

    const Transition& t1 = model.transitions()[0];
    const Transition& t2 = model.transitions()[1];
    check(t1.origin == "doctors landing page" && t1.target == "lab results page" &&
              t2.origin == "lab results page" && t2.target == "doctors landing page",
          "transitions do not form the 2-cycle");
    check(t1.preconditions == std::vector<std::string>{"I have pending lab results"},
          "transition 1 precondition mismatch");
    check(t1.postconditions == std::vector<std::string>{"I should see my pending lab results"},
          "transition 1 postcondition mismatch");
    check(t1.actions == std::vector<std::string>{"I click on laboratory results"},
          "transition 1 action mismatch");
    check(t2.preconditions.empty() && t2.postconditions.empty(),
          "transition 2 should carry no conditions");
}

void error_branches() {
    Feature feature = parse_feature(
        "Feature: F\n"
        "Scenario: stateless\n  Given something\n  When I go\n  Then something else\n"
        "Scenario: actionless\n  Given I am on the \"a\"\n"
        "  Then I should be on the \"b\"\n"
        "Scenario: fine\n  Given I start on the \"a\"\n  When I go\n"
        "  Then I should be on the \"b\"\n",
        "errors.feature");
    BuildReport report = build_model(feature.scenarios, ConventionConfig{}, feature.name);

    check(report.errors.size() == 2, "expected exactly 2 error entries");
    check(report.errors[0].kind == BuildErrorKind::NoStates,
          "scenario without states should yield NoStates");
    check(report.errors[0].message ==
              "Unable to extract states from test scenario 'stateless': "
              "no origin or target state",
          "NoStates message mismatch");
    check(report.errors[1].kind == BuildErrorKind::NoTransition,
          "scenario without a When should yield NoTransition");
    check(report.errors[1].message ==
              "Unable to extract transition from test scenario 'actionless': no When action",
          "NoTransition message mismatch");
    check(report.model.transitions().size() == 1, "the healthy scenario should still build");
    check(report.model.transitions()[0].provenance.scenario == "fine",
          "surviving transition has the wrong provenance");
}

void merge_and_duplicates() {
    std::string path = fixture("features/merge4.feature");
    Feature feature = parse_feature(read_file(path), path);
    BuildReport report = build_model(feature.scenarios, ConventionConfig{}, feature.name);
    check(report.errors.empty(), "merge fixture built with errors");
    check(report.model.states().size() == 3, "expected 3 merged states");
    check(report.model.transitions().size() == 4, "expected 4 transitions");

    // Connected: every state is reachable from the start.
    std::vector<std::string> frontier = report.model.start_states();
    check(!frontier.empty(), "merge fixture has no start state");
    std::set<std::string> reached(frontier.begin(), frontier.end());
    while (!frontier.empty()) {
        std::string state = frontier.back();
        frontier.pop_back();
        for (int id : report.model.outgoing(state)) {
            const std::string& target = report.model.find_transition(id)->target;
            if (reached.insert(target).second) frontier.push_back(target);
        }
    }
    check(reached.size() == report.model.states().size(), "model is not connected");

    // Duplicating one scenario adds a fifth, content-identical transition.
    std::vector<Scenario> scenarios = feature.scenarios;
    scenarios.push_back(feature.scenarios[1]);
    BuildReport dup = build_model(scenarios, ConventionConfig{}, feature.name);
    check(dup.model.transitions().size() == 5, "duplicate scenario should add a transition");
    Transition a = dup.model.transitions()[1];
    Transition b = dup.model.transitions()[4];
    check(a.id != b.id, "duplicate transitions must keep distinct ids");
    b.id = a.id;
    check(a == b, "duplicate transitions should be identical apart from id");
}

void precondition_gating() {
    Model model = build_fixture_model("stack.feature");
    ExecutorHandle executor = ExecutorHandle::spawn(
        {GMBT_SIM_BIN, "--spec", fixture("sim/stack.json")}, kDefaultStepTimeoutMs, true);

    GenConfig config;
    config.seed = 0;
    config.num_tests = 200;
    config.max_length = 12;
    RunReport report = generate_and_run(model, executor, config);
    executor.shutdown();

    check(report.executed.size() == 200, "expected all 200 tests to run");
    check(!report.first_failure.has_value(), "fault-free run must not fail");
    for (const auto& [test_case, verdict] : report.executed) {
        check(verdict.outcome == Outcome::Pass || verdict.outcome == Outcome::Exhausted,
              "unexpected verdict in a fault-free run");
    }

    // Walk the message log: a failed probe must gate the pop off, and no pop
    // may ever fire on the empty stack.
    const std::string pop = "I pop an element from the stack";
    const std::string push = "I push an element onto the stack";
    long long size = 0;
    bool failed_probe_seen = false;
    bool probe_failed_at_frontier = false;
    for (const LogEntry& entry : executor.log()) {
        if (std::holds_alternative<ResetMsg>(entry.request)) {
            size = 0;
            probe_failed_at_frontier = false;
            continue;
        }
        const auto* step = std::get_if<StepMsg>(&entry.request);
        if (step == nullptr) continue;
        check(entry.response.has_value(), "step frame without a response in the log");

        if (step->phase == Phase::Precondition &&
            entry.response->kind == ExecutorMessage::Kind::Fail) {
            failed_probe_seen = true;
            probe_failed_at_frontier = true;
            check(size == 0, "the pop guard may only fail on the empty stack");
        }
        if (step->phase == Phase::Action) {
            if (step->text == pop) {
                check(!probe_failed_at_frontier,
                      "a pop fired right after its probe was rejected");
                check(size > 0, "a pop fired on the empty stack");
                size -= 1;
            } else if (step->text == push) {
                size += 1;
            }
            probe_failed_at_frontier = false;
        }
    }
    check(failed_probe_seen, "the run never exercised a failed probe");
}

void shrinking_oracle() {
    Model model = build_fixture_model("stack.feature");
    Simulator simulator(load_sim_spec(fixture("sim/stack_fault_depth3.json")));

    GenConfig config;
    config.seed = 0;
    config.num_tests = 100;
    config.max_length = 12;
    RunReport report = generate_and_run(model, simulator, config);

    check(report.first_failure.has_value(), "no failure found within 100 tests");
    check(report.shrunk_failure.has_value(), "failure was not shrunk");
    check(report.shrunk_failure->path.size() == 4,
          "shrunk counterexample should have length 4, got " +
              std::to_string(report.shrunk_failure->path.size()));

    // Independent oracle: brute-force every path up to length 6 and find the
    // true minimum failing length.
    std::size_t oracle = 0;
    for (const TestCase& candidate : enumerate_paths(model, 6)) {
        if (replay(model, simulator, candidate).outcome == Outcome::PostconditionFailed) {
            oracle = candidate.path.size();
            break;  // paths come shortest first
        }
    }
    check(oracle == 4, "oracle minimum failing length is " + std::to_string(oracle) +
                           ", expected 4");
    check(report.shrunk_failure->path.size() == oracle,
          "shrunk length disagrees with the oracle");
}

void determinism() {
    fs::path dir = fs::temp_directory_path() /
                   ("gmbt_acceptance_" + std::to_string(getpid()));
    fs::remove_all(dir);
    fs::create_directories(dir);
    fs::path model_path = dir / "model.json";
    write_file(model_path, model_to_json(build_fixture_model("stack.feature")));

    auto run_once = [&](const fs::path& report_path) {
        std::string command = std::string(GMBT_CLI_BIN) + " run --model '" +
                              model_path.string() + "' --executor '" + GMBT_SIM_BIN +
                              " --spec " + fixture("sim/stack_fault_depth3.json") +
                              "' --seed 0 --tests 100 --max-length 12 --report '" +
                              report_path.string() + "'";
        CommandResult result = run_command(command);
        check(result.exit_code == 1, "fault run should exit 1, got " +
                                         std::to_string(result.exit_code));
    };
    run_once(dir / "first.json");
    run_once(dir / "second.json");

    auto strip_wall_time = [](const std::string& text) {
        std::istringstream in(text);
        std::ostringstream out;
        std::string line;
        while (std::getline(in, line)) {
            if (line.find("\"wall_time_seconds\"") != std::string::npos) continue;
            out << line << "\n";
        }
        return out.str();
    };
    std::string first = strip_wall_time(read_file((dir / "first.json").string()));
    std::string second = strip_wall_time(read_file((dir / "second.json").string()));
    check(first == second, "reports differ beyond wall_time");
    fs::remove_all(dir);
}

void protocol_conformance() {
    // Frame property tests.
    SplitMix64 rng(1);
    for (int i = 0; i < 700; ++i) {
        EngineMessage message = gmbt_test::random_engine_message(rng);
        check(decode_engine_message(encode_engine_message(message)) == message,
              "engine frame round-trip mismatch");
    }
    for (int i = 0; i < 700; ++i) {
        ExecutorMessage message = gmbt_test::random_executor_message(rng);
        check(decode_executor_message(encode_executor_message(message)) == message,
              "executor frame round-trip mismatch");
    }

    // Conformance sweep against the in-process loop.
    Simulator simulator(load_sim_spec(fixture("sim/stack.json")));
    std::istringstream in(
        "{\"type\":\"reset\",\"protocol\":\"1\"}\n"
        "{\"type\":\"step\",\"phase\":\"action\","
        "\"text\":\"I push an element onto the stack\",\"test\":0,\"index\":0}\n"
        "{\"type\":\"step\",\"phase\":\"postcondition\","
        "\"text\":\"the size should be 2\",\"test\":0,\"index\":0}\n"
        "garbage\n"
        "{\"type\":\"reset\",\"protocol\":\"9\"}\n"
        "{\"type\":\"shutdown\"}\n");
    std::ostringstream out;
    check(run_protocol_loop(simulator, in, out, nullptr) == 0, "protocol loop exit code");
    std::vector<std::string> responses;
    std::istringstream lines(out.str());
    for (std::string line; std::getline(lines, line);) responses.push_back(line);
    check(responses.size() == 6, "expected one response per frame");
    check(responses[0] == "{\"type\":\"ok\"}", "handshake response");
    check(responses[1] == "{\"type\":\"ok\"}", "action response");
    check(responses[2].find("\"type\":\"fail\"") != std::string::npos,
          "failed postcondition response");
    check(responses[3].find("\"type\":\"error\"") != std::string::npos,
          "malformed frame response");
    check(responses[4].find("unsupported protocol version '9'") != std::string::npos,
          "version rejection response");
    check(responses[5] == "{\"type\":\"ok\"}", "shutdown response");

    // Timeout behavior with the real child process and the default deadline:
    // a stalled executor must surface as Timeout within 10 s + 1 s slack.
    ExecutorHandle handle = ExecutorHandle::spawn(
        {GMBT_SIM_BIN, "--spec", fixture("sim/stack.json"), "--stall-after", "1"});
    auto begin = std::chrono::steady_clock::now();
    bool timed_out = false;
    try {
        handle.step(Phase::Action, "I push an element onto the stack", 0, 0);
    } catch (const ProcessError& error) {
        timed_out = error.kind() == ProcessError::Kind::Timeout;
    }
    double elapsed =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - begin).count();
    check(timed_out, "stalled executor did not raise Timeout");
    check(elapsed >= 9.0 && elapsed <= 11.0,
          "timeout fired outside the 10 s + 1 s window");
    handle.shutdown();

    // Clean spawn/shutdown: the simulator exits 0 on request.
    ExecutorHandle clean =
        ExecutorHandle::spawn({GMBT_SIM_BIN, "--spec", fixture("sim/stack.json")});
    check(clean.reset().is_ok(), "reset against the simulator");
    check(clean.shutdown() == 0, "simulator should exit 0 after shutdown");
}

void serialization_roundtrip() {
    SplitMix64 rng(77);
    for (int i = 0; i < 500; ++i) {
        Model model = gmbt_test::random_model(rng);
        std::string text = model_to_json(model);
        Model reparsed = model_from_json(text);
        check(reparsed == model, "model JSON round-trip mismatch at case " +
                                     std::to_string(i));
        check(model_to_json(reparsed) == text,
              "model JSON is not byte-stable at case " + std::to_string(i));
        check(model_to_dot(model) == model_to_dot(reparsed),
              "DOT output is not byte-stable at case " + std::to_string(i));
    }
    for (int i = 0; i < 500; ++i) {
        RunReport report = gmbt_test::random_report(rng);
        std::string text = report_to_json(report);
        RunReport reparsed = report_from_json(text);
        check(report_to_json(reparsed) == text,
              "report JSON round-trip mismatch at case " + std::to_string(i));
    }
}

void coverage_on_grid() {
    Model model = build_fixture_model("grid9.feature");
    check(model.states().size() == 9, "grid fixture should have 9 states");
    for (std::uint64_t seed : {0, 1, 2}) {
        Simulator simulator(load_sim_spec(fixture("sim/grid9.json")));
        GenConfig config;
        config.seed = seed;
        config.num_tests = 500;
        config.max_length = 15;
        RunReport report = generate_and_run(model, simulator, config);
        check(!report.first_failure.has_value(),
              "coverage run failed at seed " + std::to_string(seed));
        check(report.coverage.transition_coverage == 1.0,
              "seed " + std::to_string(seed) + " reached coverage " +
                  std::to_string(report.coverage.transition_coverage) + ", expected 1.0");
    }
}

}  // namespace

int main() {
    criterion(1, "golden model from the example feature", 1.0, golden_model);
    criterion(2, "builder error branches", 1.0, error_branches);
    criterion(3, "state merging and duplicate scenarios", 1.0, merge_and_duplicates);
    criterion(4, "precondition gating on the stack", 30.0, precondition_gating);
    criterion(5, "shrinking against the brute-force oracle", 60.0, shrinking_oracle);
    criterion(6, "deterministic reports for a fixed seed", 30.0, determinism);
    criterion(7, "protocol round-trip and conformance", 60.0, protocol_conformance);
    criterion(8, "serialization round-trips", 60.0, serialization_roundtrip);
    criterion(9, "full transition coverage on the nine-state grid", 120.0, coverage_on_grid);

    if (g_failures > 0) {
        std::cout << g_failures << " criterion(s) failed\n";
        return 1;
    }
    std::cout << "all criteria passed\n";
    return 0;
}
