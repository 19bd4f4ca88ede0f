#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "gmbt/engine.hpp"
#include "gmbt/errors.hpp"
#include "gmbt/export.hpp"
#include "gmbt/gherkin.hpp"
#include "gmbt/model.hpp"
#include "gmbt/protocol.hpp"
#include "gmbt/text.hpp"

namespace fs = std::filesystem;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitFindings = 1;
constexpr int kExitError = 2;

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot read '" + path + "'");
    std::ostringstream buffer;
    buffer << in.rdbuf();
    return buffer.str();
}

void write_file(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write '" + path + "'");
    out << content;
    if (!out) throw std::runtime_error("cannot write '" + path + "'");
}

/// Expands directories into their *.feature files (recursive, sorted);
/// plain files are taken as-is.
std::vector<std::string> collect_feature_files(const std::vector<std::string>& paths) {
    std::vector<std::string> files;
    for (const std::string& path : paths) {
        if (fs::is_directory(path)) {
            std::vector<std::string> found;
            for (const auto& entry : fs::recursive_directory_iterator(path)) {
                if (entry.is_regular_file() && entry.path().extension() == ".feature") {
                    found.push_back(entry.path().string());
                }
            }
            std::sort(found.begin(), found.end());
            files.insert(files.end(), found.begin(), found.end());
        } else if (fs::exists(path)) {
            files.push_back(path);
        } else {
            throw std::runtime_error("no such file or directory: '" + path + "'");
        }
    }
    return files;
}

std::vector<gmbt::Feature> parse_all(const std::vector<std::string>& files) {
    std::vector<gmbt::Feature> features;
    for (const std::string& file : files) {
        features.push_back(gmbt::parse_feature(read_file(file), file));
    }
    return features;
}

int cmd_lint(const std::vector<std::string>& paths) {
    std::vector<gmbt::Feature> features = parse_all(collect_feature_files(paths));
    gmbt::ConventionConfig config;
    bool errors = false;
    for (const gmbt::Feature& feature : features) {
        for (const gmbt::Diagnostic& diagnostic : gmbt::lint_conventions(feature, config)) {
            std::cout << gmbt::format_diagnostic(diagnostic) << "\n";
            errors = errors || diagnostic.severity == gmbt::Severity::Error;
        }
    }
    return errors ? kExitFindings : kExitOk;
}

int cmd_build(const std::vector<std::string>& paths, const std::string& out_path,
              const std::string& dot_path) {
    std::vector<gmbt::Feature> features = parse_all(collect_feature_files(paths));
    gmbt::BuildReport report = gmbt::build_model(features, gmbt::ConventionConfig{});

    for (const gmbt::BuildError& error : report.errors) {
        std::cerr << gmbt::to_string(error.provenance.location) << ": error: " << error.message
                  << "\n";
    }

    write_file(out_path, gmbt::model_to_json(report.model));
    if (!dot_path.empty()) write_file(dot_path, gmbt::model_to_dot(report.model));

    std::size_t scenarios = 0;
    for (const gmbt::Feature& feature : features) scenarios += feature.scenarios.size();
    if (scenarios == 0) {
        std::cerr << "error: no scenarios found\n";
        return kExitFindings;
    }
    std::cout << "model: " << report.model.states().size() << " states, "
              << report.model.transitions().size() << " transitions, "
              << report.errors.size() << " errors -> " << out_path << "\n";
    return report.errors.empty() ? kExitOk : kExitFindings;
}

gmbt::Model load_model(const std::string& path) {
    return gmbt::model_from_json(read_file(path));
}

int cmd_run(const std::string& model_path, const std::string& executor_command,
            const gmbt::GenConfig& config, int timeout_ms, const std::string& report_path) {
    gmbt::Model model = load_model(model_path);
    gmbt::ExecutorHandle executor =
        gmbt::spawn_executor(gmbt::split_command_line(executor_command), timeout_ms);

    gmbt::RunReport report = gmbt::generate_and_run(model, executor, config);
    executor.shutdown();

    write_file(report_path, gmbt::report_to_json(report));
    std::cout << gmbt::report_summary(report, model);

    bool executor_error = std::any_of(
        report.executed.begin(), report.executed.end(),
        [](const auto& entry) { return entry.second.outcome == gmbt::Outcome::ExecutorError; });
    if (executor_error) return kExitError;
    return report.first_failure ? kExitFindings : kExitOk;
}

std::vector<int> parse_path_ids(const std::string& text) {
    std::vector<int> ids;
    std::string token;
    std::istringstream in(text);
    while (std::getline(in, token, ',')) {
        // Accept both bare ids and the t-prefixed spelling used in DOT labels.
        std::string trimmed(gmbt::trim(token));
        if (trimmed.empty()) continue;
        if (trimmed.front() == 't' || trimmed.front() == 'T') trimmed.erase(0, 1);
        std::size_t used = 0;
        int id = std::stoi(trimmed, &used);
        if (used != trimmed.size()) {
            throw std::invalid_argument("bad transition id '" + token + "'");
        }
        ids.push_back(id);
    }
    return ids;
}

int cmd_replay(const std::string& model_path, const std::string& executor_command,
               const std::string& path_text, int timeout_ms) {
    gmbt::Model model = load_model(model_path);
    gmbt::TestCase test_case{parse_path_ids(path_text)};

    gmbt::ExecutorHandle executor =
        gmbt::spawn_executor(gmbt::split_command_line(executor_command), timeout_ms);
    gmbt::Verdict verdict = gmbt::replay(model, executor, test_case);
    executor.shutdown();

    std::cout << gmbt::to_string(verdict.outcome);
    if (verdict.failed_at) {
        std::cout << " at index " << *verdict.failed_at;
        if (verdict.failed_step) std::cout << ", step '" << *verdict.failed_step << "'";
    }
    if (!verdict.detail.empty()) std::cout << ": " << verdict.detail;
    std::cout << "\n";

    switch (verdict.outcome) {
        case gmbt::Outcome::Pass:
        case gmbt::Outcome::Exhausted: return kExitOk;
        case gmbt::Outcome::PostconditionFailed: return kExitFindings;
        case gmbt::Outcome::ExecutorError: return kExitError;
    }
    return kExitError;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Model-based testing from convention-following feature files"};
    app.require_subcommand(1);

    std::vector<std::string> paths;
    std::string out_path = "model.json";
    std::string dot_path;
    std::string model_path;
    std::string executor_command;
    std::string report_path = "report.json";
    std::string replay_path;
    gmbt::GenConfig config;
    int timeout_ms = gmbt::kDefaultStepTimeoutMs;

    CLI::App* lint = app.add_subcommand("lint", "Check feature files against the conventions");
    lint->add_option("paths", paths, "Feature files or directories")->required();

    CLI::App* build = app.add_subcommand("build", "Build the state model from feature files");
    build->add_option("paths", paths, "Feature files or directories")->required();
    build->add_option("--out", out_path, "Model JSON output path")
        ->capture_default_str();
    build->add_option("--dot", dot_path, "Also write a Graphviz DOT rendering here");

    CLI::App* run = app.add_subcommand("run", "Generate and execute random tests");
    run->add_option("--model", model_path, "Model JSON path")->required();
    run->add_option("--executor", executor_command, "Executor command line")->required();
    run->add_option("--seed", config.seed, "Generator seed")->capture_default_str();
    run->add_option("--tests", config.num_tests, "Number of tests")->capture_default_str();
    run->add_option("--max-length", config.max_length, "Maximum path length")
        ->capture_default_str();
    run->add_option("--shrink-budget", config.shrink_budget,
                    "Replay attempts allowed while shrinking (0 disables)")
        ->capture_default_str();
    run->add_flag("!--no-probe", config.precondition_probe,
                  "Skip precondition probing before firing");
    run->add_option("--timeout-ms", timeout_ms, "Per-response executor timeout")
        ->capture_default_str();
    run->add_option("--report", report_path, "Report JSON output path")
        ->capture_default_str();

    CLI::App* replay = app.add_subcommand("replay", "Replay one test case by transition ids");
    replay->add_option("--model", model_path, "Model JSON path")->required();
    replay->add_option("--executor", executor_command, "Executor command line")->required();
    replay->add_option("--path", replay_path, "Comma-separated transition ids, e.g. t3,t1,t7")
        ->required();
    replay->add_option("--timeout-ms", timeout_ms, "Per-response executor timeout")
        ->capture_default_str();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? kExitOk : kExitError;
    }

    try {
        if (lint->parsed()) return cmd_lint(paths);
        if (build->parsed()) return cmd_build(paths, out_path, dot_path);
        if (run->parsed()) {
            return cmd_run(model_path, executor_command, config, timeout_ms, report_path);
        }
        return cmd_replay(model_path, executor_command, replay_path, timeout_ms);
    } catch (const gmbt::ParseError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitError;
    } catch (const gmbt::NoStartStateError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitError;
    } catch (const gmbt::InvalidPathError& e) {
        std::cerr << "error: invalid path: " << e.what() << "\n";
        return kExitError;
    } catch (const gmbt::ProcessError& e) {
        std::cerr << "error: executor: " << e.what() << "\n";
        return kExitError;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitError;
    }
}
