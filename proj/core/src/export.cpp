#include "gmbt/export.hpp"

#include <algorithm>
#include <cstdio>

#include "gmbt/errors.hpp"
#include "json.hpp"

namespace gmbt {

namespace {

using nlohmann::json;

[[noreturn]] void bad_doc(const std::string& what) { throw MalformedDocument(what); }

json parse_document(std::string_view text, std::string_view schema) {
    json doc = json::parse(text, nullptr, false);
    if (doc.is_discarded() || !doc.is_object()) {
        bad_doc("document is not a JSON object");
    }
    auto it = doc.find("schema");
    if (it == doc.end() || !it->is_string() || it->get_ref<const std::string&>() != schema) {
        throw SchemaMismatch("document must declare \"schema\": \"" + std::string(schema) +
                             "\"");
    }
    return doc;
}

std::string get_string(const json& node, const char* key, const std::string& where) {
    auto it = node.find(key);
    if (it == node.end() || !it->is_string()) bad_doc(where + " needs a string '" + key + "'");
    return it->get<std::string>();
}

std::vector<std::string> get_string_array(const json& node, const char* key,
                                          const std::string& where) {
    auto it = node.find(key);
    if (it == node.end() || !it->is_array()) bad_doc(where + " needs an array '" + key + "'");
    std::vector<std::string> out;
    for (const json& entry : *it) {
        if (!entry.is_string()) bad_doc(where + " '" + std::string(key) +
                                        "' contains a non-string entry");
        out.push_back(entry.get<std::string>());
    }
    return out;
}

std::string escape_dot(std::string_view text) {
    std::string out;
    out.reserve(text.size());
    for (char c : text) {
        if (c == '"' || c == '\\') out.push_back('\\');
        out.push_back(c);
    }
    return out;
}

std::string clip_label_line(const std::string& line) {
    constexpr std::size_t kMax = 60;
    if (line.size() <= kMax) return line;
    return line.substr(0, kMax - 3) + "...";
}

}  // namespace

std::string model_to_dot(const Model& model) {
    std::vector<const ModelState*> states;
    states.reserve(model.states().size());
    for (const ModelState& state : model.states()) states.push_back(&state);
    std::sort(states.begin(), states.end(), [](const ModelState* a, const ModelState* b) {
        return a->name.canonical < b->name.canonical;
    });

    std::string out = "digraph model {\n  rankdir=LR;\n  node [shape=circle];\n";
    for (const ModelState* state : states) {
        out += "  \"" + escape_dot(state->name.display) + "\"";
        if (state->is_start) out += " [shape=doublecircle]";
        out += ";\n";
    }

    std::vector<const Transition*> transitions;
    transitions.reserve(model.transitions().size());
    for (const Transition& t : model.transitions()) transitions.push_back(&t);
    std::sort(transitions.begin(), transitions.end(),
              [](const Transition* a, const Transition* b) { return a->id < b->id; });

    for (const Transition* t : transitions) {
        std::vector<std::string> lines;
        for (std::size_t i = 0; i < t->actions.size(); ++i) {
            lines.push_back(i == 0 ? "t" + std::to_string(t->id) + ": " + t->actions[i]
                                   : t->actions[i]);
        }
        for (const std::string& pre : t->preconditions) lines.push_back("[pre] " + pre);
        for (const std::string& post : t->postconditions) lines.push_back("[post] " + post);

        std::string label;
        for (std::size_t i = 0; i < lines.size(); ++i) {
            if (i > 0) label += "\\n";
            label += escape_dot(clip_label_line(lines[i]));
        }
        const std::string& origin = model.find_state(t->origin)->name.display;
        const std::string& target = model.find_state(t->target)->name.display;
        out += "  \"" + escape_dot(origin) + "\" -> \"" + escape_dot(target) + "\" [label=\"" +
               label + "\"];\n";
    }
    out += "}\n";
    return out;
}

std::string model_to_json(const Model& model) {
    json doc;
    doc["schema"] = std::string(kModelSchema);
    doc["states"] = json::array();
    for (const ModelState& state : model.states()) {
        json node;
        node["name"] = state.name.canonical;
        node["display"] = state.name.display;
        node["start"] = state.is_start;
        doc["states"].push_back(std::move(node));
    }
    doc["transitions"] = json::array();
    for (const Transition& t : model.transitions()) {
        json node;
        node["id"] = t.id;
        node["origin"] = t.origin;
        node["target"] = t.target;
        node["preconditions"] = t.preconditions;
        node["actions"] = t.actions;
        node["postconditions"] = t.postconditions;
        node["provenance"] = {{"feature", t.provenance.feature},
                              {"scenario", t.provenance.scenario},
                              {"file", t.provenance.location.file},
                              {"line", t.provenance.location.line}};
        doc["transitions"].push_back(std::move(node));
    }
    return doc.dump(2) + "\n";
}

Model model_from_json(std::string_view text) {
    json doc = parse_document(text, kModelSchema);
    Model model;
    try {
        auto states = doc.find("states");
        if (states == doc.end() || !states->is_array()) bad_doc("model needs a 'states' array");
        for (const json& node : *states) {
            if (!node.is_object()) bad_doc("state entry is not an object");
            StateName name;
            name.canonical = get_string(node, "name", "state");
            name.display = get_string(node, "display", "state");
            bool start = false;
            if (auto it = node.find("start"); it != node.end()) {
                if (!it->is_boolean()) bad_doc("state 'start' is not a boolean");
                start = it->get<bool>();
            }
            model.add_state(name, start);
        }

        auto transitions = doc.find("transitions");
        if (transitions == doc.end() || !transitions->is_array()) {
            bad_doc("model needs a 'transitions' array");
        }
        for (const json& node : *transitions) {
            if (!node.is_object()) bad_doc("transition entry is not an object");
            Transition t;
            auto id = node.find("id");
            if (id == node.end() || !id->is_number_integer()) {
                bad_doc("transition needs an integer 'id'");
            }
            t.id = id->get<int>();
            t.origin = get_string(node, "origin", "transition");
            t.target = get_string(node, "target", "transition");
            t.preconditions = get_string_array(node, "preconditions", "transition");
            t.actions = get_string_array(node, "actions", "transition");
            t.postconditions = get_string_array(node, "postconditions", "transition");
            if (auto it = node.find("provenance"); it != node.end()) {
                if (!it->is_object()) bad_doc("transition 'provenance' is not an object");
                t.provenance.feature = get_string(*it, "feature", "provenance");
                t.provenance.scenario = get_string(*it, "scenario", "provenance");
                t.provenance.location.file = get_string(*it, "file", "provenance");
                auto line = it->find("line");
                if (line == it->end() || !line->is_number_integer()) {
                    bad_doc("provenance needs an integer 'line'");
                }
                t.provenance.location.line = line->get<int>();
            }
            model.add_transition(std::move(t));
        }
    } catch (const std::invalid_argument& error) {
        bad_doc(std::string("model is not well-formed: ") + error.what());
    }
    return model;
}

namespace {

Outcome outcome_from_string(const std::string& text) {
    if (text == "pass") return Outcome::Pass;
    if (text == "postcondition_failed") return Outcome::PostconditionFailed;
    if (text == "executor_error") return Outcome::ExecutorError;
    if (text == "exhausted") return Outcome::Exhausted;
    bad_doc("unknown outcome '" + text + "'");
}

std::vector<int> get_int_array(const json& node, const std::string& where) {
    if (!node.is_array()) bad_doc(where + " is not an array");
    std::vector<int> out;
    for (const json& entry : node) {
        if (!entry.is_number_integer()) bad_doc(where + " contains a non-integer entry");
        out.push_back(entry.get<int>());
    }
    return out;
}

}  // namespace

std::string report_to_json(const RunReport& report) {
    json doc;
    doc["schema"] = std::string(kReportSchema);
    doc["config"] = {{"seed", report.config.seed},
                     {"num_tests", report.config.num_tests},
                     {"max_length", report.config.max_length},
                     {"shrink_budget", report.config.shrink_budget},
                     {"precondition_probe", report.config.precondition_probe}};

    doc["tests"] = json::array();
    for (const auto& [test_case, verdict] : report.executed) {
        json node;
        node["path"] = test_case.path;
        node["outcome"] = std::string(to_string(verdict.outcome));
        if (verdict.failed_at) node["failed_at"] = *verdict.failed_at;
        if (verdict.failed_step) node["failed_step"] = *verdict.failed_step;
        if (!verdict.detail.empty()) node["detail"] = verdict.detail;
        doc["tests"].push_back(std::move(node));
    }

    if (report.first_failure) doc["first_failure"] = report.first_failure->path;
    if (report.shrunk_failure) doc["shrunk_failure"] = report.shrunk_failure->path;
    doc["coverage"] = {{"states_visited", report.coverage.states_visited},
                       {"transitions_fired", report.coverage.transitions_fired},
                       {"transition_coverage", report.coverage.transition_coverage}};
    doc["wall_time_seconds"] = report.wall_time_seconds;
    return doc.dump(2) + "\n";
}

RunReport report_from_json(std::string_view text) {
    json doc = parse_document(text, kReportSchema);
    RunReport report;

    auto config = doc.find("config");
    if (config == doc.end() || !config->is_object()) bad_doc("report needs a 'config' object");
    auto get_number = [&](const char* key) -> json::const_iterator {
        auto it = config->find(key);
        if (it == config->end() || !it->is_number()) {
            bad_doc(std::string("config needs a number '") + key + "'");
        }
        return it;
    };
    report.config.seed = get_number("seed")->get<std::uint64_t>();
    report.config.num_tests = get_number("num_tests")->get<int>();
    report.config.max_length = get_number("max_length")->get<int>();
    report.config.shrink_budget = get_number("shrink_budget")->get<int>();
    auto probe = config->find("precondition_probe");
    if (probe == config->end() || !probe->is_boolean()) {
        bad_doc("config needs a boolean 'precondition_probe'");
    }
    report.config.precondition_probe = probe->get<bool>();

    auto tests = doc.find("tests");
    if (tests == doc.end() || !tests->is_array()) bad_doc("report needs a 'tests' array");
    for (const json& node : *tests) {
        if (!node.is_object()) bad_doc("test entry is not an object");
        TestCase test_case;
        auto path = node.find("path");
        if (path == node.end()) bad_doc("test entry needs a 'path'");
        test_case.path = get_int_array(*path, "test path");

        Verdict verdict;
        verdict.outcome = outcome_from_string(get_string(node, "outcome", "test entry"));
        if (auto it = node.find("failed_at"); it != node.end()) {
            if (!it->is_number_integer()) bad_doc("'failed_at' is not an integer");
            verdict.failed_at = it->get<int>();
        }
        if (auto it = node.find("failed_step"); it != node.end()) {
            if (!it->is_string()) bad_doc("'failed_step' is not a string");
            verdict.failed_step = it->get<std::string>();
        }
        if (auto it = node.find("detail"); it != node.end()) {
            if (!it->is_string()) bad_doc("'detail' is not a string");
            verdict.detail = it->get<std::string>();
        }
        report.executed.emplace_back(std::move(test_case), std::move(verdict));
    }

    if (auto it = doc.find("first_failure"); it != doc.end()) {
        report.first_failure = TestCase{get_int_array(*it, "'first_failure'")};
    }
    if (auto it = doc.find("shrunk_failure"); it != doc.end()) {
        report.shrunk_failure = TestCase{get_int_array(*it, "'shrunk_failure'")};
    }

    auto coverage = doc.find("coverage");
    if (coverage == doc.end() || !coverage->is_object()) {
        bad_doc("report needs a 'coverage' object");
    }
    auto visited = coverage->find("states_visited");
    if (visited == coverage->end()) bad_doc("coverage needs 'states_visited'");
    report.coverage.states_visited = get_string_array(*coverage, "states_visited", "coverage");
    auto fired = coverage->find("transitions_fired");
    if (fired == coverage->end()) bad_doc("coverage needs 'transitions_fired'");
    report.coverage.transitions_fired = get_int_array(*fired, "'transitions_fired'");
    auto ratio = coverage->find("transition_coverage");
    if (ratio == coverage->end() || !ratio->is_number()) {
        bad_doc("coverage needs a number 'transition_coverage'");
    }
    report.coverage.transition_coverage = ratio->get<double>();

    if (auto it = doc.find("wall_time_seconds"); it != doc.end()) {
        if (!it->is_number()) bad_doc("'wall_time_seconds' is not a number");
        report.wall_time_seconds = it->get<double>();
    }
    return report;
}

namespace {

std::string render_path(const std::vector<int>& path, const Model& model) {
    std::string out;
    for (std::size_t i = 0; i < path.size(); ++i) {
        if (i > 0) out += " -> ";
        const Transition* t = model.find_transition(path[i]);
        if (t != nullptr && !t->provenance.scenario.empty()) {
            out += "'" + t->provenance.scenario + "'";
        } else {
            out += "t" + std::to_string(path[i]);
        }
    }
    return out;
}

}  // namespace

std::string report_summary(const RunReport& report, const Model& model) {
    int passes = 0;
    int failures = 0;
    int errors = 0;
    int exhausted = 0;
    const Verdict* failing_verdict = nullptr;
    for (const auto& [test_case, verdict] : report.executed) {
        switch (verdict.outcome) {
            case Outcome::Pass: ++passes; break;
            case Outcome::Exhausted:
                ++passes;
                ++exhausted;
                break;
            case Outcome::PostconditionFailed:
                ++failures;
                if (failing_verdict == nullptr) failing_verdict = &verdict;
                break;
            case Outcome::ExecutorError: ++errors; break;
        }
    }

    char ratio[32];
    std::snprintf(ratio, sizeof(ratio), "%.2f", report.coverage.transition_coverage);

    std::string out;
    out += "executed " + std::to_string(report.executed.size()) + " tests: " +
           std::to_string(passes) + " passes, " + std::to_string(failures) + " failures, " +
           std::to_string(errors) + " executor errors (" + std::to_string(exhausted) +
           " exhausted)\n";
    out += "transition coverage: " + std::string(ratio) + " (" +
           std::to_string(report.coverage.transitions_fired.size()) + "/" +
           std::to_string(model.transitions().size()) + "), states visited: " +
           std::to_string(report.coverage.states_visited.size()) + "/" +
           std::to_string(model.states().size()) + "\n";

    if (report.first_failure) {
        out += "counterexample (length " + std::to_string(report.first_failure->path.size()) +
               "): " + render_path(report.first_failure->path, model) + "\n";
        if (failing_verdict != nullptr && failing_verdict->failed_step) {
            out += "failing step: '" + *failing_verdict->failed_step + "'";
            if (!failing_verdict->detail.empty()) out += " (" + failing_verdict->detail + ")";
            out += "\n";
        }
        if (report.shrunk_failure) {
            out += "shrunk (length " + std::to_string(report.shrunk_failure->path.size()) +
                   "): " + render_path(report.shrunk_failure->path, model) + "\n";
        }
    } else if (errors == 0) {
        out += "no counterexample\n";
    }
    return out;
}

}  // namespace gmbt
