#include "gmbt/sim.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <utility>

#include "gmbt/protocol.hpp"
#include "json.hpp"

namespace gmbt {

namespace {

using nlohmann::json;

bool is_name_char(char c) {
    return std::isalnum(static_cast<unsigned char>(c)) != 0 || c == '_';
}

/// Placeholder names appearing in a pattern, in order.
std::vector<std::string> pattern_captures(std::string_view pattern) {
    std::vector<std::string> names;
    for (std::size_t i = 0; i < pattern.size(); ++i) {
        if (pattern[i] != '{') continue;
        std::size_t end = pattern.find('}', i + 1);
        if (end == std::string_view::npos || end == i + 1) continue;
        std::string name(pattern.substr(i + 1, end - i - 1));
        bool well_formed = !std::isdigit(static_cast<unsigned char>(name[0]));
        for (char c : name) well_formed = well_formed && is_name_char(c);
        if (well_formed) {
            names.push_back(std::move(name));
            i = end;
        }
    }
    return names;
}

}  // namespace

std::optional<std::map<std::string, long long>> match_rule_pattern(std::string_view pattern,
                                                                   std::string_view text) {
    std::map<std::string, long long> captures;
    std::size_t pi = 0;
    std::size_t ti = 0;
    while (pi < pattern.size()) {
        if (pattern[pi] == '{') {
            std::size_t end = pattern.find('}', pi + 1);
            std::string name(end == std::string_view::npos || end == pi + 1
                                 ? std::string_view{}
                                 : pattern.substr(pi + 1, end - pi - 1));
            bool well_formed = !name.empty() &&
                               !std::isdigit(static_cast<unsigned char>(name[0]));
            for (char c : name) well_formed = well_formed && is_name_char(c);
            if (well_formed) {
                std::size_t start = ti;
                if (ti < text.size() && (text[ti] == '-' || text[ti] == '+')) ++ti;
                std::size_t digits_from = ti;
                while (ti < text.size() && std::isdigit(static_cast<unsigned char>(text[ti]))) {
                    ++ti;
                }
                if (ti == digits_from) return std::nullopt;
                captures[name] = std::stoll(std::string(text.substr(start, ti - start)));
                pi = end + 1;
                continue;
            }
        }
        if (ti >= text.size() || text[ti] != pattern[pi]) return std::nullopt;
        ++pi;
        ++ti;
    }
    if (ti != text.size()) return std::nullopt;
    return captures;
}

namespace {

[[noreturn]] void bad_spec(const std::string& what) { throw MalformedDocument(what); }

std::string require_string(const json& node, const char* key, const std::string& where) {
    auto it = node.find(key);
    if (it == node.end() || !it->is_string()) {
        bad_spec(where + " needs a string '" + key + "'");
    }
    return it->get<std::string>();
}

Phase parse_sim_phase(const std::string& phase, const std::string& where) {
    if (phase == "precondition") return Phase::Precondition;
    if (phase == "action") return Phase::Action;
    if (phase == "postcondition") return Phase::Postcondition;
    bad_spec(where + " has unknown phase '" + phase + "'");
}

SimCondition parse_condition(const json& node, const std::string& where) {
    if (!node.is_object()) bad_spec(where + " is not an object");
    SimCondition condition;
    condition.var = require_string(node, "var", where);
    condition.op = require_string(node, "op", where);
    if (auto it = node.find("value"); it != node.end()) {
        if (!it->is_number_integer()) bad_spec(where + " has a non-integer 'value'");
        condition.value = it->get<long long>();
    }
    if (auto it = node.find("capture"); it != node.end()) {
        if (!it->is_string()) bad_spec(where + " has a non-string 'capture'");
        condition.capture = it->get<std::string>();
    }
    if (condition.value.has_value() == condition.capture.has_value()) {
        bad_spec(where + " needs exactly one of 'value' and 'capture'");
    }
    return condition;
}

SimEffect parse_effect(const json& node, const std::string& where) {
    if (!node.is_object()) bad_spec(where + " is not an object");
    SimEffect effect;
    if (auto it = node.find("page"); it != node.end()) {
        if (!it->is_string()) bad_spec(where + " has a non-string 'page'");
        effect.page = it->get<std::string>();
        if (node.contains("var") || node.contains("op") || node.contains("value") ||
            node.contains("capture")) {
            bad_spec(where + " mixes a page change with a variable update");
        }
        return effect;
    }
    effect.var = require_string(node, "var", where);
    effect.op = require_string(node, "op", where);
    if (auto it = node.find("value"); it != node.end()) {
        if (!it->is_number_integer()) bad_spec(where + " has a non-integer 'value'");
        effect.value = it->get<long long>();
    }
    if (auto it = node.find("capture"); it != node.end()) {
        if (!it->is_string()) bad_spec(where + " has a non-string 'capture'");
        effect.capture = it->get<std::string>();
    }
    if (effect.value.has_value() == effect.capture.has_value()) {
        bad_spec(where + " needs exactly one of 'value' and 'capture'");
    }
    return effect;
}

json condition_to_json(const SimCondition& condition) {
    json node;
    node["var"] = condition.var;
    node["op"] = condition.op;
    if (condition.value) node["value"] = *condition.value;
    if (condition.capture) node["capture"] = *condition.capture;
    return node;
}

}  // namespace

SimSpec sim_spec_from_json(std::string_view text) {
    json doc = json::parse(text, nullptr, false);
    if (doc.is_discarded() || !doc.is_object()) {
        bad_spec("simulator spec is not a JSON object");
    }

    auto schema = doc.find("schema");
    if (schema == doc.end() || !schema->is_string() ||
        schema->get_ref<const std::string&>() != kSimSchema) {
        throw SchemaMismatch("simulator spec must declare \"schema\": \"" +
                             std::string(kSimSchema) + "\"");
    }

    SimSpec spec;
    if (auto it = doc.find("variables"); it != doc.end()) {
        if (!it->is_object()) bad_spec("'variables' is not an object");
        for (const auto& [name, value] : it->items()) {
            if (!value.is_number_integer()) {
                bad_spec("variable '" + name + "' is not an integer");
            }
            spec.variables[name] = value.get<long long>();
        }
    }
    if (auto it = doc.find("pages"); it != doc.end()) {
        if (!it->is_array()) bad_spec("'pages' is not an array");
        for (const json& page : *it) {
            if (!page.is_string()) bad_spec("'pages' contains a non-string entry");
            spec.pages.push_back(page.get<std::string>());
        }
    }
    if (auto it = doc.find("initial_page"); it != doc.end()) {
        if (!it->is_string()) bad_spec("'initial_page' is not a string");
        spec.initial_page = it->get<std::string>();
    } else if (!spec.pages.empty()) {
        spec.initial_page = spec.pages.front();
    }

    if (auto it = doc.find("rules"); it != doc.end()) {
        if (!it->is_array()) bad_spec("'rules' is not an array");
        int index = 0;
        for (const json& node : *it) {
            std::string where = "rule " + std::to_string(index++);
            if (!node.is_object()) bad_spec(where + " is not an object");
            SimRule rule;
            rule.phase = parse_sim_phase(require_string(node, "phase", where), where);
            rule.pattern = require_string(node, "pattern", where);
            if (auto name = node.find("name"); name != node.end()) {
                if (!name->is_string()) bad_spec(where + " has a non-string 'name'");
                rule.name = name->get<std::string>();
            }
            auto verdict = node.find("verdict");
            auto guard = node.find("guard");
            if (verdict != node.end() && guard != node.end()) {
                bad_spec(where + " has both 'verdict' and 'guard'");
            }
            if (verdict != node.end() || guard != node.end()) {
                const json& body = verdict != node.end() ? *verdict : *guard;
                rule.condition = parse_condition(body, where + " condition");
            }
            if (auto effects = node.find("effects"); effects != node.end()) {
                if (!effects->is_array()) bad_spec(where + " 'effects' is not an array");
                int effect_index = 0;
                for (const json& effect : *effects) {
                    rule.effects.push_back(parse_effect(
                        effect, where + " effect " + std::to_string(effect_index++)));
                }
            }
            spec.rules.push_back(std::move(rule));
        }
    }

    if (auto it = doc.find("faults"); it != doc.end()) {
        if (!it->is_array()) bad_spec("'faults' is not an array");
        int index = 0;
        for (const json& node : *it) {
            std::string where = "fault " + std::to_string(index++);
            if (!node.is_object()) bad_spec(where + " is not an object");
            SimFault fault;
            if (auto step = node.find("step"); step != node.end()) {
                if (!step->is_string()) bad_spec(where + " has a non-string 'step'");
                fault.step_equals = step->get<std::string>();
            }
            if (auto when = node.find("when"); when != node.end()) {
                fault.when = parse_condition(*when, where + " 'when'");
            }
            if (auto fired = node.find("fired_at_least"); fired != node.end()) {
                if (!fired->is_number_integer()) {
                    bad_spec(where + " has a non-integer 'fired_at_least'");
                }
                fault.fired_at_least = fired->get<long long>();
            }
            fault.fail_rule = require_string(node, "fail_rule", where);
            if (auto reason = node.find("reason"); reason != node.end()) {
                if (!reason->is_string()) bad_spec(where + " has a non-string 'reason'");
                fault.reason = reason->get<std::string>();
            } else {
                fault.reason = "injected fault";
            }
            spec.faults.push_back(std::move(fault));
        }
    }
    return spec;
}

std::string sim_spec_to_json(const SimSpec& spec) {
    json doc;
    doc["schema"] = std::string(kSimSchema);
    doc["variables"] = json::object();
    for (const auto& [name, value] : spec.variables) doc["variables"][name] = value;
    doc["pages"] = spec.pages;
    doc["initial_page"] = spec.initial_page;

    doc["rules"] = json::array();
    for (const SimRule& rule : spec.rules) {
        json node;
        node["phase"] = std::string(to_string(rule.phase));
        if (!rule.name.empty()) node["name"] = rule.name;
        node["pattern"] = rule.pattern;
        if (rule.condition) node["verdict"] = condition_to_json(*rule.condition);
        if (!rule.effects.empty()) {
            node["effects"] = json::array();
            for (const SimEffect& effect : rule.effects) {
                json body;
                if (effect.page) {
                    body["page"] = *effect.page;
                } else {
                    body["var"] = *effect.var;
                    body["op"] = effect.op;
                    if (effect.value) body["value"] = *effect.value;
                    if (effect.capture) body["capture"] = *effect.capture;
                }
                node["effects"].push_back(std::move(body));
            }
        }
        doc["rules"].push_back(std::move(node));
    }

    doc["faults"] = json::array();
    for (const SimFault& fault : spec.faults) {
        json node;
        if (fault.step_equals) node["step"] = *fault.step_equals;
        if (fault.when) node["when"] = condition_to_json(*fault.when);
        if (fault.fired_at_least) node["fired_at_least"] = *fault.fired_at_least;
        node["fail_rule"] = fault.fail_rule;
        node["reason"] = fault.reason;
        doc["faults"].push_back(std::move(node));
    }
    return doc.dump(2) + "\n";
}

SimSpec load_sim_spec(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw MalformedDocument("cannot open simulator spec '" + path + "'");
    std::ostringstream buffer;
    buffer << in.rdbuf();
    return sim_spec_from_json(buffer.str());
}

namespace {

const std::set<std::string> kConditionOps = {"==", "!=", "<", "<=", ">", ">="};
const std::set<std::string> kEffectOps = {"=", "+=", "-="};

void check_condition(const SimSpec& spec, const SimCondition& condition,
                     const std::vector<std::string>& captures, const std::string& where,
                     const std::string& file, std::vector<Diagnostic>& out) {
    SourceLocation here{file, 1};
    if (!spec.variables.contains(condition.var)) {
        out.push_back({Severity::Error,
                       where + " reads undefined variable '" + condition.var + "'", here});
    }
    if (!kConditionOps.contains(condition.op)) {
        out.push_back({Severity::Error, where + " has unknown operator '" + condition.op + "'",
                       here});
    }
    if (condition.capture &&
        std::find(captures.begin(), captures.end(), *condition.capture) == captures.end()) {
        out.push_back({Severity::Error,
                       where + " references capture '{" + *condition.capture +
                           "}' that its pattern does not define",
                       here});
    }
}

}  // namespace

std::vector<Diagnostic> validate_spec(const SimSpec& spec, const std::string& file) {
    std::vector<Diagnostic> out;
    SourceLocation here{file, 1};

    std::set<std::string> page_set(spec.pages.begin(), spec.pages.end());
    if (page_set.size() != spec.pages.size()) {
        out.push_back({Severity::Warning, "duplicate entries in 'pages'", here});
    }
    if (!spec.pages.empty() && !page_set.contains(spec.initial_page)) {
        out.push_back({Severity::Error,
                       "initial page '" + spec.initial_page + "' is not in 'pages'", here});
    }

    std::set<std::string> postcondition_names;
    for (std::size_t i = 0; i < spec.rules.size(); ++i) {
        const SimRule& rule = spec.rules[i];
        std::string where = "rule " + std::to_string(i) + " ('" + rule.pattern + "')";
        std::vector<std::string> captures = pattern_captures(rule.pattern);

        if (rule.pattern.empty()) {
            out.push_back({Severity::Error, where + " has an empty pattern", here});
        }
        if (rule.phase == Phase::Action) {
            if (rule.condition) {
                out.push_back({Severity::Error, where + " is an action but has a condition",
                               here});
            }
            if (rule.effects.empty()) {
                out.push_back({Severity::Error, where + " is an action with no effects", here});
            }
        } else {
            if (!rule.condition) {
                out.push_back({Severity::Error, where + " has no condition", here});
            }
            if (!rule.effects.empty()) {
                out.push_back({Severity::Error,
                               where + " is a " + std::string(to_string(rule.phase)) +
                                   " but has effects",
                               here});
            }
        }
        if (rule.condition) check_condition(spec, *rule.condition, captures, where, file, out);

        for (std::size_t e = 0; e < rule.effects.size(); ++e) {
            const SimEffect& effect = rule.effects[e];
            std::string effect_where = where + " effect " + std::to_string(e);
            if (effect.page) {
                if (!page_set.contains(*effect.page)) {
                    out.push_back({Severity::Error,
                                   effect_where + " targets unknown page '" + *effect.page +
                                       "'",
                                   here});
                }
                continue;
            }
            if (!spec.variables.contains(*effect.var)) {
                out.push_back({Severity::Error,
                               effect_where + " writes undefined variable '" + *effect.var +
                                   "'",
                               here});
            }
            if (!kEffectOps.contains(effect.op)) {
                out.push_back({Severity::Error,
                               effect_where + " has unknown operator '" + effect.op + "'",
                               here});
            }
            if (effect.capture &&
                std::find(captures.begin(), captures.end(), *effect.capture) ==
                    captures.end()) {
                out.push_back({Severity::Error,
                               effect_where + " references capture '{" + *effect.capture +
                                   "}' that its pattern does not define",
                               here});
            }
        }

        if (rule.phase == Phase::Postcondition && !rule.name.empty()) {
            if (!postcondition_names.insert(rule.name).second) {
                out.push_back({Severity::Warning,
                               "duplicate postcondition rule name '" + rule.name +
                                   "'; faults hit the first one",
                               here});
            }
        }

        // A later rule is unreachable when an earlier same-phase rule already
        // matches everything it would match. Exact detection is only done for
        // capture-free later patterns.
        for (std::size_t j = 0; j < i; ++j) {
            const SimRule& earlier = spec.rules[j];
            if (earlier.phase != rule.phase) continue;
            bool shadowed = earlier.pattern == rule.pattern ||
                            (captures.empty() &&
                             match_rule_pattern(earlier.pattern, rule.pattern).has_value());
            if (shadowed) {
                out.push_back({Severity::Warning,
                               where + " is shadowed by rule " + std::to_string(j) + " ('" +
                                   earlier.pattern + "')",
                               here});
                break;
            }
        }
    }

    for (std::size_t i = 0; i < spec.faults.size(); ++i) {
        const SimFault& fault = spec.faults[i];
        std::string where = "fault " + std::to_string(i);
        if (!postcondition_names.contains(fault.fail_rule)) {
            out.push_back({Severity::Error,
                           where + " targets unknown postcondition rule '" + fault.fail_rule +
                               "'",
                           here});
        }
        if (!fault.step_equals && !fault.when && !fault.fired_at_least) {
            out.push_back({Severity::Warning, where + " has no trigger and arms on any action",
                           here});
        }
        if (fault.when) {
            if (fault.when->capture) {
                out.push_back({Severity::Error,
                               where + " 'when' cannot use a capture (no pattern to bind it)",
                               here});
            } else {
                check_condition(spec, *fault.when, {}, where + " 'when'", file, out);
            }
        }
        if (fault.fired_at_least && *fault.fired_at_least < 0) {
            out.push_back({Severity::Error, where + " has negative 'fired_at_least'", here});
        }
    }
    return out;
}

Simulator::Simulator(SimSpec spec) : spec_(std::move(spec)) {
    variables_ = spec_.variables;
    page_ = !spec_.initial_page.empty()        ? spec_.initial_page
            : !spec_.pages.empty()             ? spec_.pages.front()
                                               : std::string();
}

StepResult Simulator::reset() {
    variables_ = spec_.variables;
    page_ = !spec_.initial_page.empty()        ? spec_.initial_page
            : !spec_.pages.empty()             ? spec_.pages.front()
                                               : std::string();
    fired_actions_ = 0;
    armed_faults_.clear();
    return StepResult::ok();
}

long long Simulator::variable(const std::string& name) const { return variables_.at(name); }

StepResult Simulator::step(Phase phase, const std::string& text, int, int) {
    for (const SimRule& rule : spec_.rules) {
        if (rule.phase != phase) continue;
        auto captures = match_rule_pattern(rule.pattern, text);
        if (!captures) continue;

        if (phase == Phase::Action) return apply_action(rule, *captures, text);

        if (phase == Phase::Postcondition && !rule.name.empty()) {
            if (auto armed = armed_faults_.find(rule.name); armed != armed_faults_.end()) {
                return StepResult::fail(armed->second);
            }
        }
        if (!rule.condition) return StepResult::error("rule '" + rule.pattern +
                                                      "' has no condition");
        return evaluate(*rule.condition, *captures);
    }
    return StepResult::fail("no matching rule");
}

StepResult Simulator::apply_action(const SimRule& rule,
                                   const std::map<std::string, long long>& captures,
                                   const std::string& text) {
    // Fault triggers see the state as it was when the action arrived.
    for (const SimFault& fault : spec_.faults) {
        if (fault.step_equals && *fault.step_equals != text) continue;
        if (fault.fired_at_least && fired_actions_ < *fault.fired_at_least) continue;
        if (fault.when && !evaluate(*fault.when, {}).is_ok()) continue;
        armed_faults_[fault.fail_rule] = fault.reason;
    }

    for (const SimEffect& effect : rule.effects) {
        if (effect.page) {
            page_ = *effect.page;
            continue;
        }
        long long operand = 0;
        if (effect.value) {
            operand = *effect.value;
        } else {
            auto it = captures.find(*effect.capture);
            if (it == captures.end()) {
                return StepResult::error("capture '{" + *effect.capture + "}' is not bound");
            }
            operand = it->second;
        }
        long long& slot = variables_[*effect.var];
        if (effect.op == "=") {
            slot = operand;
        } else if (effect.op == "+=") {
            slot += operand;
        } else if (effect.op == "-=") {
            slot -= operand;
        } else {
            return StepResult::error("unknown effect operator '" + effect.op + "'");
        }
    }
    ++fired_actions_;
    return StepResult::ok();
}

StepResult Simulator::evaluate(const SimCondition& condition,
                               const std::map<std::string, long long>& captures) const {
    auto var = variables_.find(condition.var);
    if (var == variables_.end()) {
        return StepResult::error("unknown variable '" + condition.var + "'");
    }
    long long actual = var->second;

    long long bound = 0;
    if (condition.value) {
        bound = *condition.value;
    } else if (condition.capture) {
        auto it = captures.find(*condition.capture);
        if (it == captures.end()) {
            return StepResult::error("capture '{" + *condition.capture + "}' is not bound");
        }
        bound = it->second;
    } else {
        return StepResult::error("condition on '" + condition.var + "' has no operand");
    }

    bool holds = false;
    if (condition.op == "==") {
        holds = actual == bound;
    } else if (condition.op == "!=") {
        holds = actual != bound;
    } else if (condition.op == "<") {
        holds = actual < bound;
    } else if (condition.op == "<=") {
        holds = actual <= bound;
    } else if (condition.op == ">") {
        holds = actual > bound;
    } else if (condition.op == ">=") {
        holds = actual >= bound;
    } else {
        return StepResult::error("unknown operator '" + condition.op + "'");
    }

    if (holds) return StepResult::ok();
    return StepResult::fail(condition.var + " is " + std::to_string(actual) + ", wanted " +
                            condition.op + " " + std::to_string(bound));
}

int run_protocol_loop(Simulator& simulator, std::istream& in, std::ostream& out,
                      std::ostream* message_log, int stall_after) {
    int responses = 0;
    std::string line;

    auto respond = [&](const ExecutorMessage& message) {
        if (stall_after >= 0 && responses >= stall_after) return;  // injected stall
        std::string encoded = encode_executor_message(message);
        out << encoded << "\n" << std::flush;
        if (message_log) *message_log << "<< " << encoded << "\n" << std::flush;
        ++responses;
    };

    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        if (message_log) *message_log << ">> " << line << "\n" << std::flush;

        EngineMessage request;
        try {
            request = decode_engine_message(line);
        } catch (const ProcessError& error) {
            respond(ExecutorMessage::error(error.what()));
            continue;
        }

        if (const auto* reset = std::get_if<ResetMsg>(&request)) {
            if (reset->protocol != kProtocolVersion) {
                respond(ExecutorMessage::error("unsupported protocol version '" +
                                               reset->protocol + "'"));
                continue;
            }
            simulator.reset();
            respond(ExecutorMessage::ok());
            continue;
        }
        if (const auto* step = std::get_if<StepMsg>(&request)) {
            StepResult result =
                simulator.step(step->phase, step->text, step->test_index, step->path_index);
            switch (result.kind) {
                case StepResult::Kind::Ok:
                    respond(ExecutorMessage::ok());
                    break;
                case StepResult::Kind::Fail:
                    respond(ExecutorMessage::fail(result.reason));
                    break;
                case StepResult::Kind::Error:
                    respond(ExecutorMessage::error(result.reason));
                    break;
            }
            continue;
        }
        respond(ExecutorMessage::ok());  // shutdown
        return 0;
    }
    return 0;
}

}  // namespace gmbt
