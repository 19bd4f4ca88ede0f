#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "gmbt/errors.hpp"
#include "gmbt/executor.hpp"
#include "gmbt/gherkin.hpp"

namespace gmbt {

/// Comparison over an integer variable, optionally against a value captured
/// from the step text instead of a literal.
struct SimCondition {
    std::string var;
    std::string op;  // == != < <= > >=
    std::optional<long long> value;
    std::optional<std::string> capture;
};

/// Either a variable update or a page change, never both.
struct SimEffect {
    std::optional<std::string> var;
    std::string op;  // = += -=
    std::optional<long long> value;
    std::optional<std::string> capture;
    std::optional<std::string> page;
};

/// One step-definition rule. Patterns may contain integer captures like
/// "the size should be {n}". Precondition and postcondition rules carry a
/// condition and no effects; action rules carry effects and no condition.
struct SimRule {
    Phase phase = Phase::Action;
    std::string name;  // optional; faults refer to postcondition rules by name
    std::string pattern;
    std::optional<SimCondition> condition;
    std::vector<SimEffect> effects;
};

/// A seeded fault: when every present trigger field matches an incoming
/// action step (variables read before the action's effects apply), the named
/// postcondition rule is forced to fail until the next reset.
struct SimFault {
    std::optional<std::string> step_equals;
    std::optional<SimCondition> when;
    std::optional<long long> fired_at_least;
    std::string fail_rule;
    std::string reason;
};

struct SimSpec {
    std::map<std::string, long long> variables;
    std::vector<std::string> pages;
    std::string initial_page;
    std::vector<SimRule> rules;
    std::vector<SimFault> faults;
};

inline constexpr std::string_view kSimSchema = "sim/1";

/// Throws SchemaMismatch for a wrong/missing schema field and
/// MalformedDocument for anything else that does not parse.
SimSpec sim_spec_from_json(std::string_view text);
std::string sim_spec_to_json(const SimSpec& spec);
SimSpec load_sim_spec(const std::string& path);

/// Structural checks: invariants, shadowed rules, undefined variables and
/// captures, unknown fault targets. Error-severity diagnostics make the spec
/// unusable.
std::vector<Diagnostic> validate_spec(const SimSpec& spec, const std::string& file = "<spec>");

/// Deterministic simulated SUT. Steps are matched against the rules of their
/// phase in declared order, first match wins; an unmatched step fails with
/// reason "no matching rule". Precondition and postcondition steps never
/// change state.
class Simulator final : public StepExecutor {
public:
    explicit Simulator(SimSpec spec);

    StepResult reset() override;
    StepResult step(Phase phase, const std::string& text, int test_index,
                    int path_index) override;

    const SimSpec& spec() const { return spec_; }
    long long variable(const std::string& name) const;
    const std::string& current_page() const { return page_; }
    long long fired_actions() const { return fired_actions_; }

private:
    StepResult apply_action(const SimRule& rule,
                            const std::map<std::string, long long>& captures,
                            const std::string& text);
    StepResult evaluate(const SimCondition& condition,
                        const std::map<std::string, long long>& captures) const;

    SimSpec spec_;
    std::map<std::string, long long> variables_;
    std::string page_;
    long long fired_actions_ = 0;
    std::map<std::string, std::string> armed_faults_;  // rule name -> reason
};

/// Speaks protocol v1 on the given streams until Shutdown or end of input.
/// Malformed frames get an error response and the loop continues. When
/// stall_after >= 0 the loop stops responding after that many responses
/// (timeout-behavior injection for conformance testing). Returns the process
/// exit code.
int run_protocol_loop(Simulator& simulator, std::istream& in, std::ostream& out,
                      std::ostream* message_log = nullptr, int stall_after = -1);

/// Pattern-template matching helper, exposed for validation and tests:
/// matches `text` against `pattern` with `{name}` integer captures.
std::optional<std::map<std::string, long long>> match_rule_pattern(std::string_view pattern,
                                                                   std::string_view text);

}  // namespace gmbt
