#pragma once

#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "gmbt/gherkin.hpp"

namespace gmbt {

/// State identity is the canonical form: trimmed, internal whitespace
/// collapsed, ASCII case-folded. `display` keeps the first-seen spelling for
/// rendering.
struct StateName {
    std::string canonical;
    std::string display;

    static StateName from_raw(std::string_view raw);

    bool operator==(const StateName& other) const { return canonical == other.canonical; }
};

struct Provenance {
    std::string feature;
    std::string scenario;
    SourceLocation location;

    bool operator==(const Provenance&) const = default;
};

/// One scenario turned into a model edge. Origin and target are canonical
/// state names owned by the enclosing model's state set.
struct Transition {
    int id = 0;
    std::string origin;
    std::string target;
    std::vector<std::string> preconditions;
    std::vector<std::string> actions;
    std::vector<std::string> postconditions;
    Provenance provenance;

    bool operator==(const Transition&) const = default;
};

struct ModelState {
    StateName name;
    bool is_start = false;

    bool operator==(const ModelState&) const = default;
};

/// The finite-state model: states in first-seen order, a start subset, and an
/// ordered transition multiset (duplicates preserved, one per scenario).
/// Immutable in normal use once built; mutators exist for the builder and the
/// deserializer.
class Model {
public:
    bool empty() const { return states_.empty() && transitions_.empty(); }

    const std::vector<ModelState>& states() const { return states_; }
    const std::vector<Transition>& transitions() const { return transitions_; }

    /// Canonical names of start states, in state order.
    std::vector<std::string> start_states() const;

    const ModelState* find_state(std::string_view canonical) const;
    const Transition* find_transition(int id) const;

    /// Ids of transitions leaving the given state, ascending.
    std::vector<int> outgoing(std::string_view canonical_origin) const;

    /// Inserts a state if its canonical name is new; the first display
    /// spelling wins. Marks it as start when requested (the flag is sticky).
    void add_state(const StateName& name, bool is_start = false);

    /// Appends a transition. Both endpoints must already be states and the id
    /// must be unused; throws std::invalid_argument otherwise.
    void add_transition(Transition transition);

    bool operator==(const Model& other) const {
        return states_ == other.states_ && transitions_ == other.transitions_;
    }

private:
    std::vector<ModelState> states_;
    std::vector<Transition> transitions_;
    std::unordered_map<std::string, std::size_t> index_;
};

enum class BuildErrorKind { NoStates, NoTransition };

std::string_view to_string(BuildErrorKind kind);

struct BuildError {
    Provenance provenance;
    BuildErrorKind kind = BuildErrorKind::NoStates;
    std::string message;
};

/// Result of model construction: each input scenario contributed exactly one
/// transition or exactly one error entry.
struct BuildReport {
    Model model;
    std::vector<BuildError> errors;
};

struct OriginState {
    StateName name;
    bool is_start = false;
};

/// Scans Context steps for the first one matching a given_state_pattern with
/// a nonempty delimited name. is_start is true iff the matched template is
/// the config's start_marker.
std::optional<OriginState> extract_origin_state(const Scenario& scenario,
                                                const ConventionConfig& config);

/// As extract_origin_state, over Outcome steps and then_state_patterns.
/// Target states carry no start flag.
std::optional<StateName> extract_target_state(const Scenario& scenario,
                                              const ConventionConfig& config);

/// Context steps excluding the matched origin-state declaration.
std::vector<std::string> extract_preconditions(const Scenario& scenario,
                                               const ConventionConfig& config);

/// Outcome steps excluding the matched target-state declaration.
std::vector<std::string> extract_postconditions(const Scenario& scenario,
                                                const ConventionConfig& config);

/// All Action-kind steps in source order, including And steps resolved to
/// Action.
std::vector<std::string> extract_actions(const Scenario& scenario);

/// Builds the model: per scenario, extract origin and target (missing either
/// records a NoStates error), merge states by canonical name, then extract
/// preconditions, actions and postconditions; an empty action list records a
/// NoTransition error, anything else appends a transition. Deterministic and
/// order-stable; transition ids are 1-based in processing order.
BuildReport build_model(std::span<const Scenario> scenarios, const ConventionConfig& config,
                        std::string_view feature_name = {});

/// Convenience overload over whole features, processed in order.
BuildReport build_model(std::span<const Feature> features, const ConventionConfig& config);

}  // namespace gmbt
