#include "gmbt/model.hpp"

#include <algorithm>
#include <stdexcept>

#include "gmbt/text.hpp"

namespace gmbt {

StateName StateName::from_raw(std::string_view raw) {
    StateName name;
    name.display = collapse_whitespace(raw);
    name.canonical = ascii_lower(name.display);
    return name;
}

std::string_view to_string(BuildErrorKind kind) {
    return kind == BuildErrorKind::NoStates ? "NoStates" : "NoTransition";
}

std::vector<std::string> Model::start_states() const {
    std::vector<std::string> out;
    for (const ModelState& state : states_) {
        if (state.is_start) out.push_back(state.name.canonical);
    }
    return out;
}

const ModelState* Model::find_state(std::string_view canonical) const {
    auto it = index_.find(std::string(canonical));
    return it == index_.end() ? nullptr : &states_[it->second];
}

const Transition* Model::find_transition(int id) const {
    for (const Transition& t : transitions_) {
        if (t.id == id) return &t;
    }
    return nullptr;
}

std::vector<int> Model::outgoing(std::string_view canonical_origin) const {
    std::vector<int> ids;
    for (const Transition& t : transitions_) {
        if (t.origin == canonical_origin) ids.push_back(t.id);
    }
    std::sort(ids.begin(), ids.end());
    return ids;
}

void Model::add_state(const StateName& name, bool is_start) {
    if (name.canonical.empty()) {
        throw std::invalid_argument("state with empty canonical name");
    }
    auto [it, inserted] = index_.try_emplace(name.canonical, states_.size());
    if (inserted) {
        states_.push_back({name, is_start});
    } else if (is_start) {
        states_[it->second].is_start = true;  // the start marking is sticky
    }
}

void Model::add_transition(Transition transition) {
    if (find_state(transition.origin) == nullptr || find_state(transition.target) == nullptr) {
        throw std::invalid_argument("transition endpoint is not a model state");
    }
    if (transition.id <= 0 || find_transition(transition.id) != nullptr) {
        throw std::invalid_argument("transition id must be positive and unused");
    }
    if (transition.actions.empty()) {
        throw std::invalid_argument("transition with no actions");
    }
    transitions_.push_back(std::move(transition));
}

namespace {

struct OriginMatch {
    const Step* step = nullptr;
    std::string raw_name;
    bool is_start = false;
};

/// First step of the given kind whose text matches one of the patterns with
/// a nonempty delimited name.
std::optional<OriginMatch> find_state_step(const Scenario& scenario, StepKind kind,
                                           const std::vector<std::string>& patterns,
                                           const ConventionConfig& config) {
    for (const Step& step : scenario.steps) {
        if (step.resolved_kind != kind) continue;
        for (const std::string& pattern : patterns) {
            auto name = match_state_template(step.text, pattern, config.state_delimiters);
            if (!name || trim(*name).empty()) continue;
            OriginMatch match;
            match.step = &step;
            match.raw_name = *name;
            match.is_start = normalize_phrase(pattern) == normalize_phrase(config.start_marker);
            return match;
        }
    }
    return std::nullopt;
}

std::vector<std::string> steps_of_kind_except(const Scenario& scenario, StepKind kind,
                                              const Step* excluded) {
    std::vector<std::string> out;
    for (const Step& step : scenario.steps) {
        if (step.resolved_kind == kind && &step != excluded) out.push_back(step.text);
    }
    return out;
}

}  // namespace

std::optional<OriginState> extract_origin_state(const Scenario& scenario,
                                                const ConventionConfig& config) {
    auto match = find_state_step(scenario, StepKind::Context, config.given_state_patterns, config);
    if (!match) return std::nullopt;
    return OriginState{StateName::from_raw(match->raw_name), match->is_start};
}

std::optional<StateName> extract_target_state(const Scenario& scenario,
                                              const ConventionConfig& config) {
    auto match = find_state_step(scenario, StepKind::Outcome, config.then_state_patterns, config);
    if (!match) return std::nullopt;
    return StateName::from_raw(match->raw_name);
}

std::vector<std::string> extract_preconditions(const Scenario& scenario,
                                               const ConventionConfig& config) {
    auto match = find_state_step(scenario, StepKind::Context, config.given_state_patterns, config);
    return steps_of_kind_except(scenario, StepKind::Context, match ? match->step : nullptr);
}

std::vector<std::string> extract_postconditions(const Scenario& scenario,
                                                const ConventionConfig& config) {
    auto match = find_state_step(scenario, StepKind::Outcome, config.then_state_patterns, config);
    return steps_of_kind_except(scenario, StepKind::Outcome, match ? match->step : nullptr);
}

std::vector<std::string> extract_actions(const Scenario& scenario) {
    return steps_of_kind_except(scenario, StepKind::Action, nullptr);
}

BuildReport build_model(std::span<const Scenario> scenarios, const ConventionConfig& config,
                        std::string_view feature_name) {
    if (auto reason = config.invalid_reason()) {
        throw std::invalid_argument("invalid convention config: " + *reason);
    }

    BuildReport report;
    int next_id = 1;
    for (const Scenario& scenario : scenarios) {
        Provenance provenance{std::string(feature_name), scenario.name, scenario.location};

        auto origin = extract_origin_state(scenario, config);
        auto target = extract_target_state(scenario, config);
        if (!origin || !target) {
            std::string missing = !origin && !target ? "no origin or target state"
                                  : !origin          ? "no origin state"
                                                     : "no target state";
            report.errors.push_back({std::move(provenance), BuildErrorKind::NoStates,
                                     "Unable to extract states from test scenario '" +
                                         scenario.name + "': " + missing});
            continue;
        }

        report.model.add_state(origin->name, origin->is_start);
        report.model.add_state(*target);

        auto preconditions = extract_preconditions(scenario, config);
        auto postconditions = extract_postconditions(scenario, config);
        auto actions = extract_actions(scenario);
        if (actions.empty()) {
            report.errors.push_back({std::move(provenance), BuildErrorKind::NoTransition,
                                     "Unable to extract transition from test scenario '" +
                                         scenario.name + "': no When action"});
            continue;
        }

        Transition transition;
        transition.id = next_id++;
        transition.origin = origin->name.canonical;
        transition.target = target->canonical;
        transition.preconditions = std::move(preconditions);
        transition.actions = std::move(actions);
        transition.postconditions = std::move(postconditions);
        transition.provenance = std::move(provenance);
        report.model.add_transition(std::move(transition));
    }
    return report;
}

BuildReport build_model(std::span<const Feature> features, const ConventionConfig& config) {
    if (auto reason = config.invalid_reason()) {
        throw std::invalid_argument("invalid convention config: " + *reason);
    }

    BuildReport report;
    int next_id = 1;
    for (const Feature& feature : features) {
        BuildReport partial = build_model(feature.scenarios, config, feature.name);
        for (const ModelState& state : partial.model.states()) {
            report.model.add_state(state.name, state.is_start);
        }
        for (Transition t : partial.model.transitions()) {
            t.id = next_id++;
            report.model.add_transition(std::move(t));
        }
        for (BuildError& error : partial.errors) {
            report.errors.push_back(std::move(error));
        }
    }
    return report;
}

}  // namespace gmbt
