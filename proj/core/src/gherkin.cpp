#include "gmbt/gherkin.hpp"

#include <algorithm>
#include <array>
#include <set>
#include <sstream>

#include "gmbt/text.hpp"

namespace gmbt {

std::string_view to_string(StepKeyword keyword) {
    switch (keyword) {
        case StepKeyword::Given: return "Given";
        case StepKeyword::When: return "When";
        case StepKeyword::Then: return "Then";
        case StepKeyword::And: return "And";
    }
    return "?";
}

std::string_view to_string(StepKind kind) {
    switch (kind) {
        case StepKind::Context: return "Context";
        case StepKind::Action: return "Action";
        case StepKind::Outcome: return "Outcome";
    }
    return "?";
}

std::string_view to_string(Severity severity) {
    return severity == Severity::Error ? "error" : "warning";
}

std::string format_diagnostic(const Diagnostic& diagnostic) {
    return to_string(diagnostic.location) + ": " + std::string(to_string(diagnostic.severity)) +
           ": " + diagnostic.message;
}

std::optional<std::string> ConventionConfig::invalid_reason() const {
    if (given_state_patterns.empty()) return "given_state_patterns is empty";
    if (then_state_patterns.empty()) return "then_state_patterns is empty";
    if (std::find(given_state_patterns.begin(), given_state_patterns.end(), start_marker) ==
        given_state_patterns.end()) {
        return "start_marker is not one of the given_state_patterns";
    }
    return std::nullopt;
}

std::optional<std::string> match_state_template(std::string_view step_text,
                                                std::string_view pattern,
                                                std::pair<char, char> delimiters) {
    auto hole = pattern.find('~');
    if (hole == std::string_view::npos) return std::nullopt;
    std::string_view pattern_before = pattern.substr(0, hole);
    std::string_view pattern_after = pattern.substr(hole + 1);

    auto open = step_text.find(delimiters.first);
    if (open == std::string_view::npos) return std::nullopt;
    auto close = step_text.find(delimiters.second, open + 1);
    if (close == std::string_view::npos) return std::nullopt;

    std::string_view text_before = step_text.substr(0, open);
    std::string_view text_after = step_text.substr(close + 1);
    if (normalize_phrase(text_before) != normalize_phrase(pattern_before)) return std::nullopt;
    if (normalize_phrase(text_after) != normalize_phrase(pattern_after)) return std::nullopt;
    return std::string(step_text.substr(open + 1, close - open - 1));
}

namespace {

constexpr std::string_view kFeatureHeader = "Feature:";
constexpr std::string_view kScenarioHeader = "Scenario:";

// Constructs of full Gherkin that this subset deliberately rejects.
constexpr std::array<std::string_view, 4> kUnsupported = {
    "Scenario Outline:", "Scenario Template:", "Background:", "Examples:"};

StepKind kind_for(StepKeyword keyword) {
    switch (keyword) {
        case StepKeyword::Given: return StepKind::Context;
        case StepKeyword::When: return StepKind::Action;
        case StepKeyword::Then: return StepKind::Outcome;
        case StepKeyword::And: break;
    }
    return StepKind::Context;
}

std::optional<StepKeyword> keyword_from(std::string_view token) {
    if (token == "Given") return StepKeyword::Given;
    if (token == "When") return StepKeyword::When;
    if (token == "Then") return StepKeyword::Then;
    if (token == "And") return StepKeyword::And;
    return std::nullopt;
}

std::vector<std::string_view> split_lines(std::string_view source) {
    std::vector<std::string_view> lines;
    std::size_t start = 0;
    while (start <= source.size()) {
        auto end = source.find('\n', start);
        if (end == std::string_view::npos) {
            lines.push_back(source.substr(start));
            break;
        }
        auto line = source.substr(start, end - start);
        if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
        lines.push_back(line);
        start = end + 1;
    }
    return lines;
}

}  // namespace

Feature parse_feature(std::string_view source, const std::string& file) {
    Feature feature;
    feature.source = file;

    bool saw_feature = false;
    Scenario* current = nullptr;
    std::optional<StepKind> last_kind;

    int line_no = 0;
    for (std::string_view raw : split_lines(source)) {
        ++line_no;
        SourceLocation here{file, line_no};
        std::string_view line = trim(raw);
        if (line.empty() || line.front() == '#') continue;

        if (line.front() == '@') {
            throw ParseError("tags are not supported", here);
        }
        for (std::string_view construct : kUnsupported) {
            if (line.starts_with(construct)) {
                std::string name(construct.substr(0, construct.size() - 1));
                throw ParseError("unsupported construct: " + name, here);
            }
        }

        if (line.starts_with(kFeatureHeader)) {
            if (saw_feature) throw ParseError("multiple Feature headers", here);
            saw_feature = true;
            feature.name = std::string(trim(line.substr(kFeatureHeader.size())));
            continue;
        }
        if (line.starts_with(kScenarioHeader)) {
            if (!saw_feature) throw ParseError("Scenario header before Feature header", here);
            Scenario scenario;
            scenario.name = std::string(trim(line.substr(kScenarioHeader.size())));
            scenario.location = here;
            feature.scenarios.push_back(std::move(scenario));
            current = &feature.scenarios.back();
            last_kind.reset();
            continue;
        }

        auto token_end = line.find_first_of(" \t");
        std::string_view token = line.substr(0, token_end);
        auto keyword = keyword_from(token);
        if (!keyword) {
            throw ParseError("unknown leading keyword '" + std::string(token) + "'", here);
        }
        if (current == nullptr) {
            throw ParseError("step before any Scenario header", here);
        }
        std::string_view rest =
            token_end == std::string_view::npos ? std::string_view{} : line.substr(token_end);
        std::string text(trim(rest));
        if (text.empty()) {
            throw ParseError("step has no text after its keyword", here);
        }

        Step step;
        step.keyword = *keyword;
        step.text = std::move(text);
        step.location = here;
        if (*keyword == StepKeyword::And) {
            if (!last_kind) {
                throw ParseError("And step without a preceding Given/When/Then", here);
            }
            step.resolved_kind = *last_kind;
        } else {
            step.resolved_kind = kind_for(*keyword);
            last_kind = step.resolved_kind;
        }
        current->steps.push_back(std::move(step));
    }

    if (!saw_feature) {
        throw ParseError("missing Feature header", {file, 1});
    }
    return feature;
}

std::string render_feature(const Feature& feature) {
    std::ostringstream out;
    out << kFeatureHeader << ' ' << feature.name << '\n';
    for (const Scenario& scenario : feature.scenarios) {
        out << kScenarioHeader << ' ' << scenario.name << '\n';
        for (const Step& step : scenario.steps) {
            out << "  " << to_string(step.keyword) << ' ' << step.text << '\n';
        }
    }
    return out.str();
}

namespace {

struct StateScan {
    // Locations of context/outcome steps that declare a state, in step order.
    std::vector<const Step*> declarations;
    bool empty_name_seen = false;
    SourceLocation empty_name_at;
};

StateScan scan_state_declarations(const Scenario& scenario, StepKind kind,
                                  const std::vector<std::string>& patterns,
                                  std::pair<char, char> delimiters) {
    StateScan scan;
    for (const Step& step : scenario.steps) {
        if (step.resolved_kind != kind) continue;
        for (const std::string& pattern : patterns) {
            auto name = match_state_template(step.text, pattern, delimiters);
            if (!name) continue;
            if (trim(*name).empty()) {
                if (!scan.empty_name_seen) {
                    scan.empty_name_seen = true;
                    scan.empty_name_at = step.location;
                }
            } else {
                scan.declarations.push_back(&step);
            }
            break;
        }
    }
    return scan;
}

}  // namespace

std::vector<Diagnostic> lint_conventions(const Feature& feature, const ConventionConfig& config) {
    if (auto reason = config.invalid_reason()) {
        throw std::invalid_argument("invalid convention config: " + *reason);
    }

    std::vector<Diagnostic> out;
    std::set<std::string> seen_names;
    for (const Scenario& scenario : feature.scenarios) {
        auto origin = scan_state_declarations(scenario, StepKind::Context,
                                              config.given_state_patterns,
                                              config.state_delimiters);
        auto target = scan_state_declarations(scenario, StepKind::Outcome,
                                              config.then_state_patterns,
                                              config.state_delimiters);

        if (origin.empty_name_seen) {
            out.push_back({Severity::Error, "state name is empty between delimiters",
                           origin.empty_name_at});
        }
        if (target.empty_name_seen) {
            out.push_back({Severity::Error, "state name is empty between delimiters",
                           target.empty_name_at});
        }

        bool origin_missing = origin.declarations.empty() && !origin.empty_name_seen;
        bool target_missing = target.declarations.empty() && !target.empty_name_seen;
        if (origin_missing && target_missing) {
            out.push_back({Severity::Error,
                           "no quoted state in the Given or Then steps of scenario '" +
                               scenario.name + "'",
                           scenario.location});
        } else if (origin_missing) {
            out.push_back({Severity::Error,
                           "no quoted origin state in the Given steps of scenario '" +
                               scenario.name + "'",
                           scenario.location});
        } else if (target_missing) {
            out.push_back({Severity::Error,
                           "no quoted target state in the Then steps of scenario '" +
                               scenario.name + "'",
                           scenario.location});
        }

        if (origin.declarations.size() > 1) {
            out.push_back({Severity::Error, "more than one origin state declaration",
                           origin.declarations[1]->location});
        }
        if (target.declarations.size() > 1) {
            out.push_back({Severity::Warning, "more than one target state declaration",
                           target.declarations[1]->location});
        }

        bool has_action = std::any_of(scenario.steps.begin(), scenario.steps.end(),
                                      [](const Step& s) {
                                          return s.resolved_kind == StepKind::Action;
                                      });
        if (!has_action) {
            out.push_back({Severity::Error,
                           "scenario '" + scenario.name + "' has no When step",
                           scenario.location});
        }

        // Kinds should appear as Context* Action* Outcome*.
        int rank = 0;
        for (const Step& step : scenario.steps) {
            int step_rank = static_cast<int>(step.resolved_kind);
            if (step_rank < rank) {
                out.push_back({Severity::Warning,
                               "steps out of Given/When/Then order", step.location});
                break;
            }
            rank = step_rank;
        }

        if (!seen_names.insert(scenario.name).second) {
            out.push_back({Severity::Warning,
                           "duplicate scenario name '" + scenario.name + "'",
                           scenario.location});
        }
    }
    return out;
}

}  // namespace gmbt
