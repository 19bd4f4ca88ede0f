#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "gmbt/errors.hpp"

namespace gmbt {

enum class StepKeyword { Given, When, Then, And };
enum class StepKind { Context, Action, Outcome };

std::string_view to_string(StepKeyword keyword);
std::string_view to_string(StepKind kind);

/// One Given/When/Then/And line. `text` has the keyword stripped and the
/// surrounding whitespace trimmed; `resolved_kind` of an And step is the kind
/// of the nearest preceding non-And step in the same scenario.
struct Step {
    StepKeyword keyword = StepKeyword::Given;
    StepKind resolved_kind = StepKind::Context;
    std::string text;
    SourceLocation location;

    bool operator==(const Step&) const = default;
};

struct Scenario {
    std::string name;
    std::vector<Step> steps;
    SourceLocation location;

    bool operator==(const Scenario&) const = default;
};

struct Feature {
    std::string name;
    std::vector<Scenario> scenarios;
    std::string source;

    bool operator==(const Feature&) const = default;
};

/// Phrase templates that make states extractable from Given/Then steps.
/// `~` marks where the delimited state name appears; matching against step
/// text is case-insensitive with internal whitespace collapsed.
struct ConventionConfig {
    std::vector<std::string> given_state_patterns = {"I am on the ~", "I start on the ~"};
    std::vector<std::string> then_state_patterns = {"I should be on the ~",
                                                    "I should go to the ~"};
    std::string start_marker = "I start on the ~";
    std::pair<char, char> state_delimiters = {'"', '"'};

    /// Checks the config invariants: nonempty pattern lists and a
    /// start_marker that is a member of given_state_patterns.
    /// Returns an explanation for the first violation found.
    std::optional<std::string> invalid_reason() const;
};

enum class Severity { Error, Warning };

std::string_view to_string(Severity severity);

struct Diagnostic {
    Severity severity = Severity::Error;
    std::string message;
    SourceLocation location;

    bool operator==(const Diagnostic&) const = default;
};

/// Renders a diagnostic as `file:line: severity: message`.
std::string format_diagnostic(const Diagnostic& diagnostic);

/// Parses UTF-8 feature text (LF or CRLF) into a syntax tree with resolved
/// step kinds. Comment lines starting with `#` and blank lines are skipped;
/// keywords are matched case-sensitively at line start after indentation.
/// Throws ParseError for text without a Feature header, steps outside a
/// scenario, a leading And, unknown keywords, and full-Gherkin constructs
/// outside the supported subset (tags, Background, Scenario Outline, ...).
Feature parse_feature(std::string_view source, const std::string& file);

/// Canonical renderer: parse_feature(render_feature(f), f.source) == f for
/// any well-formed feature.
std::string render_feature(const Feature& feature);

/// Checks a parsed feature against the three authoring conventions. Emits an
/// error for every scenario whose Given/Then steps yield no quoted state, for
/// a missing When step, for an empty name between delimiters, and for a
/// second state-declaring Context step. Pure function, no I/O.
std::vector<Diagnostic> lint_conventions(const Feature& feature, const ConventionConfig& config);

/// Matches step text against one phrase template. Returns the text between
/// the state delimiters when the template matches, including the empty
/// string for a matched-but-empty name.
std::optional<std::string> match_state_template(std::string_view step_text,
                                                std::string_view pattern,
                                                std::pair<char, char> delimiters);

}  // namespace gmbt
