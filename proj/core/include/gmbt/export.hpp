#pragma once

#include <string>
#include <string_view>

#include "gmbt/engine.hpp"
#include "gmbt/model.hpp"

namespace gmbt {

inline constexpr std::string_view kModelSchema = "model/1";
inline constexpr std::string_view kReportSchema = "report/1";

/// Graphviz digraph: one node per state (start states doubled), one edge per
/// transition labeled with its action texts plus "[pre]"/"[post]" lines.
/// Nodes are sorted by canonical name and edges by id, so identical models
/// render to identical bytes. Label lines longer than 60 characters are
/// truncated with an ellipsis; the full text lives in the JSON form.
std::string model_to_dot(const Model& model);

/// Lossless, schema-versioned serialization (ids, provenance and display
/// spellings included).
std::string model_to_json(const Model& model);

/// Throws SchemaMismatch for a wrong schema field and MalformedDocument for
/// anything else that does not parse back into a valid model.
Model model_from_json(std::string_view text);

std::string report_to_json(const RunReport& report);
RunReport report_from_json(std::string_view text);

/// Human-readable digest: counts, coverage, and the original and shrunk
/// counterexamples rendered as scenario-name sequences (which is why the
/// model is needed).
std::string report_summary(const RunReport& report, const Model& model);

}  // namespace gmbt
