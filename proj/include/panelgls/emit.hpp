#pragma once

#include <string>
#include <vector>

#include "panelgls/harness.hpp"

namespace panelgls {

// CSV schema: experiment,scenario,T,estimator,metric,value,stderr,reps.
// Doubles are printed with %.17g so a re-parse is exact.
std::string summary_to_csv(const McSummary& summary);
McSummary parse_summary_csv(const std::string& text);

// Static SVG 1.1 line charts: one panel per scenario (example 3: per alpha,
// one line per subject count), estimators distinguished by marker.
std::string summary_to_svg(const McSummary& summary);

struct EmitOptions {
  bool csv = true;
  bool svg = true;
};

// Writes <experiment>_summary.csv / <experiment>_fig.svg under outputDir
// (created if missing) and returns the paths written.
std::vector<std::string> emit_outputs(const McSummary& summary, const std::string& outputDir,
                                      const EmitOptions& opts = {});

}  // namespace panelgls
