#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "driftlab/numerics.hpp"
#include "driftlab/stats.hpp"

namespace driftlab {

struct TheoreticalLine {
    double slope = 1.0;
    double intercept = 0.0;
};

// ID-versus-OOD scatter plot.  Both axes live in the transformed domain but
// are labeled in raw accuracy units, every successfully scored record gets a
// marker with interval whiskers on both axes, each named fit is drawn as its
// own stroke, the theoretical line (when given) is drawn distinctly, and the
// identity line is dashed.  Output is deterministic byte for byte.
std::string render_scatter_svg(const std::vector<EvalRecord>& records,
                               const std::map<std::string, TrendFit>& fits,
                               const std::optional<TheoreticalLine>& theoretical,
                               TransformKind axis_transform);

// render_scatter_svg written to `path`.
void emit_svg(const std::vector<EvalRecord>& records,
              const std::map<std::string, TrendFit>& fits,
              const std::optional<TheoreticalLine>& theoretical, TransformKind axis_transform,
              const std::string& path);

} // namespace driftlab
