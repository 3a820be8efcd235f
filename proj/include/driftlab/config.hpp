#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

#include "driftlab/scenarios.hpp"

namespace driftlab {

// Malformed or out-of-contract configuration input.  Messages carry the line
// number and the field name so callers can report them verbatim.
class ConfigError : public std::runtime_error {
  public:
    explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

// Parses scenario configuration text.  The format is INI-like:
//
//   # comment
//   [scenario]
//   kind = main_trend
//   seed = 1729
//
//   [grid]
//   logistic_l2_c = 1e-6, 1e-4, 1e-2, 1
//
// scenario.kind selects the per-scenario defaults; every other entry
// overrides a single field.  Unknown sections or keys are errors.
ScenarioConfig parse_config(std::string_view text);

// parse_config on the contents of the file at `path`.
ScenarioConfig load_config(const std::string& path);

} // namespace driftlab
