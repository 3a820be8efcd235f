#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "driftlab/stats.hpp"

namespace driftlab {

// Input that violates the results-file contract.  Messages name the row and
// column of the offending cell.
class SchemaError : public std::runtime_error {
  public:
    explicit SchemaError(const std::string& msg) : std::runtime_error(msg) {}
};

inline constexpr int kResultsSchemaVersion = 1;

// One record per row, columns in this fixed order:
//   model_id, family, hyperparams, acc_id, acc_id_ci_lo, acc_id_ci_hi,
//   acc_ood, acc_ood_ci_lo, acc_ood_ci_hi, n_id, n_ood, status
// Probabilities carry 9 significant digits, the n columns are blank for
// exactly-computed metrics, rows are sorted by model_id, and the first line
// is a schema-version comment.
std::string write_records_csv(const std::vector<EvalRecord>& records);
void save_records_csv(const std::vector<EvalRecord>& records, const std::string& path);

// Header-based reader for the same format.  Column order is free and two
// relaxations are allowed so externally produced files can be ingested: the
// interval columns may be missing (intervals are then Clopper-Pearson at 95%
// when the matching n column has a value, or collapse to the point value
// when it does not), and the n and status columns may be missing entirely
// (status then defaults to "ok").
std::vector<EvalRecord> read_records_csv(std::string_view text);
std::vector<EvalRecord> load_records_csv(const std::string& path);

// One fitted trend plus the context needed to interpret it.
struct FitSummary {
    TrendFit fit;
    std::optional<double> theoretical_slope;
    std::optional<double> theorem_bound;
    std::string scenario;
    std::uint64_t seed = 0;
};

// JSON round trip for named fit groups; doubles survive bit-for-bit.
std::string write_fit_json(const std::map<std::string, FitSummary>& groups);
void save_fit_json(const std::map<std::string, FitSummary>& groups, const std::string& path);
std::map<std::string, FitSummary> read_fit_json(std::string_view text);
std::map<std::string, FitSummary> load_fit_json(const std::string& path);

} // namespace driftlab
