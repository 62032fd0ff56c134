#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "unlearnq/experiment.hpp"

namespace unlearnq::report {

// MIA orientation note embedded in every report so comparisons never mix
// conventions.
inline constexpr const char* kMiaConvention =
    "percent of the forget set the confidence-threshold attacker classifies as non-member; "
    "higher means the forget set looks forgotten";

// Atomic file writes: write-temp-then-rename.
void write_text_atomic(const std::filesystem::path& path, const std::string& content);

// Full per-run report: raw metrics, per-metric gaps, AG, config hash, seed,
// wall-clock, artifact version, resolved config.
std::string report_json(const exp::ExperimentConfig& ec, const exp::MethodOutcome& outcome);

// Fixed column order:
// config_hash,seed,method,fa,ra,ta,mia,gap_fa,gap_ra,gap_ta,gap_mia,ag,wall_clock_ms
std::string csv_header();
std::string csv_row(const exp::ExperimentConfig& ec, const exp::MethodOutcome& outcome);

// One JSON object per optimization step (conflict diagnostics included),
// preceded by nothing and followed by a single summary line.
std::string trace_jsonl(const unlearn::RunTrace& trace);

struct MethodSummary {
  std::string method;
  int runs = 0;
  int failures = 0;
  double fa_mean = 0, fa_std = 0;
  double ra_mean = 0, ra_std = 0;
  double ta_mean = 0, ta_std = 0;
  double mia_mean = 0, mia_std = 0;
  double ag_mean = 0, ag_std = 0;
  bool best_ag = false;
};

std::vector<MethodSummary> summarize(const std::vector<exp::MethodOutcome>& outcomes);
std::string summary_table(const std::vector<MethodSummary>& rows);
std::string summary_csv(const std::vector<MethodSummary>& rows);

}  // namespace unlearnq::report
