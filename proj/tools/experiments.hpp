#pragma once

#include <ostream>
#include <string>

#include "config.hpp"

namespace itemper::app {

inline constexpr int kSchemaVersion = 1;

/// Shortest round-trip decimal form; "nan"/"inf"/"-inf" for non-finite values.
std::string format_number(double x);
/// Fixed-point with `digits` decimals.
std::string format_fixed(double x, int digits);

/// Runs the configured experiment, writes records.csv, summary.json and
/// report.csv under cfg.out, and returns the one-line summary. Warnings go to
/// `log`. Throws ConfigError / GuardError.
std::string run_experiment(const ExperimentConfig& cfg, std::ostream& log);

}  // namespace itemper::app
