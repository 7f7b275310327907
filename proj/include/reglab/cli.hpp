#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "reglab/config.hpp"
#include "reglab/verify.hpp"

namespace reglab {

enum ExitCode : int { kExitPass = 0, kExitVerdictFailed = 1, kExitUsage = 2, kExitRuntime = 3 };

/// Runs the experiment named by cfg.run and returns its report.
VerifyReport execute(const ExperimentConfig& cfg);

/// Writes the report (and trajectories when requested) under cfg.run.out and
/// returns the report path.
std::string write_outputs(const ExperimentConfig& cfg, const VerifyReport& rep);

/// Full command line front end. Returns the process exit status.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace reglab
