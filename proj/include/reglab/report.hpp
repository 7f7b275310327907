#pragma once

#include <string>

#include "reglab/dynamics.hpp"
#include "reglab/verify.hpp"

namespace reglab {

struct WriteOptions {
    // When false every runtime field is written as 0 so reruns are byte-identical.
    bool timing = true;
};

/// %.17g, with nan, inf and -inf spelled out.
std::string format_double(double x);

/// Per-trial rows under a header line, then a `#summary` block with one
/// `kind,name,value,op,threshold,pass` row per param, metric, trend, verdict.
std::string report_csv(const VerifyReport& rep, const WriteOptions& opts = {});
std::string report_json(const VerifyReport& rep, const WriteOptions& opts = {});

/// Compact single-line JSON listing the failed verdicts.
std::string failure_summary_json(const VerifyReport& rep);

/// Header t,x_0..x_{d-1},reward,tanh_diag,meas_proj.
std::string trajectory_csv(const Trajectory& traj);

}  // namespace reglab
