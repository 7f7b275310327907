#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "reglab/dynamics.hpp"
#include "reglab/models.hpp"

namespace reglab {

struct Verdict {
    std::string name;
    std::string metric;
    std::string op;  // one of <, <=, >, >=
    double threshold = 0.0;
    bool pass = false;
};

struct Table {
    std::vector<std::string> columns;
    std::vector<std::vector<double>> rows;
};

struct NamedTrajectory {
    std::string name;
    Trajectory trajectory;
};

/// Self-describing result of one experiment. Every verdict compares a named
/// metric of the same report against its stored threshold.
struct VerifyReport {
    std::string experiment;
    std::vector<std::pair<std::string, std::string>> params;
    std::vector<std::pair<std::string, double>> metrics;
    std::vector<std::pair<std::string, std::vector<double>>> trends;
    std::vector<Verdict> verdicts;
    std::vector<std::string> notes;
    Table table;
    std::vector<NamedTrajectory> trajectories;
    double runtime_seconds = 0.0;

    void param(const std::string& key, const std::string& value);
    void param(const std::string& key, double value);
    void metric(const std::string& key, double value);
    void trend(const std::string& key, std::vector<double> values);
    std::optional<double> metric_value(const std::string& key) const;
    const std::vector<double>* trend_values(const std::string& key) const;
    const Verdict* verdict(const std::string& name) const;

    /// Adds a verdict evaluated against an already-recorded metric; NaN fails.
    void check(const std::string& name, const std::string& metric, const std::string& op, double threshold);
    bool all_pass() const;
};

struct TrialControl {
    std::uint64_t seed = 0;
    int workers = 0;
    bool keep_trajectories = false;  // first trial per arm
};

struct ConsistencyPreset {
    int cases = 100;
    double tau_max = 3.0;
    double hypercube_R = 2.0;
    int hypercube_d = 4;
    double bimodal_R = 3.0;
    int bimodal_d = 3;
    int iso_d = 3;
    TrialControl run;
};

struct ProjectionPreset {
    int d = 8;
    int m = 3;
    double R = 3.0;
    std::vector<int> indices;  // zero-based; defaults to the first m coordinates
    std::vector<double> sigmas{0.2, 0.1, 0.05};
    int trials = 20;
    double max_error = 0.05;
    bool check_double_T = false;
    GuidanceConfig guidance;
    TrialControl run;
};

struct SdeFailurePreset {
    int d = 4;
    int m = 1;
    double R = 3.0;
    std::vector<int> indices;
    double sigma = 0.05;
    int trials = 2000;
    double ode_tolerance = 0.05;
    GuidanceConfig guidance;
    TrialControl run;
};

struct ContractionPreset {
    double R = 5.0;
    int d = 2;
    Eigen::VectorXd v;  // defaults to (cos 45deg, sin 45deg, 0, ...)
    std::vector<double> sigmas{0.05, 0.01, 0.005};
    int trials = 8;
    double offset_min = 2.0;  // distance of x from z1 along the consistency line
    double offset_max = 3.0;
    double window_loglog_factor = 3.0;
    GuidanceConfig guidance;
    TrialControl run;
};

struct DpsBiasPreset {
    double y = 2.0;
    double sigma = 1.0;
    double T = 5.0;
    int trials = 5000;
    int sde_steps = 8192;
    TrialControl run;
};

struct RoundtripPreset {
    ModelSpec model = ModelSpec::hypercube(3.0, 8);
    int trials = 10;
    std::vector<int> grids{16, 32, 64};
    GuidanceConfig guidance;
    TrialControl run;
};

struct DecouplingPreset {
    double R = 3.0;
    int d = 8;
    int m = 3;
    double sigma = 0.05;
    int trials = 3;
    GuidanceConfig guidance;
    TrialControl run;
};

struct LatentGeometryPreset {
    int d = 8;
    int m = 2;
    double R = 3.0;
    double sigma = 0.05;
    int modes = 4;
    std::vector<double> stds{0.0, 0.05, 0.1, 0.3};
    int perturb_trials = 8;
    GuidanceConfig guidance;
    TrialControl run;
};

VerifyReport verify_analytic_consistency(const ConsistencyPreset& preset);
VerifyReport verify_projection(const ProjectionPreset& preset);
VerifyReport verify_sde_failure(const SdeFailurePreset& preset);
VerifyReport verify_contraction(const ContractionPreset& preset);
VerifyReport verify_dps_bias(const DpsBiasPreset& preset);
VerifyReport verify_roundtrip(const RoundtripPreset& preset);
VerifyReport verify_decoupling(const DecouplingPreset& preset);
VerifyReport latent_geometry_sweep(const LatentGeometryPreset& preset);

/// Exponential-decay convergence probe: global error of dx/dt = -x on [0, 1]
/// with step doubling disabled, for `steps` and 2 * `steps` base intervals.
std::pair<double, double> exponential_decay_errors(int steps);

/// KL lower bound |y|^2 (1 - e^{-2T})^3 / (6 sigma^4 (sigma^2 + 1)^2).
double dps_kl_lower_bound(double y_norm, double sigma, double T);

/// Final-window length log(1/delta') for the contraction diagnostics, with
/// delta = 3 sigma^2 / (R v1), eps = 4 sigma^2, T1 = T - ln(1/delta) / 2,
/// T1' = T1 + factor ln ln(1/eps), delta' = exp(-2 (T - T1')).
double contraction_window_length(double sigma, double R, double v1, double loglog_factor);

}  // namespace reglab
