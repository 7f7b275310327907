#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "reglab/dynamics.hpp"
#include "reglab/error.hpp"
#include "reglab/models.hpp"
#include "reglab/verify.hpp"

namespace reglab {

class ConfigError : public Error {
public:
    using Error::Error;
};

enum class Command { ScoreCheck, Roundtrip, Reguidance, Verify };

enum class Experiment { None, Projection, SdeFailure, Contraction, DpsBias, Roundtrip, LatentGeometry, Decoupling };

const char* to_string(Command c);
const char* to_string(Experiment e);
Experiment parse_experiment(const std::string& name);

struct RunBlock {
    Command command = Command::Verify;
    Experiment experiment = Experiment::None;
    std::optional<int> trials;  // unset: the experiment's own default
    std::uint64_t seed = 0;
    int workers = 0;  // 0: REGLAB_WORKERS, then the OpenMP default
    std::string out = ".";
    std::string format = "csv";
    bool dump_trajectories = false;
    bool timing = true;

    bool operator==(const RunBlock&) const = default;
};

struct MeasurementBlock {
    std::string kind = "inpainting";  // inpainting | single-vector | general
    std::vector<int> indices;         // zero-based in memory, one-based in files
    std::vector<double> v;
    std::vector<std::vector<double>> A;
    std::vector<double> y;  // empty: taken from the experiment's construction
    double sigma = 0.05;
    std::optional<double> noise;

    bool operator==(const MeasurementBlock&) const = default;
};

struct ExperimentBlock {
    std::vector<double> sigmas;  // empty: measurement.sigma alone
    std::vector<int> grids{16, 32, 64};
    std::vector<double> stds{0.0, 0.05, 0.1, 0.3};
    std::vector<double> input;  // reguidance starting point; empty draws from the prior
    double offset_min = 2.0;
    double offset_max = 3.0;
    double window_loglog_factor = 3.0;
    double ode_tolerance = 0.05;
    double max_error = 0.05;
    double tau_max = 3.0;
    int cases = 100;
    int modes = 4;
    int perturb_trials = 8;
    bool check_double_T = false;

    bool operator==(const ExperimentBlock&) const = default;
};

struct ExperimentConfig {
    RunBlock run;
    ModelSpec model = ModelSpec::hypercube(3.0, 8);
    MeasurementBlock measurement;
    GuidanceConfig guidance;
    ExperimentBlock experiment;

    bool operator==(const ExperimentConfig&) const = default;
};

/// Flat sectioned key-value text: [run] [model] [measurement] [guidance]
/// [experiment]. Lines starting with '#' or ';' are comments. Lists are
/// comma or whitespace separated; matrix rows are separated by '|'.
/// Throws ConfigError naming the line (syntax) or the key and constraint.
ExperimentConfig parse_config(const std::string& text);
ExperimentConfig load_config(const std::string& path);

/// Canonical text with every field written out.
std::string serialize_config(const ExperimentConfig& cfg);

Measurement build_measurement(const ExperimentConfig& cfg, const State& source);

ConsistencyPreset consistency_preset(const ExperimentConfig& cfg);
ProjectionPreset projection_preset(const ExperimentConfig& cfg);
SdeFailurePreset sde_failure_preset(const ExperimentConfig& cfg);
ContractionPreset contraction_preset(const ExperimentConfig& cfg);
DpsBiasPreset dps_bias_preset(const ExperimentConfig& cfg);
RoundtripPreset roundtrip_preset(const ExperimentConfig& cfg);
LatentGeometryPreset latent_geometry_preset(const ExperimentConfig& cfg);
DecouplingPreset decoupling_preset(const ExperimentConfig& cfg);

}  // namespace reglab
