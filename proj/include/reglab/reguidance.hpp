#pragma once

#include "reglab/dynamics.hpp"
#include "reglab/measure.hpp"
#include "reglab/models.hpp"
#include "reglab/rng.hpp"

namespace reglab {

struct ReguidanceResult {
    State latent;
    State output;
    Trajectory latent_trajectory;
    Trajectory guided_trajectory;
    double final_reward = 0.0;
    double final_distance_to_projection = 0.0;
    double nearest_mode_distance = 0.0;
};

/// Drift of the guided generation ODE: unconditional flow plus DPS guidance,
/// or the modified bimodal field for GuidanceKind::MDPS.
VelocityField guided_ode_field(const ModelSpec& model, const Measurement& meas, const GuidanceConfig& cfg);

/// Drift of the guided reverse SDE: x + 2 score + 2 guidance.
VelocityField guided_sde_drift(const ModelSpec& model, const Measurement& meas, const GuidanceConfig& cfg);

/// Step 2 only: guided generation from a given latent. `input` is the
/// original reconstruction (used for the distance-to-projection field).
ReguidanceResult guide_from_latent(const ModelSpec& model, const Measurement& meas, const State& latent,
                                   const State& input, const GuidanceConfig& cfg, bool record = true);

/// Latent extraction by the reverse unconditional flow, then guided
/// generation from that latent. SDE runs draw from RngStream(cfg.seed).
ReguidanceResult run_reguidance(const ModelSpec& model, const Measurement& meas, const State& x,
                                const GuidanceConfig& cfg, bool record = true);

State perturb_latent(const State& latent, double stddev, RngStream& rng);

}  // namespace reglab
