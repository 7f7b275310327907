#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <vector>

#include "reglab/measure.hpp"
#include "reglab/models.hpp"
#include "reglab/rng.hpp"

namespace reglab {

enum class Sampler { ODE, SDE };
enum class GuidanceKind { None, DPS, MDPS };

const char* to_string(Sampler s);
const char* to_string(GuidanceKind g);

struct GuidanceConfig {
    std::optional<double> rho;  // unset means 1/sigma^2
    double T = 10.0;
    Sampler sampler = Sampler::ODE;
    GuidanceKind guidance = GuidanceKind::DPS;
    int steps = 2048;       // ODE base grid
    int sde_steps = 8192;   // Euler-Maruyama step count
    double rel_tol = 1e-8;  // +inf disables step doubling
    double min_step = 1e-9;
    std::uint64_t seed = 0;

    void validate() const;
    double gain_for(double sigma) const { return rho.value_or(1.0 / (sigma * sigma)); }

    bool operator==(const GuidanceConfig&) const = default;
};

struct Diagnostics {
    double reward = 0.0;
    double tanh_diag = 0.0;
    double meas_proj = 0.0;
};

/// Accepted integration points. times are strictly increasing.
struct Trajectory {
    std::vector<double> times;
    std::vector<State> states;
    std::vector<Diagnostics> diagnostics;

    bool empty() const { return states.empty(); }
    std::size_t size() const { return states.size(); }
    const State& back() const { return states.back(); }
};

using VelocityField = std::function<State(const State& x, double t)>;
using DiagnosticsFn = std::function<Diagnostics(const State& x, double t)>;

struct IntegrateOptions {
    // Adds geometrically spaced grid points (ratio 0.9) accumulating toward t1
    // on [refine_from, t1].
    std::optional<double> refine_from;
    DiagnosticsFn diagnostics;
    // Guidance gain at time t, reported when the step controller underflows.
    std::function<double(double)> gain;
    // When false only the endpoints are kept.
    bool record = true;
};

std::vector<double> base_grid(double t0, double t1, int steps, std::optional<double> refine_from = std::nullopt);

/// Classical RK4 over the base grid with step doubling per interval: an
/// interval is accepted when one full step and two half steps agree to
/// rel_tol (1 + |x|_inf) in max-norm, otherwise it is halved recursively
/// down to min_step. The accepted value is the two-half-step result.
Trajectory integrate_ode(const VelocityField& field, const State& x0, double t0, double t1,
                         const GuidanceConfig& cfg, const IntegrateOptions& opts = {});

/// Replays an accepted time grid (each interval as two RK4 half steps)
/// without error control.
Trajectory integrate_on_grid(const VelocityField& field, const State& x0, const std::vector<double>& times,
                             const IntegrateOptions& opts = {});

/// Euler-Maruyama with cfg.sde_steps uniform steps:
/// x += drift(x, t) h + diffusion sqrt(h) xi.
Trajectory integrate_sde(const VelocityField& drift, const State& x0, double t0, double t1,
                         const GuidanceConfig& cfg, RngStream& rng, const IntegrateOptions& opts = {},
                         double diffusion = 1.4142135623730951);

// Velocity fields in generation time t in [0, T]; the noise level fed to the
// model is tau = T - t.

State uncond_reverse_velocity(const ModelSpec& model, const State& x, double t, double T);

/// rho * J_mu(x) A^T (y - A mu(x)), evaluated at tau = T - t.
State dps_guidance_velocity(const ModelSpec& model, const Measurement& meas, double rho, const State& x, double t,
                            double T);

/// Full drift of the modified bimodal ODE (unconditional part included):
///   R e^{-tau} tanh(R e^{-tau} x1) e1
///     + rho e^{-tau} v v^T (R e1 - e^{-tau} x - (1 - e^{-2 tau}) R tanh(R e^{-tau} x1) e1)
State mdps_velocity(const ModelSpec& model, const Measurement& meas, double rho, const State& x, double t, double T);

Diagnostics make_diagnostics(const ModelSpec& model, const Measurement* meas, const State& x, double tau);

/// Reverse-time unconditional probability flow from x (noise level 0 -> T).
Trajectory extract_latent_trajectory(const ModelSpec& model, const State& x, double T, const GuidanceConfig& cfg,
                                     const Measurement* meas = nullptr);
State extract_latent(const ModelSpec& model, const State& x, double T, const GuidanceConfig& cfg);

/// Forward unconditional probability flow from a latent (t = 0 -> T).
Trajectory forward_flow_trajectory(const ModelSpec& model, const State& latent, double T, const GuidanceConfig& cfg);
State forward_flow(const ModelSpec& model, const State& latent, double T, const GuidanceConfig& cfg);

}  // namespace reglab
