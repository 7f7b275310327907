#include "reglab/reguidance.hpp"

#include <cmath>

#include "reglab/error.hpp"

namespace reglab {

namespace {

void check_compatible(const ModelSpec& model, const Measurement& meas, const GuidanceConfig& cfg) {
    cfg.validate();
    if (meas.d() != model.d) throw Error("dimension mismatch between model and measurement");
    if (cfg.guidance == GuidanceKind::MDPS) {
        if (model.kind != ModelKind::Bimodal) throw Error("config mismatch: mdps guidance requires the bimodal model");
        if (meas.single_vector() == nullptr)
            throw Error("config mismatch: mdps guidance requires a single-vector measurement");
        if (cfg.sampler == Sampler::SDE) throw Error("config mismatch: mdps guidance is defined for the ODE sampler only");
    }
}

}  // namespace

VelocityField guided_ode_field(const ModelSpec& model, const Measurement& meas, const GuidanceConfig& cfg) {
    const double rho = cfg.gain_for(meas.sigma());
    const double T = cfg.T;
    switch (cfg.guidance) {
        case GuidanceKind::None:
            return [model, T](const State& x, double t) { return uncond_reverse_velocity(model, x, t, T); };
        case GuidanceKind::DPS:
            return [model, meas, rho, T](const State& x, double t) -> State {
                return uncond_reverse_velocity(model, x, t, T) + dps_guidance_velocity(model, meas, rho, x, t, T);
            };
        case GuidanceKind::MDPS:
            return [model, meas, rho, T](const State& x, double t) { return mdps_velocity(model, meas, rho, x, t, T); };
    }
    throw Error("unknown guidance kind");
}

VelocityField guided_sde_drift(const ModelSpec& model, const Measurement& meas, const GuidanceConfig& cfg) {
    const double rho = cfg.gain_for(meas.sigma());
    const double T = cfg.T;
    const bool guided = cfg.guidance == GuidanceKind::DPS;
    return [model, meas, rho, T, guided](const State& x, double t) -> State {
        if (t < 0.0 || t > T) throw Error("time outside [0, T]");
        State drift = x + 2.0 * score(model, x, T - t);
        if (guided) drift += 2.0 * dps_guidance_velocity(model, meas, rho, x, t, T);
        return drift;
    };
}

ReguidanceResult guide_from_latent(const ModelSpec& model, const Measurement& meas, const State& latent,
                                   const State& input, const GuidanceConfig& cfg, bool record) {
    check_compatible(model, meas, cfg);
    if (!latent.allFinite()) throw Error("non-finite latent");
    const double T = cfg.T;
    const double rho = cfg.gain_for(meas.sigma());

    IntegrateOptions opts;
    opts.record = record;
    opts.diagnostics = [&model, &meas, T](const State& x, double t) {
        return make_diagnostics(model, &meas, x, T - t);
    };
    opts.gain = [rho, T](double t) { return rho * std::exp(-(T - t)); };

    ReguidanceResult res;
    res.latent = latent;
    if (cfg.sampler == Sampler::ODE) {
        if (cfg.guidance != GuidanceKind::None && meas.sigma() < 1.0) {
            opts.refine_from = std::max(0.0, T - 2.0 * std::log(1.0 / meas.sigma()));
        }
        res.guided_trajectory = integrate_ode(guided_ode_field(model, meas, cfg), latent, 0.0, T, cfg, opts);
    } else {
        RngStream rng(cfg.seed);
        res.guided_trajectory = integrate_sde(guided_sde_drift(model, meas, cfg), latent, 0.0, T, cfg, rng, opts);
    }
    res.output = res.guided_trajectory.back();
    res.final_reward = residual_and_reward(meas, res.output).reward;
    res.final_distance_to_projection = (project_to_consistent(meas, input) - res.output).norm();
    res.nearest_mode_distance = nearest_mode_distance(model, meas, res.output);
    return res;
}

ReguidanceResult run_reguidance(const ModelSpec& model, const Measurement& meas, const State& x,
                                const GuidanceConfig& cfg, bool record) {
    check_compatible(model, meas, cfg);
    if (x.size() != model.d) throw Error("dimension mismatch");
    if (!x.allFinite()) throw Error("non-finite input reconstruction");
    Trajectory latent_traj = extract_latent_trajectory(model, x, cfg.T, cfg, &meas);
    if (!record) {
        Trajectory ends;
        ends.times = {latent_traj.times.front(), latent_traj.times.back()};
        ends.states = {latent_traj.states.front(), latent_traj.states.back()};
        ends.diagnostics = {latent_traj.diagnostics.front(), latent_traj.diagnostics.back()};
        latent_traj = std::move(ends);
    }
    ReguidanceResult res = guide_from_latent(model, meas, latent_traj.back(), x, cfg, record);
    res.latent_trajectory = std::move(latent_traj);
    return res;
}

State perturb_latent(const State& latent, double stddev, RngStream& rng) {
    if (!(stddev >= 0.0)) throw Error("perturbation stddev must be >= 0");
    return latent + stddev * rng.normal_vector(latent.size());
}

}  // namespace reglab
