#include "reglab/dynamics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <string>

#include "reglab/error.hpp"

namespace reglab {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
constexpr double kRefineRatio = 0.9;

// One RK4 step from a to b; b is passed exactly so fields can be evaluated at
// the interval end without rounding past it.
State rk4_step(const VelocityField& f, const State& x, double a, double b) {
    const double h = b - a;
    const double mid = a + 0.5 * h;
    const State k1 = f(x, a);
    const State k2 = f(x + (0.5 * h) * k1, mid);
    const State k3 = f(x + (0.5 * h) * k2, mid);
    const State k4 = f(x + h * k3, b);
    return x + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
}

State two_half_steps(const VelocityField& f, const State& x, double a, double b) {
    const double mid = a + 0.5 * (b - a);
    const State half = rk4_step(f, x, a, mid);
    return rk4_step(f, half, mid, b);
}

class Recorder {
public:
    Recorder(const IntegrateOptions& opts, const State& x0, double t0) : opts_(opts) {
        traj_.times.push_back(t0);
        traj_.states.push_back(x0);
        if (opts_.diagnostics) traj_.diagnostics.push_back(opts_.diagnostics(x0, t0));
    }

    void push(const State& x, double t, bool last) {
        if (!opts_.record && !last) return;
        traj_.times.push_back(t);
        traj_.states.push_back(x);
        if (opts_.diagnostics) traj_.diagnostics.push_back(opts_.diagnostics(x, t));
    }

    Trajectory take() { return std::move(traj_); }

private:
    const IntegrateOptions& opts_;
    Trajectory traj_;
};

[[noreturn]] void throw_non_finite(double t) {
    std::ostringstream msg;
    msg.precision(17);
    msg << "non-finite state at t = " << t;
    throw IntegrationError(IntegrationError::Kind::NonFinite, t, kNaN, msg.str());
}

struct StepController {
    const VelocityField& field;
    const GuidanceConfig& cfg;
    const IntegrateOptions& opts;
    Recorder& recorder;
    double t_end;

    // Advances x over [a, b], recording every accepted sub-interval.
    void advance(State& x, double a, double b) {
        const double h = b - a;
        const State full = rk4_step(field, x, a, b);
        State halves = two_half_steps(field, x, a, b);
        const double scale = 1.0 + halves.cwiseAbs().maxCoeff();
        const double err = (full - halves).cwiseAbs().maxCoeff();
        if (err <= cfg.rel_tol * scale) {
            if (!halves.allFinite()) throw_non_finite(b);
            x = std::move(halves);
            recorder.push(x, b, b == t_end);
            return;
        }
        if (!full.allFinite() && !halves.allFinite() && !field(x, a).allFinite()) throw_non_finite(a);
        if (0.5 * h < cfg.min_step) {
            if (!halves.allFinite() || !full.allFinite()) throw_non_finite(a);
            const double gain = opts.gain ? opts.gain(a) : kNaN;
            std::ostringstream msg;
            msg.precision(17);
            msg << "step size underflow at t = " << a << " (h = " << h << ", guidance gain = " << gain << ")";
            throw IntegrationError(IntegrationError::Kind::StepUnderflow, a, gain, msg.str());
        }
        const double mid = a + 0.5 * h;
        advance(x, a, mid);
        advance(x, mid, b);
    }
};

}  // namespace

const char* to_string(Sampler s) { return s == Sampler::ODE ? "ode" : "sde"; }

const char* to_string(GuidanceKind g) {
    switch (g) {
        case GuidanceKind::None: return "none";
        case GuidanceKind::DPS: return "dps";
        case GuidanceKind::MDPS: return "mdps";
    }
    return "?";
}

void GuidanceConfig::validate() const {
    if (rho && !(*rho >= 0.0)) throw Error("guidance.rho must be >= 0");
    if (!(T > 0.0) || !std::isfinite(T)) throw Error("guidance.T must be > 0");
    if (steps < 1) throw Error("guidance.steps must be >= 1");
    if (sde_steps < 1) throw Error("guidance.sde_steps must be >= 1");
    if (!(rel_tol > 0.0)) throw Error("guidance.rel_tol must be > 0");
    if (!(min_step > 0.0)) throw Error("guidance.min_step must be > 0");
}

std::vector<double> base_grid(double t0, double t1, int steps, std::optional<double> refine_from) {
    if (!(t1 > t0)) throw Error("integration span must have t1 > t0");
    if (steps < 1) throw Error("base grid needs at least one step");
    const double h = (t1 - t0) / steps;
    std::vector<double> grid;
    grid.reserve(static_cast<std::size_t>(steps) + 1);
    for (int i = 0; i < steps; ++i) grid.push_back(t0 + i * h);
    grid.push_back(t1);

    if (refine_from && *refine_from < t1) {
        const double start = std::max(*refine_from, t0);
        const double floor = h / 1024.0;
        for (double gap = t1 - start; gap >= floor; gap *= kRefineRatio) grid.push_back(t1 - gap);
        std::sort(grid.begin(), grid.end());
        const double merge = h * 1e-9;
        std::vector<double> merged;
        merged.reserve(grid.size());
        for (double t : grid) {
            if (merged.empty() || t - merged.back() > merge) {
                merged.push_back(t);
            } else if (t == t1) {
                merged.back() = t1;
            }
        }
        grid = std::move(merged);
    }
    return grid;
}

Trajectory integrate_ode(const VelocityField& field, const State& x0, double t0, double t1,
                         const GuidanceConfig& cfg, const IntegrateOptions& opts) {
    cfg.validate();
    if (!x0.allFinite()) throw_non_finite(t0);
    const auto grid = base_grid(t0, t1, cfg.steps, opts.refine_from);
    Recorder recorder(opts, x0, t0);
    StepController controller{field, cfg, opts, recorder, t1};
    State x = x0;
    for (std::size_t i = 0; i + 1 < grid.size(); ++i) controller.advance(x, grid[i], grid[i + 1]);
    return recorder.take();
}

Trajectory integrate_on_grid(const VelocityField& field, const State& x0, const std::vector<double>& times,
                             const IntegrateOptions& opts) {
    if (times.size() < 2) throw Error("replay grid needs at least two times");
    Recorder recorder(opts, x0, times.front());
    State x = x0;
    for (std::size_t i = 0; i + 1 < times.size(); ++i) {
        x = two_half_steps(field, x, times[i], times[i + 1]);
        if (!x.allFinite()) throw_non_finite(times[i + 1]);
        recorder.push(x, times[i + 1], i + 2 == times.size());
    }
    return recorder.take();
}

Trajectory integrate_sde(const VelocityField& drift, const State& x0, double t0, double t1,
                         const GuidanceConfig& cfg, RngStream& rng, const IntegrateOptions& opts, double diffusion) {
    cfg.validate();
    if (!(t1 > t0)) throw Error("integration span must have t1 > t0");
    if (!x0.allFinite()) throw_non_finite(t0);
    const int n = cfg.sde_steps;
    const double h = (t1 - t0) / n;
    const double noise_scale = diffusion * std::sqrt(h);
    Recorder recorder(opts, x0, t0);
    State x = x0;
    for (int i = 0; i < n; ++i) {
        const double t = t0 + i * h;
        const double t_next = i + 1 == n ? t1 : t0 + (i + 1) * h;
        State step = drift(x, t) * h;
        for (Eigen::Index k = 0; k < x.size(); ++k) step[k] += noise_scale * rng.normal();
        x += step;
        if (!x.allFinite()) throw_non_finite(t_next);
        recorder.push(x, t_next, i + 1 == n);
    }
    return recorder.take();
}

State uncond_reverse_velocity(const ModelSpec& model, const State& x, double t, double T) {
    if (t < 0.0 || t > T) throw Error("time outside [0, T]");
    return x + score(model, x, T - t);
}

State dps_guidance_velocity(const ModelSpec& model, const Measurement& meas, double rho, const State& x, double t,
                            double T) {
    if (t < 0.0 || t > T) throw Error("time outside [0, T]");
    if (!(rho >= 0.0)) throw Error("rho must be >= 0");
    if (meas.d() != model.d) throw Error("dimension mismatch between model and measurement");
    const double tau = T - t;
    const State mu = denoiser(model, x, tau);
    const DiagMatrix jac = denoiser_jacobian(model, x, tau);
    const Eigen::VectorXd pulled = meas.A().transpose() * (meas.y() - meas.A() * mu);
    return rho * (jac * pulled);
}

State mdps_velocity(const ModelSpec& model, const Measurement& meas, double rho, const State& x, double t, double T) {
    if (model.kind != ModelKind::Bimodal) throw Error("modified guidance requires the bimodal model");
    const auto* sv = meas.single_vector();
    if (sv == nullptr) throw Error("modified guidance requires a single-vector measurement");
    if (t < 0.0 || t > T) throw Error("time outside [0, T]");
    if (x.size() != model.d || meas.d() != model.d) throw Error("dimension mismatch");
    const double tau = T - t;
    const double decay = std::exp(-tau);
    const double th = saturating_tanh(model.R * decay * x[0]);
    State target = -decay * x;
    target[0] += model.R + std::expm1(-2.0 * tau) * model.R * th;  // R - (1 - e^{-2tau}) R tanh
    State out = (rho * decay * sv->v.dot(target)) * sv->v;
    out[0] += model.R * decay * th;
    return out;
}

Diagnostics make_diagnostics(const ModelSpec& model, const Measurement* meas, const State& x, double tau) {
    Diagnostics d;
    d.reward = meas ? residual_and_reward(*meas, x).reward : kNaN;
    const double a = model.R * std::exp(-tau);
    switch (model.kind) {
        case ModelKind::IsoGaussian: d.tanh_diag = kNaN; break;
        case ModelKind::Bimodal: d.tanh_diag = saturating_tanh(a * x[0]); break;
        case ModelKind::HypercubeMixture: {
            double lo = 1.0;
            for (Eigen::Index i = 0; i < x.size(); ++i) lo = std::min(lo, saturating_tanh(a * x[i]));
            d.tanh_diag = lo;
            break;
        }
    }
    const SingleVector* sv = meas ? meas->single_vector() : nullptr;
    d.meas_proj = sv ? sv->v.dot(x) : kNaN;
    return d;
}

Trajectory extract_latent_trajectory(const ModelSpec& model, const State& x, double T, const GuidanceConfig& cfg,
                                     const Measurement* meas) {
    if (x.size() != model.d) throw Error("dimension mismatch");
    // Noise level s runs 0 -> T; dx*/ds = -(x* + grad ln q_s(x*)).
    VelocityField field = [&model](const State& z, double s) -> State { return -(z + score(model, z, s)); };
    IntegrateOptions opts;
    opts.diagnostics = [&model, meas](const State& z, double s) { return make_diagnostics(model, meas, z, s); };
    return integrate_ode(field, x, 0.0, T, cfg, opts);
}

State extract_latent(const ModelSpec& model, const State& x, double T, const GuidanceConfig& cfg) {
    if (x.size() != model.d) throw Error("dimension mismatch");
    VelocityField field = [&model](const State& z, double s) -> State { return -(z + score(model, z, s)); };
    IntegrateOptions opts;
    opts.record = false;
    return integrate_ode(field, x, 0.0, T, cfg, opts).back();
}

Trajectory forward_flow_trajectory(const ModelSpec& model, const State& latent, double T, const GuidanceConfig& cfg) {
    VelocityField field = [&model, T](const State& z, double t) { return uncond_reverse_velocity(model, z, t, T); };
    IntegrateOptions opts;
    opts.diagnostics = [&model, T](const State& z, double t) { return make_diagnostics(model, nullptr, z, T - t); };
    return integrate_ode(field, latent, 0.0, T, cfg, opts);
}

State forward_flow(const ModelSpec& model, const State& latent, double T, const GuidanceConfig& cfg) {
    VelocityField field = [&model, T](const State& z, double t) { return uncond_reverse_velocity(model, z, t, T); };
    IntegrateOptions opts;
    opts.record = false;
    return integrate_ode(field, latent, 0.0, T, cfg, opts).back();
}

}  // namespace reglab
