#include "reglab/verify.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <limits>
#include <numbers>

#include "reglab/error.hpp"
#include "reglab/measure.hpp"
#include "reglab/parallel.hpp"
#include "reglab/reguidance.hpp"
#include "reglab/stats.hpp"

namespace reglab {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
constexpr std::uint64_t kSetupStream = 0xfffffffffffffff0ULL;
constexpr int kDecayProbeSteps = 8;
// Roundtrip errors at or below this are treated as exact.
constexpr double kRoundoffFloor = 1e-13;

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
    return std::chrono::duration<double>(Clock::now() - start).count();
}

std::string num(double x) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return buf;
}

std::string short_num(double x) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%g", x);
    return buf;
}

std::string at(const std::string& base, const std::string& key, double value) {
    return base + "@" + key + "=" + short_num(value);
}

std::vector<int> first_or_given(int m, const std::vector<int>& given) {
    if (!given.empty()) return given;
    std::vector<int> idx(static_cast<std::size_t>(m));
    for (int i = 0; i < m; ++i) idx[static_cast<std::size_t>(i)] = i;
    return idx;
}

State random_vertex(const ModelSpec& model, RngStream& rng) {
    State z(model.d);
    for (int i = 0; i < model.d; ++i) z[i] = rng.coin() ? model.R : -model.R;
    return z;
}

double max_of(const std::vector<double>& xs) {
    double m = -std::numeric_limits<double>::infinity();
    for (double x : xs) m = std::isnan(x) ? x : std::max(m, x);
    return xs.empty() ? kNaN : m;
}

double min_of(const std::vector<double>& xs) {
    double m = std::numeric_limits<double>::infinity();
    for (double x : xs) m = std::isnan(x) ? x : std::min(m, x);
    return xs.empty() ? kNaN : m;
}

// Adjacent pairs where the sequence fails to decrease strictly.
int decrease_violations(const std::vector<double>& xs) {
    int bad = 0;
    for (std::size_t k = 1; k < xs.size(); ++k)
        if (!(xs[k] < xs[k - 1])) ++bad;
    return bad;
}

void common_params(VerifyReport& rep, const TrialControl& run) {
    rep.param("seed", std::to_string(run.seed));
    rep.param("workers", std::to_string(resolve_workers(run.workers)));
}

void guidance_params(VerifyReport& rep, const GuidanceConfig& cfg) {
    rep.param("T", cfg.T);
    rep.param("steps", std::to_string(cfg.steps));
    rep.param("sde_steps", std::to_string(cfg.sde_steps));
    rep.param("rel_tol", cfg.rel_tol);
    rep.param("min_step", cfg.min_step);
    rep.param("rho", cfg.rho ? num(*cfg.rho) : std::string("1/sigma^2"));
}

VelocityField extraction_field(const ModelSpec& model) {
    return [model](const State& z, double s) -> State { return -(z + score(model, z, s)); };
}

}  // namespace

void VerifyReport::param(const std::string& key, const std::string& value) { params.emplace_back(key, value); }

void VerifyReport::param(const std::string& key, double value) { params.emplace_back(key, num(value)); }

void VerifyReport::metric(const std::string& key, double value) {
    for (auto& kv : metrics) {
        if (kv.first == key) {
            kv.second = value;
            return;
        }
    }
    metrics.emplace_back(key, value);
}

void VerifyReport::trend(const std::string& key, std::vector<double> values) { trends.emplace_back(key, std::move(values)); }

std::optional<double> VerifyReport::metric_value(const std::string& key) const {
    for (const auto& kv : metrics)
        if (kv.first == key) return kv.second;
    return std::nullopt;
}

const std::vector<double>* VerifyReport::trend_values(const std::string& key) const {
    for (const auto& kv : trends)
        if (kv.first == key) return &kv.second;
    return nullptr;
}

const Verdict* VerifyReport::verdict(const std::string& name) const {
    for (const auto& v : verdicts)
        if (v.name == name) return &v;
    return nullptr;
}

void VerifyReport::check(const std::string& name, const std::string& metric_name, const std::string& op,
                         double threshold) {
    const auto value = metric_value(metric_name);
    if (!value) throw Error("verdict " + name + " references unknown metric " + metric_name);
    const double x = *value;
    bool pass = false;
    if (op == "<") pass = x < threshold;
    else if (op == "<=") pass = x <= threshold;
    else if (op == ">") pass = x > threshold;
    else if (op == ">=") pass = x >= threshold;
    else throw Error("unknown comparison " + op);
    verdicts.push_back({name, metric_name, op, threshold, pass});
}

bool VerifyReport::all_pass() const {
    return std::all_of(verdicts.begin(), verdicts.end(), [](const Verdict& v) { return v.pass; });
}

double dps_kl_lower_bound(double y_norm, double sigma, double T) {
    const double s2 = sigma * sigma;
    const double f = std::isinf(T) ? 1.0 : -std::expm1(-2.0 * T);
    return y_norm * y_norm * f * f * f / (6.0 * s2 * s2 * (s2 + 1.0) * (s2 + 1.0));
}

double contraction_window_length(double sigma, double R, double v1, double loglog_factor) {
    const double delta = 3.0 * sigma * sigma / (R * v1);
    const double eps = 4.0 * sigma * sigma;
    // ln(1/delta') = 2 (T - T1') = ln(1/delta) - 2 factor ln ln(1/eps)
    return std::log(1.0 / delta) - 2.0 * loglog_factor * std::log(std::log(1.0 / eps));
}

std::pair<double, double> exponential_decay_errors(int steps) {
    GuidanceConfig cfg;
    cfg.rel_tol = std::numeric_limits<double>::infinity();
    const VelocityField decay = [](const State& x, double) -> State { return -x; };
    const State x0 = State::Ones(1);
    const double exact = std::exp(-1.0);
    IntegrateOptions opts;
    opts.record = false;
    cfg.steps = steps;
    const double coarse = std::abs(integrate_ode(decay, x0, 0.0, 1.0, cfg, opts).back()[0] - exact);
    cfg.steps = 2 * steps;
    const double fine = std::abs(integrate_ode(decay, x0, 0.0, 1.0, cfg, opts).back()[0] - exact);
    return {coarse, fine};
}

// ---------------------------------------------------------------------------

VerifyReport verify_analytic_consistency(const ConsistencyPreset& preset) {
    const auto start = Clock::now();
    if (preset.cases < 1) throw Error("cases >= 1");
    if (!(preset.tau_max >= 0.0)) throw Error("tau_max >= 0");
    VerifyReport rep;
    rep.experiment = "score-check";
    common_params(rep, preset.run);
    rep.param("cases", std::to_string(preset.cases));
    rep.param("tau_max", preset.tau_max);

    const std::vector<ModelSpec> models{ModelSpec::iso(preset.iso_d),
                                        ModelSpec::hypercube(preset.hypercube_R, preset.hypercube_d),
                                        ModelSpec::bimodal(preset.bimodal_R, preset.bimodal_d)};
    rep.table.columns = {"model", "case", "tau", "score_fd_rel_err", "tweedie_err", "jacobian_fd_rel_err"};

    struct CaseErr {
        double tau, score, tweedie, jac;
    };
    double worst_score = 0.0, worst_tweedie = 0.0, worst_jac = 0.0;
    for (std::size_t mi = 0; mi < models.size(); ++mi) {
        const ModelSpec model = models[mi];
        const std::uint64_t base = derive_seed(preset.run.seed, mi);
        auto errs = map_trials(
            static_cast<std::size_t>(preset.cases),
            [&](std::size_t c) {
                RngStream rng(derive_seed(base, c));
                const double span = model.R + 2.0;
                State x(model.d);
                for (int i = 0; i < model.d; ++i) x[i] = rng.uniform(-span, span);
                const double tau = rng.uniform(0.0, preset.tau_max);
                const int d = model.d;

                const State s = score(model, x, tau);
                double score_err = 0.0;
                for (int i = 0; i < d; ++i) {
                    const double h = 1e-5 * (1.0 + std::abs(x[i]));
                    State xp = x, xm = x;
                    xp[i] += h;
                    xm[i] -= h;
                    const double fd = (log_density(model, xp, tau) - log_density(model, xm, tau)) / (xp[i] - xm[i]);
                    score_err = std::max(score_err, std::abs(fd - s[i]) / std::max(1.0, std::abs(s[i])));
                }

                const State mu = denoiser(model, x, tau);
                const State tw = std::exp(tau) * x + (std::exp(tau) - std::exp(-tau)) * s;
                double tweedie_err = 0.0;
                for (int i = 0; i < d; ++i)
                    tweedie_err = std::max(tweedie_err, std::abs(mu[i] - tw[i]));

                const Eigen::VectorXd J = denoiser_jacobian(model, x, tau).diagonal();
                double jac_err = 0.0;
                for (int j = 0; j < d; ++j) {
                    const double h = 1e-5 * (1.0 + std::abs(x[j]));
                    State xp = x, xm = x;
                    xp[j] += h;
                    xm[j] -= h;
                    const State col = (denoiser(model, xp, tau) - denoiser(model, xm, tau)) / (xp[j] - xm[j]);
                    for (int i = 0; i < d; ++i) {
                        const double exact = i == j ? J[i] : 0.0;
                        jac_err = std::max(jac_err, std::abs(col[i] - exact) / std::max(1.0, std::abs(exact)));
                    }
                }
                return CaseErr{tau, score_err, tweedie_err, jac_err};
            },
            preset.run.workers);

        std::vector<double> se, te, je;
        for (std::size_t c = 0; c < errs.size(); ++c) {
            const auto& e = errs[c];
            rep.table.rows.push_back({static_cast<double>(mi), static_cast<double>(c), e.tau, e.score, e.tweedie, e.jac});
            se.push_back(e.score);
            te.push_back(e.tweedie);
            je.push_back(e.jac);
        }
        const std::string name = to_string(model.kind);
        rep.metric("score_fd_max_rel_err@" + name, max_of(se));
        rep.metric("tweedie_max_err@" + name, max_of(te));
        rep.metric("jacobian_fd_max_rel_err@" + name, max_of(je));
        worst_score = std::max(worst_score, max_of(se));
        worst_tweedie = std::max(worst_tweedie, max_of(te));
        worst_jac = std::max(worst_jac, max_of(je));
    }
    rep.metric("score_fd_max_rel_err", worst_score);
    rep.metric("tweedie_max_err", worst_tweedie);
    rep.metric("jacobian_fd_max_rel_err", worst_jac);
    rep.check("score_matches_finite_difference", "score_fd_max_rel_err", "<=", 1e-6);
    rep.check("tweedie_identity", "tweedie_max_err", "<=", 1e-10);
    rep.check("jacobian_matches_finite_difference", "jacobian_fd_max_rel_err", "<=", 1e-6);
    rep.notes.push_back("score and Jacobian errors are relative to max(1, |exact|), Tweedie errors absolute; "
                        "finite-difference step 1e-5 (1 + |x_i|)");
    rep.runtime_seconds = seconds_since(start);
    return rep;
}

// ---------------------------------------------------------------------------

VerifyReport verify_projection(const ProjectionPreset& preset) {
    const auto start = Clock::now();
    if (preset.trials < 1) throw Error("trials >= 1");
    if (preset.sigmas.empty()) throw Error("projection needs at least one sigma");
    if (preset.m < 1 || preset.m > preset.d) throw Error("need 1 <= m <= d");
    preset.guidance.validate();

    const ModelSpec model = ModelSpec::hypercube(preset.R, preset.d);
    const std::vector<int> idx = first_or_given(preset.m, preset.indices);
    std::vector<double> sigmas = preset.sigmas;
    std::sort(sigmas.begin(), sigmas.end(), std::greater<>());
    for (double s : sigmas)
        if (!(s > 0.0)) throw Error("sigma > 0");

    GuidanceConfig cfg = preset.guidance;
    cfg.sampler = Sampler::ODE;
    cfg.guidance = GuidanceKind::DPS;
    const double T = cfg.T;
    const VelocityField uncond = [model, T](const State& x, double t) { return uncond_reverse_velocity(model, x, t, T); };

    struct PerSigma {
        double err_projection, err_raw, measured, runtime;
    };
    struct TrialOut {
        std::vector<PerSigma> per_sigma;
        double err_double_T = kNaN;
        double err_at_T = kNaN;
        std::vector<Trajectory> kept;
    };

    const auto measure_errors = [&](const Measurement& meas, const State& latent, const State& x,
                                    const GuidanceConfig& c, const VelocityField& uncond_field, Trajectory* keep) {
        const auto t0 = Clock::now();
        ReguidanceResult res = guide_from_latent(model, meas, latent, x, c, true);
        IntegrateOptions replay_opts;
        replay_opts.record = false;
        const State x_eff = integrate_on_grid(uncond_field, latent, res.guided_trajectory.times, replay_opts).back();
        PerSigma ps;
        ps.err_projection = (project_to_consistent(meas, x_eff) - res.output).norm();
        ps.err_raw = res.final_distance_to_projection;
        ps.measured = (meas.A() * res.output - meas.y()).cwiseAbs().maxCoeff();
        ps.runtime = seconds_since(t0);
        if (keep) *keep = std::move(res.guided_trajectory);
        return ps;
    };

    auto trials = map_trials(
        static_cast<std::size_t>(preset.trials),
        [&](std::size_t i) {
            RngStream rng(derive_seed(preset.run.seed, i));
            const State x = sample_prior(model, rng);
            const State z = random_vertex(model, rng);
            const Measurement base = make_measurement(Inpainting{idx}, model, z, sigmas.front());
            const State latent = extract_latent(model, x, T, cfg);
            TrialOut out;
            for (double s : sigmas) {
                Trajectory keep;
                const bool want = preset.run.keep_trajectories && i == 0;
                out.per_sigma.push_back(measure_errors(base.with_sigma(s), latent, x, cfg, uncond, want ? &keep : nullptr));
                if (want) out.kept.push_back(std::move(keep));
            }
            if (preset.check_double_T) {
                GuidanceConfig c2 = cfg;
                c2.T = 2.0 * T;
                const VelocityField uncond2 = [model, T2 = c2.T](const State& v, double t) {
                    return uncond_reverse_velocity(model, v, t, T2);
                };
                const State latent2 = extract_latent(model, x, c2.T, c2);
                out.err_double_T =
                    measure_errors(base.with_sigma(sigmas.back()), latent2, x, c2, uncond2, nullptr).err_projection;
                out.err_at_T = out.per_sigma.back().err_projection;
            }
            return out;
        },
        preset.run.workers);

    VerifyReport rep;
    rep.experiment = "projection";
    common_params(rep, preset.run);
    rep.param("model", "hypercube");
    rep.param("R", preset.R);
    rep.param("d", std::to_string(preset.d));
    rep.param("m", std::to_string(idx.size()));
    rep.param("trials", std::to_string(preset.trials));
    guidance_params(rep, cfg);
    rep.table.columns = {"sigma", "trial", "err_projection", "err_raw", "runtime_s"};

    std::vector<double> medians, medians_raw;
    double worst_measured = 0.0;
    int trial_violations = 0;
    for (std::size_t k = 0; k < sigmas.size(); ++k) {
        std::vector<double> ep, er;
        for (std::size_t i = 0; i < trials.size(); ++i) {
            const PerSigma& ps = trials[i].per_sigma[k];
            rep.table.rows.push_back({sigmas[k], static_cast<double>(i), ps.err_projection, ps.err_raw, ps.runtime});
            ep.push_back(ps.err_projection);
            er.push_back(ps.err_raw);
            worst_measured = std::max(worst_measured, ps.measured);
            if (k > 0 && !(ps.err_projection < trials[i].per_sigma[k - 1].err_projection)) ++trial_violations;
        }
        medians.push_back(median(ep));
        medians_raw.push_back(median(er));
        rep.metric(at("median_err_projection", "sigma", sigmas[k]), medians.back());
        rep.metric(at("max_err_projection", "sigma", sigmas[k]), max_of(ep));
        rep.metric(at("median_err_raw", "sigma", sigmas[k]), medians_raw.back());
    }
    rep.trend("sigma", sigmas);
    rep.trend("median_err_projection", medians);
    rep.trend("median_err_raw", medians_raw);
    rep.metric("median_err_at_min_sigma", medians.back());
    rep.metric("median_decrease_violations", decrease_violations(medians));
    rep.metric("trial_decrease_violations", trial_violations);
    rep.metric("max_measured_residual", worst_measured);
    if (preset.check_double_T) {
        std::vector<double> e2, e1;
        for (const auto& t : trials) {
            e2.push_back(t.err_double_T);
            e1.push_back(t.err_at_T);
        }
        rep.metric("median_err_at_min_sigma_double_T", median(e2));
        rep.metric("double_T_ratio", median(e2) / median(e1));
    }
    rep.check("projection_error_at_min_sigma", "median_err_at_min_sigma", "<=", preset.max_error);
    rep.check("projection_error_decreasing_in_sigma", "median_decrease_violations", "<=", 0.0);
    rep.check("measured_coordinates_match", "max_measured_residual", "<=", 0.05);
    rep.notes.push_back(
        "err_projection compares the output with the projection of x_eff, the unguided forward flow replayed on "
        "the guided run's accepted time grid from the same latent");

    if (preset.run.keep_trajectories && !trials.empty()) {
        for (std::size_t k = 0; k < trials[0].kept.size(); ++k)
            rep.trajectories.push_back({at("guided", "sigma", sigmas[k]), std::move(trials[0].kept[k])});
    }
    rep.runtime_seconds = seconds_since(start);
    return rep;
}

// ---------------------------------------------------------------------------

VerifyReport verify_sde_failure(const SdeFailurePreset& preset) {
    const auto start = Clock::now();
    if (preset.trials < 2000) throw Error("insufficient trials: sde-failure needs at least 2000");
    if (preset.m < 1 || preset.m >= preset.d) throw Error("need 1 <= m < d");
    preset.guidance.validate();

    const ModelSpec model = ModelSpec::hypercube(preset.R, preset.d);
    const std::vector<int> idx = first_or_given(preset.m, preset.indices);
    RngStream setup(derive_seed(preset.run.seed, kSetupStream));
    const State z = random_vertex(model, setup);
    const Measurement meas = make_measurement(Inpainting{idx}, model, z, preset.sigma);

    std::vector<bool> measured(static_cast<std::size_t>(preset.d), false);
    for (int j : idx) measured[static_cast<std::size_t>(j)] = true;

    GuidanceConfig ode_cfg = preset.guidance;
    ode_cfg.sampler = Sampler::ODE;
    ode_cfg.guidance = GuidanceKind::DPS;
    const State latent = extract_latent(model, z, ode_cfg.T, ode_cfg);
    ReguidanceResult ode = guide_from_latent(model, meas, latent, z, ode_cfg, preset.run.keep_trajectories);
    const double ode_dev = (ode.output - z).cwiseAbs().maxCoeff();

    GuidanceConfig sde_cfg = ode_cfg;
    sde_cfg.sampler = Sampler::SDE;
    struct SdeOut {
        State output;
        double runtime;
        Trajectory kept;
    };
    auto runs = map_trials(
        static_cast<std::size_t>(preset.trials),
        [&](std::size_t i) {
            const auto t0 = Clock::now();
            GuidanceConfig c = sde_cfg;
            c.seed = derive_seed(preset.run.seed, i);
            const bool keep = preset.run.keep_trajectories && i == 0;
            ReguidanceResult r = guide_from_latent(model, meas, latent, z, c, keep);
            return SdeOut{r.output, seconds_since(t0), keep ? std::move(r.guided_trajectory) : Trajectory{}};
        },
        preset.run.workers);

    VerifyReport rep;
    rep.experiment = "sde-failure";
    common_params(rep, preset.run);
    rep.param("model", "hypercube");
    rep.param("R", preset.R);
    rep.param("d", std::to_string(preset.d));
    rep.param("m", std::to_string(idx.size()));
    rep.param("sigma", preset.sigma);
    rep.param("trials", std::to_string(preset.trials));
    guidance_params(rep, ode_cfg);

    rep.table.columns = {"sigma", "trial"};
    for (int j = 0; j < preset.d; ++j) rep.table.columns.push_back("out_" + std::to_string(j));
    rep.table.columns.push_back("runtime_s");

    std::vector<double> pooled, gaps;
    std::size_t same_sign = 0;
    double measured_dev = 0.0;
    for (std::size_t i = 0; i < runs.size(); ++i) {
        const State& o = runs[i].output;
        std::vector<double> row{preset.sigma, static_cast<double>(i)};
        for (int j = 0; j < preset.d; ++j) {
            row.push_back(o[j]);
            if (measured[static_cast<std::size_t>(j)]) {
                measured_dev = std::max(measured_dev, std::abs(o[j] - z[j]));
                continue;
            }
            pooled.push_back(o[j]);
            gaps.push_back(std::abs(std::abs(o[j]) - preset.R));
            if ((o[j] > 0.0) == (z[j] > 0.0)) ++same_sign;
        }
        row.push_back(runs[i].runtime);
        rep.table.rows.push_back(std::move(row));
    }

    const double n_pooled = static_cast<double>(pooled.size());
    const double ks = ks_statistic(pooled, [R = preset.R](double x) { return symmetric_mixture_cdf(x, R); });
    const double crit = ks_critical_95(pooled.size());
    const double p = static_cast<double>(same_sign) / n_pooled;
    const double se = 0.5 / std::sqrt(n_pooled);

    rep.metric("pooled_samples", n_pooled);
    rep.metric("ks_statistic", ks);
    rep.metric("ks_critical_95", crit);
    rep.metric("ode_arm_max_deviation", ode_dev);
    rep.metric("same_sign_fraction", p);
    rep.metric("sign_split_standard_error", se);
    rep.metric("sign_split_z", std::abs(p - 0.5) / se);
    rep.metric("median_gap_to_nearest_mode_coordinate", median(gaps));
    rep.metric("max_measured_deviation", measured_dev);
    rep.check("sde_matches_prior_mixture", "ks_statistic", "<=", crit);
    rep.check("ode_arm_keeps_mode", "ode_arm_max_deviation", "<=", preset.ode_tolerance);
    rep.check("sde_sign_split_balanced", "sign_split_z", "<=", 3.0);
    rep.check("sde_leaves_mode", "median_gap_to_nearest_mode_coordinate", ">=", 0.5);
    rep.notes.push_back("KS and sign split pool the unmeasured coordinates of every trial (N' = N (d - m))");
    rep.notes.push_back("same_sign_fraction counts unmeasured coordinates that keep the sign of the starting mode");

    if (preset.run.keep_trajectories) {
        rep.trajectories.push_back({"ode", std::move(ode.guided_trajectory)});
        if (!runs.empty()) rep.trajectories.push_back({"sde_trial_0", std::move(runs[0].kept)});
    }
    rep.runtime_seconds = seconds_since(start);
    return rep;
}

// ---------------------------------------------------------------------------

VerifyReport verify_contraction(const ContractionPreset& preset) {
    const auto start = Clock::now();
    if (preset.trials < 1) throw Error("trials >= 1");
    if (preset.d < 2) throw Error("contraction needs d >= 2");
    if (!(preset.offset_min >= 0.0 && preset.offset_max >= preset.offset_min))
        throw Error("need 0 <= offset_min <= offset_max");
    preset.guidance.validate();

    const ModelSpec model = ModelSpec::bimodal(preset.R, preset.d);
    State v = preset.v;
    if (v.size() == 0) {
        v = State::Zero(preset.d);
        v[0] = std::cos(std::numbers::pi / 4.0);
        v[1] = std::sin(std::numbers::pi / 4.0);
    }
    if (v.size() != preset.d) throw Error("dimension mismatch: v");
    const double v1 = v[0];
    if (std::abs(v.norm() - 1.0) > 1e-12) throw Error("v must be a unit vector");
    if (!(v1 > 0.3 && v1 < 0.9)) throw Error("contraction needs v[1] in (0.3, 0.9)");

    std::vector<double> sigmas = preset.sigmas;
    std::sort(sigmas.begin(), sigmas.end(), std::greater<>());
    if (sigmas.empty()) throw Error("contraction needs at least one sigma");

    const State z1 = preset.R * State::Unit(preset.d, 0);
    const Eigen::VectorXd y = Eigen::VectorXd::Constant(1, preset.R * v1);
    // Unit direction inside {<v, x> = y} pointing away from e1.
    State u = State::Unit(preset.d, 0) - v1 * v;
    u = -u / u.norm();

    GuidanceConfig cfg = preset.guidance;
    cfg.sampler = Sampler::ODE;
    cfg.guidance = GuidanceKind::MDPS;
    const double T = cfg.T;

    struct PerSigma {
        double C, reward_ratio, min_x1, tanh_min, tanh_min_f1, runtime;
    };
    struct TrialOut {
        double offset;
        std::vector<PerSigma> per_sigma;
        std::vector<Trajectory> kept;
    };

    auto trials = map_trials(
        static_cast<std::size_t>(preset.trials),
        [&](std::size_t i) {
            RngStream rng(derive_seed(preset.run.seed, i));
            TrialOut out;
            out.offset = rng.uniform(preset.offset_min, preset.offset_max);
            const State x = z1 + out.offset * u;
            const State latent = extract_latent(model, x, T, cfg);
            for (double s : sigmas) {
                const auto t0 = Clock::now();
                const Measurement meas(SingleVector{v}, preset.d, y, s);
                ReguidanceResult r = guide_from_latent(model, meas, latent, x, cfg, true);
                const Trajectory& tr = r.guided_trajectory;
                PerSigma ps;
                const double in_dist = (x - z1).norm();
                ps.C = in_dist > 0.0 ? (r.output - z1).norm() / in_dist : kNaN;
                ps.reward_ratio =
                    (std::abs(v.dot(r.output) - y[0]) / (preset.R * v1)) / (10.0 * s * std::log(1.0 / s));
                ps.min_x1 = std::numeric_limits<double>::infinity();
                for (const State& st : tr.states) ps.min_x1 = std::min(ps.min_x1, st[0]);
                const auto window_min = [&](double length) {
                    const double from = length > 0.0 ? T - length : T;
                    double m = std::numeric_limits<double>::infinity();
                    for (std::size_t k = 0; k < tr.size(); ++k)
                        if (tr.times[k] >= from) m = std::min(m, tr.diagnostics[k].tanh_diag);
                    return m;
                };
                ps.tanh_min = window_min(contraction_window_length(s, preset.R, v1, preset.window_loglog_factor));
                ps.tanh_min_f1 = window_min(contraction_window_length(s, preset.R, v1, 1.0));
                ps.runtime = seconds_since(t0);
                out.per_sigma.push_back(ps);
                if (preset.run.keep_trajectories && i == 0) out.kept.push_back(std::move(r.guided_trajectory));
            }
            return out;
        },
        preset.run.workers);

    VerifyReport rep;
    rep.experiment = "contraction";
    common_params(rep, preset.run);
    rep.param("model", "bimodal");
    rep.param("R", preset.R);
    rep.param("d", std::to_string(preset.d));
    rep.param("v1", v1);
    rep.param("trials", std::to_string(preset.trials));
    rep.param("offset_min", preset.offset_min);
    rep.param("offset_max", preset.offset_max);
    rep.param("window_loglog_factor", preset.window_loglog_factor);
    guidance_params(rep, cfg);
    rep.table.columns = {"sigma",           "trial",          "offset",          "C_meas", "reward_err_ratio",
                         "min_x1",          "tanh_min_window", "tanh_min_window_f1", "runtime_s"};

    const double target = v1 * v1;
    std::vector<double> gaps_trend, window_lengths;
    double worst_C = -std::numeric_limits<double>::infinity();
    double worst_ratio = 0.0, min_x1 = std::numeric_limits<double>::infinity();
    double min_margin = std::numeric_limits<double>::infinity();
    int trial_gap_violations = 0;
    for (std::size_t k = 0; k < sigmas.size(); ++k) {
        const double s = sigmas[k];
        const double floor = 1.0 - 10.0 * s;
        std::vector<double> Cs, gaps, ratios, tmins, tmins1;
        for (std::size_t i = 0; i < trials.size(); ++i) {
            const PerSigma& ps = trials[i].per_sigma[k];
            rep.table.rows.push_back({s, static_cast<double>(i), trials[i].offset, ps.C, ps.reward_ratio, ps.min_x1,
                                      ps.tanh_min, ps.tanh_min_f1, ps.runtime});
            Cs.push_back(ps.C);
            gaps.push_back(std::abs(ps.C - target));
            ratios.push_back(ps.reward_ratio);
            tmins.push_back(ps.tanh_min);
            tmins1.push_back(ps.tanh_min_f1);
            worst_C = std::isnan(ps.C) ? ps.C : std::max(worst_C, ps.C);
            worst_ratio = std::max(worst_ratio, ps.reward_ratio);
            min_x1 = std::min(min_x1, ps.min_x1);
            min_margin = std::min(min_margin, ps.tanh_min - floor);
            if (k > 0) {
                const PerSigma& prev = trials[i].per_sigma[k - 1];
                if (!(std::abs(ps.C - target) < std::abs(prev.C - target))) ++trial_gap_violations;
            }
        }
        const double L = contraction_window_length(s, preset.R, v1, preset.window_loglog_factor);
        window_lengths.push_back(L);
        gaps_trend.push_back(median(gaps));
        rep.metric(at("median_C_meas", "sigma", s), median(Cs));
        rep.metric(at("max_C_meas", "sigma", s), max_of(Cs));
        rep.metric(at("median_contraction_gap", "sigma", s), gaps_trend.back());
        rep.metric(at("max_reward_err_ratio", "sigma", s), max_of(ratios));
        rep.metric(at("min_tanh_window", "sigma", s), min_of(tmins));
        rep.metric(at("min_tanh_window_f1", "sigma", s), min_of(tmins1));
        rep.metric(at("window_length", "sigma", s), L);
        rep.metric(at("window_length_f1", "sigma", s), contraction_window_length(s, preset.R, v1, 1.0));
    }
    rep.trend("sigma", sigmas);
    rep.trend("median_contraction_gap", gaps_trend);
    rep.trend("window_length", window_lengths);
    rep.metric("contraction_target_v1_squared", target);
    rep.metric("max_C_meas", worst_C);
    rep.metric("contraction_gap_violations", decrease_violations(gaps_trend));
    rep.metric("trial_contraction_gap_violations", trial_gap_violations);
    rep.metric("max_reward_err_ratio", worst_ratio);
    rep.metric("min_x1", min_x1);
    rep.metric("min_tanh_margin", min_margin);
    rep.check("contracts_every_trial", "max_C_meas", "<", 1.0);
    rep.check("contraction_approaches_v1_squared", "contraction_gap_violations", "<=", 0.0);
    rep.check("reward_error_bound", "max_reward_err_ratio", "<=", 1.0);
    rep.check("x1_stays_nonnegative", "min_x1", ">=", -1e-9);
    rep.check("tanh_floor_on_final_window", "min_tanh_margin", ">=", 0.0);
    rep.notes.push_back("reward_err_ratio = (|<v, out> - y| / (R v1)) / (10 sigma ln(1/sigma))");
    rep.notes.push_back("an empty final window (non-positive length) degenerates to the terminal state");
    rep.notes.push_back("min_tanh_window_f1 uses a single ln ln(1/eps) shift and is informational");

    if (preset.run.keep_trajectories && !trials.empty()) {
        for (std::size_t k = 0; k < trials[0].kept.size(); ++k)
            rep.trajectories.push_back({at("guided", "sigma", sigmas[k]), std::move(trials[0].kept[k])});
    }
    rep.runtime_seconds = seconds_since(start);
    return rep;
}

// ---------------------------------------------------------------------------

VerifyReport verify_dps_bias(const DpsBiasPreset& preset) {
    const auto start = Clock::now();
    if (preset.trials < 5000) throw Error("insufficient trials: dps-bias needs at least 5000");
    if (!(preset.sigma > 0.0)) throw Error("sigma > 0");

    const ModelSpec model = ModelSpec::iso(1);
    const Measurement meas(Inpainting{{0}}, 1, Eigen::VectorXd::Constant(1, preset.y), preset.sigma);
    GuidanceConfig cfg;
    cfg.T = preset.T;
    cfg.sde_steps = preset.sde_steps;
    cfg.sampler = Sampler::SDE;
    cfg.guidance = GuidanceKind::DPS;
    cfg.validate();

    const double s2 = preset.sigma * preset.sigma;
    const double post_mean = preset.y / (s2 + 1.0);
    const double post_var = s2 / (s2 + 1.0);
    const double T = preset.T;
    const VelocityField dps = guided_sde_drift(model, meas, cfg);
    const VelocityField exact = [post_mean, post_var, T](const State& x, double t) -> State {
        const double tau = T - t;
        const double e = std::exp(-tau);
        const double var = e * e * post_var + 1.0 - e * e;
        return x - 2.0 * (x.array() - e * post_mean).matrix() / var;
    };

    struct Pair {
        double dps, exact;
    };
    IntegrateOptions opts;
    opts.record = false;
    auto runs = map_trials(
        static_cast<std::size_t>(preset.trials),
        [&](std::size_t i) {
            const std::uint64_t s = derive_seed(preset.run.seed, i);
            RngStream init(s);
            const State x0 = State::Constant(1, init.normal());
            RngStream a(derive_seed(s, 1)), b(derive_seed(s, 1));
            const double xd = integrate_sde(dps, x0, 0.0, T, cfg, a, opts).back()[0];
            const double xe = integrate_sde(exact, x0, 0.0, T, cfg, b, opts).back()[0];
            return Pair{xd, xe};
        },
        preset.run.workers);

    std::vector<double> xd, xe;
    VerifyReport rep;
    rep.experiment = "dps-bias";
    common_params(rep, preset.run);
    rep.param("y", preset.y);
    rep.param("sigma", preset.sigma);
    rep.param("T", preset.T);
    rep.param("trials", std::to_string(preset.trials));
    rep.param("sde_steps", std::to_string(preset.sde_steps));
    rep.table.columns = {"trial", "dps_terminal", "exact_terminal"};
    for (std::size_t i = 0; i < runs.size(); ++i) {
        rep.table.rows.push_back({static_cast<double>(i), runs[i].dps, runs[i].exact});
        xd.push_back(runs[i].dps);
        xe.push_back(runs[i].exact);
    }
    const double n = static_cast<double>(runs.size());
    const double md = mean(xd), vd = sample_variance(xd), sed = std::sqrt(vd / n);
    const double me = mean(xe), ve = sample_variance(xe), see = std::sqrt(ve / n);
    rep.metric("posterior_mean", post_mean);
    rep.metric("posterior_variance", post_var);
    rep.metric("dps_mean", md);
    rep.metric("dps_variance", vd);
    rep.metric("dps_standard_error", sed);
    rep.metric("bias_z", std::abs(md - post_mean) / sed);
    rep.metric("exact_arm_mean", me);
    rep.metric("exact_arm_variance", ve);
    rep.metric("exact_arm_z", std::abs(me - post_mean) / see);
    rep.metric("kl_lower_bound_T", dps_kl_lower_bound(std::abs(preset.y), preset.sigma, T));
    rep.metric("kl_lower_bound_inf", dps_kl_lower_bound(std::abs(preset.y), preset.sigma,
                                                        std::numeric_limits<double>::infinity()));
    rep.check("dps_mean_is_biased", "bias_z", ">=", 5.0);
    rep.notes.push_back("exact arm integrates the true conditional reverse SDE with the same noise path");
    rep.runtime_seconds = seconds_since(start);
    return rep;
}

// ---------------------------------------------------------------------------

VerifyReport verify_roundtrip(const RoundtripPreset& preset) {
    const auto start = Clock::now();
    if (preset.trials < 1) throw Error("trials >= 1");
    preset.guidance.validate();
    for (int g : preset.grids)
        if (g < 1) throw Error("grid step counts must be >= 1");

    const ModelSpec model = preset.model;
    const GuidanceConfig cfg = preset.guidance;
    const auto rel = [](const State& a, const State& b) {
        const double n = b.norm();
        return n > 0.0 ? (a - b).norm() / n : (a - b).norm();
    };

    struct TrialOut {
        double default_err;
        std::vector<double> grid_err;
        double runtime;
        Trajectory kept;
    };
    auto trials = map_trials(
        static_cast<std::size_t>(preset.trials),
        [&](std::size_t i) {
            const auto t0 = Clock::now();
            RngStream rng(derive_seed(preset.run.seed, i));
            const State x = sample_prior(model, rng);
            TrialOut out;
            const Trajectory lat = extract_latent_trajectory(model, x, cfg.T, cfg);
            Trajectory back = forward_flow_trajectory(model, lat.back(), cfg.T, cfg);
            out.default_err = rel(back.back(), x);
            for (int g : preset.grids) {
                GuidanceConfig c = cfg;
                c.steps = g;
                c.rel_tol = std::numeric_limits<double>::infinity();
                out.grid_err.push_back(rel(forward_flow(model, extract_latent(model, x, c.T, c), c.T, c), x));
            }
            out.runtime = seconds_since(t0);
            if (preset.run.keep_trajectories && i == 0) out.kept = std::move(back);
            return out;
        },
        preset.run.workers);

    VerifyReport rep;
    rep.experiment = "roundtrip";
    common_params(rep, preset.run);
    rep.param("model", to_string(model.kind));
    rep.param("R", model.R);
    rep.param("d", std::to_string(model.d));
    rep.param("trials", std::to_string(preset.trials));
    guidance_params(rep, cfg);
    rep.table.columns = {"trial", "default_rel_err"};
    for (int g : preset.grids) rep.table.columns.push_back("rel_err_steps_" + std::to_string(g));
    rep.table.columns.push_back("runtime_s");

    std::vector<double> defaults;
    std::vector<std::vector<double>> per_grid(preset.grids.size());
    for (std::size_t i = 0; i < trials.size(); ++i) {
        std::vector<double> row{static_cast<double>(i), trials[i].default_err};
        for (std::size_t k = 0; k < preset.grids.size(); ++k) {
            row.push_back(trials[i].grid_err[k]);
            per_grid[k].push_back(trials[i].grid_err[k]);
        }
        row.push_back(trials[i].runtime);
        rep.table.rows.push_back(std::move(row));
        defaults.push_back(trials[i].default_err);
    }
    std::vector<double> grid_medians, grid_steps;
    for (std::size_t k = 0; k < preset.grids.size(); ++k) {
        grid_medians.push_back(median(per_grid[k]));
        grid_steps.push_back(preset.grids[k]);
        rep.metric(at("median_rel_err", "steps", preset.grids[k]), grid_medians.back());
    }
    rep.trend("grid_steps", grid_steps);
    rep.trend("median_rel_err", grid_medians);
    int grid_violations = 0;
    for (std::size_t k = 1; k < grid_medians.size(); ++k)
        if (!(grid_medians[k] < grid_medians[k - 1]) && grid_medians[k - 1] > kRoundoffFloor) ++grid_violations;
    rep.metric("grid_decrease_violations", grid_violations);
    if (grid_medians.size() >= 2) {
        const std::size_t k = grid_medians.size() - 1;
        rep.metric("grid_observed_order",
                   std::log(grid_medians[k - 1] / grid_medians[k]) / std::log(grid_steps[k] / grid_steps[k - 1]));
    }

    const auto [coarse, fine] = exponential_decay_errors(kDecayProbeSteps);
    rep.metric("max_rel_err_default", max_of(defaults));
    rep.metric("median_rel_err_default", median(defaults));
    rep.metric("exp_decay_error_coarse", coarse);
    rep.metric("exp_decay_error_fine", fine);
    rep.metric("exp_decay_ratio", coarse / fine);
    rep.check("roundtrip_at_defaults", "max_rel_err_default", "<=", 1e-4);
    rep.check("exp_decay_ratio_low", "exp_decay_ratio", ">=", 16.0 * 0.8);
    rep.check("exp_decay_ratio_high", "exp_decay_ratio", "<=", 16.0 * 1.2);
    rep.check("roundtrip_error_decreases_with_grid", "grid_decrease_violations", "<=", 0.0);
    rep.notes.push_back("grid columns disable step doubling; exp_decay compares " + std::to_string(kDecayProbeSteps) +
                        " and " + std::to_string(2 * kDecayProbeSteps) + " base intervals on dx/dt = -x over [0, 1]");
    if (preset.run.keep_trajectories && !trials.empty())
        rep.trajectories.push_back({"forward_trial_0", std::move(trials[0].kept)});
    rep.runtime_seconds = seconds_since(start);
    return rep;
}

// ---------------------------------------------------------------------------

namespace {

// Coordinatewise replay of a hypercube DPS run: every coordinate is a 1-D
// problem integrated on the accepted grids of the d-dimensional run.
double coordinatewise_gap(const ModelSpec& model, const Measurement& meas, const GuidanceConfig& cfg,
                          const ReguidanceResult& full, const State& x) {
    const ModelSpec m1 = ModelSpec::hypercube(model.R, 1);
    std::vector<int> slot(static_cast<std::size_t>(model.d), -1);
    const auto& idx = meas.inpainting()->indices;
    for (std::size_t k = 0; k < idx.size(); ++k) slot[static_cast<std::size_t>(idx[k])] = static_cast<int>(k);

    IntegrateOptions opts;
    opts.record = false;
    double gap = 0.0;
    for (int i = 0; i < model.d; ++i) {
        const State xi = State::Constant(1, x[i]);
        const State lat = integrate_on_grid(extraction_field(m1), xi, full.latent_trajectory.times, opts).back();
        const int k = slot[static_cast<std::size_t>(i)];
        GuidanceConfig c = cfg;
        c.guidance = k >= 0 ? GuidanceKind::DPS : GuidanceKind::None;
        const double yi = k >= 0 ? meas.y()[k] : 0.0;
        const Measurement mi(Inpainting{{0}}, 1, Eigen::VectorXd::Constant(1, yi), meas.sigma());
        const VelocityField field = guided_ode_field(m1, mi, c);
        const State out = integrate_on_grid(field, lat, full.guided_trajectory.times, opts).back();
        gap = std::max({gap, std::abs(lat[0] - full.latent[i]), std::abs(out[0] - full.output[i])});
    }
    return gap;
}

std::size_t bit_mismatches(const Trajectory& a, const Trajectory& b) {
    if (a.size() != b.size() || a.times.size() != b.times.size()) return std::max(a.size(), b.size()) + 1;
    std::size_t bad = 0;
    for (std::size_t k = 0; k < a.size(); ++k) {
        if (std::memcmp(&a.times[k], &b.times[k], sizeof(double)) != 0) ++bad;
        if (a.states[k].size() != b.states[k].size() ||
            std::memcmp(a.states[k].data(), b.states[k].data(), sizeof(double) * a.states[k].size()) != 0)
            ++bad;
    }
    return bad;
}

}  // namespace

VerifyReport verify_decoupling(const DecouplingPreset& preset) {
    const auto start = Clock::now();
    if (preset.trials < 1) throw Error("trials >= 1");
    if (preset.m < 1 || preset.m > preset.d) throw Error("need 1 <= m <= d");
    preset.guidance.validate();

    const ModelSpec model = ModelSpec::hypercube(preset.R, preset.d);
    GuidanceConfig cfg = preset.guidance;
    cfg.sampler = Sampler::ODE;
    cfg.guidance = GuidanceKind::DPS;
    const std::vector<int> idx = first_or_given(preset.m, {});

    struct TrialOut {
        double gap;
        double adaptive_gap;
        ReguidanceResult full;
        double runtime;
    };
    const auto trial = [&](std::size_t i) {
        const auto t0 = Clock::now();
        RngStream rng(derive_seed(preset.run.seed, i));
        const State x = sample_prior(model, rng);
        const State z = random_vertex(model, rng);
        const Measurement meas = make_measurement(Inpainting{idx}, model, z, preset.sigma);
        TrialOut out;
        out.full = run_reguidance(model, meas, x, cfg, true);
        out.gap = coordinatewise_gap(model, meas, cfg, out.full, x);
        // Independent step control per coordinate, for reference only.
        const ModelSpec m1 = ModelSpec::hypercube(model.R, 1);
        out.adaptive_gap = 0.0;
        for (int c = 0; c < model.d; ++c) {
            const auto pos = std::find(idx.begin(), idx.end(), c);
            GuidanceConfig ci = cfg;
            double yi = 0.0;
            if (pos == idx.end()) ci.guidance = GuidanceKind::None;
            else yi = z[c];
            const Measurement mi(Inpainting{{0}}, 1, Eigen::VectorXd::Constant(1, yi), preset.sigma);
            const State out1 = run_reguidance(m1, mi, State::Constant(1, x[c]), ci, false).output;
            out.adaptive_gap = std::max(out.adaptive_gap, std::abs(out1[0] - out.full.output[c]));
        }
        out.runtime = seconds_since(t0);
        return out;
    };

    auto runs = map_trials(static_cast<std::size_t>(preset.trials), trial, preset.run.workers);
    auto serial = map_trials_serial(static_cast<std::size_t>(preset.trials), trial);
    const auto rerun = trial(0);

    std::size_t serial_mismatch = 0;
    for (std::size_t i = 0; i < runs.size(); ++i) {
        serial_mismatch += bit_mismatches(runs[i].full.guided_trajectory, serial[i].full.guided_trajectory);
        serial_mismatch += bit_mismatches(runs[i].full.latent_trajectory, serial[i].full.latent_trajectory);
    }
    const std::size_t rerun_mismatch = bit_mismatches(rerun.full.guided_trajectory, runs[0].full.guided_trajectory) +
                                       bit_mismatches(rerun.full.latent_trajectory, runs[0].full.latent_trajectory);

    VerifyReport rep;
    rep.experiment = "decoupling";
    common_params(rep, preset.run);
    rep.param("model", "hypercube");
    rep.param("R", preset.R);
    rep.param("d", std::to_string(preset.d));
    rep.param("m", std::to_string(preset.m));
    rep.param("sigma", preset.sigma);
    rep.param("trials", std::to_string(preset.trials));
    guidance_params(rep, cfg);
    rep.table.columns = {"trial", "coordinatewise_gap", "adaptive_coordinatewise_gap", "runtime_s"};
    std::vector<double> gaps, agaps;
    for (std::size_t i = 0; i < runs.size(); ++i) {
        rep.table.rows.push_back({static_cast<double>(i), runs[i].gap, runs[i].adaptive_gap, runs[i].runtime});
        gaps.push_back(runs[i].gap);
        agaps.push_back(runs[i].adaptive_gap);
    }
    rep.metric("max_coordinatewise_gap", max_of(gaps));
    rep.metric("max_adaptive_coordinatewise_gap", max_of(agaps));
    rep.metric("rerun_bit_mismatches", static_cast<double>(rerun_mismatch));
    rep.metric("serial_parallel_bit_mismatches", static_cast<double>(serial_mismatch));
    rep.check("coordinatewise_decoupling", "max_coordinatewise_gap", "<=", 1e-9);
    rep.check("rerun_bit_identical", "rerun_bit_mismatches", "<=", 0.0);
    rep.check("serial_parallel_bit_identical", "serial_parallel_bit_mismatches", "<=", 0.0);
    rep.notes.push_back("coordinatewise runs replay the d-dimensional run's accepted time grids");
    if (preset.run.keep_trajectories) {
        rep.trajectories.push_back({"latent_trial_0", std::move(runs[0].full.latent_trajectory)});
        rep.trajectories.push_back({"guided_trial_0", std::move(runs[0].full.guided_trajectory)});
    }
    rep.runtime_seconds = seconds_since(start);
    return rep;
}

// ---------------------------------------------------------------------------

VerifyReport latent_geometry_sweep(const LatentGeometryPreset& preset) {
    const auto start = Clock::now();
    if (preset.modes < 2) throw Error("latent geometry needs at least 2 modes");
    if (preset.m < 1 || preset.m >= preset.d) throw Error("need 1 <= m < d");
    if (preset.perturb_trials < 1) throw Error("perturb_trials >= 1");
    preset.guidance.validate();

    const ModelSpec model = ModelSpec::hypercube(preset.R, preset.d);
    RngStream setup(derive_seed(preset.run.seed, kSetupStream));
    const State z0 = random_vertex(model, setup);
    const Measurement meas = make_measurement(Inpainting{first_or_given(preset.m, {})}, model, z0, preset.sigma);

    std::vector<State> modes = consistent_modes(model, meas);
    for (std::size_t k = modes.size(); k > 1; --k) {
        const auto j = static_cast<std::size_t>(setup.uniform() * static_cast<double>(k));
        std::swap(modes[k - 1], modes[std::min(j, k - 1)]);
    }
    if (static_cast<int>(modes.size()) < preset.modes) throw Error("fewer consistent modes than requested");
    modes.resize(static_cast<std::size_t>(preset.modes));

    GuidanceConfig cfg = preset.guidance;
    cfg.sampler = Sampler::ODE;
    cfg.guidance = GuidanceKind::DPS;
    std::vector<State> latents = map_trials(
        modes.size(), [&](std::size_t k) { return extract_latent(model, modes[k], cfg.T, cfg); }, preset.run.workers);

    struct Job {
        int arm, a, b;
        double stddev;
        int trial;
    };
    std::vector<Job> jobs;
    for (int a = 0; a < preset.modes; ++a)
        for (double s : preset.stds)
            for (int t = 0; t < preset.perturb_trials; ++t) jobs.push_back({0, a, a, s, t});
    const double interp_std = preset.stds.empty() ? 0.0 : preset.stds.back();
    for (int a = 0; a < preset.modes; ++a)
        for (int b = a + 1; b < preset.modes; ++b)
            for (int t = 0; t < preset.perturb_trials; ++t) jobs.push_back({1, a, b, interp_std, t});

    struct JobOut {
        double distance, runtime;
    };
    auto outs = map_trials(
        jobs.size(),
        [&](std::size_t j) {
            const auto t0 = Clock::now();
            const Job& job = jobs[j];
            RngStream rng(derive_seed(preset.run.seed, j));
            const auto a = static_cast<std::size_t>(job.a), b = static_cast<std::size_t>(job.b);
            const State base = job.arm == 0 ? latents[a] : State(0.5 * (latents[a] + latents[b]));
            const State lat = perturb_latent(base, job.stddev, rng);
            const ReguidanceResult r = guide_from_latent(model, meas, lat, modes[a], cfg, false);
            return JobOut{r.nearest_mode_distance, seconds_since(t0)};
        },
        preset.run.workers);

    VerifyReport rep;
    rep.experiment = "latent-geometry";
    common_params(rep, preset.run);
    rep.param("model", "hypercube");
    rep.param("R", preset.R);
    rep.param("d", std::to_string(preset.d));
    rep.param("m", std::to_string(preset.m));
    rep.param("sigma", preset.sigma);
    rep.param("modes", std::to_string(preset.modes));
    rep.param("perturb_trials", std::to_string(preset.perturb_trials));
    guidance_params(rep, cfg);
    rep.table.columns = {"arm", "mode_a", "mode_b", "stddev", "trial", "distance_to_mode", "runtime_s"};
    for (std::size_t j = 0; j < jobs.size(); ++j) {
        const Job& job = jobs[j];
        rep.table.rows.push_back({static_cast<double>(job.arm), static_cast<double>(job.a), static_cast<double>(job.b),
                                  job.stddev, static_cast<double>(job.trial), outs[j].distance, outs[j].runtime});
    }

    std::vector<double> pair_dist;
    for (std::size_t a = 0; a < latents.size(); ++a)
        for (std::size_t b = a + 1; b < latents.size(); ++b) pair_dist.push_back((latents[a] - latents[b]).norm());
    const double scale = std::sqrt(2.0 * preset.d);
    rep.metric("sqrt_2d", scale);
    rep.metric("min_latent_distance", min_of(pair_dist));
    rep.metric("median_latent_distance", median(pair_dist));
    rep.metric("max_latent_distance", max_of(pair_dist));
    rep.metric("median_latent_distance_over_sqrt_2d", median(pair_dist) / scale);

    std::vector<double> std_medians;
    for (double s : preset.stds) {
        std::vector<double> ds;
        for (std::size_t j = 0; j < jobs.size(); ++j)
            if (jobs[j].arm == 0 && jobs[j].stddev == s) ds.push_back(outs[j].distance);
        std_medians.push_back(median(ds));
        rep.metric(at("median_distance_perturbed", "std", s), std_medians.back());
    }
    std::vector<double> interp;
    for (std::size_t j = 0; j < jobs.size(); ++j)
        if (jobs[j].arm == 1) interp.push_back(outs[j].distance);
    rep.trend("stddev", preset.stds);
    rep.trend("median_distance_perturbed", std_medians);
    rep.metric("median_distance_interpolated", median(interp));
    if (!std_medians.empty())
        rep.metric("interpolated_over_perturbed", median(interp) / std_medians.back());
    rep.notes.push_back("interpolation arm perturbs the latent midpoint with the largest stddev");
    rep.runtime_seconds = seconds_since(start);
    return rep;
}

}  // namespace reglab
