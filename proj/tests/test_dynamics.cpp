#include <doctest.h>

#include <cmath>
#include <limits>

#include "reglab/dynamics.hpp"
#include "reglab/error.hpp"
#include "reglab/measure.hpp"
#include "reglab/models.hpp"

using namespace reglab;

namespace {

State vec(std::initializer_list<double> xs) {
    State v(static_cast<Eigen::Index>(xs.size()));
    Eigen::Index i = 0;
    for (double x : xs) v[i++] = x;
    return v;
}

double max_abs(const State& v) { return v.cwiseAbs().maxCoeff(); }

GuidanceConfig no_error_control(int steps) {
    GuidanceConfig cfg;
    cfg.steps = steps;
    cfg.rel_tol = std::numeric_limits<double>::infinity();
    return cfg;
}

double decay_error(int steps) {
    const VelocityField f = [](const State& x, double) { return State(-x); };
    const Trajectory tr = integrate_ode(f, vec({1.0}), 0.0, 1.0, no_error_control(steps));
    return std::abs(tr.back()[0] - std::exp(-1.0));
}

void check_trajectory_shape(const Trajectory& tr, double t0, double t1) {
    REQUIRE(tr.size() >= 2);
    CHECK(tr.times.size() == tr.states.size());
    CHECK(tr.times.front() == t0);
    CHECK(tr.times.back() == t1);
    for (std::size_t i = 1; i < tr.times.size(); ++i) CHECK(tr.times[i] > tr.times[i - 1]);
    for (const auto& s : tr.states) CHECK(s.allFinite());
}

}  // namespace

TEST_CASE("unconditional velocity examples") {
    RngStream rng(5);
    const ModelSpec iso = ModelSpec::iso(4);
    const ModelSpec cube = ModelSpec::hypercube(2.0, 4);
    const ModelSpec bi = ModelSpec::bimodal(3.0, 3);
    for (int k = 0; k < 20; ++k) {
        const State x = rng.normal_vector(4) * 3.0;
        const double t = rng.uniform(0.0, 10.0);
        CHECK(uncond_reverse_velocity(iso, x, t, 10.0) == State::Zero(4));
        const State xb = rng.normal_vector(3) * 3.0;
        const State vb = uncond_reverse_velocity(bi, xb, t, 10.0);
        CHECK(vb[1] == 0.0);
        CHECK(vb[2] == 0.0);
        const double a = 3.0 * std::exp(-(10.0 - t));
        CHECK(vb[0] == doctest::Approx(a * std::tanh(a * xb[0])).epsilon(1e-12));
    }
    CHECK(max_abs(uncond_reverse_velocity(cube, State::Zero(4), 3.0, 10.0)) == 0.0);
    CHECK_THROWS_AS(uncond_reverse_velocity(cube, State::Zero(4), 10.5, 10.0), Error);
    CHECK_THROWS_AS(uncond_reverse_velocity(cube, State::Zero(3), 1.0, 10.0), Error);
}

TEST_CASE("dps guidance examples") {
    const double R = 2.0, T = 10.0, sigma = 0.1;
    const ModelSpec model = ModelSpec::hypercube(R, 4);
    const Measurement meas(Inpainting{{0, 2}}, 4, vec({R, -R}), sigma);
    RngStream rng(17);
    for (int k = 0; k < 20; ++k) {
        const State x = rng.normal_vector(4) * 2.0;
        const double t = rng.uniform(0.0, T);
        CHECK(dps_guidance_velocity(model, meas, 0.0, x, t, T) == State::Zero(4));

        const double rho = 1.0 / (sigma * sigma);
        const State near = dps_guidance_velocity(model, meas, rho, x, T - 1e-9, T);
        const State limit = rho * meas.A().transpose() * (meas.y() - meas.A() * x);
        CHECK((near - limit).norm() <= 1e-6 * limit.norm());
    }
    CHECK_THROWS_AS(dps_guidance_velocity(model, meas, -1.0, State::Zero(4), 1.0, T), Error);
}

TEST_CASE("dps guidance vanishes at a consistent denoised point") {
    const ModelSpec model = ModelSpec::hypercube(3.0, 5);
    RngStream rng(23);
    for (int k = 0; k < 10; ++k) {
        const State x = rng.normal_vector(5);
        const double tau = rng.uniform(0.01, 5.0);
        Eigen::MatrixXd A(2, 5);
        for (int i = 0; i < 2; ++i)
            for (int j = 0; j < 5; ++j) A(i, j) = rng.normal();
        const Measurement meas(General{A}, 5, A * denoiser(model, x, tau), 0.1);
        CHECK(max_abs(dps_guidance_velocity(model, meas, 100.0, x, 10.0 - tau, 10.0)) <= 1e-10);
    }
}

TEST_CASE("dps small time-to-go bound") {
    const double R = 2.0, T = 10.0;
    const ModelSpec model = ModelSpec::hypercube(R, 6);
    RngStream rng(41);
    for (int k = 0; k < 30; ++k) {
        // Keep the residual bounded away from zero.
        State x(6);
        for (int i = 0; i < 6; ++i) x[i] = rng.uniform(-R, 0.0);
        const Measurement meas(Inpainting{{0, 3, 5}}, 6, vec({R, R, R}), 0.1);
        const double rho = 7.0;
        const State limit = rho * meas.A().transpose() * (meas.y() - meas.A() * x);
        for (double tau : {1e-3, 1e-4, 1e-5}) {
            const State g = dps_guidance_velocity(model, meas, rho, x, T - tau, T);
            CHECK((g - limit).norm() <= 2.0 * tau * (1.0 + R * R) * limit.norm());
        }
    }
}

TEST_CASE("modified bimodal field") {
    const double R = 5.0, T = 10.0, sigma = 0.05;
    const double rho = 1.0 / (sigma * sigma);
    const State v = vec({0.6, 0.8});
    const ModelSpec model = ModelSpec::bimodal(R, 2);
    const Measurement meas(SingleVector{v}, 2, Eigen::VectorXd::Constant(1, R * v[0]), sigma);

    const State at_mode = mdps_velocity(model, meas, rho, vec({R, 0.0}), T, T);
    CHECK(at_mode[0] == doctest::Approx(R * std::tanh(R * R)).epsilon(1e-14));
    CHECK(std::abs(at_mode[1]) <= 1e-12);

    const Measurement axis(SingleVector{vec({1.0, 0.0})}, 2, Eigen::VectorXd::Constant(1, R), sigma);
    RngStream rng(3);
    for (int k = 0; k < 10; ++k) {
        const State x = vec({0.0, rng.normal() * 3.0});
        CHECK(mdps_velocity(model, axis, rho, x, rng.uniform(0.0, T), T)[1] == 0.0);
    }

    // In three dimensions the field must stay in span{e1, v}.
    const ModelSpec model3 = ModelSpec::bimodal(R, 3);
    for (int k = 0; k < 50; ++k) {
        State v3 = rng.normal_vector(3);
        v3.normalize();
        const Measurement m3(SingleVector{v3}, 3, Eigen::VectorXd::Constant(1, R * v3[0]), sigma);
        const State x = rng.normal_vector(3) * 4.0;
        const double t = rng.uniform(0.0, T);
        const State out = mdps_velocity(model3, m3, rho, x, t, T);
        State w = vec({0.0, -v3[2], v3[1]});  // e1 x v
        w.normalize();
        CHECK(std::abs(out.dot(w)) <= 1e-12 * std::max(1.0, out.norm()));

        // Oracle: unconditional flow plus DPS with the Jacobian replaced by e^{-tau} I.
        const double tau = T - t;
        const State mu = denoiser(model3, x, tau);
        const State expected =
            uncond_reverse_velocity(model3, x, t, T) + rho * std::exp(-tau) * v3 * (m3.y()[0] - v3.dot(mu));
        CHECK((out - expected).norm() <= 1e-9 * std::max(1.0, expected.norm()));
    }

    CHECK_THROWS_AS(mdps_velocity(ModelSpec::hypercube(R, 2), meas, rho, vec({1.0, 1.0}), 1.0, T), Error);
    const Measurement ip(Inpainting{{0}}, 2, Eigen::VectorXd::Constant(1, R), sigma);
    CHECK_THROWS_AS(mdps_velocity(model, ip, rho, vec({1.0, 1.0}), 1.0, T), Error);
}

TEST_CASE("ode integrator examples") {
    GuidanceConfig cfg;
    cfg.steps = 64;
    const VelocityField zero = [](const State& x, double) { return State(State::Zero(x.size())); };
    const State x0 = vec({1.25, -3.5, 0.1});
    CHECK(integrate_ode(zero, x0, 0.0, 10.0, cfg).back() == x0);

    const VelocityField decay = [](const State& x, double) { return State(-x); };
    const Trajectory tr = integrate_ode(decay, vec({1.0}), 0.0, 1.0, cfg);
    CHECK(std::abs(tr.back()[0] - std::exp(-1.0)) <= cfg.rel_tol);
    check_trajectory_shape(tr, 0.0, 1.0);
}

TEST_CASE("rk4 convergence order") {
    const double e4 = decay_error(4), e8 = decay_error(8), e16 = decay_error(16);
    CHECK(e4 / e8 == doctest::Approx(16.0).epsilon(0.2));
    CHECK(e8 / e16 == doctest::Approx(16.0).epsilon(0.2));
    CHECK(std::log2(e4 / e16) / 2.0 == doctest::Approx(4.0).epsilon(0.075));
}

TEST_CASE("ode integrator errors") {
    const VelocityField poison = [](const State& x, double t) {
        return State(t > 0.5 ? State::Constant(x.size(), std::numeric_limits<double>::quiet_NaN()) : State(-x));
    };
    GuidanceConfig cfg;
    cfg.steps = 10;
    try {
        integrate_ode(poison, vec({1.0}), 0.0, 1.0, cfg);
        FAIL("expected an integration error");
    } catch (const IntegrationError& e) {
        CHECK(e.kind() == IntegrationError::Kind::NonFinite);
        CHECK(e.time() >= 0.5);
        CHECK(e.time() <= 1.0);
    }

    const VelocityField stiff = [](const State& x, double) { return State(-1e4 * x); };
    GuidanceConfig tight;
    tight.steps = 1;
    tight.min_step = 0.1;
    IntegrateOptions opts;
    opts.gain = [](double) { return 42.0; };
    try {
        integrate_ode(stiff, vec({1.0}), 0.0, 1.0, tight, opts);
        FAIL("expected an integration error");
    } catch (const IntegrationError& e) {
        CHECK(e.kind() == IntegrationError::Kind::StepUnderflow);
        CHECK(e.gain() == 42.0);
        CHECK(std::string(e.what()).find("guidance gain = 42") != std::string::npos);
    }

    CHECK_THROWS_AS(integrate_ode(stiff, vec({std::nan("")}), 0.0, 1.0, tight), IntegrationError);
    GuidanceConfig bad;
    bad.rel_tol = 0.0;
    CHECK_THROWS_AS(integrate_ode(stiff, vec({1.0}), 0.0, 1.0, bad), Error);
    bad = GuidanceConfig{};
    bad.min_step = -1.0;
    CHECK_THROWS_AS(integrate_ode(stiff, vec({1.0}), 0.0, 1.0, bad), Error);
    bad = GuidanceConfig{};
    bad.rho = -2.0;
    CHECK_THROWS_AS(bad.validate(), Error);
}

TEST_CASE("trajectories record diagnostics at every accepted step") {
    const ModelSpec model = ModelSpec::bimodal(3.0, 2);
    const Measurement meas(SingleVector{vec({0.6, 0.8})}, 2, Eigen::VectorXd::Constant(1, 1.8), 0.1);
    GuidanceConfig cfg;
    cfg.steps = 128;
    const double T = cfg.T;
    IntegrateOptions opts;
    opts.refine_from = T - 2.0 * std::log(10.0);
    opts.diagnostics = [&](const State& x, double t) { return make_diagnostics(model, &meas, x, T - t); };
    const VelocityField f = [&](const State& x, double t) {
        return State(uncond_reverse_velocity(model, x, t, T) + dps_guidance_velocity(model, meas, 100.0, x, t, T));
    };
    const Trajectory tr = integrate_ode(f, vec({0.3, -0.2}), 0.0, T, cfg, opts);
    check_trajectory_shape(tr, 0.0, T);
    REQUIRE(tr.diagnostics.size() == tr.size());
    for (std::size_t i = 0; i < tr.size(); ++i) {
        const State& x = tr.states[i];
        const double a = 3.0 * std::exp(-(T - tr.times[i]));
        CHECK(tr.diagnostics[i].tanh_diag == doctest::Approx(std::tanh(a * x[0])).epsilon(1e-12));
        CHECK(tr.diagnostics[i].meas_proj == doctest::Approx(0.6 * x[0] + 0.8 * x[1]).epsilon(1e-12));
        CHECK(tr.diagnostics[i].reward == doctest::Approx(residual_and_reward(meas, x).reward).epsilon(1e-12));
    }

    opts.record = false;
    const Trajectory ends = integrate_ode(f, vec({0.3, -0.2}), 0.0, T, cfg, opts);
    REQUIRE(ends.size() == 2);
    CHECK(ends.back() == tr.back());
    CHECK(ends.diagnostics.size() == 2);
}

TEST_CASE("base grid") {
    const auto g = base_grid(0.0, 10.0, 100);
    CHECK(g.size() == 101);
    CHECK(g.front() == 0.0);
    CHECK(g.back() == 10.0);

    const auto r = base_grid(0.0, 10.0, 100, 10.0 - 2.0 * std::log(20.0));
    CHECK(r.size() > g.size());
    CHECK(r.front() == 0.0);
    CHECK(r.back() == 10.0);
    for (std::size_t i = 1; i < r.size(); ++i) CHECK(r[i] > r[i - 1]);
    // The last interval is much finer than the base step.
    CHECK(r[r.size() - 1] - r[r.size() - 2] < 0.01);

    CHECK(base_grid(0.0, 1.0, 10, 5.0).size() == 11);
    CHECK_THROWS_AS(base_grid(1.0, 1.0, 10), Error);
    CHECK_THROWS_AS(base_grid(0.0, 1.0, 0), Error);
}

TEST_CASE("grid replay matches the accepted grid") {
    const ModelSpec model = ModelSpec::hypercube(2.0, 3);
    GuidanceConfig cfg;
    cfg.steps = 256;
    const VelocityField f = [&](const State& x, double t) { return uncond_reverse_velocity(model, x, t, cfg.T); };
    const Trajectory tr = integrate_ode(f, vec({0.5, -1.0, 2.0}), 0.0, cfg.T, cfg);
    const Trajectory replay = integrate_on_grid(f, tr.states.front(), tr.times);
    CHECK(replay.times == tr.times);
    CHECK(replay.back() == tr.back());
    CHECK_THROWS_AS(integrate_on_grid(f, tr.states.front(), {0.0}), Error);
}

TEST_CASE("euler-maruyama") {
    GuidanceConfig cfg;
    cfg.sampler = Sampler::SDE;
    cfg.sde_steps = 500;
    const VelocityField zero = [](const State& x, double) { return State(State::Zero(x.size())); };
    RngStream quiet(1);
    const Trajectory still = integrate_sde(zero, vec({2.0, -1.0}), 0.0, 1.0, cfg, quiet, {}, 0.0);
    check_trajectory_shape(still, 0.0, 1.0);
    CHECK(still.size() == 501);
    for (const auto& s : still.states) CHECK(s == vec({2.0, -1.0}));

    const VelocityField ou = [](const State& x, double) { return State(-x); };
    RngStream a(77), b(77);
    const Trajectory ta = integrate_sde(ou, vec({0.3}), 0.0, 5.0, cfg, a);
    const Trajectory tb = integrate_sde(ou, vec({0.3}), 0.0, 5.0, cfg, b);
    REQUIRE(ta.size() == tb.size());
    for (std::size_t i = 0; i < ta.size(); ++i) CHECK(ta.states[i] == tb.states[i]);
}

TEST_CASE("ou terminal variance") {
    GuidanceConfig cfg;
    cfg.sampler = Sampler::SDE;
    cfg.sde_steps = 2000;
    const VelocityField ou = [](const State& x, double) { return State(-x); };
    IntegrateOptions opts;
    opts.record = false;
    const int n = 10000;
    double s1 = 0.0, s2 = 0.0;
    for (int i = 0; i < n; ++i) {
        RngStream rng(derive_seed(2024, static_cast<std::uint64_t>(i)));
        const State x0 = rng.normal_vector(1);
        const double xt = integrate_sde(ou, x0, 0.0, 5.0, cfg, rng, opts).back()[0];
        s1 += xt;
        s2 += xt * xt;
    }
    const double var = (s2 - s1 * s1 / n) / (n - 1);
    CHECK(var == doctest::Approx(1.0).epsilon(0.05));
}

TEST_CASE("latent extraction") {
    GuidanceConfig cfg;
    const State x = vec({0.4, -2.0, 1.1});
    CHECK(extract_latent(ModelSpec::iso(3), x, cfg.T, cfg) == x);

    const ModelSpec bi = ModelSpec::bimodal(3.0, 2);
    for (double x1 : {0.05, 0.7, 2.5, -0.3, -3.1}) {
        const State xb = vec({x1, -0.8});
        const State z = extract_latent(bi, xb, cfg.T, cfg);
        CHECK(z[0] * x1 > 0.0);
        CHECK(z[1] == -0.8);
    }
    CHECK(extract_latent(bi, vec({0.0, 1.0}), cfg.T, cfg)[0] == 0.0);

    const ModelSpec cube = ModelSpec::hypercube(3.0, 8);
    RngStream rng(8);
    for (int k = 0; k < 5; ++k) {
        const State x0 = sample_prior(cube, rng);
        const State back = forward_flow(cube, extract_latent(cube, x0, cfg.T, cfg), cfg.T, cfg);
        CHECK(max_abs(back - x0) <= 1e-4 * std::max(1.0, max_abs(x0)));

        const State z0 = rng.normal_vector(8);
        const State again = extract_latent(cube, forward_flow(cube, z0, cfg.T, cfg), cfg.T, cfg);
        CHECK(max_abs(again - z0) <= 1e-4 * std::max(1.0, max_abs(z0)));
    }

    const Trajectory lt = extract_latent_trajectory(cube, vec({1, 2, 3, -1, -2, -3, 0.5, 0}), cfg.T, cfg);
    check_trajectory_shape(lt, 0.0, cfg.T);
}

TEST_CASE("coordinate decoupling under inpainting") {
    const double R = 3.0, sigma = 0.1, T = 10.0;
    const int d = 5;
    const ModelSpec model = ModelSpec::hypercube(R, d);
    const std::vector<int> measured{1, 3};
    const Measurement meas(Inpainting{measured}, d, vec({R, -R}), sigma);
    const double rho = 1.0 / (sigma * sigma);
    GuidanceConfig cfg;
    cfg.steps = 512;
    const VelocityField full = [&](const State& x, double t) {
        return State(uncond_reverse_velocity(model, x, t, T) + dps_guidance_velocity(model, meas, rho, x, t, T));
    };
    const State z = vec({0.3, -1.2, 0.8, 2.0, -0.4});
    const Trajectory tr = integrate_ode(full, z, 0.0, T, cfg);

    const ModelSpec one = ModelSpec::hypercube(R, 1);
    for (int i = 0; i < d; ++i) {
        const auto it = std::find(measured.begin(), measured.end(), i);
        VelocityField f1;
        if (it == measured.end()) {
            f1 = [&](const State& x, double t) { return uncond_reverse_velocity(one, x, t, T); };
        } else {
            const double yi = meas.y()[it - measured.begin()];
            const Measurement m1(Inpainting{{0}}, 1, Eigen::VectorXd::Constant(1, yi), sigma);
            f1 = [&, m1](const State& x, double t) {
                return State(uncond_reverse_velocity(one, x, t, T) + dps_guidance_velocity(one, m1, rho, x, t, T));
            };
        }
        const Trajectory t1 = integrate_on_grid(f1, vec({z[i]}), tr.times);
        CHECK(std::abs(t1.back()[0] - tr.back()[i]) <= 1e-9);
    }
}
