#include <doctest.h>

#include <cmath>
#include <numbers>

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

// Full normalized log density of an equal-weight identity-covariance mixture,
// summed by brute force over every component.
double mixture_log_density(const std::vector<State>& means, const State& x) {
    const double d = static_cast<double>(x.size());
    double acc = 0.0;
    for (const State& m : means) acc += std::exp(-0.5 * (x - m).squaredNorm());
    return std::log(acc / static_cast<double>(means.size())) - 0.5 * d * std::log(2.0 * std::numbers::pi);
}

std::vector<State> scaled(const std::vector<State>& modes, double tau) {
    std::vector<State> out;
    for (const State& m : modes) out.push_back(std::exp(-tau) * m);
    return out;
}

}  // namespace

TEST_CASE("model construction validates parameters") {
    CHECK_THROWS_AS(ModelSpec::hypercube(0.0, 2), Error);
    CHECK_THROWS_AS(ModelSpec::hypercube(1.0, 0), Error);
    CHECK_THROWS_AS(ModelSpec::bimodal(-1.0, 2), Error);
    CHECK(ModelSpec::iso(3).d == 3);
}

TEST_CASE("iso log density peaks at the origin") {
    const ModelSpec m = ModelSpec::iso(2);
    const double peak = log_density(m, State::Zero(2), 0.7);
    CHECK(log_density(m, vec({0.1, 0.0}), 0.7) < peak);
    CHECK(score(m, State::Zero(2), 0.7).norm() == 0.0);
}

TEST_CASE("hypercube log density is sign symmetric") {
    const ModelSpec m = ModelSpec::hypercube(2.0, 2);
    const State x = vec({0.3, -1.7});
    CHECK(std::abs(log_density(m, x, 0.4) - log_density(m, -x, 0.4)) <= 1e-14);
}

TEST_CASE("hypercube R=1 d=1 matches two-component mixture") {
    const ModelSpec m = ModelSpec::hypercube(1.0, 1);
    const State x = vec({0.5});
    const double brute = mixture_log_density({vec({1.0}), vec({-1.0})}, x);
    const double ours = log_density(m, x, 0.0) + log_density_constant(m, 0.0);
    CHECK(std::abs(brute - ours) <= 1e-12);
}

TEST_CASE("log density constants agree with brute-force enumeration") {
    RngStream rng(11);
    for (int d = 1; d <= 6; ++d) {
        const ModelSpec hc = ModelSpec::hypercube(1.5, d);
        const ModelSpec bi = ModelSpec::bimodal(2.5, std::max(d, 2));
        const ModelSpec iso = ModelSpec::iso(d);
        for (int rep = 0; rep < 5; ++rep) {
            const double tau = rng.uniform(0.0, 2.0);
            for (const ModelSpec& m : {hc, bi, iso}) {
                const State x = 2.0 * rng.normal_vector(m.d);
                const std::vector<State> means =
                    m.kind == ModelKind::IsoGaussian ? std::vector<State>{State::Zero(m.d)} : all_modes(m);
                const double brute = mixture_log_density(scaled(means, tau), x);
                const double ours = log_density(m, x, tau) + log_density_constant(m, tau);
                CHECK(std::abs(brute - ours) <= 1e-10 * std::max(1.0, std::abs(brute)));
            }
        }
    }
}

TEST_CASE("hypercube log density factorizes over coordinates") {
    RngStream rng(5);
    const ModelSpec m = ModelSpec::hypercube(2.0, 5);
    const ModelSpec one = ModelSpec::hypercube(2.0, 1);
    const State x = rng.normal_vector(5) * 2.0;
    double sum = 0.0;
    for (int i = 0; i < 5; ++i) sum += log_density(one, x.segment(i, 1), 0.3) + log_density_constant(one, 0.3);
    CHECK(std::abs(sum - (log_density(m, x, 0.3) + log_density_constant(m, 0.3))) <= 1e-12);
}

TEST_CASE("score closed forms") {
    CHECK(score(ModelSpec::hypercube(3.0, 4), State::Zero(4), 0.2).norm() == 0.0);
    const State s = score(ModelSpec::iso(2), vec({1.0, -2.0}), 1.3);
    CHECK(s[0] == -1.0);
    CHECK(s[1] == 2.0);

    const ModelSpec m = ModelSpec::hypercube(1.0, 1);
    const double x = 0.5, h = 1e-5 * 1.5;
    const double fd = (log_density(m, vec({x + h}), 0.0) - log_density(m, vec({x - h}), 0.0)) / (2 * h);
    CHECK(std::abs(fd - score(m, vec({x}), 0.0)[0]) <= 1e-6 * std::abs(fd));
}

TEST_CASE("score is odd for symmetric mixtures") {
    RngStream rng(3);
    for (const ModelSpec& m : {ModelSpec::hypercube(2.0, 3), ModelSpec::bimodal(4.0, 3)}) {
        const State x = rng.normal_vector(3) * 3.0;
        CHECK((score(m, -x, 0.6) + score(m, x, 0.6)).cwiseAbs().maxCoeff() <= 1e-15);
    }
}

TEST_CASE("bimodal score moves only the first coordinate beyond -x") {
    const ModelSpec m = ModelSpec::bimodal(5.0, 3);
    const State x = vec({0.4, -1.0, 2.0});
    const State drift = x + score(m, x, 0.5);
    CHECK(drift[1] == 0.0);
    CHECK(drift[2] == 0.0);
    const double a = 5.0 * std::exp(-0.5);
    CHECK(drift[0] == doctest::Approx(a * std::tanh(a * 0.4)).epsilon(1e-14));
}

TEST_CASE("denoiser examples") {
    RngStream rng(1);
    for (const ModelSpec& m : {ModelSpec::iso(3), ModelSpec::hypercube(2.0, 3), ModelSpec::bimodal(2.0, 3)}) {
        const State x = rng.normal_vector(3);
        CHECK((denoiser(m, x, 0.0) - x).cwiseAbs().maxCoeff() == 0.0);
        const Eigen::VectorXd J = denoiser_jacobian(m, x, 0.0).diagonal();
        CHECK((J - Eigen::VectorXd::Ones(3)).cwiseAbs().maxCoeff() <= 1e-15);
    }
    const State far = denoiser(ModelSpec::hypercube(3.0, 2), vec({4.0, -2.0}), 50.0);
    CHECK(far.cwiseAbs().maxCoeff() <= 1e-15 * 10.0);

    const double expected = 0.5 + 0.75 * std::tanh(0.5);
    CHECK(denoiser(ModelSpec::hypercube(1.0, 1), vec({1.0}), std::log(2.0))[0] ==
          doctest::Approx(expected).epsilon(1e-14));
    CHECK(expected == doctest::Approx(0.84657).epsilon(1e-5));
}

TEST_CASE("Tweedie identity holds for every model") {
    RngStream rng(8);
    for (const ModelSpec& m : {ModelSpec::iso(4), ModelSpec::hypercube(2.5, 4), ModelSpec::bimodal(3.0, 4)}) {
        for (int k = 0; k < 50; ++k) {
            const State x = rng.normal_vector(4) * 3.0;
            const double tau = rng.uniform(0.0, 3.0);
            const State tw = std::exp(tau) * x + (std::exp(tau) - std::exp(-tau)) * score(m, x, tau);
            CHECK((denoiser(m, x, tau) - tw).cwiseAbs().maxCoeff() <= 1e-10);
        }
    }
}

TEST_CASE("denoiser Jacobian examples and finite differences") {
    const Eigen::VectorXd iso = denoiser_jacobian(ModelSpec::iso(2), vec({0.3, 2.0}), 1.0).diagonal();
    CHECK(iso[0] == doctest::Approx(std::exp(-1.0)).epsilon(1e-15));
    CHECK(iso[1] == doctest::Approx(std::exp(-1.0)).epsilon(1e-15));

    const ModelSpec one = ModelSpec::hypercube(1.0, 1);
    const double J = denoiser_jacobian(one, vec({0.0}), std::log(2.0)).diagonal()[0];
    CHECK(J == doctest::Approx(0.875).epsilon(1e-14));
    const double h = 1e-5;
    const double fd =
        (denoiser(one, vec({h}), std::log(2.0))[0] - denoiser(one, vec({-h}), std::log(2.0))[0]) / (2 * h);
    CHECK(std::abs(fd - J) <= 1e-6 * J);

    const ModelSpec bi = ModelSpec::bimodal(3.0, 2);
    const Eigen::VectorXd jb = denoiser_jacobian(bi, vec({0.2, 0.2}), 0.5).diagonal();
    CHECK(jb[1] == doctest::Approx(std::exp(-0.5)).epsilon(1e-15));
    CHECK(jb[0] > jb[1]);
}

TEST_CASE("saturation keeps extreme arguments finite") {
    const ModelSpec m = ModelSpec::hypercube(50.0, 2);
    const State x = vec({1e3, -1e3});
    CHECK(score(m, x, 0.0).allFinite());
    CHECK(denoiser(m, x, 0.0).allFinite());
    CHECK(denoiser_jacobian(m, x, 0.0).diagonal().allFinite());
    CHECK(std::isfinite(log_density(m, x, 0.0)));
    CHECK(saturating_tanh(31.0) == 1.0);
    CHECK(saturating_tanh(-31.0) == -1.0);
    CHECK(saturating_sech2(31.0) == 0.0);
    CHECK(log_cosh(800.0) == doctest::Approx(800.0 - std::log(2.0)).epsilon(1e-15));
}

TEST_CASE("prior sampling statistics") {
    RngStream rng(2024);
    const ModelSpec hc = ModelSpec::hypercube(5.0, 2);
    Eigen::Vector2d mean = Eigen::Vector2d::Zero();
    for (int i = 0; i < 10000; ++i) mean += sample_prior(hc, rng);
    mean /= 10000.0;
    CHECK(std::abs(mean[0]) <= 0.2);
    CHECK(std::abs(mean[1]) <= 0.2);

    const ModelSpec bi = ModelSpec::bimodal(5.0, 2);
    double s = 0.0, s2 = 0.0;
    for (int i = 0; i < 10000; ++i) {
        const double v = sample_prior(bi, rng)[1];
        s += v;
        s2 += v * v;
    }
    const double var = s2 / 10000.0 - (s / 10000.0) * (s / 10000.0);
    CHECK(std::abs(var - 1.0) <= 0.05);

    RngStream a(9), b(9);
    CHECK(sample_prior(hc, a) == sample_prior(hc, b));
}

TEST_CASE("consistent modes enumeration") {
    const ModelSpec m3 = ModelSpec::hypercube(2.0, 3);
    const Measurement first(Inpainting{{0}}, 3, Eigen::VectorXd::Constant(1, 2.0), 0.1);
    CHECK(consistent_modes(m3, first).size() == 4);

    const State mode = vec({2.0, -2.0, 2.0});
    const Measurement full = make_measurement(Inpainting{{0, 1, 2}}, m3, mode, 0.1);
    const auto one = consistent_modes(m3, full);
    REQUIRE(one.size() == 1);
    CHECK(one[0] == mode);

    const ModelSpec m2 = ModelSpec::hypercube(1.5, 2);
    const Measurement neg(Inpainting{{0}}, 2, Eigen::VectorXd::Constant(1, -1.5), 0.1);
    auto modes = consistent_modes(m2, neg);
    REQUIRE(modes.size() == 2);
    std::sort(modes.begin(), modes.end(), [](const State& a, const State& b) { return a[1] > b[1]; });
    CHECK(modes[0] == vec({-1.5, 1.5}));
    CHECK(modes[1] == vec({-1.5, -1.5}));

    const Measurement off(Inpainting{{0}}, 2, Eigen::VectorXd::Constant(1, 0.3), 0.1);
    CHECK_THROWS_AS(consistent_modes(m2, off), Error);
}

TEST_CASE("consistent modes agree with a brute-force scan") {
    RngStream rng(77);
    for (int d = 1; d <= 6; ++d) {
        const ModelSpec m = ModelSpec::hypercube(1.0, d);
        for (int trial = 0; trial < 3; ++trial) {
            std::vector<int> idx;
            for (int i = 0; i < d; ++i)
                if (rng.coin()) idx.push_back(i);
            if (idx.empty()) idx.push_back(0);
            const State src = all_modes(m)[static_cast<std::size_t>(rng.uniform() * std::pow(2.0, d))];
            const Measurement meas = make_measurement(Inpainting{idx}, m, src, 0.1);
            std::vector<State> brute;
            for (const State& z : all_modes(m))
                if ((meas.A() * z - meas.y()).cwiseAbs().maxCoeff() <= 1e-9) brute.push_back(z);
            auto fast = consistent_modes(m, meas);
            const auto lex = [](const State& a, const State& b) {
                return std::lexicographical_compare(a.data(), a.data() + a.size(), b.data(), b.data() + b.size());
            };
            std::sort(fast.begin(), fast.end(), lex);
            std::sort(brute.begin(), brute.end(), lex);
            CHECK(fast == brute);
            CHECK(fast.size() == static_cast<std::size_t>(1) << (d - static_cast<int>(idx.size())));
        }
    }
}

TEST_CASE("enumeration guard and nearest mode distance") {
    CHECK_THROWS_AS(all_modes(ModelSpec::hypercube(1.0, kMaxEnumerationDim + 1)), Error);
    const ModelSpec m = ModelSpec::hypercube(2.0, 3);
    const Measurement meas(Inpainting{{0}}, 3, Eigen::VectorXd::Constant(1, 2.0), 0.1);
    CHECK(nearest_mode_distance(m, meas, vec({2.0, 2.0, -2.0})) == 0.0);
    CHECK(nearest_mode_distance(m, meas, vec({2.0, 1.5, -2.0})) == doctest::Approx(0.5));
    CHECK(nearest_mode_distance(m, meas, vec({-2.0, 2.0, 2.0})) == doctest::Approx(4.0));
    CHECK(std::isnan(nearest_mode_distance(ModelSpec::iso(3), meas, State::Zero(3))));
}
