#include <doctest.h>

#include <atomic>
#include <cstring>

#include "reglab/parallel.hpp"
#include "reglab/reguidance.hpp"

using namespace reglab;

namespace {

State trial(std::size_t i) {
    const ModelSpec model = ModelSpec::hypercube(3.0, 4);
    RngStream rng(derive_seed(11, i));
    const State x = sample_prior(model, rng);
    const Measurement meas(Inpainting{{0, 2}}, 4, (Eigen::VectorXd(2) << 3.0, -3.0).finished(), 0.1);
    GuidanceConfig cfg;
    cfg.steps = 256;
    return run_reguidance(model, meas, x, cfg, false).output;
}

}  // namespace

TEST_CASE("parallel trials match the serial reference bit for bit") {
    const auto serial = map_trials_serial(12, trial);
    for (int workers : {0, 1, 2, 4}) {
        const auto par = map_trials(12, trial, workers);
        REQUIRE(par.size() == serial.size());
        for (std::size_t i = 0; i < par.size(); ++i) {
            REQUIRE(par[i].size() == serial[i].size());
            CHECK(std::memcmp(par[i].data(), serial[i].data(), sizeof(double) * par[i].size()) == 0);
        }
    }
}

TEST_CASE("lowest failing trial is reported") {
    std::atomic<int> calls{0};
    const auto fn = [&](std::size_t i) {
        ++calls;
        if (i == 5 || i == 9) throw Error("boom " + std::to_string(i));
        return static_cast<double>(i);
    };
    for (int workers : {1, 3}) {
        try {
            map_trials(16, fn, workers);
            FAIL("expected a trial error");
        } catch (const TrialError& e) {
            CHECK(e.trial() == 5);
            CHECK(std::string(e.what()).find("boom 5") != std::string::npos);
        }
    }
    CHECK(resolve_workers(3) == 3);
    CHECK(resolve_workers(0) >= 1);
    CHECK(map_trials(0, fn, 2).empty());
}
