#include "reglab/cli.hpp"

#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>

#include <CLI11.hpp>

#include "reglab/parallel.hpp"
#include "reglab/reguidance.hpp"
#include "reglab/report.hpp"

namespace reglab {

namespace fs = std::filesystem;

namespace {

std::string report_name(const ExperimentConfig& cfg) {
    return cfg.run.command == Command::Verify ? to_string(cfg.run.experiment) : to_string(cfg.run.command);
}

std::string file_safe(std::string s) {
    for (char& c : s)
        if (!(std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '_' || c == '.')) c = '_';
    return s;
}

VerifyReport single_reguidance(const ExperimentConfig& cfg) {
    const auto start = std::chrono::steady_clock::now();
    const ModelSpec& model = cfg.model;
    RngStream rng(derive_seed(cfg.run.seed, 0));
    State x = cfg.experiment.input.empty()
                  ? sample_prior(model, rng)
                  : State(Eigen::Map<const Eigen::VectorXd>(cfg.experiment.input.data(), model.d));
    State source = State::Zero(model.d);
    if (cfg.measurement.y.empty() && model.kind != ModelKind::IsoGaussian) {
        const auto modes = all_modes(model);
        const auto k = static_cast<std::size_t>(rng.uniform() * static_cast<double>(modes.size()));
        source = modes[std::min(k, modes.size() - 1)];
    } else if (cfg.measurement.y.empty()) {
        source = sample_prior(model, rng);
    }
    const Measurement meas = build_measurement(cfg, source);
    GuidanceConfig g = cfg.guidance;
    g.seed = derive_seed(cfg.run.seed, 1);
    ReguidanceResult r = run_reguidance(model, meas, x, g, true);

    VerifyReport rep;
    rep.experiment = "reguidance";
    rep.param("seed", std::to_string(cfg.run.seed));
    rep.param("model", to_string(model.kind));
    rep.param("R", model.R);
    rep.param("d", std::to_string(model.d));
    rep.param("sigma", meas.sigma());
    rep.param("sampler", to_string(g.sampler));
    rep.param("guidance", to_string(g.guidance));
    rep.table.columns = {"trial", "sigma", "reward", "distance_to_projection", "nearest_mode_distance"};
    for (int i = 0; i < model.d; ++i) rep.table.columns.push_back("input_" + std::to_string(i));
    for (int i = 0; i < model.d; ++i) rep.table.columns.push_back("latent_" + std::to_string(i));
    for (int i = 0; i < model.d; ++i) rep.table.columns.push_back("out_" + std::to_string(i));
    rep.table.columns.push_back("runtime_s");
    std::vector<double> row{0.0, meas.sigma(), r.final_reward, r.final_distance_to_projection, r.nearest_mode_distance};
    for (int i = 0; i < model.d; ++i) row.push_back(x[i]);
    for (int i = 0; i < model.d; ++i) row.push_back(r.latent[i]);
    for (int i = 0; i < model.d; ++i) row.push_back(r.output[i]);
    const double elapsed = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    row.push_back(elapsed);
    rep.table.rows.push_back(std::move(row));
    rep.metric("initial_reward", residual_and_reward(meas, x).reward);
    rep.metric("final_reward", r.final_reward);
    rep.metric("distance_to_projection", r.final_distance_to_projection);
    rep.metric("nearest_mode_distance", r.nearest_mode_distance);
    if (cfg.run.dump_trajectories) {
        rep.trajectories.push_back({"latent", std::move(r.latent_trajectory)});
        rep.trajectories.push_back({"guided", std::move(r.guided_trajectory)});
    }
    rep.runtime_seconds = elapsed;
    return rep;
}

}  // namespace

VerifyReport execute(const ExperimentConfig& cfg) {
    switch (cfg.run.command) {
        case Command::ScoreCheck: return verify_analytic_consistency(consistency_preset(cfg));
        case Command::Roundtrip: return verify_roundtrip(roundtrip_preset(cfg));
        case Command::Reguidance: return single_reguidance(cfg);
        case Command::Verify: break;
    }
    switch (cfg.run.experiment) {
        case Experiment::Projection: return verify_projection(projection_preset(cfg));
        case Experiment::SdeFailure: return verify_sde_failure(sde_failure_preset(cfg));
        case Experiment::Contraction: return verify_contraction(contraction_preset(cfg));
        case Experiment::DpsBias: return verify_dps_bias(dps_bias_preset(cfg));
        case Experiment::Roundtrip: return verify_roundtrip(roundtrip_preset(cfg));
        case Experiment::LatentGeometry: return latent_geometry_sweep(latent_geometry_preset(cfg));
        case Experiment::Decoupling: return verify_decoupling(decoupling_preset(cfg));
        case Experiment::None: break;
    }
    throw ConfigError("config: run.command names no experiment");
}

std::string write_outputs(const ExperimentConfig& cfg, const VerifyReport& rep) {
    const fs::path dir(cfg.run.out);
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw Error("cannot create output directory " + dir.string() + ": " + ec.message());

    WriteOptions opts;
    opts.timing = cfg.run.timing;
    const bool json = cfg.run.format == "json";
    const fs::path path = dir / (report_name(cfg) + (json ? ".json" : ".csv"));
    const auto write = [](const fs::path& p, const std::string& body) {
        std::ofstream f(p, std::ios::binary);
        if (!f) throw Error("cannot write " + p.string());
        f << body;
        if (!f) throw Error("write failed: " + p.string());
    };
    write(path, json ? report_json(rep, opts) : report_csv(rep, opts));
    if (cfg.run.dump_trajectories) {
        for (const auto& t : rep.trajectories)
            write(dir / (report_name(cfg) + "_traj_" + file_safe(t.name) + ".csv"), trajectory_csv(t.trajectory));
    }
    return path.string();
}

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"reguidance experiments on analytic diffusion models", "reglab"};
    app.set_version_flag("--version", "reglab 1.0");
    std::string config_path;
    std::optional<std::uint64_t> seed;
    std::optional<int> workers;
    std::string out_dir;
    std::string format;
    bool dump = false;
    bool no_timing = false;
    app.add_option("--config", config_path, "Experiment config file")->check(CLI::ExistingFile);
    app.add_option("--seed", seed, "Base seed (overrides run.seed)");
    app.add_option("--workers", workers, "Worker threads (fallback: REGLAB_WORKERS)")->check(CLI::NonNegativeNumber);
    app.add_option("--out", out_dir, "Output directory (overrides run.out)");
    app.add_option("--format", format, "Report format")->check(CLI::IsMember({"csv", "json"}));
    app.add_flag("--dump-trajectories", dump, "Write trajectory CSV files");
    app.add_flag("--no-timing", no_timing, "Write runtimes as 0 for byte-identical reruns");

    auto* score_check = app.add_subcommand("score-check", "Analytic score, Tweedie and Jacobian consistency");
    auto* roundtrip = app.add_subcommand("roundtrip", "Latent extraction and forward flow roundtrip");
    auto* reguidance = app.add_subcommand("reguidance", "Single ReGuidance run");
    auto* verify = app.add_subcommand("verify", "Run a verification experiment");
    std::string experiment;
    verify->add_option("experiment", experiment, "projection | sde-failure | contraction | dps-bias | roundtrip | "
                                                 "latent-geometry | decoupling")
        ->required();
    app.require_subcommand(0, 1);
    for (auto* sub : {score_check, roundtrip, reguidance, verify}) sub->fallthrough();

    std::vector<std::string> rev(args.rbegin(), args.rend());
    try {
        app.parse(rev);
    } catch (const CLI::Success& e) {
        return app.exit(e, out, err);
    } catch (const CLI::ParseError& e) {
        err << "error: " << e.what() << "\n\n" << app.help();
        return kExitUsage;
    }

    ExperimentConfig cfg;
    try {
        if (!config_path.empty()) cfg = load_config(config_path);
        if (*score_check) cfg.run.command = Command::ScoreCheck;
        else if (*roundtrip) cfg.run.command = Command::Roundtrip;
        else if (*reguidance) cfg.run.command = Command::Reguidance;
        else if (*verify) {
            cfg.run.command = Command::Verify;
            cfg.run.experiment = parse_experiment(experiment);
            if (cfg.run.experiment == Experiment::None) throw ConfigError("unknown experiment '" + experiment + "'");
        } else if (config_path.empty()) {
            throw ConfigError("no command given");
        }
        if (cfg.run.command == Command::Verify && cfg.run.experiment == Experiment::None)
            throw ConfigError("verify needs an experiment name");
        if (seed) cfg.run.seed = *seed;
        if (workers) cfg.run.workers = *workers;
        else if (cfg.run.workers == 0) {
            if (const char* env = std::getenv("REGLAB_WORKERS")) {
                try {
                    cfg.run.workers = std::max(0, std::stoi(env));
                } catch (const std::exception&) {
                    throw ConfigError(std::string("REGLAB_WORKERS is not an integer: ") + env);
                }
            }
        }
        if (!out_dir.empty()) cfg.run.out = out_dir;
        if (!format.empty()) cfg.run.format = format;
        if (dump) cfg.run.dump_trajectories = true;
        if (no_timing) cfg.run.timing = false;
    } catch (const ConfigError& e) {
        err << "error: " << e.what() << "\n\n" << app.help();
        return kExitUsage;
    }

    VerifyReport rep;
    try {
        rep = execute(cfg);
    } catch (const ConfigError& e) {
        err << "error: " << e.what() << '\n';
        return kExitUsage;
    } catch (const TrialError& e) {
        err << "error: " << e.what() << " (replay: seed " << cfg.run.seed << ", trial " << e.trial()
            << ", trial seed " << derive_seed(cfg.run.seed, e.trial()) << ")\n";
        return kExitRuntime;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << " (seed " << cfg.run.seed << ")\n";
        return kExitRuntime;
    }

    std::string path;
    try {
        path = write_outputs(cfg, rep);
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return kExitRuntime;
    }

    std::size_t passed = 0;
    for (const auto& v : rep.verdicts) passed += v.pass ? 1 : 0;
    out << rep.experiment << ": " << (rep.all_pass() ? "pass" : "FAIL") << " (" << passed << "/" << rep.verdicts.size()
        << " verdicts) -> " << path << '\n';
    if (!rep.all_pass()) {
        err << failure_summary_json(rep) << '\n';
        return kExitVerdictFailed;
    }
    return kExitPass;
}

}  // namespace reglab
