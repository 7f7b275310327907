#include "reglab/config.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

namespace reglab {

namespace pt = boost::property_tree;

namespace {

const std::map<std::string, std::set<std::string>>& known_keys() {
    static const std::map<std::string, std::set<std::string>> keys{
        {"run", {"command", "trials", "seed", "workers", "out", "format", "dump_trajectories", "timing"}},
        {"model", {"kind", "R", "d"}},
        {"measurement", {"kind", "indices", "v", "A", "y", "sigma", "noise"}},
        {"guidance", {"rho", "T", "sampler", "guidance", "steps", "sde_steps", "rel_tol", "min_step"}},
        {"experiment",
         {"sigmas", "grids", "stds", "input", "offset_min", "offset_max", "window_loglog_factor", "ode_tolerance",
          "max_error", "tau_max", "cases", "modes", "perturb_trials", "check_double_T"}},
    };
    return keys;
}

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

[[noreturn]] void fail(const std::string& key, const std::string& what) {
    throw ConfigError("config: " + key + ": " + what);
}

void require(bool ok, const std::string& constraint) {
    if (!ok) throw ConfigError("config: constraint violated: " + constraint);
}

double to_double(const std::string& key, const std::string& text) {
    const std::string t = trim(text);
    if (t == "inf" || t == "+inf") return std::numeric_limits<double>::infinity();
    double x = 0.0;
    const auto [p, ec] = std::from_chars(t.data(), t.data() + t.size(), x);
    if (ec != std::errc() || p != t.data() + t.size() || t.empty()) fail(key, "expected a number, got '" + t + "'");
    return x;
}

template <class Int>
Int to_integer(const std::string& key, const std::string& text) {
    const std::string t = trim(text);
    Int x = 0;
    const auto [p, ec] = std::from_chars(t.data(), t.data() + t.size(), x);
    if (ec != std::errc() || p != t.data() + t.size() || t.empty()) fail(key, "expected an integer, got '" + t + "'");
    return x;
}

bool to_bool(const std::string& key, const std::string& text) {
    const std::string t = trim(text);
    if (t == "true" || t == "1" || t == "yes" || t == "on") return true;
    if (t == "false" || t == "0" || t == "no" || t == "off") return false;
    fail(key, "expected true or false, got '" + t + "'");
}

std::vector<std::string> split_list(const std::string& text) {
    std::string t = text;
    std::replace(t.begin(), t.end(), ',', ' ');
    std::istringstream in(t);
    std::vector<std::string> out;
    for (std::string tok; in >> tok;) out.push_back(tok);
    return out;
}

std::vector<double> to_doubles(const std::string& key, const std::string& text) {
    std::vector<double> out;
    for (const auto& tok : split_list(text)) out.push_back(to_double(key, tok));
    return out;
}

std::vector<int> to_ints(const std::string& key, const std::string& text) {
    std::vector<int> out;
    for (const auto& tok : split_list(text)) out.push_back(to_integer<int>(key, tok));
    return out;
}

std::vector<std::vector<double>> to_matrix(const std::string& key, const std::string& text) {
    std::vector<std::vector<double>> rows;
    std::istringstream in(text);
    for (std::string row; std::getline(in, row, '|');) rows.push_back(to_doubles(key, row));
    return rows;
}

std::string fmt(double x) {
    if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return buf;
}

template <class T>
std::string join(const std::vector<T>& xs, int offset = 0) {
    std::string out;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        if (i) out += ", ";
        if constexpr (std::is_floating_point_v<T>) out += fmt(xs[i]);
        else out += std::to_string(xs[i] + offset);
    }
    return out;
}

void parse_command(RunBlock& run, const std::string& text) {
    const auto parts = split_list(text);
    if (parts.empty()) fail("run.command", "empty command");
    const std::string& c = parts[0];
    if (c == "score-check") run.command = Command::ScoreCheck;
    else if (c == "roundtrip") run.command = Command::Roundtrip;
    else if (c == "reguidance") run.command = Command::Reguidance;
    else if (c == "verify") run.command = Command::Verify;
    else fail("run.command", "unknown command '" + c + "'");
    if (run.command == Command::Verify) {
        if (parts.size() != 2) fail("run.command", "expected 'verify <experiment>'");
        run.experiment = parse_experiment(parts[1]);
        if (run.experiment == Experiment::None) fail("run.command", "unknown experiment '" + parts[1] + "'");
    } else {
        if (parts.size() != 1) fail("run.command", "unexpected argument after " + c);
        run.experiment = Experiment::None;
    }
}

void validate(const ExperimentConfig& cfg) {
    const auto& r = cfg.run;
    if (r.trials) require(*r.trials >= 1, "run.trials >= 1");
    require(r.workers >= 0, "run.workers >= 0");
    require(r.format == "csv" || r.format == "json", "run.format in {csv, json}");

    require(cfg.model.R > 0.0 && std::isfinite(cfg.model.R), "model.R > 0");
    require(cfg.model.d >= 1, "model.d >= 1");
    const int d = cfg.model.d;

    const auto& m = cfg.measurement;
    require(m.kind == "inpainting" || m.kind == "single-vector" || m.kind == "general",
            "measurement.kind in {inpainting, single-vector, general}");
    require(m.sigma > 0.0 && std::isfinite(m.sigma), "measurement.sigma > 0");
    if (m.noise) require(*m.noise >= 0.0, "measurement.noise >= 0");
    std::set<int> seen;
    for (int i : m.indices) {
        require(i >= 0 && i < d, "measurement.indices in 1..model.d");
        require(seen.insert(i).second, "measurement.indices distinct");
    }
    if (!m.v.empty()) require(static_cast<int>(m.v.size()) == d, "measurement.v has model.d entries");
    for (const auto& row : m.A) require(static_cast<int>(row.size()) == d, "measurement.A rows have model.d entries");
    if (m.kind == "single-vector") require(!m.v.empty(), "measurement.v given for single-vector");
    if (m.kind == "general") require(!m.A.empty(), "measurement.A given for general");

    const auto& g = cfg.guidance;
    if (g.rho) require(*g.rho >= 0.0, "guidance.rho >= 0");
    require(g.T > 0.0 && std::isfinite(g.T), "guidance.T > 0");
    require(g.steps >= 1, "guidance.steps >= 1");
    require(g.sde_steps >= 1, "guidance.sde_steps >= 1");
    require(g.rel_tol > 0.0, "guidance.rel_tol > 0");
    require(g.min_step > 0.0, "guidance.min_step > 0");
    if (g.guidance == GuidanceKind::MDPS) {
        require(cfg.model.kind == ModelKind::Bimodal, "guidance.guidance = mdps requires model.kind = bimodal");
        require(m.kind == "single-vector", "guidance.guidance = mdps requires measurement.kind = single-vector");
        require(g.sampler == Sampler::ODE, "guidance.guidance = mdps requires guidance.sampler = ode");
    }

    const auto& e = cfg.experiment;
    for (double s : e.sigmas) require(s > 0.0, "experiment.sigmas > 0");
    for (int n : e.grids) require(n >= 1, "experiment.grids >= 1");
    for (double s : e.stds) require(s >= 0.0, "experiment.stds >= 0");
    if (!e.input.empty()) require(static_cast<int>(e.input.size()) == d, "experiment.input has model.d entries");
    require(e.offset_min >= 0.0 && e.offset_max >= e.offset_min, "0 <= experiment.offset_min <= experiment.offset_max");
    require(e.window_loglog_factor >= 0.0, "experiment.window_loglog_factor >= 0");
    require(e.ode_tolerance > 0.0, "experiment.ode_tolerance > 0");
    require(e.max_error > 0.0, "experiment.max_error > 0");
    require(e.tau_max >= 0.0, "experiment.tau_max >= 0");
    require(e.cases >= 1, "experiment.cases >= 1");
    require(e.modes >= 2, "experiment.modes >= 2");
    require(e.perturb_trials >= 1, "experiment.perturb_trials >= 1");
}

void apply(ExperimentConfig& cfg, const std::string& section, const std::string& key, const std::string& raw) {
    const std::string path = section + "." + key;
    const std::string value = trim(raw);
    auto& run = cfg.run;
    auto& meas = cfg.measurement;
    auto& g = cfg.guidance;
    auto& e = cfg.experiment;
    if (section == "run") {
        if (key == "command") parse_command(run, value);
        else if (key == "trials") run.trials = to_integer<int>(path, value);
        else if (key == "seed") run.seed = to_integer<std::uint64_t>(path, value);
        else if (key == "workers") run.workers = to_integer<int>(path, value);
        else if (key == "out") run.out = value;
        else if (key == "format") run.format = value;
        else if (key == "dump_trajectories") run.dump_trajectories = to_bool(path, value);
        else if (key == "timing") run.timing = to_bool(path, value);
    } else if (section == "model") {
        if (key == "kind") {
            if (value == "iso") cfg.model.kind = ModelKind::IsoGaussian;
            else if (value == "hypercube") cfg.model.kind = ModelKind::HypercubeMixture;
            else if (value == "bimodal") cfg.model.kind = ModelKind::Bimodal;
            else fail(path, "expected iso, hypercube or bimodal");
        } else if (key == "R") cfg.model.R = to_double(path, value);
        else if (key == "d") cfg.model.d = to_integer<int>(path, value);
    } else if (section == "measurement") {
        if (key == "kind") meas.kind = value;
        else if (key == "indices") {
            meas.indices = to_ints(path, value);
            for (int& i : meas.indices) --i;
        } else if (key == "v") meas.v = to_doubles(path, value);
        else if (key == "A") meas.A = to_matrix(path, value);
        else if (key == "y") meas.y = to_doubles(path, value);
        else if (key == "sigma") meas.sigma = to_double(path, value);
        else if (key == "noise") meas.noise = to_double(path, value);
    } else if (section == "guidance") {
        if (key == "rho") g.rho = to_double(path, value);
        else if (key == "T") g.T = to_double(path, value);
        else if (key == "sampler") {
            if (value == "ode") g.sampler = Sampler::ODE;
            else if (value == "sde") g.sampler = Sampler::SDE;
            else fail(path, "expected ode or sde");
        } else if (key == "guidance") {
            if (value == "none") g.guidance = GuidanceKind::None;
            else if (value == "dps") g.guidance = GuidanceKind::DPS;
            else if (value == "mdps") g.guidance = GuidanceKind::MDPS;
            else fail(path, "expected none, dps or mdps");
        } else if (key == "steps") g.steps = to_integer<int>(path, value);
        else if (key == "sde_steps") g.sde_steps = to_integer<int>(path, value);
        else if (key == "rel_tol") g.rel_tol = to_double(path, value);
        else if (key == "min_step") g.min_step = to_double(path, value);
    } else if (section == "experiment") {
        if (key == "sigmas") e.sigmas = to_doubles(path, value);
        else if (key == "grids") e.grids = to_ints(path, value);
        else if (key == "stds") e.stds = to_doubles(path, value);
        else if (key == "input") e.input = to_doubles(path, value);
        else if (key == "offset_min") e.offset_min = to_double(path, value);
        else if (key == "offset_max") e.offset_max = to_double(path, value);
        else if (key == "window_loglog_factor") e.window_loglog_factor = to_double(path, value);
        else if (key == "ode_tolerance") e.ode_tolerance = to_double(path, value);
        else if (key == "max_error") e.max_error = to_double(path, value);
        else if (key == "tau_max") e.tau_max = to_double(path, value);
        else if (key == "cases") e.cases = to_integer<int>(path, value);
        else if (key == "modes") e.modes = to_integer<int>(path, value);
        else if (key == "perturb_trials") e.perturb_trials = to_integer<int>(path, value);
        else if (key == "check_double_T") e.check_double_T = to_bool(path, value);
    }
}

GuidanceConfig guidance_of(const ExperimentConfig& cfg) {
    GuidanceConfig g = cfg.guidance;
    g.seed = cfg.run.seed;
    return g;
}

TrialControl control_of(const ExperimentConfig& cfg) {
    TrialControl c;
    c.seed = cfg.run.seed;
    c.workers = cfg.run.workers;
    c.keep_trajectories = cfg.run.dump_trajectories;
    return c;
}

void require_kind(const ExperimentConfig& cfg, ModelKind kind, const char* experiment) {
    if (cfg.model.kind != kind)
        throw ConfigError(std::string("config: constraint violated: model.kind = ") + to_string(kind) + " for " +
                          experiment);
}

void require_inpainting(const ExperimentConfig& cfg, const char* experiment) {
    if (cfg.measurement.kind != "inpainting")
        throw ConfigError(std::string("config: constraint violated: measurement.kind = inpainting for ") + experiment);
    if (cfg.measurement.indices.empty())
        throw ConfigError(std::string("config: constraint violated: measurement.indices given for ") + experiment);
}

std::vector<double> sigma_list(const ExperimentConfig& cfg) {
    return cfg.experiment.sigmas.empty() ? std::vector<double>{cfg.measurement.sigma} : cfg.experiment.sigmas;
}

}  // namespace

const char* to_string(Command c) {
    switch (c) {
        case Command::ScoreCheck: return "score-check";
        case Command::Roundtrip: return "roundtrip";
        case Command::Reguidance: return "reguidance";
        case Command::Verify: return "verify";
    }
    return "?";
}

const char* to_string(Experiment e) {
    switch (e) {
        case Experiment::None: return "none";
        case Experiment::Projection: return "projection";
        case Experiment::SdeFailure: return "sde-failure";
        case Experiment::Contraction: return "contraction";
        case Experiment::DpsBias: return "dps-bias";
        case Experiment::Roundtrip: return "roundtrip";
        case Experiment::LatentGeometry: return "latent-geometry";
        case Experiment::Decoupling: return "decoupling";
    }
    return "?";
}

Experiment parse_experiment(const std::string& name) {
    for (Experiment e : {Experiment::Projection, Experiment::SdeFailure, Experiment::Contraction, Experiment::DpsBias,
                         Experiment::Roundtrip, Experiment::LatentGeometry, Experiment::Decoupling})
        if (name == to_string(e)) return e;
    return Experiment::None;
}

ExperimentConfig parse_config(const std::string& text) {
    // Boost's reader only knows ';' comments.
    std::istringstream lines(text);
    std::string cleaned;
    for (std::string line; std::getline(lines, line);) {
        const std::string t = trim(line);
        cleaned += (!t.empty() && t[0] == '#') ? std::string() : line;
        cleaned += '\n';
    }

    pt::ptree tree;
    try {
        std::istringstream in(cleaned);
        pt::ini_parser::read_ini(in, tree);
    } catch (const pt::ini_parser_error& e) {
        throw ConfigError("config: line " + std::to_string(e.line()) + ": " + e.message());
    }

    ExperimentConfig cfg;
    const auto& keys = known_keys();
    for (const auto& [section, body] : tree) {
        if (body.empty()) {
            if (!body.data().empty()) throw ConfigError("config: key '" + section + "' outside a section");
        }
        const auto known = keys.find(section);
        if (known == keys.end()) throw ConfigError("config: unknown section [" + section + "]");
        for (const auto& [key, node] : body) {
            if (!known->second.count(key)) throw ConfigError("config: unknown key " + section + "." + key);
            apply(cfg, section, key, node.data());
        }
    }
    validate(cfg);
    return cfg;
}

ExperimentConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("config: cannot open " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_config(buf.str());
}

std::string serialize_config(const ExperimentConfig& cfg) {
    std::ostringstream out;
    const auto& r = cfg.run;
    out << "[run]\n";
    out << "command = " << to_string(r.command);
    if (r.command == Command::Verify) out << ' ' << to_string(r.experiment);
    out << '\n';
    if (r.trials) out << "trials = " << *r.trials << '\n';
    out << "seed = " << r.seed << '\n';
    out << "workers = " << r.workers << '\n';
    out << "out = " << r.out << '\n';
    out << "format = " << r.format << '\n';
    out << "dump_trajectories = " << (r.dump_trajectories ? "true" : "false") << '\n';
    out << "timing = " << (r.timing ? "true" : "false") << '\n';

    out << "\n[model]\n";
    const char* kind = cfg.model.kind == ModelKind::IsoGaussian ? "iso"
                       : cfg.model.kind == ModelKind::Bimodal   ? "bimodal"
                                                                : "hypercube";
    out << "kind = " << kind << '\n';
    out << "R = " << fmt(cfg.model.R) << '\n';
    out << "d = " << cfg.model.d << '\n';

    const auto& m = cfg.measurement;
    out << "\n[measurement]\n";
    out << "kind = " << m.kind << '\n';
    if (!m.indices.empty()) out << "indices = " << join(m.indices, 1) << '\n';
    if (!m.v.empty()) out << "v = " << join(m.v) << '\n';
    if (!m.A.empty()) {
        out << "A = ";
        for (std::size_t i = 0; i < m.A.size(); ++i) out << (i ? " | " : "") << join(m.A[i]);
        out << '\n';
    }
    if (!m.y.empty()) out << "y = " << join(m.y) << '\n';
    out << "sigma = " << fmt(m.sigma) << '\n';
    if (m.noise) out << "noise = " << fmt(*m.noise) << '\n';

    const auto& g = cfg.guidance;
    out << "\n[guidance]\n";
    if (g.rho) out << "rho = " << fmt(*g.rho) << '\n';
    out << "T = " << fmt(g.T) << '\n';
    out << "sampler = " << (g.sampler == Sampler::ODE ? "ode" : "sde") << '\n';
    out << "guidance = "
        << (g.guidance == GuidanceKind::None ? "none" : g.guidance == GuidanceKind::DPS ? "dps" : "mdps") << '\n';
    out << "steps = " << g.steps << '\n';
    out << "sde_steps = " << g.sde_steps << '\n';
    out << "rel_tol = " << fmt(g.rel_tol) << '\n';
    out << "min_step = " << fmt(g.min_step) << '\n';

    const auto& e = cfg.experiment;
    out << "\n[experiment]\n";
    if (!e.sigmas.empty()) out << "sigmas = " << join(e.sigmas) << '\n';
    out << "grids = " << join(e.grids) << '\n';
    out << "stds = " << join(e.stds) << '\n';
    if (!e.input.empty()) out << "input = " << join(e.input) << '\n';
    out << "offset_min = " << fmt(e.offset_min) << '\n';
    out << "offset_max = " << fmt(e.offset_max) << '\n';
    out << "window_loglog_factor = " << fmt(e.window_loglog_factor) << '\n';
    out << "ode_tolerance = " << fmt(e.ode_tolerance) << '\n';
    out << "max_error = " << fmt(e.max_error) << '\n';
    out << "tau_max = " << fmt(e.tau_max) << '\n';
    out << "cases = " << e.cases << '\n';
    out << "modes = " << e.modes << '\n';
    out << "perturb_trials = " << e.perturb_trials << '\n';
    out << "check_double_T = " << (e.check_double_T ? "true" : "false") << '\n';
    return out.str();
}

Measurement build_measurement(const ExperimentConfig& cfg, const State& source) {
    const auto& m = cfg.measurement;
    const int d = cfg.model.d;
    MeasurementKind kind;
    if (m.kind == "inpainting") {
        if (m.indices.empty()) throw ConfigError("config: constraint violated: measurement.indices given");
        kind = Inpainting{m.indices};
    } else if (m.kind == "single-vector") {
        kind = SingleVector{Eigen::Map<const Eigen::VectorXd>(m.v.data(), d)};
    } else {
        Eigen::MatrixXd A(static_cast<Eigen::Index>(m.A.size()), d);
        for (std::size_t i = 0; i < m.A.size(); ++i)
            for (int j = 0; j < d; ++j) A(static_cast<Eigen::Index>(i), j) = m.A[i][static_cast<std::size_t>(j)];
        kind = General{A};
    }
    if (!m.y.empty()) {
        const Eigen::VectorXd y = Eigen::Map<const Eigen::VectorXd>(m.y.data(), static_cast<Eigen::Index>(m.y.size()));
        return Measurement(kind, d, y, m.sigma);
    }
    RngStream rng(derive_seed(cfg.run.seed, 0xfffffffffffffff1ULL));
    return make_measurement(kind, cfg.model, source, m.sigma, m.noise, m.noise ? &rng : nullptr);
}

ConsistencyPreset consistency_preset(const ExperimentConfig& cfg) {
    ConsistencyPreset p;
    p.cases = cfg.experiment.cases;
    p.tau_max = cfg.experiment.tau_max;
    p.run = control_of(cfg);
    return p;
}

ProjectionPreset projection_preset(const ExperimentConfig& cfg) {
    require_kind(cfg, ModelKind::HypercubeMixture, "projection");
    require_inpainting(cfg, "projection");
    ProjectionPreset p;
    p.d = cfg.model.d;
    p.R = cfg.model.R;
    p.indices = cfg.measurement.indices;
    p.m = static_cast<int>(p.indices.size());
    p.sigmas = sigma_list(cfg);
    p.trials = cfg.run.trials.value_or(p.trials);
    p.max_error = cfg.experiment.max_error;
    p.check_double_T = cfg.experiment.check_double_T;
    p.guidance = guidance_of(cfg);
    p.run = control_of(cfg);
    return p;
}

SdeFailurePreset sde_failure_preset(const ExperimentConfig& cfg) {
    require_kind(cfg, ModelKind::HypercubeMixture, "sde-failure");
    require_inpainting(cfg, "sde-failure");
    SdeFailurePreset p;
    p.d = cfg.model.d;
    p.R = cfg.model.R;
    p.indices = cfg.measurement.indices;
    p.m = static_cast<int>(p.indices.size());
    p.sigma = cfg.measurement.sigma;
    p.trials = cfg.run.trials.value_or(p.trials);
    require(p.trials >= 2000, "run.trials >= 2000 for sde-failure");
    p.ode_tolerance = cfg.experiment.ode_tolerance;
    p.guidance = guidance_of(cfg);
    p.run = control_of(cfg);
    return p;
}

ContractionPreset contraction_preset(const ExperimentConfig& cfg) {
    require_kind(cfg, ModelKind::Bimodal, "contraction");
    if (cfg.measurement.kind != "single-vector")
        throw ConfigError("config: constraint violated: measurement.kind = single-vector for contraction");
    ContractionPreset p;
    p.R = cfg.model.R;
    p.d = cfg.model.d;
    p.v = Eigen::Map<const Eigen::VectorXd>(cfg.measurement.v.data(), p.d);
    p.sigmas = sigma_list(cfg);
    p.trials = cfg.run.trials.value_or(p.trials);
    p.offset_min = cfg.experiment.offset_min;
    p.offset_max = cfg.experiment.offset_max;
    p.window_loglog_factor = cfg.experiment.window_loglog_factor;
    p.guidance = guidance_of(cfg);
    p.run = control_of(cfg);
    return p;
}

DpsBiasPreset dps_bias_preset(const ExperimentConfig& cfg) {
    require_kind(cfg, ModelKind::IsoGaussian, "dps-bias");
    if (cfg.model.d != 1) throw ConfigError("config: constraint violated: model.d = 1 for dps-bias");
    if (cfg.measurement.y.size() != 1) throw ConfigError("config: constraint violated: measurement.y has one entry");
    DpsBiasPreset p;
    p.y = cfg.measurement.y[0];
    p.sigma = cfg.measurement.sigma;
    p.T = cfg.guidance.T;
    p.sde_steps = cfg.guidance.sde_steps;
    p.trials = cfg.run.trials.value_or(p.trials);
    require(p.trials >= 5000, "run.trials >= 5000 for dps-bias");
    p.run = control_of(cfg);
    return p;
}

RoundtripPreset roundtrip_preset(const ExperimentConfig& cfg) {
    RoundtripPreset p;
    p.model = cfg.model;
    p.trials = cfg.run.trials.value_or(p.trials);
    p.grids = cfg.experiment.grids;
    p.guidance = guidance_of(cfg);
    p.run = control_of(cfg);
    return p;
}

LatentGeometryPreset latent_geometry_preset(const ExperimentConfig& cfg) {
    require_kind(cfg, ModelKind::HypercubeMixture, "latent-geometry");
    require_inpainting(cfg, "latent-geometry");
    LatentGeometryPreset p;
    p.d = cfg.model.d;
    p.R = cfg.model.R;
    p.m = static_cast<int>(cfg.measurement.indices.size());
    for (std::size_t k = 0; k < cfg.measurement.indices.size(); ++k)
        if (cfg.measurement.indices[k] != static_cast<int>(k))
            throw ConfigError("config: constraint violated: measurement.indices = 1..m for latent-geometry");
    p.sigma = cfg.measurement.sigma;
    p.modes = cfg.experiment.modes;
    p.stds = cfg.experiment.stds;
    p.perturb_trials = cfg.experiment.perturb_trials;
    p.guidance = guidance_of(cfg);
    p.run = control_of(cfg);
    return p;
}

DecouplingPreset decoupling_preset(const ExperimentConfig& cfg) {
    require_kind(cfg, ModelKind::HypercubeMixture, "decoupling");
    require_inpainting(cfg, "decoupling");
    DecouplingPreset p;
    p.R = cfg.model.R;
    p.d = cfg.model.d;
    p.m = static_cast<int>(cfg.measurement.indices.size());
    for (std::size_t k = 0; k < cfg.measurement.indices.size(); ++k)
        if (cfg.measurement.indices[k] != static_cast<int>(k))
            throw ConfigError("config: constraint violated: measurement.indices = 1..m for decoupling");
    p.sigma = cfg.measurement.sigma;
    p.trials = cfg.run.trials.value_or(p.trials);
    p.guidance = guidance_of(cfg);
    p.run = control_of(cfg);
    return p;
}

}  // namespace reglab
