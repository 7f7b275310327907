#include "reglab/models.hpp"

#include <cmath>
#include <limits>
#include <numbers>
#include <string>

#include "reglab/error.hpp"
#include "reglab/measure.hpp"

namespace reglab {

namespace {

void check_state(const ModelSpec& model, const State& x) {
    if (x.size() != model.d) {
        throw Error("dimension mismatch: state has " + std::to_string(x.size()) + " entries, model has d = " +
                    std::to_string(model.d));
    }
    if (!x.allFinite()) throw Error("non-finite state");
}

void check_tau(double tau) {
    if (!(tau >= 0.0) || !std::isfinite(tau)) throw Error("noise level tau must be finite and >= 0");
}

double mode_scale(const ModelSpec& model, double tau) { return model.R * std::exp(-tau); }

constexpr double kConsistencyTol = 1e-9;

}  // namespace

ModelSpec ModelSpec::make(ModelKind kind, double R, int d) {
    if (!(R > 0.0) || !std::isfinite(R)) throw Error("model R must be positive");
    if (d < 1) throw Error("model d must be >= 1");
    return ModelSpec{kind, R, d};
}

const char* to_string(ModelKind kind) {
    switch (kind) {
        case ModelKind::IsoGaussian: return "iso";
        case ModelKind::HypercubeMixture: return "hypercube";
        case ModelKind::Bimodal: return "bimodal";
    }
    return "?";
}

double saturating_tanh(double arg) {
    if (arg > kSaturation) return 1.0;
    if (arg < -kSaturation) return -1.0;
    return std::tanh(arg);
}

double saturating_sech2(double arg) {
    if (std::abs(arg) > kSaturation) return 0.0;
    const double c = std::cosh(arg);
    return 1.0 / (c * c);
}

double log_cosh(double arg) {
    const double a = std::abs(arg);
    return a + std::log1p(std::exp(-2.0 * a)) - std::numbers::ln2;
}

double log_sum_exp(double a, double b) {
    const double hi = std::max(a, b);
    if (hi == -std::numeric_limits<double>::infinity()) return hi;
    return hi + std::log(std::exp(a - hi) + std::exp(b - hi));
}

double log_density(const ModelSpec& model, const State& x, double tau) {
    check_state(model, x);
    check_tau(tau);
    const double a = mode_scale(model, tau);
    const double quad = -0.5 * x.squaredNorm();
    switch (model.kind) {
        case ModelKind::IsoGaussian: return quad;
        case ModelKind::HypercubeMixture: {
            double acc = 0.0;
            for (Eigen::Index i = 0; i < x.size(); ++i) acc += log_cosh(a * x[i]) - 0.5 * x[i] * x[i];
            return acc;
        }
        case ModelKind::Bimodal:
            return log_sum_exp(a * x[0], -a * x[0]) - std::numbers::ln2 + quad;
    }
    return quad;
}

double log_density_constant(const ModelSpec& model, double tau) {
    check_tau(tau);
    const double a = mode_scale(model, tau);
    const double half_log_2pi = 0.5 * std::log(2.0 * std::numbers::pi);
    switch (model.kind) {
        case ModelKind::IsoGaussian: return -model.d * half_log_2pi;
        case ModelKind::HypercubeMixture: return -model.d * (0.5 * a * a + half_log_2pi);
        case ModelKind::Bimodal: return -0.5 * a * a - model.d * half_log_2pi;
    }
    return 0.0;
}

State score(const ModelSpec& model, const State& x, double tau) {
    check_state(model, x);
    check_tau(tau);
    const double a = mode_scale(model, tau);
    State s = -x;
    switch (model.kind) {
        case ModelKind::IsoGaussian: break;
        case ModelKind::HypercubeMixture:
            for (Eigen::Index i = 0; i < x.size(); ++i) s[i] += a * saturating_tanh(a * x[i]);
            break;
        case ModelKind::Bimodal: s[0] += a * saturating_tanh(a * x[0]); break;
    }
    return s;
}

State denoiser(const ModelSpec& model, const State& x, double tau) {
    check_state(model, x);
    check_tau(tau);
    const double decay = std::exp(-tau);
    const double a = model.R * decay;
    const double spread = -std::expm1(-2.0 * tau);  // 1 - e^{-2 tau}
    State mu = decay * x;
    switch (model.kind) {
        case ModelKind::IsoGaussian: break;
        case ModelKind::HypercubeMixture:
            for (Eigen::Index i = 0; i < x.size(); ++i) mu[i] += spread * model.R * saturating_tanh(a * x[i]);
            break;
        case ModelKind::Bimodal: mu[0] += spread * model.R * saturating_tanh(a * x[0]); break;
    }
    return mu;
}

DiagMatrix denoiser_jacobian(const ModelSpec& model, const State& x, double tau) {
    check_state(model, x);
    check_tau(tau);
    const double decay = std::exp(-tau);
    const double a = model.R * decay;
    const double bump = -std::expm1(-2.0 * tau) * decay * model.R * model.R;
    Eigen::VectorXd diag = Eigen::VectorXd::Constant(x.size(), decay);
    switch (model.kind) {
        case ModelKind::IsoGaussian: break;
        case ModelKind::HypercubeMixture:
            for (Eigen::Index i = 0; i < x.size(); ++i) diag[i] += bump * saturating_sech2(a * x[i]);
            break;
        case ModelKind::Bimodal: diag[0] += bump * saturating_sech2(a * x[0]); break;
    }
    return DiagMatrix(diag);
}

State sample_prior(const ModelSpec& model, RngStream& rng) {
    State x = rng.normal_vector(model.d);
    switch (model.kind) {
        case ModelKind::IsoGaussian: break;
        case ModelKind::HypercubeMixture:
            for (Eigen::Index i = 0; i < x.size(); ++i) x[i] += rng.coin() ? model.R : -model.R;
            break;
        case ModelKind::Bimodal: x[0] += rng.coin() ? model.R : -model.R; break;
    }
    return x;
}

std::vector<State> all_modes(const ModelSpec& model) {
    switch (model.kind) {
        case ModelKind::IsoGaussian: return {};
        case ModelKind::Bimodal: {
            State z = State::Zero(model.d);
            z[0] = model.R;
            return {z, -z};
        }
        case ModelKind::HypercubeMixture: {
            if (model.d > kMaxEnumerationDim) throw Error("mode enumeration guard exceeded (d > 20)");
            const std::uint64_t count = std::uint64_t{1} << model.d;
            std::vector<State> out;
            out.reserve(count);
            for (std::uint64_t mask = 0; mask < count; ++mask) {
                State z(model.d);
                for (int i = 0; i < model.d; ++i) z[i] = (mask >> i) & 1U ? -model.R : model.R;
                out.push_back(std::move(z));
            }
            return out;
        }
    }
    return {};
}

std::vector<State> consistent_modes(const ModelSpec& model, const Measurement& meas) {
    if (meas.d() != model.d) throw Error("dimension mismatch between model and measurement");
    if (model.d > kMaxEnumerationDim) throw Error("mode enumeration guard exceeded (d > 20)");

    std::vector<State> out;
    const auto* inpaint = meas.inpainting();
    if (model.kind == ModelKind::HypercubeMixture && inpaint != nullptr) {
        std::vector<bool> measured(model.d, false);
        State base = State::Constant(model.d, model.R);
        for (std::size_t j = 0; j < inpaint->indices.size(); ++j) {
            const double yj = meas.y()[static_cast<Eigen::Index>(j)];
            if (std::abs(std::abs(yj) - model.R) > kConsistencyTol) throw Error("no consistent mode found");
            measured[inpaint->indices[j]] = true;
            base[inpaint->indices[j]] = yj;
        }
        std::vector<int> free;
        for (int i = 0; i < model.d; ++i)
            if (!measured[i]) free.push_back(i);
        const std::uint64_t count = std::uint64_t{1} << free.size();
        out.reserve(count);
        for (std::uint64_t mask = 0; mask < count; ++mask) {
            State z = base;
            for (std::size_t k = 0; k < free.size(); ++k) z[free[k]] = (mask >> k) & 1U ? -model.R : model.R;
            out.push_back(std::move(z));
        }
    } else {
        for (auto& z : all_modes(model)) {
            if ((meas.A() * z - meas.y()).cwiseAbs().maxCoeff() <= kConsistencyTol) out.push_back(std::move(z));
        }
    }
    if (out.empty()) throw Error("no consistent mode found");
    return out;
}

double nearest_mode_distance(const ModelSpec& model, const Measurement& meas, const State& x) {
    check_state(model, x);
    switch (model.kind) {
        case ModelKind::IsoGaussian: return std::numeric_limits<double>::quiet_NaN();
        case ModelKind::HypercubeMixture: {
            // Nearest hypercube vertex is the coordinatewise sign; with an
            // inpainting measurement consistent with some mode the measured
            // coordinates are pinned to y instead.
            State z(model.d);
            for (int i = 0; i < model.d; ++i) z[i] = x[i] >= 0.0 ? model.R : -model.R;
            if (const auto* inpaint = meas.inpainting()) {
                const bool consistent = ((meas.y().cwiseAbs().array() - model.R).abs() <= kConsistencyTol).all();
                if (consistent) {
                    for (std::size_t j = 0; j < inpaint->indices.size(); ++j)
                        z[inpaint->indices[j]] = meas.y()[static_cast<Eigen::Index>(j)];
                }
            }
            return (x - z).norm();
        }
        case ModelKind::Bimodal: {
            double best = std::numeric_limits<double>::infinity();
            std::vector<State> candidates;
            try {
                candidates = consistent_modes(model, meas);
            } catch (const Error&) {
                candidates = all_modes(model);
            }
            for (const auto& z : candidates) best = std::min(best, (x - z).norm());
            return best;
        }
    }
    return std::numeric_limits<double>::quiet_NaN();
}

}  // namespace reglab
