#pragma once

#include <vector>

#include <Eigen/Core>

#include "reglab/rng.hpp"

namespace reglab {

using State = Eigen::VectorXd;
using DiagMatrix = Eigen::DiagonalMatrix<double, Eigen::Dynamic>;

class Measurement;

enum class ModelKind { IsoGaussian, HypercubeMixture, Bimodal };

/// Analytic data distribution pushed through the Ornstein-Uhlenbeck
/// process dx = -x dt + sqrt(2) dB. Every mixture component has identity
/// covariance, so the time-tau marginal is the same mixture with means
/// scaled by exp(-tau).
///
///  - IsoGaussian:      N(0, I)
///  - HypercubeMixture: uniform over N(z, I), z in {R, -R}^d
///  - Bimodal:          uniform over N(+R e1, I), N(-R e1, I)
struct ModelSpec {
    ModelKind kind = ModelKind::IsoGaussian;
    double R = 1.0;
    int d = 1;

    static ModelSpec iso(int d) { return make(ModelKind::IsoGaussian, 1.0, d); }
    static ModelSpec hypercube(double R, int d) { return make(ModelKind::HypercubeMixture, R, d); }
    static ModelSpec bimodal(double R, int d) { return make(ModelKind::Bimodal, R, d); }
    static ModelSpec make(ModelKind kind, double R, int d);

    bool operator==(const ModelSpec&) const = default;
};

const char* to_string(ModelKind kind);

// tanh/sech^2 arguments are clamped at this magnitude.
inline constexpr double kSaturation = 30.0;

double saturating_tanh(double arg);
double saturating_sech2(double arg);
double log_cosh(double arg);
double log_sum_exp(double a, double b);

/// ln q_tau(x) with an x-independent constant dropped:
///  - IsoGaussian:      -|x|^2/2                           (drops -d/2 ln 2pi)
///  - HypercubeMixture: sum_i [ln cosh(a x_i) - x_i^2/2]   (drops -d(a^2/2 + ln 2pi / 2))
///  - Bimodal:          lse(a x_1, -a x_1) - ln 2 - |x|^2/2 (drops -a^2/2 - d/2 ln 2pi)
/// where a = R exp(-tau). log_density_constant returns the dropped term.
double log_density(const ModelSpec& model, const State& x, double tau);
double log_density_constant(const ModelSpec& model, double tau);

State score(const ModelSpec& model, const State& x, double tau);

/// E[x_0 | x_tau = x], evaluated in closed form (not through the score).
State denoiser(const ModelSpec& model, const State& x, double tau);

DiagMatrix denoiser_jacobian(const ModelSpec& model, const State& x, double tau);

State sample_prior(const ModelSpec& model, RngStream& rng);

/// All mixture means. Hypercube enumeration is guarded at d <= 20.
std::vector<State> all_modes(const ModelSpec& model);

/// Mixture means z with A z = y (to 1e-9). Inpainting measurements on the
/// hypercube enumerate the 2^(d-m) free coordinates directly; everything
/// else scans all modes.
std::vector<State> consistent_modes(const ModelSpec& model, const Measurement& meas);

/// Distance to the nearest consistent mode when one exists, otherwise to
/// the nearest mode. NaN for IsoGaussian.
double nearest_mode_distance(const ModelSpec& model, const Measurement& meas, const State& x);

inline constexpr int kMaxEnumerationDim = 20;

}  // namespace reglab
