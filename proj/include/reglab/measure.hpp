#pragma once

#include <optional>
#include <variant>
#include <vector>

#include <Eigen/Cholesky>
#include <Eigen/Core>

#include "reglab/models.hpp"
#include "reglab/rng.hpp"

namespace reglab {

// Zero-based coordinate indices.
struct Inpainting {
    std::vector<int> indices;
};

struct SingleVector {
    Eigen::VectorXd v;
};

struct General {
    Eigen::MatrixXd A;
};

using MeasurementKind = std::variant<Inpainting, SingleVector, General>;

/// Linear observation y = A x with guidance noise scale sigma.
/// Construction checks the kind-specific invariants and full row rank,
/// and caches a factorization of A A^T for the projection.
class Measurement {
public:
    Measurement(MeasurementKind kind, int d, Eigen::VectorXd y, double sigma);

    const Eigen::MatrixXd& A() const { return A_; }
    const Eigen::VectorXd& y() const { return y_; }
    double sigma() const { return sigma_; }
    const MeasurementKind& kind() const { return kind_; }
    int m() const { return static_cast<int>(A_.rows()); }
    int d() const { return static_cast<int>(A_.cols()); }

    const Inpainting* inpainting() const { return std::get_if<Inpainting>(&kind_); }
    const SingleVector* single_vector() const { return std::get_if<SingleVector>(&kind_); }

    Measurement with_sigma(double sigma) const { return Measurement(kind_, d(), y_, sigma); }

private:
    MeasurementKind kind_;
    Eigen::MatrixXd A_;
    Eigen::VectorXd y_;
    double sigma_;
    Eigen::LLT<Eigen::MatrixXd> gram_;

    friend State project_to_consistent(const Measurement&, const State&);
};

Eigen::MatrixXd operator_matrix(const MeasurementKind& kind, int d);

/// y = A source, plus N(0, noise^2 I) when noise is given (requires rng).
Measurement make_measurement(const MeasurementKind& kind, const ModelSpec& model, const State& source,
                             double sigma, std::optional<double> noise = std::nullopt,
                             RngStream* rng = nullptr);

struct RewardEval {
    Eigen::VectorXd residual;  // y - A x
    double loss = 0.0;         // |residual|^2
    double reward = 0.0;       // -loss / (2 sigma^2)
};

RewardEval residual_and_reward(const Measurement& meas, const State& x);

/// Orthogonal projection onto {x : A x = y}.
State project_to_consistent(const Measurement& meas, const State& x);

}  // namespace reglab
