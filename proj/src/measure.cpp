#include "reglab/measure.hpp"

#include <cmath>
#include <set>
#include <string>

#include <Eigen/QR>

#include "reglab/error.hpp"

namespace reglab {

namespace {

constexpr double kRankTol = 1e-10;
constexpr double kUnitTol = 1e-12;

template <class... Ts>
struct Overloaded : Ts... {
    using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

void check_dim(const Measurement& meas, const State& x) {
    if (x.size() != meas.d()) {
        throw Error("dimension mismatch: state has " + std::to_string(x.size()) + " entries, measurement expects " +
                    std::to_string(meas.d()));
    }
}

}  // namespace

Eigen::MatrixXd operator_matrix(const MeasurementKind& kind, int d) {
    return std::visit(
        Overloaded{
            [d](const Inpainting& k) {
                std::set<int> seen;
                Eigen::MatrixXd A = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(k.indices.size()), d);
                for (std::size_t j = 0; j < k.indices.size(); ++j) {
                    const int i = k.indices[j];
                    if (i < 0 || i >= d) throw Error("inpainting index out of range: " + std::to_string(i));
                    if (!seen.insert(i).second) throw Error("duplicate inpainting index: " + std::to_string(i));
                    A(static_cast<Eigen::Index>(j), i) = 1.0;
                }
                return A;
            },
            [d](const SingleVector& k) {
                if (k.v.size() != d) throw Error("dimension mismatch: measurement vector length differs from d");
                if (std::abs(k.v.norm() - 1.0) > kUnitTol) throw Error("single-vector measurement requires |v| = 1");
                Eigen::MatrixXd A = k.v.transpose();
                return A;
            },
            [d](const General& k) {
                if (k.A.cols() != d) throw Error("dimension mismatch: A has wrong column count");
                return k.A;
            },
        },
        kind);
}

Measurement::Measurement(MeasurementKind kind, int d, Eigen::VectorXd y, double sigma)
    : kind_(std::move(kind)), y_(std::move(y)), sigma_(sigma) {
    if (!(sigma_ > 0.0) || !std::isfinite(sigma_)) throw Error("measurement sigma must be > 0");
    if (d < 1) throw Error("measurement dimension must be >= 1");
    A_ = operator_matrix(kind_, d);
    if (A_.rows() == 0) throw Error("measurement needs at least one row");
    if (A_.rows() > A_.cols()) throw Error("measurement has more rows than columns");
    if (y_.size() != A_.rows()) throw Error("dimension mismatch: y length differs from row count");
    if (!y_.allFinite()) throw Error("non-finite observation");
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(A_);
    qr.setThreshold(kRankTol);
    if (qr.rank() < A_.rows()) throw Error("measurement operator is rank deficient");
    gram_.compute(A_ * A_.transpose());
    if (gram_.info() != Eigen::Success) throw Error("singular A A^T");
}

Measurement make_measurement(const MeasurementKind& kind, const ModelSpec& model, const State& source, double sigma,
                             std::optional<double> noise, RngStream* rng) {
    if (source.size() != model.d) throw Error("dimension mismatch: source state vs model");
    Eigen::VectorXd y = operator_matrix(kind, model.d) * source;
    if (noise) {
        if (*noise < 0.0) throw Error("measurement noise must be >= 0");
        if (rng == nullptr) throw Error("noisy measurement requires an rng stream");
        for (Eigen::Index j = 0; j < y.size(); ++j) y[j] += *noise * rng->normal();
    }
    return Measurement(kind, model.d, std::move(y), sigma);
}

RewardEval residual_and_reward(const Measurement& meas, const State& x) {
    check_dim(meas, x);
    RewardEval out;
    out.residual = meas.y() - meas.A() * x;
    out.loss = out.residual.squaredNorm();
    out.reward = -out.loss / (2.0 * meas.sigma() * meas.sigma());
    return out;
}

State project_to_consistent(const Measurement& meas, const State& x) {
    check_dim(meas, x);
    if (const auto* inpaint = meas.inpainting()) {
        State out = x;
        for (std::size_t j = 0; j < inpaint->indices.size(); ++j)
            out[inpaint->indices[j]] = meas.y()[static_cast<Eigen::Index>(j)];
        return out;
    }
    const Eigen::VectorXd r = meas.y() - meas.A() * x;
    return x + meas.A().transpose() * meas.gram_.solve(r);
}

}  // namespace reglab
