#pragma once

#include <Eigen/Dense>
#include <Eigen/SVD>
#include <functional>
#include <stdexcept>

#include "datacom/net.hpp"

namespace datacom {

// Control-affine system s_dot = f(s) + G(s) a.
struct AffineDynamics {
    std::function<VectorXd(const VectorXd&)> drift;           // f(s)
    std::function<MatrixXd(const VectorXd&)> control_matrix;  // G(s)
};

// A constraint k(s) <= 0 evaluated at one state, with the pullbacks the
// safe-action map needs: J_G = J_k G and the drift psi = J_k f.
struct ConstraintEvaluation {
    VectorXd values;     // k(s), length K
    MatrixXd jacobian;   // J_k, K x state_dim
    MatrixXd j_control;  // J_G, K x action_dim
    VectorXd drift;      // psi, length K

    static ConstraintEvaluation assemble(VectorXd k, MatrixXd j_k, const VectorXd& f,
                                         const MatrixXd& g) {
        if (j_k.rows() != k.size() || j_k.cols() != f.size() || g.rows() != f.size())
            throw std::invalid_argument("ConstraintEvaluation: inconsistent shapes");
        ConstraintEvaluation e;
        e.j_control = j_k * g;
        e.drift = j_k * f;
        e.values = std::move(k);
        e.jacobian = std::move(j_k);
        return e;
    }
};

// Slack recovery mu = max(-k, eps) with a linear class-K slack dynamic
// alpha(mu) = beta * mu.
struct SlackState {
    VectorXd mu;
    double beta = 1.0;
    double eps = 1e-6;

    VectorXd alpha() const { return beta * mu; }
    MatrixXd slack_matrix() const { return alpha().asDiagonal(); }
};

inline SlackState compute_slack(const VectorXd& k_values, double eps = 1e-6, double beta = 1.0) {
    if (!k_values.allFinite())
        throw std::invalid_argument("compute_slack: non-finite constraint values");
    SlackState s;
    s.beta = beta;
    s.eps = eps;
    s.mu = (-k_values.array()).max(eps).matrix();
    return s;
}

// Augmented Jacobian J_u = [J_G A(mu)] and an orthonormal basis of its
// kernel. The pseudo-inverse is cached from the same decomposition.
struct TangentFrame {
    MatrixXd j_aug;          // K x (action_dim + K)
    MatrixXd basis;          // (action_dim + K) x tangent_dim, orthonormal
    MatrixXd pseudo_inverse; // (action_dim + K) x K
    double lambda = 1.0;
    int action_dim = 0;
    int rank = 0;
    bool degraded = false;   // rank fell below K

    int tangent_dim() const { return static_cast<int>(basis.cols()); }
};

inline TangentFrame tangent_frame(const ConstraintEvaluation& constraint, const SlackState& slack,
                                  double lambda = 1.0) {
    const int k_dim = static_cast<int>(constraint.values.size());
    const int action_dim = static_cast<int>(constraint.j_control.cols());
    const int n = action_dim + k_dim;

    TangentFrame frame;
    frame.lambda = lambda;
    frame.action_dim = action_dim;
    frame.j_aug.resize(k_dim, n);
    frame.j_aug.leftCols(action_dim) = constraint.j_control;
    frame.j_aug.rightCols(k_dim) = slack.slack_matrix();

    if (k_dim == 0) {
        frame.basis = MatrixXd::Identity(n, n);
        frame.pseudo_inverse = MatrixXd::Zero(n, 0);
        return frame;
    }

    constexpr double kRankTol = 1e-10;
    Eigen::JacobiSVD<MatrixXd> svd(frame.j_aug, Eigen::ComputeFullV | Eigen::ComputeFullU);
    const auto& sv = svd.singularValues();
    int rank = 0;
    for (Eigen::Index i = 0; i < sv.size(); ++i)
        if (sv(i) > kRankTol) ++rank;
    frame.rank = rank;
    frame.degraded = rank < k_dim;

    // kernel basis: right singular vectors of the vanishing singular values
    frame.basis = svd.matrixV().rightCols(n - rank);
    // deterministic orientation: first nonzero entry of each column positive
    for (Eigen::Index c = 0; c < frame.basis.cols(); ++c) {
        for (Eigen::Index r = 0; r < frame.basis.rows(); ++r) {
            const double v = frame.basis(r, c);
            if (std::abs(v) > 1e-12) {
                if (v < 0.0) frame.basis.col(c) = -frame.basis.col(c);
                break;
            }
        }
    }

    MatrixXd sigma_inv = MatrixXd::Zero(n, k_dim);
    for (int i = 0; i < rank; ++i) sigma_inv(i, i) = 1.0 / sv(i);
    frame.pseudo_inverse = svd.matrixV() * sigma_inv * svd.matrixU().transpose();
    return frame;
}

struct SafeActionResult {
    VectorXd env_action;   // first action_dim entries of the mapped vector
    VectorXd slack_rate;   // remaining K entries (u_mu)
    VectorXd full;         // [a; u_mu]
    MatrixXd basis;        // B_u, for the log-density correction
    bool fault = false;          // pseudo-inverse failure, env_action zeroed
    bool dim_adjusted = false;   // u was truncated or zero-padded
};

// Safe action map:
//   [a; u_mu] = -J_u^+ max(psi, 0) - lambda J_u^+ c + B_u u
inline SafeActionResult safe_action(const VectorXd& u, const ConstraintEvaluation& constraint,
                                    const SlackState& slack, const TangentFrame& frame) {
    const int k_dim = static_cast<int>(constraint.values.size());
    const int n = frame.action_dim + k_dim;

    SafeActionResult res;
    res.basis = frame.basis;

    // an all-zero row of J_u cannot be compensated: safety fault
    for (Eigen::Index r = 0; r < frame.j_aug.rows(); ++r) {
        if (frame.j_aug.row(r).norm() < 1e-14) {
            res.fault = true;
            res.env_action = VectorXd::Zero(frame.action_dim);
            res.slack_rate = VectorXd::Zero(k_dim);
            res.full = VectorXd::Zero(n);
            return res;
        }
    }

    VectorXd u_fit = u;
    if (u.size() != frame.tangent_dim()) {
        res.dim_adjusted = true;
        u_fit = VectorXd::Zero(frame.tangent_dim());
        const Eigen::Index m = std::min<Eigen::Index>(u.size(), frame.tangent_dim());
        u_fit.head(m) = u.head(m);
    }

    VectorXd full = frame.basis * u_fit;
    if (k_dim > 0) {
        const VectorXd psi_plus = constraint.drift.array().max(0.0).matrix();
        const VectorXd c = constraint.values + slack.mu;
        full -= frame.pseudo_inverse * (psi_plus + frame.lambda * c);
    }
    res.env_action = full.head(frame.action_dim);
    res.slack_rate = full.tail(k_dim);
    res.full = std::move(full);
    return res;
}

// Log pseudo-determinant of the affine map u -> B_u u. Zero for the
// orthonormal frames produced above; kept general for scaled bases.
inline double log_det_correction(const MatrixXd& basis) {
    if (basis.cols() == 0) return 0.0;
    const MatrixXd gram = basis.transpose() * basis;
    const double det = gram.determinant();
    return 0.5 * std::log(std::max(det, 1e-300));
}

}  // namespace datacom
