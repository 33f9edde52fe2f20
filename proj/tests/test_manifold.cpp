#include <catch2/catch_amalgamated.hpp>

#include "datacom/manifold.hpp"
#include "datacom/rng.hpp"

using namespace datacom;

namespace {

ConstraintEvaluation random_constraint(Rng& rng, int k_dim, int state_dim, int action_dim) {
    VectorXd k(k_dim);
    MatrixXd jac(k_dim, state_dim);
    VectorXd f(state_dim);
    MatrixXd g(state_dim, action_dim);
    for (Eigen::Index i = 0; i < k.size(); ++i) k(i) = rng.normal();
    for (Eigen::Index i = 0; i < jac.size(); ++i) jac(i) = rng.normal();
    for (Eigen::Index i = 0; i < f.size(); ++i) f(i) = rng.normal();
    for (Eigen::Index i = 0; i < g.size(); ++i) g(i) = rng.normal();
    return ConstraintEvaluation::assemble(k, jac, f, g);
}

}  // namespace

TEST_CASE("slack is max(-k, eps)") {
    VectorXd k(3);
    k << -2.0, 0.5, 0.0;
    const auto s = compute_slack(k, 1e-6, 2.0);
    REQUIRE(s.mu(0) == 2.0);
    REQUIRE(s.mu(1) == 1e-6);
    REQUIRE(s.mu(2) == 1e-6);
    REQUIRE(s.alpha()(0) == 4.0);  // beta * mu
    REQUIRE(s.slack_matrix()(1, 1) == 2e-6);
}

TEST_CASE("tangent basis is an orthonormal kernel basis of the augmented jacobian") {
    Rng rng(101);
    for (int trial = 0; trial < 200; ++trial) {
        const int k_dim = 1 + static_cast<int>(rng.index(3));
        const int action_dim = 1 + static_cast<int>(rng.index(3));
        const auto ce = random_constraint(rng, k_dim, 6, action_dim);
        const auto slack = compute_slack(ce.values);
        const auto frame = tangent_frame(ce, slack, 1.0);

        const int n = action_dim + k_dim;
        REQUIRE(frame.basis.rows() == n);
        if (frame.degraded) continue;
        REQUIRE(frame.basis.cols() == n - k_dim);
        // kernel: J_u B = 0
        REQUIRE((frame.j_aug * frame.basis).cwiseAbs().maxCoeff() < 1e-10);
        // orthonormal columns
        const MatrixXd gram = frame.basis.transpose() * frame.basis;
        REQUIRE((gram - MatrixXd::Identity(gram.rows(), gram.cols())).cwiseAbs().maxCoeff() <
                1e-10);
        // pseudo-inverse property J_u J_u^+ = I at full rank
        const MatrixXd jjp = frame.j_aug * frame.pseudo_inverse;
        REQUIRE((jjp - MatrixXd::Identity(k_dim, k_dim)).cwiseAbs().maxCoeff() < 1e-8);
    }
}

TEST_CASE("tangent basis orientation is deterministic") {
    Rng rng(202);
    const auto ce = random_constraint(rng, 2, 5, 2);
    const auto slack = compute_slack(ce.values);
    const auto f1 = tangent_frame(ce, slack, 1.0);
    const auto f2 = tangent_frame(ce, slack, 1.0);
    REQUIRE(f1.basis == f2.basis);
    for (Eigen::Index c = 0; c < f1.basis.cols(); ++c) {
        // first nonzero entry of each column is positive
        for (Eigen::Index r = 0; r < f1.basis.rows(); ++r) {
            if (std::abs(f1.basis(r, c)) > 1e-12) {
                REQUIRE(f1.basis(r, c) > 0.0);
                break;
            }
        }
    }
}

TEST_CASE("hand-computed 1x2 case") {
    // J_u = [1, 2]: kernel direction proportional to (2, -1), normalized,
    // oriented so the first nonzero entry is positive.
    ConstraintEvaluation ce;
    ce.values = VectorXd::Constant(1, -2.0);  // slack mu = 2, so c = k + mu = 0
    ce.jacobian = MatrixXd::Zero(1, 1);
    ce.j_control = MatrixXd::Constant(1, 1, 1.0);
    ce.drift = VectorXd::Zero(1);
    const SlackState slack = compute_slack(ce.values);
    REQUIRE(slack.mu(0) == 2.0);
    const auto frame = tangent_frame(ce, slack, 1.0);
    REQUIRE(frame.j_aug(0, 0) == 1.0);
    REQUIRE(frame.j_aug(0, 1) == 2.0);
    const double s5 = std::sqrt(5.0);
    REQUIRE(frame.basis(0, 0) == Catch::Approx(2.0 / s5));
    REQUIRE(frame.basis(1, 0) == Catch::Approx(-1.0 / s5));

    // u = sqrt(5) with zero drift/constraint maps to exactly (2, -1)
    const auto res = safe_action(VectorXd::Constant(1, s5), ce, slack, frame);
    REQUIRE(res.full(0) == Catch::Approx(2.0));
    REQUIRE(res.full(1) == Catch::Approx(-1.0));
    REQUIRE(res.env_action(0) == Catch::Approx(2.0));
    REQUIRE_FALSE(res.fault);
}

TEST_CASE("constraint dynamics identity J_u W(u) = -psi_plus - lambda c") {
    Rng rng(303);
    for (int trial = 0; trial < 1000; ++trial) {
        const int k_dim = 1 + static_cast<int>(rng.index(2));
        const int action_dim = 1 + static_cast<int>(rng.index(2));
        const double lambda = 0.5 + rng.uniform();
        const auto ce = random_constraint(rng, k_dim, 5, action_dim);
        const auto slack = compute_slack(ce.values);
        const auto frame = tangent_frame(ce, slack, lambda);
        if (frame.degraded) continue;
        VectorXd u(frame.tangent_dim());
        for (Eigen::Index i = 0; i < u.size(); ++i) u(i) = rng.normal();
        const auto res = safe_action(u, ce, slack, frame);
        const VectorXd psi_plus = ce.drift.array().max(0.0).matrix();
        const VectorXd c = ce.values + slack.mu;
        const VectorXd residual = frame.j_aug * res.full + psi_plus + lambda * c;
        REQUIRE(residual.cwiseAbs().maxCoeff() < 1e-8);
    }
}

TEST_CASE("no constraints means identity pass-through") {
    ConstraintEvaluation ce;
    ce.values = VectorXd::Zero(0);
    ce.jacobian = MatrixXd::Zero(0, 4);
    ce.j_control = MatrixXd::Zero(0, 2);
    ce.drift = VectorXd::Zero(0);
    const auto slack = compute_slack(ce.values);
    const auto frame = tangent_frame(ce, slack, 1.0);
    REQUIRE(frame.tangent_dim() == 2);
    REQUIRE(frame.basis == MatrixXd::Identity(2, 2));
    VectorXd u(2);
    u << 0.3, -0.7;
    const auto res = safe_action(u, ce, slack, frame);
    REQUIRE(res.env_action == u);
    REQUIRE(log_det_correction(frame.basis) == Catch::Approx(0.0).margin(1e-14));
}

TEST_CASE("zero control row faults safely") {
    ConstraintEvaluation ce;
    ce.values = VectorXd::Constant(1, 0.5);
    ce.jacobian = MatrixXd::Zero(1, 3);
    ce.j_control = MatrixXd::Zero(1, 2);  // action cannot influence the constraint
    ce.drift = VectorXd::Zero(1);
    SlackState slack = compute_slack(ce.values);
    slack.mu = VectorXd::Zero(1);  // zero slack too: whole J_u row is zero
    const auto frame = tangent_frame(ce, slack, 1.0);
    const auto res = safe_action(VectorXd::Ones(frame.tangent_dim()), ce, slack, frame);
    REQUIRE(res.fault);
    REQUIRE(res.env_action.cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("dimension-mismatched control is adjusted") {
    Rng rng(404);
    const auto ce = random_constraint(rng, 1, 4, 2);
    const auto slack = compute_slack(ce.values);
    const auto frame = tangent_frame(ce, slack, 1.0);
    VectorXd u_long = VectorXd::Ones(frame.tangent_dim() + 2);
    const auto res = safe_action(u_long, ce, slack, frame);
    REQUIRE(res.dim_adjusted);
    const auto exact = safe_action(u_long.head(frame.tangent_dim()), ce, slack, frame);
    REQUIRE((res.full - exact.full).cwiseAbs().maxCoeff() < 1e-14);
}

TEST_CASE("log det correction for non-orthonormal bases") {
    MatrixXd b(2, 2);
    b << 2.0, 0.5, 0.0, 1.0;  // det = 2
    REQUIRE(log_det_correction(b) == Catch::Approx(std::log(2.0)));
    // orthonormal basis corrects by zero
    MatrixXd q(3, 2);
    q << 1, 0, 0, 1, 0, 0;
    REQUIRE(log_det_correction(q) == Catch::Approx(0.0).margin(1e-14));
}
