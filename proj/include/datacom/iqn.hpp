#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <vector>

#include "datacom/feasibility.hpp"
#include "datacom/net.hpp"
#include "datacom/rng.hpp"

namespace datacom {

// Implicit quantile head for the feasibility value: the network takes the
// state concatenated with a cosine embedding of the quantile tau and returns
// the quantile value eta^tau(s).
struct QuantileHead {
    DenseNet net;
    TargetNetwork target;
    Adam opt;
    double gamma = 0.99;
    int embed_dim = 64;
    int n_tau = 8;        // quantile samples per prediction
    int n_tau_prime = 8;  // quantile samples per target
    int n_tail = 32;      // quantiles for CVaR tail averaging
    double kappa = 1.0;   // Huber threshold

    static QuantileHead make(int state_dim, const std::vector<int>& hidden, double gamma,
                             double lr, double tau_polyak, Rng& rng) {
        QuantileHead h;
        h.gamma = gamma;
        h.net = DenseNet::make(state_dim + h.embed_dim, hidden, {Activation::Identity}, rng);
        h.target = TargetNetwork::make(h.net, tau_polyak);
        h.opt = Adam::make(h.net, lr);
        return h;
    }

    VectorXd embed_input(const VectorXd& state, double tau) const {
        VectorXd x(state.size() + embed_dim);
        x.head(state.size()) = state;
        for (int i = 0; i < embed_dim; ++i)
            x(state.size() + i) = std::cos(M_PI * static_cast<double>(i + 1) * tau);
        return x;
    }

    double quantile(const VectorXd& state, double tau) const {
        return net.forward_one(embed_input(state, tau))(0);
    }

    double quantile_target(const VectorXd& state, double tau) const {
        return target.net.forward_one(embed_input(state, tau))(0);
    }

    double value_at_risk(const VectorXd& state, double alpha) const {
        return quantile(state, alpha);
    }

    // CVaR by averaging the quantile function over a midpoint grid on [alpha, 1].
    double cvar(const VectorXd& state, double alpha) const {
        double acc = 0.0;
        for (int j = 0; j < n_tail; ++j) {
            const double tau = alpha + (1.0 - alpha) * (static_cast<double>(j) + 0.5) /
                                             static_cast<double>(n_tail);
            acc += quantile(state, tau);
        }
        return acc / static_cast<double>(n_tail);
    }
};

// CVaR-minus-threshold constraint from the quantile head, with its gradient
// wrt the state (input gradient through the net, averaged over the tail grid;
// the cosine-embedding block is a function of tau only and is discarded).
// mu/sigma are grid moments over the full quantile range, reported for logs.
inline LearnedConstraintValue iqn_constraint_value(const QuantileHead& head, const VectorXd& state,
                                                   const RiskSpec& risk, double delta) {
    risk.validate();
    const int n = head.n_tail;
    const int sd = static_cast<int>(state.size());
    MatrixXd inputs(n, sd + head.embed_dim);
    for (int j = 0; j < n; ++j) {
        const double tau = risk.alpha + (1.0 - risk.alpha) * (static_cast<double>(j) + 0.5) /
                                              static_cast<double>(n);
        inputs.row(j) = head.embed_input(state, tau).transpose();
    }
    const auto trace = head.net.trace(inputs);
    const MatrixXd out_grad = MatrixXd::Constant(n, 1, 1.0 / static_cast<double>(n));
    const MatrixXd d_input = backward(head.net, trace, out_grad).d_input;

    LearnedConstraintValue out;
    out.cvar = trace.output.col(0).mean();
    out.value = out.cvar - delta;
    out.gradient = d_input.leftCols(sd).colwise().sum().transpose();

    double mu = 0.0, m2 = 0.0;
    for (int j = 0; j < n; ++j) {
        const double tau = (static_cast<double>(j) + 0.5) / static_cast<double>(n);
        const double q = head.quantile(state, tau);
        mu += q;
        m2 += q * q;
    }
    mu /= n;
    out.mu = mu;
    out.sigma = std::sqrt(std::max(m2 / n - mu * mu, 0.0));
    if (!std::isfinite(out.value) || !out.gradient.allFinite())
        throw std::runtime_error("iqn_constraint_value: non-finite output");
    return out;
}

// Quantile-regression Huber loss for a single (tau, d) pair.
inline double quantile_huber(double tau, double d, double kappa) {
    const double weight = std::abs(tau - (d < 0.0 ? 1.0 : 0.0));
    return weight * huber(d, kappa);
}

// One Huber quantile-regression TD step on the IQN head; returns the loss.
// tau and tau' are drawn independently uniform on [0, 1].
inline double iqn_td_update(QuantileHead& head, const FvfBatch& batch, Rng& rng) {
    const Eigen::Index b = batch.states.rows();
    const int state_dim = static_cast<int>(batch.states.cols());
    const Eigen::Index rows = b * head.n_tau;

    // target samples: k'(s) + gamma eta^{tau'}(s'), averaged pairwise below
    MatrixXd target_vals(b, head.n_tau_prime);
    for (Eigen::Index i = 0; i < b; ++i) {
        const bool done = batch.absorbing[static_cast<std::size_t>(i)];
        const double kp = positive_part(batch.costs(i));
        for (int j = 0; j < head.n_tau_prime; ++j) {
            const double tp = rng.uniform();
            const double next =
                done ? 0.0 : head.quantile_target(batch.next_states.row(i).transpose(), tp);
            target_vals(i, j) = kp + head.gamma * next;
        }
    }

    MatrixXd inputs(rows, state_dim + head.embed_dim);
    VectorXd taus(rows);
    for (Eigen::Index i = 0; i < b; ++i) {
        for (int j = 0; j < head.n_tau; ++j) {
            const double tau = rng.uniform();
            taus(i * head.n_tau + j) = tau;
            inputs.row(i * head.n_tau + j) =
                head.embed_input(batch.states.row(i).transpose(), tau).transpose();
        }
    }

    const auto trace = head.net.trace(inputs);
    MatrixXd out_grad = MatrixXd::Zero(rows, 1);
    double loss = 0.0;
    const double denom =
        static_cast<double>(b) * head.n_tau * head.n_tau_prime;
    for (Eigen::Index i = 0; i < b; ++i) {
        for (int j = 0; j < head.n_tau; ++j) {
            const Eigen::Index r = i * head.n_tau + j;
            const double tau = taus(r);
            const double pred = trace.output(r, 0);
            for (int jp = 0; jp < head.n_tau_prime; ++jp) {
                const double d = target_vals(i, jp) - pred;
                const double weight = std::abs(tau - (d < 0.0 ? 1.0 : 0.0));
                loss += weight * huber(d, head.kappa);
                out_grad(r, 0) += -weight * huber_grad(d, head.kappa) / denom;
            }
        }
    }
    loss /= denom;
    auto grads = backward(head.net, trace, out_grad);
    head.opt.step(head.net, grads);
    head.target.polyak_update(head.net);
    return loss;
}

}  // namespace datacom
