#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <stdexcept>
#include <vector>

#include "datacom/gaussian.hpp"
#include "datacom/manifold.hpp"
#include "datacom/net.hpp"

namespace datacom {

inline double positive_part(double k) { return std::max(k, 0.0); }

inline double huber(double d, double kappa) {
    const double ad = std::abs(d);
    return ad < kappa ? d * d / (2.0 * kappa) : ad - kappa / 2.0;
}

inline double huber_grad(double d, double kappa) {
    return std::abs(d) < kappa ? d / kappa : (d > 0.0 ? 1.0 : -1.0);
}

// Gaussian feasibility-value head: one network emitting mu >= 0 (softplus)
// and sigma > 0 (exponential), with a Polyak-tracked target shadow.
struct GaussianValueHead {
    DenseNet net;
    TargetNetwork target;
    Adam opt;
    double gamma = 0.99;
    double k_max = 1.0;
    bool clip_targets = true;
    double sigma_min_sq = 1e-6;

    static GaussianValueHead make(int state_dim, const std::vector<int>& hidden, double gamma,
                                  double lr, double tau, Rng& rng) {
        GaussianValueHead h;
        h.net = DenseNet::make(state_dim, hidden,
                               {Activation::Softplus, Activation::Exponential}, rng);
        h.target = TargetNetwork::make(h.net, tau);
        h.opt = Adam::make(h.net, lr);
        h.gamma = gamma;
        return h;
    }

    double value_bound() const { return k_max / (1.0 - gamma); }

    // columns: (mu, sigma)
    MatrixXd predict(const MatrixXd& states) const { return net.forward(states); }
    MatrixXd predict_target(const MatrixXd& states) const { return target.net.forward(states); }
};

struct MomentTargets {
    double mean;
    double stddev;
    double variance_prefloor;
};

// One-sample Gaussian moment targets under the law of total variance:
//   mu*(s)    = k' + gamma mu_tgt(s')
//   Sigma*(s) = k'^2 + 2 gamma k' mu_tgt(s') + gamma^2 (Sigma_tgt(s') + mu_tgt(s')^2) - mu(s)^2
// where mu(s) is the current estimate of the mean at s. The printed variant
// with a 2 gamma k' Sigma(s') cross term is kept below as a regression guard:
// it produces negative variances on deterministic chains.
inline MomentTargets gaussian_moment_targets(double k_cost, double gamma, double mu_next,
                                             double sigma_next, double mu_state,
                                             double sigma_min_sq = 1e-6) {
    const double kp = positive_part(k_cost);
    MomentTargets t;
    t.mean = kp + gamma * mu_next;
    t.variance_prefloor = kp * kp + 2.0 * gamma * kp * mu_next +
                          gamma * gamma * (sigma_next * sigma_next + mu_next * mu_next) -
                          mu_state * mu_state;
    t.stddev = std::sqrt(std::max(t.variance_prefloor, sigma_min_sq));
    return t;
}

inline double gaussian_variance_target_printed_cross_term(double k_cost, double gamma,
                                                          double mu_next, double sigma_next,
                                                          double mu_state) {
    const double kp = positive_part(k_cost);
    return kp * kp + 2.0 * gamma * kp * sigma_next * sigma_next +
           gamma * gamma * (sigma_next * sigma_next + mu_next * mu_next) - mu_state * mu_state;
}

// 1-D reduction of the 2-Wasserstein TD loss between Gaussians.
inline double wasserstein_loss(double mu, double sigma, double mu_target, double sigma_target) {
    const double dm = mu - mu_target;
    const double ds = sigma - sigma_target;
    return dm * dm + ds * ds;
}

struct FvfBatch {
    MatrixXd states;       // B x state_dim
    MatrixXd next_states;  // B x state_dim
    VectorXd costs;        // k(s), B
    std::vector<bool> absorbing;
};

struct FvfTargets {
    VectorXd means;
    VectorXd stddevs;
};

// TD targets for a batch; next-state moments come from the target network,
// the subtracted mean-at-s estimate as well.
inline FvfTargets gaussian_td_targets(const FvfBatch& batch, const GaussianValueHead& head) {
    const Eigen::Index b = batch.states.rows();
    const MatrixXd next = head.predict_target(batch.next_states);
    const MatrixXd cur = head.predict_target(batch.states);
    FvfTargets t;
    t.means.resize(b);
    t.stddevs.resize(b);
    const double bound = head.value_bound();
    for (Eigen::Index i = 0; i < b; ++i) {
        const bool done = batch.absorbing[static_cast<std::size_t>(i)];
        const double mu_next = done ? 0.0 : next(i, 0);
        const double sigma_next = done ? 0.0 : next(i, 1);
        auto m = gaussian_moment_targets(batch.costs(i), head.gamma, mu_next, sigma_next,
                                         cur(i, 0), head.sigma_min_sq);
        if (head.clip_targets) m.mean = std::clamp(m.mean, 0.0, bound);
        t.means(i) = m.mean;
        t.stddevs(i) = m.stddev;
    }
    return t;
}

// One Wasserstein TD step on the Gaussian head; returns the batch loss.
inline double fvf_update(GaussianValueHead& head, const FvfBatch& batch) {
    const FvfTargets targets = gaussian_td_targets(batch, head);
    const auto trace = head.net.trace(batch.states);
    const Eigen::Index b = batch.states.rows();
    MatrixXd out_grad(b, 2);
    double loss = 0.0;
    for (Eigen::Index i = 0; i < b; ++i) {
        const double mu = trace.output(i, 0);
        const double sigma = trace.output(i, 1);
        loss += wasserstein_loss(mu, sigma, targets.means(i), targets.stddevs(i));
        out_grad(i, 0) = 2.0 * (mu - targets.means(i)) / static_cast<double>(b);
        out_grad(i, 1) = 2.0 * (sigma - targets.stddevs(i)) / static_cast<double>(b);
    }
    loss /= static_cast<double>(b);
    auto grads = backward(head.net, trace, out_grad);
    head.opt.step(head.net, grads);
    head.target.polyak_update(head.net);
    return loss;
}

struct RiskSpec {
    double alpha = 0.9;  // accepted risk is 1 - alpha

    void validate() const {
        if (!(alpha > 0.0 && alpha < 1.0))
            throw std::invalid_argument("RiskSpec: alpha must be in (0,1)");
    }
};

struct LearnedConstraintValue {
    double value;       // CVaR_alpha(s) - delta
    VectorXd gradient;  // d value / d s
    double mu;
    double sigma;
    double cvar;
};

// The learned safety constraint F(s) = CVaR_alpha^F(s) - delta and its state
// Jacobian, pulled through the network's input gradient.
inline LearnedConstraintValue learned_constraint_value(const GaussianValueHead& head,
                                                       const VectorXd& state,
                                                       const RiskSpec& risk, double delta) {
    risk.validate();
    const auto trace = head.net.trace(state.transpose());
    LearnedConstraintValue out;
    out.mu = trace.output(0, 0);
    out.sigma = trace.output(0, 1);
    if (!std::isfinite(out.mu) || !std::isfinite(out.sigma))
        throw std::runtime_error("learned_constraint: non-finite network output");
    const double tail = cvar_tail_factor(risk.alpha);
    out.cvar = out.mu + out.sigma * tail;
    out.value = out.cvar - delta;
    MatrixXd out_grad(1, 2);
    out_grad(0, 0) = 1.0;
    out_grad(0, 1) = tail;
    out.gradient = backward(head.net, trace, out_grad).d_input.row(0).transpose();
    return out;
}

// Batched variant: values (B) and gradients (B x state_dim).
inline void learned_constraint_batch(const GaussianValueHead& head, const MatrixXd& states,
                                     const RiskSpec& risk, double delta, VectorXd& values,
                                     MatrixXd& gradients) {
    risk.validate();
    const auto trace = head.net.trace(states);
    const Eigen::Index b = states.rows();
    const double tail = cvar_tail_factor(risk.alpha);
    values.resize(b);
    for (Eigen::Index i = 0; i < b; ++i) {
        values(i) = trace.output(i, 0) + tail * trace.output(i, 1) - delta;
        if (!std::isfinite(values(i)))
            throw std::runtime_error("learned_constraint: non-finite network output");
    }
    MatrixXd out_grad(b, 2);
    out_grad.col(0).setOnes();
    out_grad.col(1).setConstant(tail);
    gradients = backward(head.net, trace, out_grad).d_input;
}

// k-step feasibility value: sum_{t=0}^{K} gamma^t k'(s_t) over a trajectory
// window (shorter windows terminate early).
inline double k_step_fvf_target(const std::vector<double>& cost_window, double gamma, int horizon) {
    double acc = 0.0;
    double disc = 1.0;
    const int steps = std::min<int>(horizon + 1, static_cast<int>(cost_window.size()));
    for (int t = 0; t < steps; ++t) {
        acc += disc * positive_part(cost_window[static_cast<std::size_t>(t)]);
        disc *= gamma;
    }
    return acc;
}

// Direct stochastic stepwise-constraint model (extension): Gaussian over
// k(s) with closed-form VaR/CVaR.
struct DirectConstraintHead {
    DenseNet net;  // outputs (mean, stddev); variance is stddev^2
    Adam opt;
    double sigma_floor = 1e-4;  // variance floor 1e-8

    static DirectConstraintHead make(int state_dim, const std::vector<int>& hidden, double lr,
                                     Rng& rng) {
        DirectConstraintHead h;
        h.net = DenseNet::make(state_dim, hidden, {Activation::Identity, Activation::Exponential},
                               rng);
        h.opt = Adam::make(h.net, lr);
        return h;
    }

    double var(const VectorXd& state, double alpha) const {
        const VectorXd out = net.forward_one(state);
        return var_gaussian(out(0), std::max(out(1), sigma_floor), alpha);
    }

    double cvar(const VectorXd& state, double alpha) const {
        const VectorXd out = net.forward_one(state);
        return cvar_gaussian(out(0), std::max(out(1), sigma_floor), alpha);
    }
};

inline double gaussian_nll(double k, double mean, double sigma) {
    const double d = k - mean;
    return 0.5 * std::log(2.0 * M_PI) + std::log(sigma) + 0.5 * d * d / (sigma * sigma);
}

// One NLL step regressing the stochastic constraint; returns the batch loss.
inline double direct_constraint_nll_update(DirectConstraintHead& head, const MatrixXd& states,
                                           const VectorXd& k_values) {
    const auto trace = head.net.trace(states);
    const Eigen::Index b = states.rows();
    MatrixXd out_grad(b, 2);
    double loss = 0.0;
    for (Eigen::Index i = 0; i < b; ++i) {
        const double mean = trace.output(i, 0);
        const double sigma = std::max(trace.output(i, 1), head.sigma_floor);
        const double d = k_values(i) - mean;
        loss += gaussian_nll(k_values(i), mean, sigma);
        out_grad(i, 0) = -d / (sigma * sigma) / static_cast<double>(b);
        const bool floored = trace.output(i, 1) < head.sigma_floor;
        out_grad(i, 1) =
            floored ? 0.0 : (1.0 / sigma - d * d / (sigma * sigma * sigma)) / static_cast<double>(b);
    }
    loss /= static_cast<double>(b);
    auto grads = backward(head.net, trace, out_grad);
    head.opt.step(head.net, grads);
    return loss;
}

}  // namespace datacom
