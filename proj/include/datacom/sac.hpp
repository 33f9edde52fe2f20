#pragma once

#include <Eigen/Dense>
#include <stdexcept>
#include <vector>

#include "datacom/net.hpp"
#include "datacom/policy.hpp"
#include "datacom/replay.hpp"

namespace datacom {

// Twin soft Q critic on state x environment action, so the learned values are
// invariant to how the constraint (and with it the action mapping) evolves.
struct SoftQCritic {
    DenseNet q1, q2;
    TargetNetwork t1, t2;
    Adam opt1, opt2;
    double gamma = 0.99;

    static SoftQCritic make(int state_dim, int action_dim, const std::vector<int>& hidden,
                            double gamma, double lr, double tau, Rng& rng) {
        SoftQCritic c;
        c.q1 = DenseNet::make(state_dim + action_dim, hidden, {Activation::Identity}, rng);
        c.q2 = DenseNet::make(state_dim + action_dim, hidden, {Activation::Identity}, rng);
        c.t1 = TargetNetwork::make(c.q1, tau);
        c.t2 = TargetNetwork::make(c.q2, tau);
        c.opt1 = Adam::make(c.q1, lr);
        c.opt2 = Adam::make(c.q2, lr);
        c.gamma = gamma;
        return c;
    }

    double q_min(const VectorXd& state, const VectorXd& action) const {
        VectorXd sa(state.size() + action.size());
        sa << state, action;
        return std::min(q1.forward_one(sa)(0), q2.forward_one(sa)(0));
    }
};

// Safe action resampled at s' by the caller, with its corrected log density.
struct NextActionSample {
    VectorXd action;
    double log_prob;
};

// TD regression of both twins toward r + gamma (min-twin target - alpha log p').
inline double critic_update(SoftQCritic& critic, const std::vector<const Transition*>& batch,
                            const std::vector<NextActionSample>& next_actions, double alpha_ent) {
    const Eigen::Index b = static_cast<Eigen::Index>(batch.size());
    const int sd = static_cast<int>(batch[0]->state.size());
    const int ad = static_cast<int>(batch[0]->action.size());

    MatrixXd sa(b, sd + ad), sa_next(b, sd + ad);
    for (Eigen::Index i = 0; i < b; ++i) {
        sa.row(i).head(sd) = batch[static_cast<std::size_t>(i)]->state.transpose();
        sa.row(i).tail(ad) = batch[static_cast<std::size_t>(i)]->action.transpose();
        sa_next.row(i).head(sd) = batch[static_cast<std::size_t>(i)]->next_state.transpose();
        sa_next.row(i).tail(ad) = next_actions[static_cast<std::size_t>(i)].action.transpose();
    }

    const MatrixXd qt1 = critic.t1.net.forward(sa_next);
    const MatrixXd qt2 = critic.t2.net.forward(sa_next);
    VectorXd targets(b);
    for (Eigen::Index i = 0; i < b; ++i) {
        const auto& t = *batch[static_cast<std::size_t>(i)];
        double y = t.reward;
        if (!t.absorbing) {
            const double soft_v = std::min(qt1(i, 0), qt2(i, 0)) -
                                  alpha_ent * next_actions[static_cast<std::size_t>(i)].log_prob;
            y += critic.gamma * soft_v;
        }
        targets(i) = y;
    }

    double loss = 0.0;
    for (int twin = 0; twin < 2; ++twin) {
        DenseNet& q = twin == 0 ? critic.q1 : critic.q2;
        Adam& opt = twin == 0 ? critic.opt1 : critic.opt2;
        const auto trace = q.trace(sa);
        MatrixXd out_grad(b, 1);
        for (Eigen::Index i = 0; i < b; ++i) {
            const double err = trace.output(i, 0) - targets(i);
            loss += err * err;
            out_grad(i, 0) = 2.0 * err / static_cast<double>(b);
        }
        auto grads = backward(q, trace, out_grad);
        opt.step(q, grads);
    }
    loss /= static_cast<double>(2 * b);
    if (!std::isfinite(loss))
        throw std::runtime_error("critic_update: non-finite loss");
    critic.t1.polyak_update(critic.q1);
    critic.t2.polyak_update(critic.q2);
    return loss;
}

// Affine action map at one state: a = base + basis_action * u, together with
// the log pseudo-determinant correction of the full tangent basis.
struct ActionMapSample {
    VectorXd base;          // drift compensation + retraction, action block
    MatrixXd basis_action;  // action rows of B_u
    double log_det_correction = 0.0;
    bool fault = false;
};

// Reparameterized policy step maximizing E[Q(s, W(u)) - alpha log p(a|s)].
// Q gradients are pulled back through the affine map (grad_u W = B_u) and
// the tanh squash. Returns the batch policy loss; also tunes the temperature.
inline double policy_update(GaussianPolicy& policy, SoftQCritic& critic,
                            EntropyTemperature& temperature, const MatrixXd& states,
                            const std::vector<ActionMapSample>& maps, Rng& rng) {
    const Eigen::Index b = states.rows();
    const int dim = policy.control_dim();
    const double alpha = temperature.alpha();

    const auto pol_trace = policy.net.trace(states);
    std::vector<GaussianPolicy::Sample> samples;
    samples.reserve(static_cast<std::size_t>(b));
    MatrixXd sa(b, states.cols() + maps[0].base.size());
    for (Eigen::Index i = 0; i < b; ++i) {
        auto s = policy.sample_from_output(pol_trace.output.row(i).transpose(), rng);
        const auto& map = maps[static_cast<std::size_t>(i)];
        VectorXd a = map.fault ? VectorXd::Zero(map.base.size())
                               : (map.base + map.basis_action * s.u).eval();
        sa.row(i).head(states.cols()) = states.row(i);
        sa.row(i).tail(a.size()) = a.transpose();
        samples.push_back(std::move(s));
    }

    const auto q1_trace = critic.q1.trace(sa);
    const auto q2_trace = critic.q2.trace(sa);
    // per-sample min twin: gradients flow through whichever is smaller
    MatrixXd mask1 = MatrixXd::Zero(b, 1), mask2 = MatrixXd::Zero(b, 1);
    VectorXd q_min(b);
    for (Eigen::Index i = 0; i < b; ++i) {
        if (q1_trace.output(i, 0) <= q2_trace.output(i, 0)) {
            mask1(i, 0) = 1.0;
            q_min(i) = q1_trace.output(i, 0);
        } else {
            mask2(i, 0) = 1.0;
            q_min(i) = q2_trace.output(i, 0);
        }
    }
    const MatrixXd dsa =
        backward(critic.q1, q1_trace, mask1).d_input + backward(critic.q2, q2_trace, mask2).d_input;

    MatrixXd out_grad = MatrixXd::Zero(b, 2 * dim);
    double loss = 0.0;
    double mean_log_prob = 0.0;
    const double inv_b = 1.0 / static_cast<double>(b);
    for (Eigen::Index i = 0; i < b; ++i) {
        const auto& s = samples[static_cast<std::size_t>(i)];
        const auto& map = maps[static_cast<std::size_t>(i)];
        const double log_p = s.log_prob - map.log_det_correction;
        loss += alpha * log_p - q_min(i);
        mean_log_prob += log_p;
        if (map.fault) continue;
        const VectorXd grad_a = dsa.row(i).tail(map.base.size()).transpose();
        const VectorXd grad_u = map.basis_action.transpose() * grad_a;
        for (int j = 0; j < dim; ++j) {
            const double t = std::tanh(s.z(j));
            const double dsquash = policy.bound(j) * (1.0 - t * t);
            const double dz_obj = alpha * 2.0 * t - grad_u(j) * dsquash;
            out_grad(i, j) = dz_obj * inv_b;
            const double std = std::exp(s.log_std(j));
            const bool clamped = s.log_std(j) <= policy.log_std_min + 1e-12 ||
                                 s.log_std(j) >= policy.log_std_max - 1e-12;
            out_grad(i, dim + j) =
                clamped ? 0.0 : (dz_obj * std * s.xi(j) - alpha) * inv_b;
        }
    }
    loss *= inv_b;
    mean_log_prob *= inv_b;

    auto grads = backward(policy.net, pol_trace, out_grad);
    if (!grads.finite())
        throw std::runtime_error("policy_update: non-finite gradient");
    policy.opt.step(policy.net, grads);
    temperature.update(mean_log_prob);
    return loss;
}

}  // namespace datacom
