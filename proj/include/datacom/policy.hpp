#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <vector>

#include "datacom/net.hpp"
#include "datacom/rng.hpp"

namespace datacom {

// Diagonal Gaussian policy over the tangential control input u, squashed by
// tanh to a symmetric box. The network emits (means, log-stds).
struct GaussianPolicy {
    DenseNet net;
    Adam opt;
    VectorXd bound;  // box half-widths for u
    double log_std_min = -20.0;
    double log_std_max = 2.0;

    static GaussianPolicy make(int state_dim, const std::vector<int>& hidden, VectorXd bound,
                               double lr, Rng& rng) {
        GaussianPolicy p;
        const int dim = static_cast<int>(bound.size());
        p.net = DenseNet::make(state_dim, hidden,
                               std::vector<Activation>(2 * dim, Activation::Identity), rng);
        p.opt = Adam::make(p.net, lr);
        p.bound = std::move(bound);
        return p;
    }

    int control_dim() const { return static_cast<int>(bound.size()); }

    struct Sample {
        VectorXd u;        // squashed control input
        VectorXd z;        // pre-squash Gaussian sample
        VectorXd xi;       // standard-normal noise (for reparameterized grads)
        VectorXd mean, log_std;
        double log_prob;   // log pi(u|s), squash correction included
    };

    static double squash_log_det(double z, double bound) {
        // log(bound * (1 - tanh(z)^2)), stable for large |z|
        return std::log(bound) + 2.0 * (std::log(2.0) - z - detail::softplus(-2.0 * z));
    }

    Sample sample_from_output(const VectorXd& out, Rng& rng) const {
        const int dim = control_dim();
        Sample s;
        s.mean = out.head(dim);
        s.log_std = out.tail(dim).cwiseMax(log_std_min).cwiseMin(log_std_max);
        s.xi.resize(dim);
        s.z.resize(dim);
        s.u.resize(dim);
        s.log_prob = 0.0;
        for (int i = 0; i < dim; ++i) {
            s.xi(i) = rng.normal();
            const double std = std::exp(s.log_std(i));
            s.z(i) = s.mean(i) + std * s.xi(i);
            s.u(i) = bound(i) * std::tanh(s.z(i));
            s.log_prob += -s.log_std(i) - 0.5 * s.xi(i) * s.xi(i) - 0.5 * std::log(2.0 * M_PI) -
                          squash_log_det(s.z(i), bound(i));
        }
        return s;
    }

    Sample sample(const VectorXd& state, Rng& rng) const {
        return sample_from_output(net.forward_one(state), rng);
    }

    // deterministic action for evaluation: squashed mean
    VectorXd mean_control(const VectorXd& state) const {
        const VectorXd out = net.forward_one(state);
        const int dim = control_dim();
        VectorXd u(dim);
        for (int i = 0; i < dim; ++i) u(i) = bound(i) * std::tanh(out(i));
        return u;
    }
};

// Scalar adaptive-moment step for the entropy temperature.
struct ScalarAdam {
    double learning_rate = 3e-4;
    double beta1 = 0.9, beta2 = 0.999, epsilon = 1e-8;
    double m = 0.0, v = 0.0;
    long step_count = 0;

    void step(double& param, double grad) {
        ++step_count;
        m = beta1 * m + (1.0 - beta1) * grad;
        v = beta2 * v + (1.0 - beta2) * grad * grad;
        const double mh = m / (1.0 - std::pow(beta1, static_cast<double>(step_count)));
        const double vh = v / (1.0 - std::pow(beta2, static_cast<double>(step_count)));
        param -= learning_rate * mh / (std::sqrt(vh) + epsilon);
    }
};

// Automatic entropy-temperature tuning toward a target entropy.
struct EntropyTemperature {
    double log_alpha = std::log(0.2);
    double target_entropy = -1.0;
    ScalarAdam opt;

    double alpha() const { return std::exp(log_alpha); }

    void update(double mean_log_prob) {
        // d/dlog_alpha of -log_alpha * (log_prob + target)
        opt.step(log_alpha, -(mean_log_prob + target_entropy));
    }
};

}  // namespace datacom
