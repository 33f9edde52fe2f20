#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include "datacom/rng.hpp"

namespace datacom {

using Eigen::MatrixXd;
using Eigen::VectorXd;

enum class Activation { Identity, Relu, Softplus, Exponential, Tanh };

namespace detail {

// Pre-activations of positive heads are clamped so softplus/exp never
// underflow to zero for finite inputs.
constexpr double kPositiveHeadFloor = -60.0;

inline double softplus(double x) {
    x = std::max(x, kPositiveHeadFloor);
    return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
}

inline double apply_activation(Activation act, double x) {
    switch (act) {
        case Activation::Identity: return x;
        case Activation::Relu: return x > 0.0 ? x : 0.0;
        case Activation::Softplus: return softplus(x);
        case Activation::Exponential: return std::exp(std::max(x, kPositiveHeadFloor));
        case Activation::Tanh: return std::tanh(x);
    }
    return x;
}

inline double activation_grad(Activation act, double x) {
    switch (act) {
        case Activation::Identity: return 1.0;
        case Activation::Relu: return x > 0.0 ? 1.0 : 0.0;
        case Activation::Softplus:
            return x < kPositiveHeadFloor ? 0.0 : 1.0 / (1.0 + std::exp(-x));
        case Activation::Exponential:
            return x < kPositiveHeadFloor ? 0.0 : std::exp(x);
        case Activation::Tanh: {
            const double t = std::tanh(x);
            return 1.0 - t * t;
        }
    }
    return 1.0;
}

}  // namespace detail

// Fixed-architecture multilayer perceptron. Rows of batch matrices are
// samples. Hidden layers use ReLU; each output unit has its own head
// activation so a single network can emit e.g. (softplus mean, exp stddev).
struct DenseNet {
    std::vector<int> widths;                 // input, hidden..., output
    std::vector<MatrixXd> weights;           // weights[l]: widths[l+1] x widths[l]
    std::vector<VectorXd> biases;
    std::vector<Activation> head;            // one tag per output unit
    Activation hidden_activation = Activation::Relu;

    static DenseNet make(int input, const std::vector<int>& hidden, std::vector<Activation> head_tags,
                         Rng& rng) {
        DenseNet net;
        net.widths.push_back(input);
        for (int h : hidden) net.widths.push_back(h);
        net.widths.push_back(static_cast<int>(head_tags.size()));
        net.head = std::move(head_tags);
        for (std::size_t l = 0; l + 1 < net.widths.size(); ++l) {
            const int fan_in = net.widths[l];
            const int fan_out = net.widths[l + 1];
            const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
            MatrixXd w(fan_out, fan_in);
            for (int i = 0; i < fan_out; ++i)
                for (int j = 0; j < fan_in; ++j) w(i, j) = rng.uniform(-bound, bound);
            VectorXd b(fan_out);
            for (int i = 0; i < fan_out; ++i) b(i) = rng.uniform(-bound, bound);
            net.weights.push_back(std::move(w));
            net.biases.push_back(std::move(b));
        }
        return net;
    }

    int input_dim() const { return widths.front(); }
    int output_dim() const { return widths.back(); }
    std::size_t layer_count() const { return weights.size(); }

    void check_input(const MatrixXd& x) const {
        if (x.cols() != input_dim())
            throw std::invalid_argument("DenseNet: input has " + std::to_string(x.cols()) +
                                        " columns, expected " + std::to_string(input_dim()));
    }

    struct Trace {
        std::vector<MatrixXd> layer_in;  // input to layer l (batch x widths[l])
        std::vector<MatrixXd> pre;       // pre-activation of layer l
        MatrixXd output;
    };

    Trace trace(const MatrixXd& x) const {
        check_input(x);
        Trace t;
        t.layer_in.reserve(layer_count());
        t.pre.reserve(layer_count());
        MatrixXd cur = x;
        for (std::size_t l = 0; l < layer_count(); ++l) {
            t.layer_in.push_back(cur);
            MatrixXd pre = (cur * weights[l].transpose()).rowwise() + biases[l].transpose();
            t.pre.push_back(pre);
            const bool last = (l + 1 == layer_count());
            cur.resize(pre.rows(), pre.cols());
            for (Eigen::Index i = 0; i < pre.rows(); ++i)
                for (Eigen::Index j = 0; j < pre.cols(); ++j)
                    cur(i, j) = detail::apply_activation(
                        last ? head[static_cast<std::size_t>(j)] : hidden_activation, pre(i, j));
        }
        t.output = cur;
        return t;
    }

    MatrixXd forward(const MatrixXd& x) const { return trace(x).output; }

    VectorXd forward_one(const VectorXd& x) const {
        MatrixXd out = forward(x.transpose());
        return out.row(0).transpose();
    }
};

struct NetGradients {
    std::vector<MatrixXd> d_weights;
    std::vector<VectorXd> d_biases;
    MatrixXd d_input;  // batch x input_dim

    void scale(double s) {
        for (auto& g : d_weights) g *= s;
        for (auto& g : d_biases) g *= s;
        d_input *= s;
    }

    bool finite() const {
        for (const auto& g : d_weights)
            if (!g.allFinite()) return false;
        for (const auto& g : d_biases)
            if (!g.allFinite()) return false;
        return true;
    }
};

// Reverse-mode gradients of sum_batch <out_grad, forward(x)> with respect to
// parameters and inputs. out_grad has one row per batch sample.
inline NetGradients backward(const DenseNet& net, const DenseNet::Trace& t, const MatrixXd& out_grad) {
    if (out_grad.rows() != t.output.rows() || out_grad.cols() != t.output.cols())
        throw std::invalid_argument("backward: out_grad shape mismatch");
    NetGradients g;
    g.d_weights.resize(net.layer_count());
    g.d_biases.resize(net.layer_count());
    MatrixXd delta = out_grad;
    for (std::size_t li = net.layer_count(); li-- > 0;) {
        const bool last = (li + 1 == net.layer_count());
        const MatrixXd& pre = t.pre[li];
        for (Eigen::Index i = 0; i < delta.rows(); ++i)
            for (Eigen::Index j = 0; j < delta.cols(); ++j)
                delta(i, j) *= detail::activation_grad(
                    last ? net.head[static_cast<std::size_t>(j)] : net.hidden_activation, pre(i, j));
        g.d_weights[li] = delta.transpose() * t.layer_in[li];
        g.d_biases[li] = delta.colwise().sum().transpose();
        if (li > 0)
            delta = (delta * net.weights[li]).eval();
        else
            g.d_input = delta * net.weights[0];
    }
    return g;
}

// Adaptive-moment optimizer state for one DenseNet.
struct Adam {
    double learning_rate = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
    long step_count = 0;
    std::vector<MatrixXd> m_w, v_w;
    std::vector<VectorXd> m_b, v_b;

    static Adam make(const DenseNet& net, double lr) {
        Adam a;
        a.learning_rate = lr;
        for (std::size_t l = 0; l < net.layer_count(); ++l) {
            a.m_w.push_back(MatrixXd::Zero(net.weights[l].rows(), net.weights[l].cols()));
            a.v_w.push_back(MatrixXd::Zero(net.weights[l].rows(), net.weights[l].cols()));
            a.m_b.push_back(VectorXd::Zero(net.biases[l].size()));
            a.v_b.push_back(VectorXd::Zero(net.biases[l].size()));
        }
        return a;
    }

    void step(DenseNet& net, const NetGradients& grad) {
        if (!grad.finite())
            throw std::runtime_error("Adam::step: non-finite gradient at step " +
                                     std::to_string(step_count));
        ++step_count;
        const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(step_count));
        const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(step_count));
        for (std::size_t l = 0; l < net.layer_count(); ++l) {
            m_w[l] = beta1 * m_w[l] + (1.0 - beta1) * grad.d_weights[l];
            v_w[l] = beta2 * v_w[l].array().matrix() +
                     (1.0 - beta2) * grad.d_weights[l].array().square().matrix();
            net.weights[l].array() -= learning_rate * (m_w[l].array() / bc1) /
                                      ((v_w[l].array() / bc2).sqrt() + epsilon);
            m_b[l] = beta1 * m_b[l] + (1.0 - beta1) * grad.d_biases[l];
            v_b[l] = beta2 * v_b[l].array().matrix() +
                     (1.0 - beta2) * grad.d_biases[l].array().square().matrix();
            net.biases[l].array() -= learning_rate * (m_b[l].array() / bc1) /
                                     ((v_b[l].array() / bc2).sqrt() + epsilon);
        }
    }
};

// Shadow copy of a source network, tracked with Polyak soft updates.
struct TargetNetwork {
    DenseNet net;
    double tau = 1e-3;

    static TargetNetwork make(const DenseNet& source, double tau) {
        TargetNetwork t;
        t.net = source;
        t.tau = tau;
        return t;
    }

    void polyak_update(const DenseNet& source) {
        for (std::size_t l = 0; l < net.layer_count(); ++l) {
            if (net.weights[l].rows() != source.weights[l].rows() ||
                net.weights[l].cols() != source.weights[l].cols())
                throw std::invalid_argument("polyak_update: shape mismatch");
            net.weights[l] = (1.0 - tau) * net.weights[l] + tau * source.weights[l];
            net.biases[l] = (1.0 - tau) * net.biases[l] + tau * source.biases[l];
        }
    }
};

}  // namespace datacom
