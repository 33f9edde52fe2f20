#pragma once

#include <Eigen/Dense>
#include <cstddef>
#include <stdexcept>
#include <vector>

#include "datacom/rng.hpp"

namespace datacom {

struct Transition {
    Eigen::VectorXd state;
    Eigen::VectorXd action;
    double reward = 0.0;
    double cost = 0.0;  // k(s)
    Eigen::VectorXd next_state;
    bool absorbing = false;
};

// Ring buffer storage with stable eviction order.
struct TransitionRing {
    std::vector<Transition> data;
    std::size_t capacity = 0;
    std::size_t head = 0;  // next write slot once full

    void push(Transition t) {
        if (capacity == 0) return;
        if (data.size() < capacity) {
            data.push_back(std::move(t));
        } else {
            data[head] = std::move(t);
            head = (head + 1) % capacity;
        }
    }

    std::size_t size() const { return data.size(); }
};

// Main replay buffer plus the smaller failure buffer that keeps unsafe
// transitions (k > 0) alive past main-buffer eviction.
struct ReplayBuffer {
    TransitionRing main;
    TransitionRing failure;
    std::size_t warm_up = 0;

    static ReplayBuffer make(std::size_t capacity, std::size_t failure_capacity,
                             std::size_t warm_up) {
        ReplayBuffer buf;
        buf.main.capacity = capacity;
        buf.failure.capacity = failure_capacity;
        buf.warm_up = warm_up;
        return buf;
    }

    std::size_t total_size() const { return main.size() + failure.size(); }

    void push(const Transition& t) {
        main.push(t);
        if (t.cost > 0.0) failure.push(t);
    }

    bool ready(std::size_t batch_size) const {
        return total_size() >= warm_up && total_size() >= batch_size;
    }

    // Uniform over the concatenation of the two buffers, so the failure share
    // of a batch is proportional to the failure buffer size. Returns false
    // (refusal) when not enough data has been collected.
    bool sample(std::size_t batch_size, Rng& rng, std::vector<const Transition*>& out) const {
        if (!ready(batch_size)) return false;
        out.clear();
        out.reserve(batch_size);
        const std::size_t n_main = main.size();
        const std::size_t n_total = total_size();
        for (std::size_t i = 0; i < batch_size; ++i) {
            const std::size_t idx = rng.index(n_total);
            out.push_back(idx < n_main ? &main.data[idx] : &failure.data[idx - n_main]);
        }
        return true;
    }
};

}  // namespace datacom
