#pragma once

#include <cmath>
#include <stdexcept>
#include <vector>

#include "datacom/feasibility.hpp"

namespace datacom {

// Adaptive constraint threshold delta = softplus(rho), tuned after each
// episode against the accepted discounted cost budget.
struct ThresholdState {
    double rho = 0.0;           // unconstrained parameter
    double learning_rate = 5e-4;
    double cost_budget = 0.0;   // C-bar
    double kappa = 1.0;         // Huber transition point
    bool adaptive = true;

    double delta() const { return detail::softplus(rho); }

    static double inverse_softplus(double y) {
        if (!(y > 0.0)) throw std::invalid_argument("inverse_softplus: y must be positive");
        // log(exp(y) - 1), stable for large y
        return y + std::log1p(-std::exp(-y));
    }

    static ThresholdState make(double delta0, double lr, double cost_budget, bool adaptive) {
        ThresholdState s;
        s.rho = inverse_softplus(delta0);
        s.learning_rate = lr;
        s.cost_budget = cost_budget;
        s.adaptive = adaptive;
        return s;
    }
};

// d_c(s_i) = sum_{t=i}^{H} gamma^{t-i} k'(s_t) - C_bar, one backward sweep.
inline std::vector<double> episodic_cost_gaps(const std::vector<double>& step_costs, double gamma,
                                              double cost_budget) {
    std::vector<double> gaps(step_costs.size());
    double tail = 0.0;
    for (std::size_t i = step_costs.size(); i-- > 0;) {
        tail = positive_part(step_costs[i]) + gamma * tail;
        gaps[i] = tail - cost_budget;
    }
    return gaps;
}

// One gradient step on L_delta = 1/H sum_i Huber(d_c(s_i) - (CVaR(s_i) - delta)).
// The gradient flows only through delta; CVaR values are on-policy snapshots.
inline void delta_update(ThresholdState& state, const std::vector<double>& gaps,
                         const std::vector<double>& cvar_values) {
    if (!state.adaptive) return;
    if (gaps.size() != cvar_values.size())
        throw std::invalid_argument("delta_update: gaps/cvar length mismatch");
    if (gaps.empty()) return;

    const double delta = state.delta();
    double grad = 0.0;
    std::size_t used = 0;
    for (std::size_t i = 0; i < gaps.size(); ++i) {
        if (!std::isfinite(gaps[i]) || !std::isfinite(cvar_values[i])) continue;  // skip with warning upstream
        const double residual = gaps[i] - (cvar_values[i] - delta);
        // d residual / d delta = +1
        grad += huber_grad(residual, state.kappa);
        ++used;
    }
    if (used == 0) return;
    grad /= static_cast<double>(used);
    // softplus chain rule
    const double d_delta_d_rho = 1.0 / (1.0 + std::exp(-state.rho));
    state.rho -= state.learning_rate * grad * d_delta_d_rho;
}

}  // namespace datacom
