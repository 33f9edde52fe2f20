#pragma once

#include <algorithm>
#include <cmath>

#include "datacom/env.hpp"

namespace datacom {

// Cartpole with a goal position for the pole tip on the right side of the
// rail, an angle constraint at 90 degrees from upright, and a hard position
// clamp at the rail ends. Observation: [x, sin th, cos th, xdot, thdot].
class CartpoleEnv final : public Environment {
public:
    // physical parameters (classic benchmark values, all config-exposed)
    double cart_mass = 1.0;
    double pole_mass = 0.1;
    double pole_half_length = 0.5;  // center of mass; tip sits at 1.0
    double tip_length = 1.0;
    double gravity = 9.81;
    double force_scale = 10.0;
    double dt = 0.02;
    double rail_half_length = 5.0;
    double goal_tip_x = 2.5;
    double init_x = -2.5;
    double init_noise = 0.05;
    int max_steps = 500;
    DisturbanceSpec disturbance;

    int observation_dim() const override { return 5; }
    int action_dim() const override { return 1; }
    Eigen::VectorXd action_bound() const override { return Eigen::VectorXd::Ones(1); }
    int horizon() const override { return max_steps; }
    double k_max() const override { return 1.0; }  // |theta| <= pi gives k <= 1

    Eigen::VectorXd reset(Rng& rng) override {
        x_ = init_x + rng.uniform(-init_noise, init_noise);
        theta_ = rng.uniform(-init_noise, init_noise);
        x_dot_ = 0.0;
        theta_dot_ = 0.0;
        step_count_ = 0;
        disturbance_rng_ = Rng(rng.next_u64());
        return observation();
    }

    StepResult step(const Eigen::VectorXd& action) override {
        const double a = std::clamp(action(0), -1.0, 1.0);
        double x_acc, theta_acc;
        accelerations(a, x_acc, theta_acc);
        if (disturbance.active()) {
            x_acc = apply_disturbance(disturbance, x_acc, x_dot_, disturbance_rng_);
            theta_acc = apply_disturbance(disturbance, theta_acc, theta_dot_, disturbance_rng_);
        }
        // semi-implicit Euler
        x_dot_ += dt * x_acc;
        theta_dot_ += dt * theta_acc;
        x_ += dt * x_dot_;
        theta_ += dt * theta_dot_;
        theta_ = wrap_angle(theta_);
        if (x_ > rail_half_length) {
            x_ = rail_half_length;
            x_dot_ = std::min(x_dot_, 0.0);
        } else if (x_ < -rail_half_length) {
            x_ = -rail_half_length;
            x_dot_ = std::max(x_dot_, 0.0);
        }
        ++step_count_;
        if (!std::isfinite(x_) || !std::isfinite(theta_) || !std::isfinite(x_dot_) ||
            !std::isfinite(theta_dot_))
            throw std::runtime_error("CartpoleEnv: non-finite state");

        StepResult r;
        r.observation = observation();
        r.reward = reward();
        r.cost = cost();
        r.absorbing = step_count_ >= max_steps;
        return r;
    }

    Eigen::VectorXd observation() const override {
        Eigen::VectorXd obs(5);
        obs << x_, std::sin(theta_), std::cos(theta_), x_dot_, theta_dot_;
        return obs;
    }

    double reward() const {
        const double tip = x_ + tip_length * std::sin(theta_);
        return std::clamp(1.0 - std::abs(goal_tip_x - tip) / 4.0, 0.0, 1.0);
    }

    double cost() const { return std::max(std::abs(theta_) / (0.5 * M_PI) - 1.0, 0.0); }

    // nominal (f, G) in observation coordinates; the force enters through the
    // acceleration rows only, and the dynamics are exactly affine in a.
    void dynamics(const Eigen::VectorXd& obs, Eigen::VectorXd& f,
                  Eigen::MatrixXd& g) const override {
        const double norm = std::hypot(obs(1), obs(2));
        const double sin_t = obs(1) / norm;
        const double cos_t = obs(2) / norm;
        const double x_dot = obs(3);
        const double theta_dot = obs(4);
        double x_acc0, theta_acc0, x_acc1, theta_acc1;
        accelerations(0.0, sin_t, cos_t, theta_dot, x_acc0, theta_acc0);
        accelerations(1.0, sin_t, cos_t, theta_dot, x_acc1, theta_acc1);
        f.resize(5);
        f << x_dot, cos_t * theta_dot, -sin_t * theta_dot, x_acc0, theta_acc0;
        g = Eigen::MatrixXd::Zero(5, 1);
        g(3, 0) = x_acc1 - x_acc0;
        g(4, 0) = theta_acc1 - theta_acc0;
    }

    bool has_analytic_constraint() const override { return true; }

    // k(s) = |theta| / (pi/2) - 1 from the observation's (sin, cos) pair
    void analytic_constraint(const Eigen::VectorXd& obs, Eigen::VectorXd& k,
                             Eigen::MatrixXd& jacobian) const override {
        const double s = obs(1), c = obs(2);
        const double theta = std::atan2(s, c);
        k.resize(1);
        k(0) = std::abs(theta) / (0.5 * M_PI) - 1.0;
        jacobian = Eigen::MatrixXd::Zero(1, 5);
        const double sign = theta > 0.0 ? 1.0 : (theta < 0.0 ? -1.0 : 0.0);
        const double n2 = s * s + c * c;
        jacobian(0, 1) = sign * (c / n2) / (0.5 * M_PI);
        jacobian(0, 2) = sign * (-s / n2) / (0.5 * M_PI);
    }

    nlohmann::json save_state() const override {
        return {{"x", x_},
                {"theta", theta_},
                {"x_dot", x_dot_},
                {"theta_dot", theta_dot_},
                {"step_count", step_count_},
                {"disturbance_rng", disturbance_rng_.serialize()}};
    }

    void load_state(const nlohmann::json& j) override {
        x_ = j.at("x").get<double>();
        theta_ = j.at("theta").get<double>();
        x_dot_ = j.at("x_dot").get<double>();
        theta_dot_ = j.at("theta_dot").get<double>();
        step_count_ = j.at("step_count").get<int>();
        disturbance_rng_.deserialize(j.at("disturbance_rng").get<std::string>());
    }

    std::unique_ptr<Environment> clone() const override {
        return std::make_unique<CartpoleEnv>(*this);
    }

    static double wrap_angle(double a) {
        a = std::fmod(a + M_PI, 2.0 * M_PI);
        if (a < 0.0) a += 2.0 * M_PI;
        return a - M_PI;
    }

private:
    // standard frictionless cartpole; affine in the action
    void accelerations(double a, double& x_acc, double& theta_acc) const {
        accelerations(a, std::sin(theta_), std::cos(theta_), theta_dot_, x_acc, theta_acc);
    }

    void accelerations(double a, double sin_t, double cos_t, double theta_dot, double& x_acc,
                       double& theta_acc) const {
        const double force = force_scale * a;
        const double total_mass = cart_mass + pole_mass;
        const double temp =
            (force + pole_mass * pole_half_length * theta_dot * theta_dot * sin_t) / total_mass;
        theta_acc = (gravity * sin_t - cos_t * temp) /
                    (pole_half_length * (4.0 / 3.0 - pole_mass * cos_t * cos_t / total_mass));
        x_acc = temp - pole_mass * pole_half_length * theta_acc * cos_t / total_mass;
    }

    double x_ = 0.0, theta_ = 0.0, x_dot_ = 0.0, theta_dot_ = 0.0;
    int step_count_ = 0;
    Rng disturbance_rng_{0};
};

}  // namespace datacom
