#pragma once

#include <algorithm>
#include <cmath>

#include "datacom/env.hpp"

namespace datacom {

// Kinematic-unicycle navigation in a square room with a scripted moving
// obstacle: a base that seeks random waypoints while an end-effector point
// traces a lemniscate around it. The constraint is the clearance to the
// obstacle points and to the walls.
//
// Observation (18):
//   [x_T, y_T, th_T, vx_T, vy_T,
//    x_F, y_F, vx_F, vy_F,
//    x_E, y_E, vx_E, vy_E,
//    x_G, y_G, th_G, prev_v, prev_w]
class NavigationEnv final : public Environment {
public:
    double room_half = 5.0;
    double clearance = 0.5;  // omega_robot
    double dt = 0.05;
    int max_steps = 600;
    double v_max = 1.0;
    double w_max = 2.0;
    double goal_radius = 0.1;
    double obstacle_speed = 0.5;
    double lemniscate_amp = 0.5;
    double lemniscate_period = 6.0;
    DisturbanceSpec disturbance;

    int observation_dim() const override { return 18; }
    int action_dim() const override { return 2; }
    Eigen::VectorXd action_bound() const override {
        Eigen::VectorXd b(2);
        b << v_max, w_max;
        return b;
    }
    int horizon() const override { return max_steps; }
    double k_max() const override { return 1.0; }

    Eigen::VectorXd reset(Rng& rng) override {
        script_rng_ = Rng(rng.next_u64());
        rx_ = rng.uniform(-3.5, -1.5);
        ry_ = rng.uniform(-3.0, 3.0);
        rth_ = rng.uniform(-M_PI, M_PI);
        gx_ = rng.uniform(1.5, 3.5);
        gy_ = rng.uniform(-3.0, 3.0);
        gth_ = rng.uniform(-M_PI, M_PI);
        ox_ = rng.uniform(-1.0, 1.0);
        oy_ = rng.uniform(-1.0, 1.0);
        ovx_ = 0.0;
        ovy_ = 0.0;
        pick_waypoint();
        phase_ = 0.0;
        prev_v_ = 0.0;
        prev_w_ = 0.0;
        step_count_ = 0;
        update_end_effector(true);
        return observation();
    }

    StepResult step(const Eigen::VectorXd& action) override {
        double v = std::clamp(action(0), -v_max, v_max);
        double w = std::clamp(action(1), -w_max, w_max);
        if (disturbance.active()) {
            v = apply_disturbance(disturbance, v, prev_v_, script_rng_);
            w = apply_disturbance(disturbance, w, prev_w_, script_rng_);
        }

        rx_ += dt * v * std::cos(rth_);
        ry_ += dt * v * std::sin(rth_);
        rth_ = wrap_angle(rth_ + dt * w);
        rx_ = std::clamp(rx_, -room_half, room_half);
        ry_ = std::clamp(ry_, -room_half, room_half);
        prev_v_ = v;
        prev_w_ = w;

        advance_obstacle();
        ++step_count_;

        StepResult r;
        r.observation = observation();
        r.reward = reward(action);
        r.cost = cost();
        const bool at_goal = goal_distance() < goal_radius;
        r.absorbing = at_goal || step_count_ >= max_steps;
        return r;
    }

    Eigen::VectorXd observation() const override {
        Eigen::VectorXd obs(18);
        obs << rx_, ry_, rth_, prev_v_ * std::cos(rth_), prev_v_ * std::sin(rth_), ox_, oy_, ovx_,
            ovy_, ex_, ey_, evx_, evy_, gx_, gy_, gth_, prev_v_, prev_w_;
        return obs;
    }

    double goal_distance() const { return std::hypot(gx_ - rx_, gy_ - ry_); }

    double reward(const Eigen::VectorXd& action) const {
        const double d_goal = goal_distance();
        const double gate = 1.0 / (1.0 + std::exp(-30.0 * (d_goal - 0.2)));
        const double heading = std::abs(wrap_angle(gth_ - rth_)) / M_PI;
        return -d_goal - gate * heading - 0.1 * action.norm();
    }

    // c(s) = max over obstacle points and walls of -(distance - clearance)
    double cost() const {
        double c = -(std::hypot(rx_ - ox_, ry_ - oy_) - clearance);
        c = std::max(c, -(std::hypot(rx_ - ex_, ry_ - ey_) - clearance));
        c = std::max(c, -(room_half - rx_ - clearance));
        c = std::max(c, -(room_half + rx_ - clearance));
        c = std::max(c, -(room_half - ry_ - clearance));
        c = std::max(c, -(room_half + ry_ - clearance));
        return c;
    }

    // f carries the scripted obstacle's motion; the action drives only the
    // unicycle pose rows.
    void dynamics(const Eigen::VectorXd& obs, Eigen::VectorXd& f,
                  Eigen::MatrixXd& g) const override {
        f = Eigen::VectorXd::Zero(18);
        f(5) = obs(7);
        f(6) = obs(8);
        f(9) = obs(11);
        f(10) = obs(12);
        g = Eigen::MatrixXd::Zero(18, 2);
        g(0, 0) = std::cos(obs(2));
        g(1, 0) = std::sin(obs(2));
        g(2, 1) = 1.0;
    }

    bool has_analytic_constraint() const override { return true; }

    // per-hazard clearance rows (obstacle base, end-effector, four walls);
    // the scalar cost above is the max of these
    void analytic_constraint(const Eigen::VectorXd& obs, Eigen::VectorXd& k,
                             Eigen::MatrixXd& jacobian) const override {
        const double x = obs(0), y = obs(1);
        k.resize(6);
        jacobian = Eigen::MatrixXd::Zero(6, 18);
        const double base_pts[2][2] = {{obs(5), obs(6)}, {obs(9), obs(10)}};
        for (int i = 0; i < 2; ++i) {
            const double dx = x - base_pts[i][0];
            const double dy = y - base_pts[i][1];
            const double dist = std::max(std::hypot(dx, dy), 1e-9);
            k(i) = clearance - dist;
            jacobian(i, 0) = -dx / dist;
            jacobian(i, 1) = -dy / dist;
        }
        k(2) = clearance - (room_half - x);
        jacobian(2, 0) = 1.0;
        k(3) = clearance - (room_half + x);
        jacobian(3, 0) = -1.0;
        k(4) = clearance - (room_half - y);
        jacobian(4, 1) = 1.0;
        k(5) = clearance - (room_half + y);
        jacobian(5, 1) = -1.0;
    }

    nlohmann::json save_state() const override {
        return {{"robot", {rx_, ry_, rth_, prev_v_, prev_w_}},
                {"goal", {gx_, gy_, gth_}},
                {"obstacle", {ox_, oy_, ovx_, ovy_, wx_, wy_, phase_}},
                {"ee", {ex_, ey_, evx_, evy_}},
                {"step_count", step_count_},
                {"script_rng", script_rng_.serialize()}};
    }

    void load_state(const nlohmann::json& j) override {
        const auto& r = j.at("robot");
        rx_ = r[0]; ry_ = r[1]; rth_ = r[2]; prev_v_ = r[3]; prev_w_ = r[4];
        const auto& g = j.at("goal");
        gx_ = g[0]; gy_ = g[1]; gth_ = g[2];
        const auto& o = j.at("obstacle");
        ox_ = o[0]; oy_ = o[1]; ovx_ = o[2]; ovy_ = o[3]; wx_ = o[4]; wy_ = o[5]; phase_ = o[6];
        const auto& e = j.at("ee");
        ex_ = e[0]; ey_ = e[1]; evx_ = e[2]; evy_ = e[3];
        step_count_ = j.at("step_count").get<int>();
        script_rng_.deserialize(j.at("script_rng").get<std::string>());
    }

    std::unique_ptr<Environment> clone() const override {
        return std::make_unique<NavigationEnv>(*this);
    }

    static double wrap_angle(double a) {
        a = std::fmod(a + M_PI, 2.0 * M_PI);
        if (a < 0.0) a += 2.0 * M_PI;
        return a - M_PI;
    }

private:
    void pick_waypoint() {
        wx_ = script_rng_.uniform(-3.5, 3.5);
        wy_ = script_rng_.uniform(-3.5, 3.5);
    }

    // waypoint-seeking base with capped speed, ignores the agent
    void advance_obstacle() {
        const double dx = wx_ - ox_;
        const double dy = wy_ - oy_;
        const double dist = std::hypot(dx, dy);
        if (dist < 0.3) pick_waypoint();
        const double speed = std::min(obstacle_speed, 2.0 * dist);
        if (dist > 1e-9) {
            ovx_ = speed * dx / dist;
            ovy_ = speed * dy / dist;
        } else {
            ovx_ = ovy_ = 0.0;
        }
        ox_ += dt * ovx_;
        oy_ += dt * ovy_;
        phase_ += dt;
        update_end_effector(false);
    }

    // lemniscate of Bernoulli traced around the base
    void update_end_effector(bool init) {
        const double t = 2.0 * M_PI * phase_ / lemniscate_period;
        const double denom = 1.0 + std::sin(t) * std::sin(t);
        const double px = ox_ + lemniscate_amp * std::cos(t) / denom;
        const double py = oy_ + lemniscate_amp * std::sin(t) * std::cos(t) / denom;
        if (init) {
            ex_ = px;
            ey_ = py;
            evx_ = evy_ = 0.0;
        } else {
            evx_ = (px - ex_) / dt;
            evy_ = (py - ey_) / dt;
            ex_ = px;
            ey_ = py;
        }
    }

    double rx_ = 0, ry_ = 0, rth_ = 0, prev_v_ = 0, prev_w_ = 0;
    double gx_ = 0, gy_ = 0, gth_ = 0;
    double ox_ = 0, oy_ = 0, ovx_ = 0, ovy_ = 0, wx_ = 0, wy_ = 0, phase_ = 0;
    double ex_ = 0, ey_ = 0, evx_ = 0, evy_ = 0;
    int step_count_ = 0;
    Rng script_rng_{0};
};

}  // namespace datacom
