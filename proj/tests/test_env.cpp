#include <catch2/catch_amalgamated.hpp>

#include "datacom/cartpole.hpp"
#include "datacom/navigation.hpp"

using namespace datacom;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

CartpoleEnv cartpole_at(double x, double theta, double x_dot = 0.0, double theta_dot = 0.0) {
    CartpoleEnv env;
    Rng rng(0);
    env.reset(rng);
    auto j = env.save_state();
    j["x"] = x;
    j["theta"] = theta;
    j["x_dot"] = x_dot;
    j["theta_dot"] = theta_dot;
    env.load_state(j);
    return env;
}

NavigationEnv navigation_at(double rx, double ry, double rth, double ox, double oy, double ex,
                            double ey, double gx, double gy, double gth) {
    NavigationEnv env;
    Rng rng(0);
    env.reset(rng);
    auto j = env.save_state();
    j["robot"] = {rx, ry, rth, 0.0, 0.0};
    j["goal"] = {gx, gy, gth};
    j["obstacle"] = {ox, oy, 0.0, 0.0, ox, oy, 0.0};
    j["ee"] = {ex, ey, 0.0, 0.0};
    env.load_state(j);
    return env;
}

}  // namespace

TEST_CASE("cartpole reward and cost formulas") {
    // upright at the goal tip position
    REQUIRE(cartpole_at(2.5, 0.0).reward() == 1.0);
    REQUIRE(cartpole_at(2.5, 0.0).cost() == 0.0);
    // cost boundary and beyond
    REQUIRE(cartpole_at(0.0, 0.5 * M_PI).cost() == Catch::Approx(0.0).margin(1e-12));
    REQUIRE(cartpole_at(0.0, 0.6 * M_PI).cost() == Catch::Approx(0.2));
    REQUIRE(cartpole_at(0.0, -0.6 * M_PI).cost() == Catch::Approx(0.2));
    // tip 4+ units from the goal clips to zero reward
    REQUIRE(cartpole_at(-2.5, 0.0).reward() == 0.0);

    // golden pairs: 20 random states against an independent formula evaluation
    Rng rng(3);
    for (int i = 0; i < 20; ++i) {
        const double x = rng.uniform(-5.0, 5.0);
        const double theta = rng.uniform(-M_PI, M_PI);
        auto env = cartpole_at(x, theta, rng.normal(), rng.normal());
        const double tip = x + 1.0 * std::sin(theta);
        const double r = std::clamp(1.0 - std::abs(2.5 - tip) / 4.0, 0.0, 1.0);
        const double c = std::max(std::abs(theta) / (0.5 * M_PI) - 1.0, 0.0);
        REQUIRE(env.reward() == Catch::Approx(r).margin(1e-12));
        REQUIRE(env.cost() == Catch::Approx(c).margin(1e-12));
    }
}

TEST_CASE("cartpole observation invariants and rail clamp") {
    CartpoleEnv env;
    Rng rng(4);
    env.reset(rng);
    VectorXd a(1);
    for (int t = 0; t < 800; ++t) {
        a(0) = rng.uniform(-1.0, 1.0);
        const auto r = env.step(a);
        REQUIRE(std::abs(r.observation(1) * r.observation(1) +
                         r.observation(2) * r.observation(2) - 1.0) < 1e-9);
        REQUIRE(std::abs(r.observation(0)) <= 5.0);
        if (t < 499) REQUIRE_FALSE(r.absorbing);
        if (r.absorbing) break;
    }
    // pushing right at the wall keeps x clamped with zero outward velocity
    auto wall = cartpole_at(5.0, 0.0, 1.0, 0.0);
    a(0) = 1.0;
    const auto r = wall.step(a);
    REQUIRE(r.observation(0) == 5.0);
    REQUIRE(r.observation(3) <= 0.0);
}

TEST_CASE("cartpole dynamics structure") {
    auto env = cartpole_at(0.0, 0.0);
    VectorXd f;
    MatrixXd g;
    env.dynamics(env.observation(), f, g);
    // force enters through the acceleration rows only
    REQUIRE(g(0, 0) == 0.0);
    REQUIRE(g(1, 0) == 0.0);
    REQUIRE(g(2, 0) == 0.0);
    REQUIRE(g(3, 0) != 0.0);
    // upright equilibrium: all drift rows vanish
    REQUIRE(f.cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("cartpole step matches f + G a to first order") {
    Rng rng(5);
    for (int trial = 0; trial < 200; ++trial) {
        const double x = rng.uniform(-3.0, 3.0);
        const double theta = rng.uniform(-2.0, 2.0);
        const double xd = rng.uniform(-1.0, 1.0);
        const double td = rng.uniform(-1.0, 1.0);
        VectorXd a(1);
        a(0) = rng.uniform(-1.0, 1.0);

        auto err_at = [&](double dt) {
            auto env = cartpole_at(x, theta, xd, td);
            env.dt = dt;
            const VectorXd obs = env.observation();
            VectorXd f;
            MatrixXd g;
            env.dynamics(obs, f, g);
            const VectorXd predicted = obs + dt * (f + g * a);
            const VectorXd actual = env.step(a).observation;
            return (actual - predicted).cwiseAbs().maxCoeff();
        };
        const double e1 = err_at(0.02);
        const double e2 = err_at(0.01);
        REQUIRE(e1 < 0.01);
        // halving dt shrinks the mismatch at second order (ratio ~4)
        if (e1 > 1e-9) REQUIRE(e1 / e2 > 2.5);
    }
}

TEST_CASE("cartpole determinism and state round-trip") {
    CartpoleEnv a, b;
    Rng ra(6), rb(6);
    a.reset(ra);
    b.reset(rb);
    a.disturbance = {0.1, 0.05};
    b.disturbance = {0.1, 0.05};
    Rng ra2(7), rb2(7);
    a.reset(ra2);
    b.reset(rb2);
    VectorXd act(1);
    for (int t = 0; t < 100; ++t) {
        act(0) = std::sin(0.1 * t);
        const auto sa = a.step(act);
        const auto sb = b.step(act);
        REQUIRE(sa.observation == sb.observation);
        REQUIRE(sa.reward == sb.reward);
    }
    // save/load mid-trajectory continues identically (including noise stream)
    const auto snap = a.save_state();
    std::vector<VectorXd> ahead;
    for (int t = 0; t < 50; ++t) {
        act(0) = std::cos(0.1 * t);
        ahead.push_back(a.step(act).observation);
    }
    b.load_state(snap);
    for (int t = 0; t < 50; ++t) {
        act(0) = std::cos(0.1 * t);
        REQUIRE(b.step(act).observation == ahead[static_cast<std::size_t>(t)]);
    }
}

TEST_CASE("disturbance model") {
    Rng rng(8);
    REQUIRE(DisturbanceSpec{0.0, 0.0}.active() == false);
    // sigma_d = 0.5, qdot = 2, no noise: a - 1
    REQUIRE(apply_disturbance({0.5, 0.0}, 3.0, 2.0, rng) == Catch::Approx(2.0));
    // zero spec must not consume randomness (bitwise nominal)
    Rng r1(9), r2(9);
    (void)apply_disturbance({0.0, 0.0}, 1.0, 1.0, r1);
    REQUIRE(r1.uniform() == r2.uniform());
    // noise mean
    double acc = 0.0;
    const int n = 1000000;
    for (int i = 0; i < n; ++i) acc += apply_disturbance({0.0, 0.3}, 0.0, 0.0, rng);
    REQUIRE(std::abs(acc / n) < 3.0 * 0.3 / std::sqrt(static_cast<double>(n)));
}

TEST_CASE("navigation reward and cost formulas") {
    // at the goal pose with zero action
    auto at_goal = navigation_at(2.0, 1.0, 0.3, -4.0, -4.0, -3.8, -4.0, 2.0, 1.0, 0.3);
    REQUIRE(at_goal.reward(VectorXd::Zero(2)) == Catch::Approx(0.0).margin(1e-12));
    // far from obstacle and walls: negative (safe) cost
    REQUIRE(at_goal.cost() < 0.0);
    // exactly clearance from the nearest wall: cost 0
    auto at_wall = navigation_at(4.5, 0.0, 0.0, -4.0, -4.0, -3.8, -4.0, 2.0, 1.0, 0.0);
    REQUIRE(at_wall.cost() == Catch::Approx(0.0).margin(1e-12));
    // touching the obstacle: positive cost equal to the penetration
    auto close = navigation_at(0.2, 0.0, 0.0, 0.0, 0.0, -0.5, 0.0, 2.0, 1.0, 0.0);
    REQUIRE(close.cost() == Catch::Approx(0.3));

    // golden pairs: 20 random states against independent formula evaluation
    Rng rng(10);
    for (int i = 0; i < 20; ++i) {
        const double rx = rng.uniform(-4.0, 4.0), ry = rng.uniform(-4.0, 4.0);
        const double rth = rng.uniform(-M_PI, M_PI);
        const double ox = rng.uniform(-4.0, 4.0), oy = rng.uniform(-4.0, 4.0);
        const double ex = ox + 0.4, ey = oy;
        const double gx = rng.uniform(-4.0, 4.0), gy = rng.uniform(-4.0, 4.0);
        const double gth = rng.uniform(-M_PI, M_PI);
        auto env = navigation_at(rx, ry, rth, ox, oy, ex, ey, gx, gy, gth);
        VectorXd act(2);
        act << rng.uniform(-1.0, 1.0), rng.uniform(-2.0, 2.0);

        const double d_goal = std::hypot(gx - rx, gy - ry);
        double dth = std::fmod(gth - rth + M_PI, 2.0 * M_PI);
        if (dth < 0) dth += 2.0 * M_PI;
        dth -= M_PI;
        const double expect_r = -d_goal -
                                1.0 / (1.0 + std::exp(-30.0 * (d_goal - 0.2))) *
                                    std::abs(dth) / M_PI -
                                0.1 * act.norm();
        double expect_c = 0.5 - std::hypot(rx - ox, ry - oy);
        expect_c = std::max(expect_c, 0.5 - std::hypot(rx - ex, ry - ey));
        for (double wall : {5.0 - rx, 5.0 + rx, 5.0 - ry, 5.0 + ry})
            expect_c = std::max(expect_c, 0.5 - wall);
        REQUIRE(env.reward(act) == Catch::Approx(expect_r).margin(1e-12));
        REQUIRE(env.cost() == Catch::Approx(expect_c).margin(1e-12));
    }
}

TEST_CASE("navigation pose dynamics are exactly control-affine") {
    Rng rng(11);
    NavigationEnv env;
    env.reset(rng);
    for (int t = 0; t < 200; ++t) {
        const VectorXd obs = env.observation();
        VectorXd f;
        MatrixXd g;
        env.dynamics(obs, f, g);
        VectorXd a(2);
        a << rng.uniform(-1.0, 1.0), rng.uniform(-2.0, 2.0);
        const auto result = env.step(a);
        const VectorXd& next = result.observation;
        // rows the action drives: x, y (theta wraps, compare via sin/cos)
        if (std::abs(obs(0)) < 4.9 && std::abs(obs(1)) < 4.9) {
            REQUIRE(next(0) ==
                    Catch::Approx(obs(0) + env.dt * (f(0) + (g.row(0) * a)(0))).margin(1e-12));
            REQUIRE(next(1) ==
                    Catch::Approx(obs(1) + env.dt * (f(1) + (g.row(1) * a)(0))).margin(1e-12));
        }
        const double th_pred = obs(2) + env.dt * (f(2) + (g.row(2) * a)(0));
        REQUIRE(std::sin(next(2)) == Catch::Approx(std::sin(th_pred)).margin(1e-12));
        if (result.absorbing) break;
    }
}

TEST_CASE("navigation determinism, absorbing, and obstacle script") {
    NavigationEnv a, b;
    Rng ra(12), rb(12);
    a.reset(ra);
    b.reset(rb);
    VectorXd act(2);
    for (int t = 0; t < 300; ++t) {
        act << std::sin(0.05 * t), std::cos(0.05 * t);
        const auto sa = a.step(act);
        const auto sb = b.step(act);
        REQUIRE(sa.observation == sb.observation);
        if (sa.absorbing) break;
    }
    // horizon cap absorbs
    NavigationEnv c;
    Rng rc(13);
    c.reset(rc);
    // park the goal far away so only the cap can end the episode
    auto j = c.save_state();
    j["goal"] = {4.9, 4.9, 0.0};
    j["robot"] = {-4.0, -4.0, 0.0, 0.0, 0.0};
    c.load_state(j);
    act << 0.0, 0.1;
    int steps = 0;
    while (true) {
        ++steps;
        if (c.step(act).absorbing) break;
        REQUIRE(steps <= 600);
    }
    REQUIRE(steps == 600);
}

TEST_CASE("navigation analytic constraint rows major the scalar cost") {
    Rng rng(14);
    NavigationEnv env;
    env.reset(rng);
    for (int t = 0; t < 100; ++t) {
        VectorXd a(2);
        a << rng.uniform(-1.0, 1.0), rng.uniform(-2.0, 2.0);
        env.step(a);
        VectorXd k;
        MatrixXd jac;
        env.analytic_constraint(env.observation(), k, jac);
        REQUIRE(k.maxCoeff() == Catch::Approx(env.cost()).margin(1e-12));
        REQUIRE(jac.rows() == 6);
        REQUIRE(jac.cols() == 18);
    }
}

TEST_CASE("cartpole analytic constraint matches the cost and its slope") {
    CartpoleEnv env;
    Rng rng(15);
    env.reset(rng);
    for (double theta : {-2.5, -1.0, 0.4, 1.2, 2.9}) {
        auto e = cartpole_at(0.0, theta);
        VectorXd k;
        MatrixXd jac;
        e.analytic_constraint(e.observation(), k, jac);
        REQUIRE(k(0) == Catch::Approx(e.cost() > 0.0 ? e.cost()
                                                     : std::abs(theta) / (0.5 * M_PI) - 1.0)
                            .margin(1e-12));
        // finite differences through the (sin, cos) coordinates
        const double eps = 1e-6;
        VectorXd obs = e.observation();
        for (int i = 1; i <= 2; ++i) {
            VectorXd op = obs, om = obs;
            op(i) += eps;
            om(i) -= eps;
            VectorXd kp, km;
            MatrixXd jp, jm;
            e.analytic_constraint(op, kp, jp);
            e.analytic_constraint(om, km, jm);
            REQUIRE(jac(0, i) == Catch::Approx((kp(0) - km(0)) / (2 * eps)).margin(1e-6));
        }
    }
}
