#include <catch2/catch_amalgamated.hpp>

#include "datacom/policy.hpp"
#include "datacom/sac.hpp"

using namespace datacom;

TEST_CASE("policy samples stay inside the box and report the correct density") {
    Rng rng(1);
    VectorXd bound(2);
    bound << 1.0, 2.0;
    auto policy = GaussianPolicy::make(3, {16}, bound, 1e-3, rng);
    Rng sampler(2);
    for (int i = 0; i < 500; ++i) {
        VectorXd s(3);
        s << sampler.normal(), sampler.normal(), sampler.normal();
        const auto smp = policy.sample(s, sampler);
        REQUIRE(std::abs(smp.u(0)) < 1.0);
        REQUIRE(std::abs(smp.u(1)) < 2.0);
        // independent density computation with the naive formulas
        double lp = 0.0;
        for (int j = 0; j < 2; ++j) {
            const double std = std::exp(smp.log_std(j));
            const double zn = (smp.z(j) - smp.mean(j)) / std;
            lp += -0.5 * zn * zn - smp.log_std(j) - 0.5 * std::log(2.0 * M_PI);
            const double t = std::tanh(smp.z(j));
            lp -= std::log(bound(j) * (1.0 - t * t));
        }
        REQUIRE(smp.log_prob == Catch::Approx(lp).margin(1e-9));
    }
}

TEST_CASE("squash log det is stable for extreme pre-activations") {
    // naive log(1 - tanh(z)^2) underflows around |z| ~ 20; the stable form
    // approaches log(4) - 2|z|
    for (double z : {30.0, 50.0, -40.0, 300.0}) {
        const double v = GaussianPolicy::squash_log_det(z, 1.0);
        REQUIRE(std::isfinite(v));
        REQUIRE(v == Catch::Approx(std::log(4.0) - 2.0 * std::abs(z)).margin(1e-9));
    }
    REQUIRE(GaussianPolicy::squash_log_det(0.0, 2.0) == Catch::Approx(std::log(2.0)));
}

TEST_CASE("mean control is the squashed mean head") {
    Rng rng(3);
    VectorXd bound(1);
    bound << 1.5;
    auto policy = GaussianPolicy::make(2, {8}, bound, 1e-3, rng);
    const VectorXd s = VectorXd::Ones(2);
    const VectorXd out = policy.net.forward_one(s);
    REQUIRE(policy.mean_control(s)(0) == Catch::Approx(1.5 * std::tanh(out(0))));
}

TEST_CASE("entropy temperature moves toward the target entropy") {
    EntropyTemperature t;
    t.target_entropy = -1.0;
    t.opt.learning_rate = 1e-2;
    const double a0 = t.alpha();
    // entropy far above target (very negative log prob): alpha should shrink
    for (int i = 0; i < 100; ++i) t.update(-5.0);
    REQUIRE(t.alpha() < a0);

    EntropyTemperature t2;
    t2.target_entropy = -1.0;
    t2.opt.learning_rate = 1e-2;
    //  entropy below target (log prob too high): alpha should grow
    for (int i = 0; i < 100; ++i) t2.update(3.0);
    REQUIRE(t2.alpha() > a0);
}

namespace {

Transition transition(const VectorXd& s, const VectorXd& a, double r, const VectorXd& sn,
                      bool done) {
    Transition t;
    t.state = s;
    t.action = a;
    t.reward = r;
    t.cost = 0.0;
    t.next_state = sn;
    t.absorbing = done;
    return t;
}

}  // namespace

TEST_CASE("critic with gamma 0 regresses the immediate reward") {
    Rng rng(4);
    auto critic = SoftQCritic::make(1, 1, {16}, 0.0, 3e-3, 0.01, rng);
    const auto t1 = transition(VectorXd::Constant(1, 0.0), VectorXd::Constant(1, 0.5), 2.0,
                               VectorXd::Constant(1, 1.0), false);
    const auto t2 = transition(VectorXd::Constant(1, 1.0), VectorXd::Constant(1, -0.5), -1.0,
                               VectorXd::Constant(1, 0.0), false);
    std::vector<const Transition*> batch{&t1, &t2};
    std::vector<NextActionSample> next{{VectorXd::Zero(1), 0.0}, {VectorXd::Zero(1), 0.0}};
    for (int i = 0; i < 2000; ++i) critic_update(critic, batch, next, 0.3);
    REQUIRE(critic.q_min(t1.state, t1.action) == Catch::Approx(2.0).margin(0.05));
    REQUIRE(critic.q_min(t2.state, t2.action) == Catch::Approx(-1.0).margin(0.05));
}

TEST_CASE("absorbing transitions ignore the bootstrap term") {
    Rng rng(5);
    auto critic = SoftQCritic::make(1, 1, {16}, 0.99, 3e-3, 0.01, rng);
    const auto t = transition(VectorXd::Zero(1), VectorXd::Zero(1), 1.5,
                              VectorXd::Constant(1, 9.0), true);
    std::vector<const Transition*> batch{&t};
    // absurd next action log prob: must not leak into the target
    std::vector<NextActionSample> next{{VectorXd::Constant(1, 3.0), -1e6}};
    for (int i = 0; i < 2000; ++i) critic_update(critic, batch, next, 0.3);
    REQUIRE(critic.q_min(t.state, t.action) == Catch::Approx(1.5).margin(0.05));
}

TEST_CASE("two-state chain reaches the soft bellman fixed point") {
    // 0 -> 1 (reward 1), 1 -> 0 (reward 0), alpha = 0, log p' = 0:
    // Q0 = 1 + g Q1, Q1 = g Q0 => Q0 = 1/(1-g^2)
    Rng rng(6);
    const double g = 0.9;
    auto critic = SoftQCritic::make(1, 1, {24}, g, 3e-3, 0.01, rng);
    const auto t01 = transition(VectorXd::Constant(1, 0.0), VectorXd::Zero(1), 1.0,
                                VectorXd::Constant(1, 1.0), false);
    const auto t10 = transition(VectorXd::Constant(1, 1.0), VectorXd::Zero(1), 0.0,
                                VectorXd::Constant(1, 0.0), false);
    std::vector<const Transition*> batch{&t01, &t10};
    std::vector<NextActionSample> next{{VectorXd::Zero(1), 0.0}, {VectorXd::Zero(1), 0.0}};
    for (int i = 0; i < 8000; ++i) critic_update(critic, batch, next, 0.0);
    const double q0 = 1.0 / (1.0 - g * g);
    REQUIRE(critic.q_min(t01.state, t01.action) == Catch::Approx(q0).margin(0.15));
    REQUIRE(critic.q_min(t10.state, t10.action) == Catch::Approx(g * q0).margin(0.15));
}

TEST_CASE("policy update climbs a known q landscape") {
    Rng rng(7);
    VectorXd bound = VectorXd::Ones(1);
    auto policy = GaussianPolicy::make(1, {16}, bound, 3e-3, rng);
    auto critic = SoftQCritic::make(1, 1, {24, 24}, 0.99, 3e-3, 0.01, rng);

    // supervise both twins toward Q(s, a) = -(a - 0.5)^2
    MatrixXd sa(64, 2), y(64, 1);
    for (int i = 0; i < 64; ++i) {
        sa(i, 0) = 0.0;
        sa(i, 1) = -1.0 + 2.0 * i / 63.0;
        y(i, 0) = -(sa(i, 1) - 0.5) * (sa(i, 1) - 0.5);
    }
    for (int it = 0; it < 4000; ++it) {
        for (int twin = 0; twin < 2; ++twin) {
            DenseNet& q = twin == 0 ? critic.q1 : critic.q2;
            Adam& opt = twin == 0 ? critic.opt1 : critic.opt2;
            const auto tr = q.trace(sa);
            opt.step(q, backward(q, tr, 2.0 * (tr.output - y) / 64.0));
        }
    }

    EntropyTemperature temp;
    temp.log_alpha = std::log(1e-3);
    temp.opt.learning_rate = 0.0;  // frozen
    MatrixXd states = MatrixXd::Zero(32, 1);
    std::vector<ActionMapSample> maps(32);
    for (auto& m : maps) {
        m.base = VectorXd::Zero(1);
        m.basis_action = MatrixXd::Identity(1, 1);
        m.log_det_correction = 0.0;
        m.fault = false;
    }
    Rng step_rng(8);
    for (int it = 0; it < 1500; ++it)
        policy_update(policy, critic, temp, states, maps, step_rng);
    REQUIRE(policy.mean_control(VectorXd::Zero(1))(0) == Catch::Approx(0.5).margin(0.07));
}

TEST_CASE("critic update depends only on transitions and next actions") {
    // the critic never sees constraint values: identical inputs, identical loss
    Rng r1(9), r2(9);
    auto c1 = SoftQCritic::make(2, 1, {12}, 0.9, 1e-3, 0.01, r1);
    auto c2 = SoftQCritic::make(2, 1, {12}, 0.9, 1e-3, 0.01, r2);
    const auto t = transition(VectorXd::Ones(2), VectorXd::Zero(1), 0.7,
                              VectorXd::Zero(2), false);
    std::vector<const Transition*> batch{&t};
    std::vector<NextActionSample> next{{VectorXd::Constant(1, 0.2), -0.4}};
    for (int i = 0; i < 10; ++i)
        REQUIRE(critic_update(c1, batch, next, 0.2) == critic_update(c2, batch, next, 0.2));
}

TEST_CASE("faulted action maps contribute no policy gradient but keep the batch usable") {
    Rng rng(10);
    auto policy = GaussianPolicy::make(1, {8}, VectorXd::Ones(1), 1e-3, rng);
    auto critic = SoftQCritic::make(1, 1, {8}, 0.9, 1e-3, 0.01, rng);
    EntropyTemperature temp;
    MatrixXd states = MatrixXd::Zero(4, 1);
    std::vector<ActionMapSample> maps(4);
    for (auto& m : maps) {
        m.base = VectorXd::Zero(1);
        m.basis_action = MatrixXd::Identity(1, 1);
        m.fault = true;  // every sample faulted
    }
    Rng step_rng(11);
    REQUIRE_NOTHROW(policy_update(policy, critic, temp, states, maps, step_rng));
}
