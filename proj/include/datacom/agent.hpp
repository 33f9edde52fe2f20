#pragma once

#include <chrono>
#include <memory>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "datacom/cartpole.hpp"
#include "datacom/checkpoint.hpp"
#include "datacom/config.hpp"
#include "datacom/env.hpp"
#include "datacom/feasibility.hpp"
#include "datacom/iqn.hpp"
#include "datacom/manifold.hpp"
#include "datacom/metrics.hpp"
#include "datacom/navigation.hpp"
#include "datacom/policy.hpp"
#include "datacom/replay.hpp"
#include "datacom/sac.hpp"
#include "datacom/threshold.hpp"

namespace datacom {

enum class Variant { Gaussian, Iqn, FixedConstraint, Unconstrained };

inline Variant parse_variant(const std::string& s) {
    if (s == "datacom-gaussian") return Variant::Gaussian;
    if (s == "datacom-iqn") return Variant::Iqn;
    if (s == "atacom-fixed-constraint") return Variant::FixedConstraint;
    if (s == "sac-unconstrained") return Variant::Unconstrained;
    throw std::invalid_argument("unknown algorithm: " + s);
}

inline std::unique_ptr<Environment> make_environment(const TrainConfig& cfg) {
    DisturbanceSpec spec{cfg.disturbance_damping, cfg.disturbance_noise};
    if (cfg.environment == "cartpole") {
        auto env = std::make_unique<CartpoleEnv>();
        env->disturbance = spec;
        return env;
    }
    if (cfg.environment == "navigation") {
        auto env = std::make_unique<NavigationEnv>();
        env->disturbance = spec;
        return env;
    }
    throw std::invalid_argument("unknown environment: " + cfg.environment);
}

struct EvalStats {
    double mean_return = 0.0;
    double mean_max_violation = 0.0;
    double mean_sum_cost = 0.0;
    double mean_mu_f = 0.0;
    double mean_sigma_f = 0.0;
};

struct EpochStats {
    EvalStats eval;
    double fvf_loss = 0.0;
    double critic_loss = 0.0;
    double policy_loss = 0.0;
    long updates = 0;
};

// Everything needed to run the algorithm and its ablations: the safe-action
// layer fed by either a learned feasibility constraint (Gaussian or quantile
// head, shifted by the adaptive threshold), the environment's analytic
// constraint, or no constraint at all, wrapped around one soft actor-critic.
class Agent {
public:
    TrainConfig cfg;
    Variant variant = Variant::Gaussian;
    std::unique_ptr<Environment> env;
    GaussianPolicy policy;
    SoftQCritic critic;
    EntropyTemperature temperature;
    std::optional<GaussianValueHead> fvf;
    std::optional<QuantileHead> iqn;
    ThresholdState threshold;
    ReplayBuffer replay;
    Rng train_rng{0};
    long global_step = 0;
    int epochs_done = 0;

    static Agent make(const TrainConfig& cfg) {
        validate_config(cfg);
        Agent a;
        a.cfg = cfg;
        a.variant = parse_variant(cfg.algorithm);
        a.env = make_environment(cfg);
        a.train_rng = Rng(cfg.seed);

        const int sd = a.env->observation_dim();
        const int ad = a.env->action_dim();
        const double u_bound = a.env->action_bound().maxCoeff();
        a.policy = GaussianPolicy::make(sd, cfg.network_widths,
                                        VectorXd::Constant(ad, u_bound), cfg.lr_actor,
                                        a.train_rng);
        a.critic = SoftQCritic::make(sd, ad, cfg.network_widths, cfg.gamma, cfg.lr_critic,
                                     cfg.tau, a.train_rng);
        a.temperature.target_entropy = -static_cast<double>(ad);
        a.temperature.opt.learning_rate = cfg.lr_actor;
        if (a.variant == Variant::Gaussian) {
            a.fvf = GaussianValueHead::make(sd, cfg.network_widths, cfg.gamma,
                                            cfg.lr_constraint, cfg.tau, a.train_rng);
            a.fvf->k_max = a.env->k_max();
            a.fvf->clip_targets = cfg.clip_fvf_targets;
        } else if (a.variant == Variant::Iqn) {
            a.iqn = QuantileHead::make(sd, cfg.network_widths, cfg.gamma, cfg.lr_constraint,
                                       cfg.tau, a.train_rng);
        }
        a.threshold = ThresholdState::make(cfg.delta_init, cfg.lr_delta, cfg.cost_budget,
                                           cfg.delta_mode == "adaptive");
        a.replay = ReplayBuffer::make(static_cast<std::size_t>(cfg.replay_capacity),
                                      static_cast<std::size_t>(cfg.failure_capacity),
                                      static_cast<std::size_t>(cfg.warm_up));
        return a;
    }

    bool learned_constraint() const {
        return variant == Variant::Gaussian || variant == Variant::Iqn;
    }

    RiskSpec risk() const { return RiskSpec{cfg.alpha()}; }

    struct ConstraintInfo {
        ConstraintEvaluation ce;
        SlackState slack;
        TangentFrame frame;
        double cvar = 0.0;
        double mu_f = 0.0;
        double sigma_f = 0.0;
    };

    ConstraintInfo constraint_info(const VectorXd& obs) const {
        VectorXd k;
        MatrixXd jac;
        ConstraintInfo info;
        switch (variant) {
            case Variant::Gaussian: {
                const auto lc = learned_constraint_value(*fvf, obs, risk(), threshold.delta());
                k = VectorXd::Constant(1, lc.value);
                jac = lc.gradient.transpose();
                info.cvar = lc.cvar;
                info.mu_f = lc.mu;
                info.sigma_f = lc.sigma;
                break;
            }
            case Variant::Iqn: {
                const auto lc = iqn_constraint_value(*iqn, obs, risk(), threshold.delta());
                k = VectorXd::Constant(1, lc.value);
                jac = lc.gradient.transpose();
                info.cvar = lc.cvar;
                info.mu_f = lc.mu;
                info.sigma_f = lc.sigma;
                break;
            }
            case Variant::FixedConstraint:
                env->analytic_constraint(obs, k, jac);
                break;
            case Variant::Unconstrained:
                k.resize(0);
                jac = MatrixXd::Zero(0, obs.size());
                break;
        }
        VectorXd f;
        MatrixXd g;
        env->dynamics(obs, f, g);
        info.ce = ConstraintEvaluation::assemble(std::move(k), std::move(jac), f, g);
        info.slack = compute_slack(info.ce.values, cfg.slack_eps, cfg.beta);
        info.frame = tangent_frame(info.ce, info.slack, cfg.lambda);
        return info;
    }

    // Affine decomposition of the safe-action map at one state, for the
    // reparameterized policy step: a(u) = base + basis_action u.
    ActionMapSample action_map(const ConstraintInfo& info) const {
        ActionMapSample map;
        const int ad = env->action_dim();
        const auto at_zero =
            safe_action(VectorXd::Zero(info.frame.tangent_dim()), info.ce, info.slack, info.frame);
        map.base = at_zero.full.head(ad);
        map.basis_action = info.frame.basis.topRows(ad);
        map.log_det_correction = log_det_correction(info.frame.basis);
        map.fault = at_zero.fault;
        return map;
    }

    VectorXd clip_action(VectorXd a) const {
        const VectorXd bound = env->action_bound();
        for (Eigen::Index i = 0; i < a.size(); ++i)
            a(i) = std::clamp(a(i), -bound(i), bound(i));
        return a;
    }

    struct ActResult {
        VectorXd action;
        double cvar = 0.0;
        double mu_f = 0.0;
        double sigma_f = 0.0;
        bool fault = false;
    };

    // Every action, exploratory or deterministic, goes through the tangent
    // map; the raw policy output never reaches the environment directly.
    ActResult act(const VectorXd& obs, Rng& rng, bool stochastic) const {
        const auto info = constraint_info(obs);
        VectorXd u = stochastic ? policy.sample(obs, rng).u : policy.mean_control(obs);
        const auto mapped = safe_action(u, info.ce, info.slack, info.frame);
        ActResult r;
        r.action = clip_action(mapped.env_action);
        r.cvar = info.cvar;
        r.mu_f = info.mu_f;
        r.sigma_f = info.sigma_f;
        r.fault = mapped.fault;
        return r;
    }

    // --- training ---------------------------------------------------------

    EpochStats run_epoch() {
        EpochStats stats;
        for (int i = 0; i < cfg.steps_per_epoch; ++i) {
            environment_step();
            ++global_step;
            if (global_step % cfg.steps_per_fit == 0 &&
                replay.ready(static_cast<std::size_t>(cfg.batch_size)))
                update_models(stats);
        }
        ++epochs_done;
        if (stats.updates > 0) {
            stats.fvf_loss /= static_cast<double>(stats.updates);
            stats.critic_loss /= static_cast<double>(stats.updates);
            stats.policy_loss /= static_cast<double>(stats.updates);
        }
        Rng eval_rng(cfg.seed ^ (0x9e3779b97f4a7c15ULL * static_cast<std::uint64_t>(epochs_done)));
        stats.eval = evaluate(cfg.eval_episodes, eval_rng);
        return stats;
    }

    EvalStats evaluate(int episodes, Rng& rng) const {
        EvalStats s;
        if (episodes <= 0) return s;
        long visited = 0;
        auto sim = env->clone();
        for (int ep = 0; ep < episodes; ++ep) {
            VectorXd obs = sim->reset(rng);
            double ret = 0.0, max_v = 0.0, sum_c = 0.0, disc = 1.0;
            bool done = false;
            while (!done) {
                const auto a = act(obs, rng, /*stochastic=*/false);
                s.mean_mu_f += a.mu_f;
                s.mean_sigma_f += a.sigma_f;
                ++visited;
                const auto step = sim->step(a.action);
                ret += disc * step.reward;
                disc *= cfg.gamma;
                max_v = std::max(max_v, positive_part(step.cost));
                sum_c += positive_part(step.cost);
                obs = step.observation;
                done = step.absorbing;
            }
            s.mean_return += ret;
            s.mean_max_violation += max_v;
            s.mean_sum_cost += sum_c;
        }
        s.mean_return /= episodes;
        s.mean_max_violation /= episodes;
        s.mean_sum_cost /= episodes;
        if (visited > 0) {
            s.mean_mu_f /= static_cast<double>(visited);
            s.mean_sigma_f /= static_cast<double>(visited);
        }
        return s;
    }

    // Pre-collected transitions (JSON array) seed the buffer, and the
    // feasibility head takes a burst of updates before any interaction.
    void warm_start(const std::string& path, int updates = 1000) {
        std::ifstream in(path);
        if (!in) throw std::runtime_error("warm-start: cannot open " + path);
        nlohmann::json j;
        in >> j;
        for (const auto& t : j) {
            Transition tr;
            tr.state = VectorXd::Map(t.at("state").get<std::vector<double>>().data(),
                                     static_cast<Eigen::Index>(t.at("state").size()));
            const auto av = t.at("action").get<std::vector<double>>();
            tr.action = VectorXd::Map(av.data(), static_cast<Eigen::Index>(av.size()));
            tr.reward = t.at("reward").get<double>();
            tr.cost = t.at("cost").get<double>();
            const auto nv = t.at("next_state").get<std::vector<double>>();
            tr.next_state = VectorXd::Map(nv.data(), static_cast<Eigen::Index>(nv.size()));
            tr.absorbing = t.at("absorbing").get<bool>();
            replay.push(tr);
        }
        if (!learned_constraint()) return;
        std::vector<const Transition*> batch;
        for (int i = 0; i < updates; ++i) {
            if (!replay.sample(static_cast<std::size_t>(cfg.batch_size), train_rng, batch)) break;
            const FvfBatch fb = to_fvf_batch(batch);
            if (variant == Variant::Gaussian)
                fvf_update(*fvf, fb);
            else
                iqn_td_update(*iqn, fb, train_rng);
        }
    }

    // --- checkpointing ----------------------------------------------------

    Checkpoint checkpoint(bool include_resume_state) const {
        Checkpoint cp;
        cp.metadata["config"] = config_echo(cfg);
        cp.metadata["epochs_done"] = epochs_done;
        cp.metadata["global_step"] = global_step;
        cp.put_net("policy", policy.net);
        cp.put_adam("policy", policy.opt);
        cp.put_net("q1", critic.q1);
        cp.put_net("q2", critic.q2);
        cp.put_net("t1", critic.t1.net);
        cp.put_net("t2", critic.t2.net);
        cp.put_adam("q1", critic.opt1);
        cp.put_adam("q2", critic.opt2);
        if (fvf) {
            cp.put_net("fvf", fvf->net);
            cp.put_net("fvf_target", fvf->target.net);
            cp.put_adam("fvf", fvf->opt);
        }
        if (iqn) {
            cp.put_net("iqn", iqn->net);
            cp.put_net("iqn_target", iqn->target.net);
            cp.put_adam("iqn", iqn->opt);
        }
        cp.metadata["temperature"] = {{"log_alpha", temperature.log_alpha},
                                      {"target_entropy", temperature.target_entropy},
                                      {"m", temperature.opt.m},
                                      {"v", temperature.opt.v},
                                      {"step_count", temperature.opt.step_count},
                                      {"lr", temperature.opt.learning_rate}};
        cp.metadata["threshold"] = {{"rho", threshold.rho},
                                    {"lr", threshold.learning_rate},
                                    {"budget", threshold.cost_budget},
                                    {"adaptive", threshold.adaptive}};
        if (include_resume_state) {
            cp.metadata["resume"] = {{"train_rng", train_rng.serialize()},
                                     {"env_state", env->save_state()},
                                     {"episode_active", episode_active_},
                                     {"ep_costs", ep_costs_},
                                     {"ep_cvars", ep_cvars_}};
            if (episode_active_) {
                cp.put_vector("resume/obs", obs_);
                cp.metadata["resume"]["obs"] = true;
            }
            pack_ring(cp, "replay/main", replay.main);
            pack_ring(cp, "replay/failure", replay.failure);
        }
        return cp;
    }

    static Agent restore(const Checkpoint& cp) {
        std::map<std::string, std::string> kv;
        std::istringstream is(cp.metadata.at("config").get<std::string>());
        std::string line;
        while (std::getline(is, line)) {
            const auto eq = line.find('=');
            if (eq == std::string::npos) continue;
            auto trim = [](std::string s) {
                const auto a = s.find_first_not_of(" \t");
                const auto b = s.find_last_not_of(" \t");
                return a == std::string::npos ? std::string() : s.substr(a, b - a + 1);
            };
            kv[trim(line.substr(0, eq))] = trim(line.substr(eq + 1));
        }
        Agent a = make(parse_config(kv, {}));
        a.epochs_done = cp.metadata.at("epochs_done").get<int>();
        a.global_step = cp.metadata.at("global_step").get<long>();
        a.policy.net = cp.get_net("policy");
        a.policy.opt = cp.get_adam("policy", a.policy.net);
        a.critic.q1 = cp.get_net("q1");
        a.critic.q2 = cp.get_net("q2");
        a.critic.t1.net = cp.get_net("t1");
        a.critic.t2.net = cp.get_net("t2");
        a.critic.opt1 = cp.get_adam("q1", a.critic.q1);
        a.critic.opt2 = cp.get_adam("q2", a.critic.q2);
        if (a.fvf) {
            a.fvf->net = cp.get_net("fvf");
            a.fvf->target.net = cp.get_net("fvf_target");
            a.fvf->opt = cp.get_adam("fvf", a.fvf->net);
        }
        if (a.iqn) {
            a.iqn->net = cp.get_net("iqn");
            a.iqn->target.net = cp.get_net("iqn_target");
            a.iqn->opt = cp.get_adam("iqn", a.iqn->net);
        }
        const auto& t = cp.metadata.at("temperature");
        a.temperature.log_alpha = t.at("log_alpha").get<double>();
        a.temperature.target_entropy = t.at("target_entropy").get<double>();
        a.temperature.opt.m = t.at("m").get<double>();
        a.temperature.opt.v = t.at("v").get<double>();
        a.temperature.opt.step_count = t.at("step_count").get<long>();
        a.temperature.opt.learning_rate = t.at("lr").get<double>();
        const auto& th = cp.metadata.at("threshold");
        a.threshold.rho = th.at("rho").get<double>();
        a.threshold.learning_rate = th.at("lr").get<double>();
        a.threshold.cost_budget = th.at("budget").get<double>();
        a.threshold.adaptive = th.at("adaptive").get<bool>();
        if (cp.metadata.contains("resume")) {
            const auto& r = cp.metadata.at("resume");
            a.train_rng.deserialize(r.at("train_rng").get<std::string>());
            a.env->load_state(r.at("env_state"));
            a.episode_active_ = r.at("episode_active").get<bool>();
            a.ep_costs_ = r.at("ep_costs").get<std::vector<double>>();
            a.ep_cvars_ = r.at("ep_cvars").get<std::vector<double>>();
            if (a.episode_active_) a.obs_ = cp.get_vector("resume/obs");
            unpack_ring(cp, "replay/main", a.replay.main);
            unpack_ring(cp, "replay/failure", a.replay.failure);
        }
        return a;
    }

private:
    VectorXd obs_;
    bool episode_active_ = false;
    std::vector<double> ep_costs_;
    std::vector<double> ep_cvars_;

    void environment_step() {
        if (!episode_active_) {
            obs_ = env->reset(train_rng);
            ep_costs_.clear();
            ep_cvars_.clear();
            episode_active_ = true;
        }
        const auto a = act(obs_, train_rng, /*stochastic=*/true);
        const auto step = env->step(a.action);

        Transition tr;
        tr.state = obs_;
        tr.action = a.action;
        tr.reward = step.reward;
        tr.cost = step.cost;
        tr.next_state = step.observation;
        tr.absorbing = step.absorbing;
        replay.push(tr);

        ep_costs_.push_back(positive_part(step.cost));
        ep_cvars_.push_back(a.cvar);
        obs_ = step.observation;
        if (step.absorbing) {
            if (learned_constraint() && threshold.adaptive)
                delta_update(threshold, episodic_cost_gaps(ep_costs_, cfg.gamma, cfg.cost_budget),
                             ep_cvars_);
            episode_active_ = false;
        }
    }

    FvfBatch to_fvf_batch(const std::vector<const Transition*>& batch) const {
        const Eigen::Index b = static_cast<Eigen::Index>(batch.size());
        const Eigen::Index sd = batch[0]->state.size();
        FvfBatch fb;
        fb.states.resize(b, sd);
        fb.next_states.resize(b, sd);
        fb.costs.resize(b);
        fb.absorbing.resize(static_cast<std::size_t>(b));
        for (Eigen::Index i = 0; i < b; ++i) {
            const auto* t = batch[static_cast<std::size_t>(i)];
            fb.states.row(i) = t->state.transpose();
            fb.next_states.row(i) = t->next_state.transpose();
            fb.costs(i) = t->cost;
            fb.absorbing[static_cast<std::size_t>(i)] = t->absorbing;
        }
        return fb;
    }

    void update_models(EpochStats& stats) {
        std::vector<const Transition*> batch;
        if (!replay.sample(static_cast<std::size_t>(cfg.batch_size), train_rng, batch)) return;
        const FvfBatch fb = to_fvf_batch(batch);

        if (variant == Variant::Gaussian)
            stats.fvf_loss += fvf_update(*fvf, fb);
        else if (variant == Variant::Iqn)
            stats.fvf_loss += iqn_td_update(*iqn, fb, train_rng);

        // critic targets: resample a safe action at s'
        const auto next_out = policy.net.forward(fb.next_states);
        std::vector<NextActionSample> next_actions;
        next_actions.reserve(batch.size());
        for (Eigen::Index i = 0; i < fb.next_states.rows(); ++i) {
            const VectorXd ns = fb.next_states.row(i).transpose();
            const auto info = constraint_info(ns);
            const auto s = policy.sample_from_output(next_out.row(i).transpose(), train_rng);
            const auto mapped = safe_action(s.u, info.ce, info.slack, info.frame);
            NextActionSample nas;
            nas.action = clip_action(mapped.env_action);
            nas.log_prob = s.log_prob - log_det_correction(info.frame.basis);
            next_actions.push_back(std::move(nas));
        }
        stats.critic_loss += critic_update(critic, batch, next_actions, temperature.alpha());

        std::vector<ActionMapSample> maps;
        maps.reserve(batch.size());
        for (Eigen::Index i = 0; i < fb.states.rows(); ++i)
            maps.push_back(action_map(constraint_info(fb.states.row(i).transpose())));
        stats.policy_loss += policy_update(policy, critic, temperature, fb.states, maps, train_rng);
        ++stats.updates;
    }

    static void pack_ring(Checkpoint& cp, const std::string& name, const TransitionRing& ring) {
        nlohmann::json meta = {{"capacity", ring.capacity}, {"head", ring.head},
                               {"count", ring.data.size()}};
        cp.metadata["rings"][name] = meta;
        if (ring.data.empty()) return;
        const Eigen::Index sd = ring.data[0].state.size();
        const Eigen::Index ad = ring.data[0].action.size();
        MatrixXd m(static_cast<Eigen::Index>(ring.data.size()), 2 * sd + ad + 3);
        for (Eigen::Index i = 0; i < m.rows(); ++i) {
            const auto& t = ring.data[static_cast<std::size_t>(i)];
            m.row(i).segment(0, sd) = t.state.transpose();
            m.row(i).segment(sd, ad) = t.action.transpose();
            m(i, sd + ad) = t.reward;
            m(i, sd + ad + 1) = t.cost;
            m.row(i).segment(sd + ad + 2, sd) = t.next_state.transpose();
            m(i, 2 * sd + ad + 2) = t.absorbing ? 1.0 : 0.0;
        }
        cp.metadata["rings"][name]["state_dim"] = sd;
        cp.metadata["rings"][name]["action_dim"] = ad;
        cp.put_matrix(name, m);
    }

    static void unpack_ring(const Checkpoint& cp, const std::string& name, TransitionRing& ring) {
        const auto& meta = cp.metadata.at("rings").at(name);
        ring.capacity = meta.at("capacity").get<std::size_t>();
        ring.head = meta.at("head").get<std::size_t>();
        ring.data.clear();
        const std::size_t count = meta.at("count").get<std::size_t>();
        if (count == 0) return;
        const Eigen::Index sd = meta.at("state_dim").get<Eigen::Index>();
        const Eigen::Index ad = meta.at("action_dim").get<Eigen::Index>();
        const MatrixXd m = cp.get_matrix(name);
        ring.data.reserve(count);
        for (Eigen::Index i = 0; i < m.rows(); ++i) {
            Transition t;
            t.state = m.row(i).segment(0, sd).transpose();
            t.action = m.row(i).segment(sd, ad).transpose();
            t.reward = m(i, sd + ad);
            t.cost = m(i, sd + ad + 1);
            t.next_state = m.row(i).segment(sd + ad + 2, sd).transpose();
            t.absorbing = m(i, 2 * sd + ad + 2) != 0.0;
            ring.data.push_back(std::move(t));
        }
    }
};

}  // namespace datacom
