#pragma once

#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "datacom/agent.hpp"
#include "datacom/metrics.hpp"

namespace datacom {

namespace detail_run {

// On resume the metrics file may contain rows past the checkpointed epoch
// (the interrupted epoch never finished); trim so the appended rows line up
// with an uninterrupted run.
inline void trim_metrics(const std::filesystem::path& path, int epochs_done) {
    std::ifstream in(path);
    if (!in) return;
    std::vector<std::string> keep;
    std::string line;
    if (std::getline(in, line)) keep.push_back(line);  // header
    int rows = 0;
    while (std::getline(in, line) && rows < epochs_done) {
        keep.push_back(line);
        ++rows;
    }
    in.close();
    std::ofstream out(path, std::ios::trunc);
    for (const auto& l : keep) out << l << '\n';
}

inline std::string checkpoint_name(int epoch) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "epoch_%04d.json", epoch);
    return buf;
}

}  // namespace detail_run

inline int run_train(const TrainConfig& cfg, const std::string& resume_path = "") {
    namespace fs = std::filesystem;
    Agent agent = resume_path.empty() ? Agent::make(cfg)
                                      : Agent::restore(Checkpoint::load(resume_path));
    const fs::path out_dir = resume_path.empty() ? fs::path(cfg.output_dir)
                                                 : fs::path(agent.cfg.output_dir);
    fs::create_directories(out_dir / "checkpoints");
    {
        std::ofstream echo(out_dir / "config.txt");
        echo << config_echo(agent.cfg);
    }
    MetricsWriter metrics;
    if (!resume_path.empty()) detail_run::trim_metrics(out_dir / "metrics.csv", agent.epochs_done);
    metrics.open((out_dir / "metrics.csv").string(), /*append=*/!resume_path.empty());

    if (!agent.cfg.warm_start_data.empty() && agent.epochs_done == 0)
        agent.warm_start(agent.cfg.warm_start_data);

    try {
        while (agent.epochs_done < agent.cfg.epochs) {
            const auto t0 = std::chrono::steady_clock::now();
            const EpochStats stats = agent.run_epoch();
            MetricsRow row;
            row.epoch = agent.epochs_done;
            row.step = agent.global_step;
            row.mean_discounted_return = stats.eval.mean_return;
            row.mean_max_violation = stats.eval.mean_max_violation;
            row.mean_sum_cost = stats.eval.mean_sum_cost;
            row.delta = agent.threshold.delta();
            row.entropy_temperature = agent.temperature.alpha();
            row.mean_mu_f = stats.eval.mean_mu_f;
            row.mean_sigma_f = stats.eval.mean_sigma_f;
            row.fvf_loss = stats.fvf_loss;
            row.critic_loss = stats.critic_loss;
            row.policy_loss = stats.policy_loss;
            if (agent.cfg.timing)
                row.wall_time_s =
                    std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
            metrics.write(row);
            agent.checkpoint(agent.cfg.save_resume_state)
                .save(out_dir / "checkpoints" / detail_run::checkpoint_name(agent.epochs_done));
            std::cout << "epoch " << agent.epochs_done << " return "
                      << format_double(row.mean_discounted_return) << " sum_cost "
                      << format_double(row.mean_sum_cost) << " delta "
                      << format_double(row.delta) << "\n";
        }
    } catch (const std::exception& e) {
        // checkpoints written so far are preserved for post-mortem
        std::cerr << "training fault: " << e.what() << "\n";
        return 1;
    }
    return 0;
}

inline int run_eval(const std::string& checkpoint_path, int episodes, std::uint64_t seed,
                    const std::string& out_csv, bool trajectory_dump = false) {
    Agent agent = Agent::restore(Checkpoint::load(checkpoint_path));
    if (agent.policy.net.widths.front() != agent.env->observation_dim()) {
        std::cerr << "eval: checkpoint policy input " << agent.policy.net.widths.front()
                  << " does not match environment observation dim "
                  << agent.env->observation_dim() << "\n";
        return 1;
    }
    std::ofstream csv(out_csv, std::ios::trunc);
    csv << "episode,discounted_return,max_violation,sum_cost\n";
    std::ofstream traj;
    if (trajectory_dump) {
        const auto traj_path =
            std::filesystem::path(out_csv).parent_path() / "trajectory.csv";
        traj.open(traj_path, std::ios::trunc);
        traj << "episode,t";
        for (int i = 0; i < agent.env->observation_dim(); ++i) traj << ",s" << i;
        for (int i = 0; i < agent.env->action_dim(); ++i) traj << ",a" << i;
        traj << ",reward,cost\n";
    }
    Rng rng(seed);
    double sum_ret = 0.0, sum_max = 0.0, sum_cost = 0.0;
    auto sim = agent.env->clone();
    for (int ep = 0; ep < episodes; ++ep) {
        VectorXd obs = sim->reset(rng);
        double ret = 0.0, max_v = 0.0, sc = 0.0, disc = 1.0;
        bool done = false;
        int t = 0;
        while (!done) {
            const auto a = agent.act(obs, rng, /*stochastic=*/false);
            const auto step = sim->step(a.action);
            if (trajectory_dump) {
                traj << ep << ',' << t;
                for (Eigen::Index i = 0; i < obs.size(); ++i)
                    traj << ',' << format_double(obs(i));
                for (Eigen::Index i = 0; i < a.action.size(); ++i)
                    traj << ',' << format_double(a.action(i));
                traj << ',' << format_double(step.reward) << ',' << format_double(step.cost)
                     << '\n';
            }
            ret += disc * step.reward;
            disc *= agent.cfg.gamma;
            max_v = std::max(max_v, positive_part(step.cost));
            sc += positive_part(step.cost);
            obs = step.observation;
            done = step.absorbing;
            ++t;
        }
        csv << ep << ',' << format_double(ret) << ',' << format_double(max_v) << ','
            << format_double(sc) << '\n';
        sum_ret += ret;
        sum_max += max_v;
        sum_cost += sc;
    }
    if (episodes > 0) {
        std::cout << "mean_discounted_return " << format_double(sum_ret / episodes) << "\n"
                  << "mean_max_violation " << format_double(sum_max / episodes) << "\n"
                  << "mean_sum_cost " << format_double(sum_cost / episodes) << "\n";
    }
    return 0;
}

// 2-D slice of the learned feasibility surface with the remaining state
// components fixed: (x, theta) at zero velocities for cartpole, robot (x, y)
// against a centered obstacle for navigation.
inline int run_export_fvf(const std::string& checkpoint_path, int grid_n,
                          const std::string& out_csv) {
    if (grid_n < 1) {
        std::cerr << "export-fvf: grid-n must be at least 1\n";
        return 1;
    }
    Agent agent = Agent::restore(Checkpoint::load(checkpoint_path));
    if (!agent.learned_constraint()) {
        std::cerr << "export-fvf: checkpoint has no feasibility head (algorithm "
                  << agent.cfg.algorithm << ")\n";
        return 1;
    }
    const double delta = agent.threshold.delta();
    std::ofstream csv(out_csv, std::ios::trunc);
    const bool cartpole = agent.cfg.environment == "cartpole";
    csv << (cartpole ? "x,theta" : "x,y") << ",mu_f,sigma_f,cvar,k\n";
    auto coord = [grid_n](double lo, double hi, int i) {
        return grid_n == 1 ? 0.5 * (lo + hi)
                           : lo + (hi - lo) * static_cast<double>(i) / (grid_n - 1);
    };
    for (int i = 0; i < grid_n; ++i) {
        for (int j = 0; j < grid_n; ++j) {
            VectorXd obs;
            double c0, c1;
            if (cartpole) {
                c0 = coord(-5.0, 5.0, i);
                c1 = coord(-M_PI, M_PI, j);
                obs.resize(5);
                obs << c0, std::sin(c1), std::cos(c1), 0.0, 0.0;
            } else {
                c0 = coord(-5.0, 5.0, i);
                c1 = coord(-5.0, 5.0, j);
                obs = VectorXd::Zero(18);
                obs(0) = c0;
                obs(1) = c1;
                obs(9) = 0.5;  // end-effector offset from the obstacle at the origin
                obs(13) = 2.5;
            }
            LearnedConstraintValue lc;
            if (agent.variant == Variant::Gaussian)
                lc = learned_constraint_value(*agent.fvf, obs, agent.risk(), delta);
            else
                lc = iqn_constraint_value(*agent.iqn, obs, agent.risk(), delta);
            csv << format_double(c0) << ',' << format_double(c1) << ','
                << format_double(lc.mu) << ',' << format_double(lc.sigma) << ','
                << format_double(lc.cvar) << ',' << format_double(lc.value) << '\n';
        }
    }
    return 0;
}

}  // namespace datacom
