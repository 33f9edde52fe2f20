// Command-line driver: train / eval / export-fvf.

#include <cstdlib>
#include <iostream>
#include <map>
#include <string>

#include <CLI11.hpp>

#include "datacom/run.hpp"

namespace {

// All train flags arrive as strings and go through the same key = value
// parser as config files, so range errors name the key either way.
const char* kConfigKeys[] = {
    "environment",      "algorithm",        "seed",
    "epochs",           "steps-per-epoch",  "steps-per-fit",
    "eval-episodes",    "network-widths",   "batch-size",
    "replay-capacity",  "failure-capacity", "warm-up",
    "lr-actor",         "lr-critic",        "lr-constraint",
    "lr-delta",         "gamma",            "tau",
    "accepted-risk",    "cost-budget",      "delta-mode",
    "delta-init",       "lambda",           "beta",
    "slack-eps",        "clip-fvf-targets", "disturbance-damping",
    "disturbance-noise","warm-start-data",  "trajectory-dump",
    "timing",           "save-resume-state","output-dir",
};

std::string apply_output_root(const std::string& dir) {
    const char* root = std::getenv("DATACOM_OUTPUT_ROOT");
    if (!root || !*root) return dir;
    std::filesystem::path p(dir);
    if (p.is_absolute()) return dir;
    return (std::filesystem::path(root) / p).string();
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"safe actor-critic laboratory"};
    app.require_subcommand(1);

    auto* train = app.add_subcommand("train", "run a training job");
    std::string config_path, resume_path;
    train->add_option("--config", config_path, "key = value config file");
    train->add_option("--resume", resume_path, "checkpoint with resume state to continue from");
    std::map<std::string, std::string> flag_values;
    for (const char* key : kConfigKeys)
        train->add_option("--" + std::string(key), flag_values[key]);

    auto* eval = app.add_subcommand("eval", "evaluate a checkpoint");
    std::string eval_checkpoint, eval_out = "eval.csv";
    int eval_episodes = 25;
    std::uint64_t eval_seed = 0;
    bool eval_traj = false;
    eval->add_option("--checkpoint", eval_checkpoint)->required();
    eval->add_option("--episodes", eval_episodes);
    eval->add_option("--seed", eval_seed);
    eval->add_option("--out", eval_out);
    eval->add_flag("--trajectory-dump", eval_traj, "write per-step trajectory.csv");

    auto* exp = app.add_subcommand("export-fvf", "export the feasibility surface on a grid");
    std::string exp_checkpoint, exp_out = "fvf_grid.csv";
    int grid_n = 41;
    exp->add_option("--checkpoint", exp_checkpoint)->required();
    exp->add_option("--grid-n", grid_n, "points per axis");
    exp->add_option("--out", exp_out);

    CLI11_PARSE(app, argc, argv);

    try {
        if (train->parsed()) {
            std::map<std::string, std::string> file_kv;
            if (!config_path.empty()) file_kv = datacom::read_config_file(config_path);
            std::map<std::string, std::string> flag_kv;
            for (const auto& [k, v] : flag_values)
                if (train->count("--" + k) > 0) flag_kv[k] = v;
            datacom::TrainConfig cfg = datacom::parse_config(file_kv, flag_kv);
            cfg.output_dir = apply_output_root(cfg.output_dir);
            return datacom::run_train(cfg, resume_path);
        }
        if (eval->parsed())
            return datacom::run_eval(eval_checkpoint, eval_episodes, eval_seed,
                                     apply_output_root(eval_out), eval_traj);
        if (exp->parsed())
            return datacom::run_export_fvf(exp_checkpoint, grid_n, apply_output_root(exp_out));
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
