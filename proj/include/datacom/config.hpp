#pragma once

#include <cstdint>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace datacom {

// Full run configuration. Defaults follow the cartpole tuning column; picking
// an environment first applies that environment's tuned values, and explicit
// file/flag settings override both (precedence: flags > file > defaults).
struct TrainConfig {
    std::string environment = "cartpole";        // cartpole | navigation
    std::string algorithm = "datacom-gaussian";  // datacom-gaussian | datacom-iqn |
                                                 // atacom-fixed-constraint | sac-unconstrained
    std::uint64_t seed = 0;
    int epochs = 100;
    int steps_per_epoch = 10000;
    int steps_per_fit = 1;
    int eval_episodes = 25;
    std::vector<int> network_widths = {128, 128};
    int batch_size = 64;
    int replay_capacity = 200000;
    int failure_capacity = 20000;
    int warm_up = 2000;
    double lr_actor = 5e-4;
    double lr_critic = 5e-4;
    double lr_constraint = 5e-4;
    double lr_delta = 5e-4;
    double gamma = 0.99;
    double tau = 1e-3;
    double accepted_risk = 0.9;  // alpha = 1 - accepted_risk
    double cost_budget = 40.0;
    std::string delta_mode = "adaptive";  // adaptive | fixed
    double delta_init = 1.0;
    double lambda = 1.0;
    double beta = 1.0;  // class-K slope
    double slack_eps = 1e-6;
    bool clip_fvf_targets = true;
    double disturbance_damping = 0.0;
    double disturbance_noise = 0.0;
    std::string warm_start_data;  // optional pre-collected transition file
    bool trajectory_dump = false;  // per-step CSV during evaluation, for debugging
    bool timing = false;           // real wall-clock in metrics (breaks bitwise determinism)
    bool save_resume_state = true;
    std::string output_dir = "runs/datacom";

    double alpha() const { return 1.0 - accepted_risk; }
};

namespace detail_config {

inline void apply_environment_defaults(TrainConfig& c) {
    if (c.environment == "cartpole") {
        c.lr_actor = c.lr_critic = c.lr_constraint = 5e-4;
        c.lr_delta = 5e-4;
        c.cost_budget = 40.0;
        c.accepted_risk = 0.9;
    } else if (c.environment == "navigation") {
        c.lr_actor = c.lr_critic = c.lr_constraint = 1e-4;
        c.lr_delta = 1e-4;
        c.cost_budget = 0.0;
        c.accepted_risk = 0.5;
    }
}

inline std::vector<int> parse_widths(const std::string& v, const std::string& key) {
    std::vector<int> widths;
    std::stringstream ss(v);
    std::string part;
    while (std::getline(ss, part, ',')) {
        try {
            widths.push_back(std::stoi(part));
        } catch (...) {
            throw std::invalid_argument("config: bad value for " + key + ": " + v);
        }
    }
    if (widths.empty()) throw std::invalid_argument("config: " + key + " must not be empty");
    return widths;
}

inline double parse_double(const std::string& v, const std::string& key) {
    try {
        std::size_t pos = 0;
        const double d = std::stod(v, &pos);
        if (pos != v.size()) throw std::invalid_argument("");
        return d;
    } catch (...) {
        throw std::invalid_argument("config: bad value for " + key + ": " + v);
    }
}

inline long parse_long(const std::string& v, const std::string& key) {
    try {
        std::size_t pos = 0;
        const long d = std::stol(v, &pos);
        if (pos != v.size()) throw std::invalid_argument("");
        return d;
    } catch (...) {
        throw std::invalid_argument("config: bad value for " + key + ": " + v);
    }
}

inline bool parse_bool(const std::string& v, const std::string& key) {
    if (v == "true" || v == "1" || v == "on") return true;
    if (v == "false" || v == "0" || v == "off") return false;
    throw std::invalid_argument("config: bad value for " + key + ": " + v);
}

inline void set_key(TrainConfig& c, const std::string& key, const std::string& value) {
    if (key == "environment") c.environment = value;
    else if (key == "algorithm") c.algorithm = value;
    else if (key == "seed") c.seed = static_cast<std::uint64_t>(parse_long(value, key));
    else if (key == "epochs") c.epochs = static_cast<int>(parse_long(value, key));
    else if (key == "steps-per-epoch") c.steps_per_epoch = static_cast<int>(parse_long(value, key));
    else if (key == "steps-per-fit") c.steps_per_fit = static_cast<int>(parse_long(value, key));
    else if (key == "eval-episodes") c.eval_episodes = static_cast<int>(parse_long(value, key));
    else if (key == "network-widths") c.network_widths = parse_widths(value, key);
    else if (key == "batch-size") c.batch_size = static_cast<int>(parse_long(value, key));
    else if (key == "replay-capacity") c.replay_capacity = static_cast<int>(parse_long(value, key));
    else if (key == "failure-capacity") c.failure_capacity = static_cast<int>(parse_long(value, key));
    else if (key == "warm-up") c.warm_up = static_cast<int>(parse_long(value, key));
    else if (key == "lr-actor") c.lr_actor = parse_double(value, key);
    else if (key == "lr-critic") c.lr_critic = parse_double(value, key);
    else if (key == "lr-constraint") c.lr_constraint = parse_double(value, key);
    else if (key == "lr-delta") c.lr_delta = parse_double(value, key);
    else if (key == "gamma") c.gamma = parse_double(value, key);
    else if (key == "tau") c.tau = parse_double(value, key);
    else if (key == "accepted-risk") c.accepted_risk = parse_double(value, key);
    else if (key == "cost-budget") c.cost_budget = parse_double(value, key);
    else if (key == "delta-mode") c.delta_mode = value;
    else if (key == "delta-init") c.delta_init = parse_double(value, key);
    else if (key == "lambda") c.lambda = parse_double(value, key);
    else if (key == "beta") c.beta = parse_double(value, key);
    else if (key == "slack-eps") c.slack_eps = parse_double(value, key);
    else if (key == "clip-fvf-targets") c.clip_fvf_targets = parse_bool(value, key);
    else if (key == "disturbance-damping") c.disturbance_damping = parse_double(value, key);
    else if (key == "disturbance-noise") c.disturbance_noise = parse_double(value, key);
    else if (key == "warm-start-data") c.warm_start_data = value;
    else if (key == "trajectory-dump") c.trajectory_dump = parse_bool(value, key);
    else if (key == "timing") c.timing = parse_bool(value, key);
    else if (key == "save-resume-state") c.save_resume_state = parse_bool(value, key);
    else if (key == "output-dir") c.output_dir = value;
    else throw std::invalid_argument("config: unknown key: " + key);
}

}  // namespace detail_config

inline void validate_config(const TrainConfig& c) {
    auto fail = [](const std::string& key, const std::string& why) {
        throw std::invalid_argument("config: " + key + " " + why);
    };
    if (c.environment != "cartpole" && c.environment != "navigation")
        fail("environment", "must be cartpole or navigation");
    if (c.algorithm != "datacom-gaussian" && c.algorithm != "datacom-iqn" &&
        c.algorithm != "atacom-fixed-constraint" && c.algorithm != "sac-unconstrained")
        fail("algorithm", "must be one of datacom-gaussian, datacom-iqn, "
                          "atacom-fixed-constraint, sac-unconstrained");
    if (c.epochs <= 0) fail("epochs", "must be positive");
    if (c.steps_per_epoch <= 0) fail("steps-per-epoch", "must be positive");
    if (c.steps_per_fit <= 0) fail("steps-per-fit", "must be positive");
    if (c.eval_episodes < 0) fail("eval-episodes", "must be non-negative");
    for (int w : c.network_widths)
        if (w <= 0) fail("network-widths", "entries must be positive");
    if (c.batch_size <= 0) fail("batch-size", "must be positive");
    if (c.replay_capacity <= 0) fail("replay-capacity", "must be positive");
    if (c.failure_capacity < 0) fail("failure-capacity", "must be non-negative");
    if (c.warm_up < c.batch_size) fail("warm-up", "must be at least batch-size");
    for (auto [key, lr] : {std::pair<const char*, double>{"lr-actor", c.lr_actor},
                           {"lr-critic", c.lr_critic},
                           {"lr-constraint", c.lr_constraint},
                           {"lr-delta", c.lr_delta}})
        if (!(lr > 0.0)) fail(key, "must be positive");
    if (!(c.gamma >= 0.0 && c.gamma < 1.0)) fail("gamma", "must be in [0,1)");
    if (!(c.tau > 0.0 && c.tau <= 1.0)) fail("tau", "must be in (0,1]");
    if (!(c.accepted_risk > 0.0 && c.accepted_risk < 1.0))
        fail("accepted-risk", "must be in (0,1)");
    if (c.cost_budget < 0.0) fail("cost-budget", "must be non-negative");
    if (c.delta_mode != "adaptive" && c.delta_mode != "fixed")
        fail("delta-mode", "must be adaptive or fixed");
    if (!(c.delta_init > 0.0)) fail("delta-init", "must be positive");
    if (!(c.lambda > 0.0)) fail("lambda", "must be positive");
    if (!(c.beta > 0.0)) fail("beta", "must be positive");
    if (!(c.slack_eps > 0.0)) fail("slack-eps", "must be positive");
    if (c.disturbance_damping < 0.0) fail("disturbance-damping", "must be non-negative");
    if (c.disturbance_noise < 0.0) fail("disturbance-noise", "must be non-negative");
}

// key = value lines, # comments
inline std::map<std::string, std::string> read_config_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("config: cannot open " + path);
    std::map<std::string, std::string> kv;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        auto trim = [](std::string s) {
            const auto a = s.find_first_not_of(" \t\r");
            if (a == std::string::npos) return std::string();
            const auto b = s.find_last_not_of(" \t\r");
            return s.substr(a, b - a + 1);
        };
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw std::invalid_argument("config: line " + std::to_string(lineno) +
                                        " is not key = value");
        kv[trim(line.substr(0, eq))] = trim(line.substr(eq + 1));
    }
    return kv;
}

inline TrainConfig parse_config(const std::map<std::string, std::string>& file_kv,
                                const std::map<std::string, std::string>& flag_kv) {
    TrainConfig c;
    // environment selects defaults, so resolve it first from either source
    if (auto it = flag_kv.find("environment"); it != flag_kv.end())
        c.environment = it->second;
    else if (auto it2 = file_kv.find("environment"); it2 != file_kv.end())
        c.environment = it2->second;
    detail_config::apply_environment_defaults(c);
    for (const auto& [k, v] : file_kv) detail_config::set_key(c, k, v);
    for (const auto& [k, v] : flag_kv) detail_config::set_key(c, k, v);
    validate_config(c);
    return c;
}

// The echo is itself a parseable config file that reproduces the run.
inline std::string config_echo(const TrainConfig& c) {
    std::ostringstream os;
    os.precision(17);
    os << "environment = " << c.environment << "\n";
    os << "algorithm = " << c.algorithm << "\n";
    os << "seed = " << c.seed << "\n";
    os << "epochs = " << c.epochs << "\n";
    os << "steps-per-epoch = " << c.steps_per_epoch << "\n";
    os << "steps-per-fit = " << c.steps_per_fit << "\n";
    os << "eval-episodes = " << c.eval_episodes << "\n";
    os << "network-widths = ";
    for (std::size_t i = 0; i < c.network_widths.size(); ++i)
        os << (i ? "," : "") << c.network_widths[i];
    os << "\n";
    os << "batch-size = " << c.batch_size << "\n";
    os << "replay-capacity = " << c.replay_capacity << "\n";
    os << "failure-capacity = " << c.failure_capacity << "\n";
    os << "warm-up = " << c.warm_up << "\n";
    os << "lr-actor = " << c.lr_actor << "\n";
    os << "lr-critic = " << c.lr_critic << "\n";
    os << "lr-constraint = " << c.lr_constraint << "\n";
    os << "lr-delta = " << c.lr_delta << "\n";
    os << "gamma = " << c.gamma << "\n";
    os << "tau = " << c.tau << "\n";
    os << "accepted-risk = " << c.accepted_risk << "\n";
    os << "cost-budget = " << c.cost_budget << "\n";
    os << "delta-mode = " << c.delta_mode << "\n";
    os << "delta-init = " << c.delta_init << "\n";
    os << "lambda = " << c.lambda << "\n";
    os << "beta = " << c.beta << "\n";
    os << "slack-eps = " << c.slack_eps << "\n";
    os << "clip-fvf-targets = " << (c.clip_fvf_targets ? "true" : "false") << "\n";
    os << "disturbance-damping = " << c.disturbance_damping << "\n";
    os << "disturbance-noise = " << c.disturbance_noise << "\n";
    if (!c.warm_start_data.empty()) os << "warm-start-data = " << c.warm_start_data << "\n";
    os << "trajectory-dump = " << (c.trajectory_dump ? "true" : "false") << "\n";
    os << "timing = " << (c.timing ? "true" : "false") << "\n";
    os << "save-resume-state = " << (c.save_resume_state ? "true" : "false") << "\n";
    os << "output-dir = " << c.output_dir << "\n";
    return os.str();
}

}  // namespace datacom
