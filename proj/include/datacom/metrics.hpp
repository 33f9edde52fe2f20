#pragma once

#include <charconv>
#include <cstdio>
#include <fstream>
#include <stdexcept>
#include <string>

namespace datacom {

// Shortest decimal string that round-trips the exact double.
inline std::string format_double(double v) {
    char buf[40];
    const auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

struct MetricsRow {
    int epoch = 0;
    long step = 0;
    double mean_discounted_return = 0.0;
    double mean_max_violation = 0.0;
    double mean_sum_cost = 0.0;
    double delta = 0.0;
    double entropy_temperature = 0.0;
    double mean_mu_f = 0.0;
    double mean_sigma_f = 0.0;
    double fvf_loss = 0.0;
    double critic_loss = 0.0;
    double policy_loss = 0.0;
    double wall_time_s = 0.0;
};

inline const char* metrics_header() {
    return "epoch,step,mean_discounted_return,mean_max_violation,mean_sum_cost,"
           "delta,entropy_temperature,mean_mu_f,mean_sigma_f,fvf_loss,"
           "critic_loss,policy_loss,wall_time_s";
}

inline std::string format_metrics_row(const MetricsRow& r) {
    std::string line = std::to_string(r.epoch);
    line += ',';
    line += std::to_string(r.step);
    for (double v : {r.mean_discounted_return, r.mean_max_violation, r.mean_sum_cost,
                     r.delta, r.entropy_temperature, r.mean_mu_f, r.mean_sigma_f,
                     r.fvf_loss, r.critic_loss, r.policy_loss, r.wall_time_s}) {
        line += ',';
        line += format_double(v);
    }
    return line;
}

// Rows hit the file whole: one write + flush per row, so a killed process
// never leaves a partial line behind.
class MetricsWriter {
public:
    MetricsWriter() = default;

    void open(const std::string& path, bool append = false) {
        path_ = path;
        bool need_header = true;
        if (append) {
            std::ifstream probe(path, std::ios::binary | std::ios::ate);
            need_header = !probe || probe.tellg() == 0;
        }
        out_.open(path, append ? std::ios::app : std::ios::trunc);
        if (!out_) throw std::runtime_error("metrics: cannot open " + path);
        if (need_header) {
            std::string h = metrics_header();
            h += '\n';
            out_.write(h.data(), static_cast<std::streamsize>(h.size()));
            out_.flush();
        }
    }

    void write(const MetricsRow& r) {
        std::string line = format_metrics_row(r);
        line += '\n';
        out_.write(line.data(), static_cast<std::streamsize>(line.size()));
        out_.flush();
        if (!out_) throw std::runtime_error("metrics: write failed for " + path_);
    }

    bool is_open() const { return out_.is_open(); }

private:
    std::string path_;
    std::ofstream out_;
};

}  // namespace datacom
