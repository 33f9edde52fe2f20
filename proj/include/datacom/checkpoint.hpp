#pragma once

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <stdexcept>
#include <string>

#include <json.hpp>

#include "datacom/net.hpp"

namespace datacom {

// Checkpoint document: a flat map of named parameters, each stored as
// {shape: [ints], data: [row-major floats]}, plus a free-form metadata block.
// JSON doubles round-trip bit-exactly.
class Checkpoint {
public:
    nlohmann::json metadata = nlohmann::json::object();

    void put_matrix(const std::string& name, const MatrixXd& m) {
        nlohmann::json entry;
        entry["shape"] = {m.rows(), m.cols()};
        std::vector<double> data;
        data.reserve(static_cast<std::size_t>(m.size()));
        for (Eigen::Index i = 0; i < m.rows(); ++i)
            for (Eigen::Index j = 0; j < m.cols(); ++j) data.push_back(m(i, j));
        entry["data"] = std::move(data);
        params_[name] = std::move(entry);
    }

    void put_vector(const std::string& name, const VectorXd& v) {
        nlohmann::json entry;
        entry["shape"] = {v.size()};
        std::vector<double> data(v.data(), v.data() + v.size());
        entry["data"] = std::move(data);
        params_[name] = std::move(entry);
    }

    bool has(const std::string& name) const { return params_.contains(name); }

    MatrixXd get_matrix(const std::string& name) const {
        const auto& entry = require(name);
        const auto shape = entry.at("shape");
        if (shape.size() != 2) throw std::runtime_error("checkpoint: " + name + " is not a matrix");
        MatrixXd m(shape[0].get<Eigen::Index>(), shape[1].get<Eigen::Index>());
        const auto& data = entry.at("data");
        if (static_cast<Eigen::Index>(data.size()) != m.size())
            throw std::runtime_error("checkpoint: " + name + " data/shape mismatch");
        std::size_t idx = 0;
        for (Eigen::Index i = 0; i < m.rows(); ++i)
            for (Eigen::Index j = 0; j < m.cols(); ++j) m(i, j) = data[idx++].get<double>();
        return m;
    }

    VectorXd get_vector(const std::string& name) const {
        const auto& entry = require(name);
        const auto shape = entry.at("shape");
        if (shape.size() != 1) throw std::runtime_error("checkpoint: " + name + " is not a vector");
        VectorXd v(shape[0].get<Eigen::Index>());
        const auto& data = entry.at("data");
        if (static_cast<Eigen::Index>(data.size()) != v.size())
            throw std::runtime_error("checkpoint: " + name + " data/shape mismatch");
        for (Eigen::Index i = 0; i < v.size(); ++i) v(i) = data[static_cast<std::size_t>(i)].get<double>();
        return v;
    }

    void put_net(const std::string& prefix, const DenseNet& net) {
        nlohmann::json arch;
        arch["widths"] = net.widths;
        std::vector<int> head;
        for (auto a : net.head) head.push_back(static_cast<int>(a));
        arch["head"] = head;
        metadata["architectures"][prefix] = arch;
        for (std::size_t l = 0; l < net.layer_count(); ++l) {
            put_matrix(prefix + "/w" + std::to_string(l), net.weights[l]);
            put_vector(prefix + "/b" + std::to_string(l), net.biases[l]);
        }
    }

    DenseNet get_net(const std::string& prefix) const {
        const auto& arch = metadata.at("architectures").at(prefix);
        DenseNet net;
        net.widths = arch.at("widths").get<std::vector<int>>();
        for (int a : arch.at("head").get<std::vector<int>>())
            net.head.push_back(static_cast<Activation>(a));
        for (std::size_t l = 0; l + 1 < net.widths.size(); ++l) {
            net.weights.push_back(get_matrix(prefix + "/w" + std::to_string(l)));
            net.biases.push_back(get_vector(prefix + "/b" + std::to_string(l)));
        }
        return net;
    }

    void put_adam(const std::string& prefix, const Adam& opt) {
        metadata["optimizers"][prefix] = {{"lr", opt.learning_rate},
                                          {"beta1", opt.beta1},
                                          {"beta2", opt.beta2},
                                          {"epsilon", opt.epsilon},
                                          {"step", opt.step_count}};
        for (std::size_t l = 0; l < opt.m_w.size(); ++l) {
            const std::string s = std::to_string(l);
            put_matrix(prefix + "/mw" + s, opt.m_w[l]);
            put_matrix(prefix + "/vw" + s, opt.v_w[l]);
            put_vector(prefix + "/mb" + s, opt.m_b[l]);
            put_vector(prefix + "/vb" + s, opt.v_b[l]);
        }
    }

    Adam get_adam(const std::string& prefix, const DenseNet& net) const {
        const auto& meta = metadata.at("optimizers").at(prefix);
        Adam opt = Adam::make(net, meta.at("lr").get<double>());
        opt.beta1 = meta.at("beta1").get<double>();
        opt.beta2 = meta.at("beta2").get<double>();
        opt.epsilon = meta.at("epsilon").get<double>();
        opt.step_count = meta.at("step").get<long>();
        for (std::size_t l = 0; l < net.layer_count(); ++l) {
            const std::string s = std::to_string(l);
            opt.m_w[l] = get_matrix(prefix + "/mw" + s);
            opt.v_w[l] = get_matrix(prefix + "/vw" + s);
            opt.m_b[l] = get_vector(prefix + "/mb" + s);
            opt.v_b[l] = get_vector(prefix + "/vb" + s);
        }
        return opt;
    }

    nlohmann::json to_json() const {
        return {{"parameters", params_}, {"metadata", metadata}};
    }

    static Checkpoint from_json(const nlohmann::json& j) {
        Checkpoint c;
        c.params_ = j.at("parameters");
        c.metadata = j.at("metadata");
        return c;
    }

    // Write via temp file + rename so readers never observe a partial document.
    void save(const std::filesystem::path& path) const {
        const auto tmp = path.string() + ".tmp";
        {
            std::ofstream out(tmp, std::ios::trunc);
            if (!out) throw std::runtime_error("checkpoint: cannot open " + tmp);
            out << to_json().dump();
        }
        std::filesystem::rename(tmp, path);
    }

    static Checkpoint load(const std::filesystem::path& path) {
        std::ifstream in(path);
        if (!in) throw std::runtime_error("checkpoint: cannot open " + path.string());
        nlohmann::json j;
        in >> j;
        return from_json(j);
    }

private:
    nlohmann::json params_ = nlohmann::json::object();

    const nlohmann::json& require(const std::string& name) const {
        auto it = params_.find(name);
        if (it == params_.end()) throw std::runtime_error("checkpoint: missing parameter " + name);
        return *it;
    }
};

}  // namespace datacom
