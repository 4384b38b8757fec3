#pragma once

#include <fstream>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "seqplan/bandwidth.hpp"
#include "seqplan/cost.hpp"
#include "seqplan/model.hpp"

namespace seqplan {

/// Everything a planner run needs: model, cluster, compute and overlap
/// models, and the path to the bandwidth profile CSV.
struct RunConfig {
    ModelConfig model;
    ClusterConfig cluster;
    ComputeModel compute;
    OverlapModel overlap;
    std::string bandwidth_profile_path;
};

namespace detail {

inline void reject_unknown_keys(const nlohmann::json& obj, const std::set<std::string>& known,
                                const std::string& section) {
    for (const auto& [key, value] : obj.items())
        if (!known.count(key))
            throw std::runtime_error("unknown key '" + key + "' in section '" + section + "'");
}

inline std::int64_t require_int(const nlohmann::json& obj, const std::string& key,
                                const std::string& section) {
    if (!obj.contains(key))
        throw std::runtime_error("missing key '" + key + "' in section '" + section + "'");
    if (!obj[key].is_number_integer())
        throw std::runtime_error("key '" + key + "' in section '" + section +
                                 "' must be an integer");
    return obj[key].get<std::int64_t>();
}

}  // namespace detail

inline RunConfig parse_run_config(const nlohmann::json& root) {
    RunConfig rc;
    std::vector<std::string> errors;
    detail::reject_unknown_keys(root, {"model", "cluster", "compute", "overlap", "paths"}, "<root>");

    if (!root.contains("model")) throw std::runtime_error("missing 'model' section");
    {
        const auto& m = root["model"];
        detail::reject_unknown_keys(m,
                                    {"preset", "hidden_dim", "layers", "heads", "vocab", "seq_len",
                                     "global_batch_tokens", "bytes_per_element"},
                                    "model");
        if (m.contains("preset")) rc.model = model_preset(m["preset"].get<std::string>());
        auto take = [&](const char* key, std::int64_t& field) {
            if (m.contains(key)) field = detail::require_int(m, key, "model");
        };
        take("hidden_dim", rc.model.hidden_dim);
        take("layers", rc.model.layers);
        take("heads", rc.model.heads);
        take("vocab", rc.model.vocab);
        take("seq_len", rc.model.seq_len);
        take("global_batch_tokens", rc.model.global_batch_tokens);
        take("bytes_per_element", rc.model.bytes_per_element);
        for (const auto& e : rc.model.validation_errors()) errors.push_back("model: " + e);
    }

    if (!root.contains("cluster")) throw std::runtime_error("missing 'cluster' section");
    {
        const auto& c = root["cluster"];
        detail::reject_unknown_keys(c, {"total_gpus", "gpus_per_node", "gpu_memory_capacity_bytes"},
                                    "cluster");
        rc.cluster.total_gpus = detail::require_int(c, "total_gpus", "cluster");
        rc.cluster.gpus_per_node = detail::require_int(c, "gpus_per_node", "cluster");
        rc.cluster.gpu_memory_capacity = detail::require_int(c, "gpu_memory_capacity_bytes", "cluster");
        for (const auto& e : rc.cluster.validation_errors()) errors.push_back("cluster: " + e);
    }

    if (root.contains("compute")) {
        const auto& c = root["compute"];
        detail::reject_unknown_keys(c, {"mode", "peak_flops_per_gpu", "efficiency"}, "compute");
        if (c.contains("mode")) {
            const std::string mode = c["mode"].get<std::string>();
            if (mode == "analytic") rc.compute.mode = ComputeModel::Mode::Analytic;
            else if (mode == "profiled") rc.compute.mode = ComputeModel::Mode::Profiled;
            else errors.push_back("compute: mode must be 'analytic' or 'profiled'");
        }
        if (c.contains("peak_flops_per_gpu"))
            rc.compute.peak_flops_per_gpu = c["peak_flops_per_gpu"].get<double>();
        if (c.contains("efficiency")) rc.compute.efficiency = c["efficiency"].get<double>();
        if (rc.compute.mode == ComputeModel::Mode::Analytic) {
            if (rc.compute.peak_flops_per_gpu <= 0)
                errors.push_back("compute: peak_flops_per_gpu must be positive");
            if (rc.compute.efficiency <= 0 || rc.compute.efficiency > 1)
                errors.push_back("compute: efficiency must be in (0, 1]");
        }
    }

    if (root.contains("overlap")) {
        const auto& o = root["overlap"];
        detail::reject_unknown_keys(o, {"slowdown_ratio"}, "overlap");
        if (o.contains("slowdown_ratio"))
            rc.overlap.slowdown_ratio = o["slowdown_ratio"].get<double>();
        if (rc.overlap.slowdown_ratio < 1.0)
            errors.push_back("overlap: slowdown_ratio must be >= 1");
    }

    if (root.contains("paths")) {
        const auto& p = root["paths"];
        detail::reject_unknown_keys(p, {"bandwidth_profile"}, "paths");
        if (p.contains("bandwidth_profile"))
            rc.bandwidth_profile_path = p["bandwidth_profile"].get<std::string>();
    }

    if (!errors.empty()) {
        std::string msg = "config validation failed:";
        for (const auto& e : errors) msg += "\n  " + e;
        throw std::runtime_error(msg);
    }
    return rc;
}

inline RunConfig load_run_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open config file: " + path);
    nlohmann::json root;
    try {
        in >> root;
    } catch (const nlohmann::json::parse_error& e) {
        throw std::runtime_error(path + ": " + e.what());
    }
    if (!root.is_object()) throw std::runtime_error(path + ": top level must be an object");
    return parse_run_config(root);
}

}  // namespace seqplan
