#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace seqplan {

enum class CollectiveOp { AllReduce, AllGather, ReduceScatter, AllToAll };
enum class MeshAxis { Intra, Inter, Mixed };

inline const char* to_string(CollectiveOp op) {
    switch (op) {
        case CollectiveOp::AllReduce: return "all-reduce";
        case CollectiveOp::AllGather: return "all-gather";
        case CollectiveOp::ReduceScatter: return "reduce-scatter";
        case CollectiveOp::AllToAll: return "all-to-all";
    }
    return "?";
}

inline const char* to_string(MeshAxis axis) {
    switch (axis) {
        case MeshAxis::Intra: return "intra";
        case MeshAxis::Inter: return "inter";
        case MeshAxis::Mixed: return "mixed";
    }
    return "?";
}

inline CollectiveOp collective_op_from_string(const std::string& s) {
    if (s == "all-reduce") return CollectiveOp::AllReduce;
    if (s == "all-gather") return CollectiveOp::AllGather;
    if (s == "reduce-scatter") return CollectiveOp::ReduceScatter;
    if (s == "all-to-all") return CollectiveOp::AllToAll;
    throw std::invalid_argument("unknown collective op: " + s);
}

inline MeshAxis mesh_axis_from_string(const std::string& s) {
    if (s == "intra") return MeshAxis::Intra;
    if (s == "inter") return MeshAxis::Inter;
    if (s == "mixed") return MeshAxis::Mixed;
    throw std::invalid_argument("unknown axis: " + s);
}

struct ClusterConfig {
    std::int64_t total_gpus = 0;            // N
    std::int64_t gpus_per_node = 0;
    std::int64_t gpu_memory_capacity = 0;   // bytes

    std::vector<std::string> validation_errors() const {
        std::vector<std::string> errs;
        if (total_gpus <= 0) errs.push_back("total_gpus must be positive");
        if (gpus_per_node <= 0) errs.push_back("gpus_per_node must be positive");
        if (gpu_memory_capacity < 0) errs.push_back("gpu_memory_capacity_bytes must be non-negative");
        if (total_gpus > 0 && gpus_per_node > 0 && total_gpus % gpus_per_node != 0)
            errs.push_back("total_gpus must be divisible by gpus_per_node");
        return errs;
    }

    bool valid() const { return validation_errors().empty(); }

    void ensure_valid() const {
        auto errs = validation_errors();
        if (!errs.empty()) {
            std::string msg = "invalid cluster config:";
            for (const auto& e : errs) msg += " " + e + ";";
            throw std::invalid_argument(msg);
        }
    }
};

/// Profiled effective-bandwidth curves for the four collectives, keyed by
/// (op, axis, participant count). Each curve maps message size (bytes) to
/// effective bandwidth (bytes/s); lookups interpolate in log-log space and
/// clamp outside the sampled range.
class BandwidthProfile {
public:
    struct Entry {
        CollectiveOp op;
        std::int64_t participants;
        MeshAxis axis;
        std::int64_t message_bytes;
        double bandwidth;  // bytes/s
    };

    void add(const Entry& e) {
        if (e.bandwidth <= 0.0)
            throw std::invalid_argument("bandwidth must be strictly positive");
        if (e.message_bytes <= 0)
            throw std::invalid_argument("message size must be strictly positive");
        if (e.participants < 2)
            throw std::invalid_argument("participants must be >= 2");
        if (e.axis == MeshAxis::Mixed)
            throw std::invalid_argument("profiles carry intra/inter curves only");
        auto& curve = curves_[key(e.op, e.axis, e.participants)];
        auto it = std::lower_bound(curve.begin(), curve.end(), e.message_bytes,
                                   [](const Point& p, std::int64_t v) { return p.size < v; });
        if (it != curve.end() && it->size == e.message_bytes)
            throw std::invalid_argument("duplicate message size in curve");
        curve.insert(it, Point{e.message_bytes, e.bandwidth});
    }

    bool has_curve(CollectiveOp op, MeshAxis axis) const {
        for (const auto& [k, curve] : curves_)
            if (std::get<0>(k) == op && std::get<1>(k) == effective_axis(axis) && !curve.empty())
                return true;
        return false;
    }

    /// Interpolated effective bandwidth at (op, p, axis, v). A mixed axis is
    /// priced with the inter curve. If the exact participant count has no
    /// curve, the nearest profiled count on the same axis is used, ties toward
    /// larger p.
    double lookup(CollectiveOp op, std::int64_t participants, MeshAxis axis,
                  std::int64_t message_bytes) const {
        const MeshAxis ax = effective_axis(axis);
        const auto* curve = find_curve(op, ax, participants);
        if (curve == nullptr)
            throw std::runtime_error(std::string("no bandwidth curve for (") + to_string(op) +
                                     ", " + to_string(ax) + ")");
        return interpolate(*curve, message_bytes);
    }

    std::vector<Entry> entries() const {
        std::vector<Entry> out;
        for (const auto& [k, curve] : curves_)
            for (const auto& p : curve)
                out.push_back(Entry{std::get<0>(k), std::get<2>(k), std::get<1>(k), p.size, p.bw});
        return out;
    }

    bool empty() const { return curves_.empty(); }

    /// Flat profile: every (op, axis, p in {2,4,...,max_p}) at a constant
    /// bandwidth. Handy for closed-form checks and desk-scale defaults.
    static BandwidthProfile flat(double bandwidth, std::int64_t max_participants = 1024) {
        BandwidthProfile prof;
        for (CollectiveOp op : {CollectiveOp::AllReduce, CollectiveOp::AllGather,
                                CollectiveOp::ReduceScatter, CollectiveOp::AllToAll})
            for (MeshAxis axis : {MeshAxis::Intra, MeshAxis::Inter})
                for (std::int64_t p = 2; p <= max_participants; p *= 2)
                    prof.add(Entry{op, p, axis, 1, bandwidth});
        return prof;
    }

private:
    struct Point {
        std::int64_t size;
        double bw;
    };
    using Key = std::tuple<CollectiveOp, MeshAxis, std::int64_t>;

    static MeshAxis effective_axis(MeshAxis axis) {
        return axis == MeshAxis::Mixed ? MeshAxis::Inter : axis;
    }

    static Key key(CollectiveOp op, MeshAxis axis, std::int64_t p) { return {op, axis, p}; }

    const std::vector<Point>* find_curve(CollectiveOp op, MeshAxis axis,
                                         std::int64_t participants) const {
        auto it = curves_.find(key(op, axis, participants));
        if (it != curves_.end()) return &it->second;
        // Nearest participant count on the same axis, ties toward larger p.
        const std::vector<Point>* best = nullptr;
        std::int64_t best_p = 0;
        for (const auto& [k, curve] : curves_) {
            if (std::get<0>(k) != op || std::get<1>(k) != axis || curve.empty()) continue;
            const std::int64_t p = std::get<2>(k);
            if (best == nullptr ||
                std::llabs(p - participants) < std::llabs(best_p - participants) ||
                (std::llabs(p - participants) == std::llabs(best_p - participants) && p > best_p)) {
                best = &curve;
                best_p = p;
            }
        }
        return best;
    }

    static double interpolate(const std::vector<Point>& curve, std::int64_t v) {
        if (v <= curve.front().size) return curve.front().bw;
        if (v >= curve.back().size) return curve.back().bw;
        auto hi = std::lower_bound(curve.begin(), curve.end(), v,
                                   [](const Point& p, std::int64_t x) { return p.size < x; });
        if (hi->size == v) return hi->bw;
        auto lo = hi - 1;
        const double t = (std::log(double(v)) - std::log(double(lo->size))) /
                         (std::log(double(hi->size)) - std::log(double(lo->size)));
        return std::exp(std::log(lo->bw) + t * (std::log(hi->bw) - std::log(lo->bw)));
    }

    std::map<Key, std::vector<Point>> curves_;
};

/// tau(o, v, p) = v / w(o, v, p). Degenerate groups (p <= 1) and empty
/// messages cost nothing.
inline double collective_time(const BandwidthProfile& profile, CollectiveOp op,
                              std::int64_t message_bytes, std::int64_t participants,
                              MeshAxis axis) {
    if (message_bytes < 0) throw std::invalid_argument("message size must be non-negative");
    if (participants < 1) throw std::invalid_argument("participants must be >= 1");
    if (participants == 1 || message_bytes == 0) return 0.0;
    return double(message_bytes) / profile.lookup(op, participants, axis, message_bytes);
}

/// Loads a profile from CSV with header
/// `op,participants,axis,message_bytes,bandwidth_bytes_per_sec`.
inline BandwidthProfile load_bandwidth_csv(std::istream& in, const std::string& origin = "<csv>") {
    BandwidthProfile prof;
    std::string line;
    std::size_t lineno = 0;
    bool saw_header = false;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty() || line[0] == '#') continue;
        std::vector<std::string> fields;
        std::stringstream ss(line);
        std::string f;
        while (std::getline(ss, f, ',')) fields.push_back(f);
        if (!saw_header) {
            if (fields.size() != 5 || fields[0] != "op" || fields[1] != "participants" ||
                fields[2] != "axis" || fields[3] != "message_bytes" ||
                fields[4] != "bandwidth_bytes_per_sec")
                throw std::runtime_error(origin + ":" + std::to_string(lineno) +
                                         ": bad CSV header");
            saw_header = true;
            continue;
        }
        if (fields.size() != 5)
            throw std::runtime_error(origin + ":" + std::to_string(lineno) +
                                     ": expected 5 fields, got " + std::to_string(fields.size()));
        try {
            BandwidthProfile::Entry e;
            e.op = collective_op_from_string(fields[0]);
            e.participants = std::stoll(fields[1]);
            e.axis = mesh_axis_from_string(fields[2]);
            e.message_bytes = std::stoll(fields[3]);
            e.bandwidth = std::stod(fields[4]);
            prof.add(e);
        } catch (const std::exception& ex) {
            throw std::runtime_error(origin + ":" + std::to_string(lineno) + ": " + ex.what());
        }
    }
    if (!saw_header)
        throw std::runtime_error(origin + ": empty bandwidth profile");
    return prof;
}

inline BandwidthProfile load_bandwidth_csv_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open bandwidth profile: " + path);
    return load_bandwidth_csv(in, path);
}

}  // namespace seqplan
