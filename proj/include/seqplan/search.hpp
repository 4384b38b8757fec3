#pragma once

#include <algorithm>
#include <cstdint>
#include <sstream>
#include <string>
#include <vector>

#include "seqplan/cost.hpp"
#include "seqplan/placement.hpp"
#include "seqplan/strategy.hpp"

namespace seqplan {

struct RankedPlan {
    Strategy strategy;
    CostBreakdown cost;
    MeshPlacement placement;
    ThroughputEstimate throughput;
};

struct SearchStats {
    std::int64_t candidates = 0;    // feasible strategies enumerated
    std::int64_t memory_ok = 0;     // survived the capacity gate
    std::int64_t pruned_memory = 0;
};

struct PlanReport {
    std::vector<RankedPlan> plans;  // ascending t_step, ties lexicographic
    SearchStats stats;
    bool empty() const { return plans.empty(); }
};

struct SearchOptions {
    std::int64_t top_k = 10;
    double memory_slack = 1.0;  // capacity gate multiplier
    EnumerationBounds bounds;
    EstimatorOptions estimator;
};

/// Enumerates the feasible space, gates on per-GPU memory, estimates every
/// survivor, and keeps the top-K by step time. Equivalent to exhaustive
/// enumerate-then-sort; deterministic via the lexicographic tie-break.
inline PlanReport search_plans(const ModelConfig& model, const ClusterConfig& cluster,
                               const BandwidthProfile& profile, const ComputeModel& compute,
                               const OverlapModel& overlap, const SearchOptions& opts = {}) {
    if (opts.top_k < 1) throw std::invalid_argument("top_k must be >= 1");
    PlanReport report;
    const double capacity = double(cluster.gpu_memory_capacity) * opts.memory_slack;

    auto worse = [](const RankedPlan& a, const RankedPlan& b) {
        if (a.cost.t_step != b.cost.t_step) return a.cost.t_step < b.cost.t_step;
        return a.strategy.tuple() < b.strategy.tuple();
    };

    enumerate_strategies(model, cluster, opts.bounds, [&](const Strategy& s) {
        ++report.stats.candidates;
        RankedPlan plan;
        plan.strategy = s;
        plan.cost.mem = estimate_memory(s, model, cluster);
        if (plan.cost.mem.total() > capacity) {
            ++report.stats.pruned_memory;
            return;
        }
        ++report.stats.memory_ok;
        plan.cost = estimate_step(s, model, cluster, profile, compute, overlap, opts.estimator);
        plan.placement = place_groups(cluster, s);
        plan.throughput = estimate_throughput(plan.cost, model, cluster,
                                              compute.peak_flops_per_gpu);
        auto pos = std::upper_bound(report.plans.begin(), report.plans.end(), plan, worse);
        report.plans.insert(pos, plan);
        if (std::int64_t(report.plans.size()) > opts.top_k) report.plans.pop_back();
    });
    return report;
}

namespace detail {
inline std::string gib(double bytes) {
    std::ostringstream os;
    os.precision(2);
    os << std::fixed << bytes / (1024.0 * 1024.0 * 1024.0) << " GiB";
    return os.str();
}
inline std::string ms(double seconds) {
    std::ostringstream os;
    os.precision(3);
    os << std::fixed << seconds * 1e3 << " ms";
    return os.str();
}
}  // namespace detail

/// Human-readable rationale for one ranked plan: the strategy, its memory and
/// communication breakdowns, and which constraint fails when each parallel
/// dimension is pushed to its next admissible value.
inline std::string explain_plan(const PlanReport& report, const ModelConfig& model,
                                const ClusterConfig& cluster, std::size_t rank) {
    if (rank >= report.plans.size())
        throw std::out_of_range("rank " + std::to_string(rank) + " out of range (report has " +
                                std::to_string(report.plans.size()) + " plans)");
    const RankedPlan& p = report.plans[rank];
    const Strategy& s = p.strategy;
    std::ostringstream os;
    os << "rank " << rank << ": s_pp=" << s.pp << " s_dp=" << s.dp << " s_tp=" << s.tp
       << " s_sp=" << s.sp << " s_ps=" << s.ps << " s_gs=" << s.gs << " s_oss=" << s.oss
       << " b=" << s.micro_batch << " n=" << s.micro_batch_num << " a=" << s.recompute << "\n";
    os << "  step time " << detail::ms(p.cost.t_step) << " (fwd/bwd " << detail::ms(p.cost.t_fwd_bwd)
       << ", update " << detail::ms(p.cost.t_update) << ", bubble factor "
       << p.cost.bubble_factor << ")\n";
    os << "  memory: P " << detail::gib(p.cost.mem.params) << " | G " << detail::gib(p.cost.mem.grads)
       << " | OS " << detail::gib(p.cost.mem.optstate) << " | ACT " << detail::gib(p.cost.mem.act)
       << " | other " << detail::gib(p.cost.mem.other) << " | total "
       << detail::gib(p.cost.mem.total()) << "\n";
    os << "  comm/layer/step: tp " << detail::ms(p.cost.comm.tp) << " | sp "
       << detail::ms(p.cost.comm.sp) << " | ps " << detail::ms(p.cost.comm.ps) << " | oss "
       << detail::ms(p.cost.comm.oss) << " | gs " << detail::ms(p.cost.comm.gs) << "\n";
    os << "  predicted TGS " << std::int64_t(p.throughput.tokens_per_gpu_per_s) << ", MFU "
       << std::int64_t(p.throughput.mfu * 1000) / 10.0 << "%\n";

    struct Probe {
        const char* name;
        Strategy variant;
    };
    std::vector<Probe> probes;
    auto add = [&](const char* name, auto mutate) {
        Strategy v = s;
        mutate(v);
        probes.push_back({name, v});
    };
    add("s_pp*2", [](Strategy& v) { v.pp *= 2; });
    add("s_dp*2", [](Strategy& v) { v.dp *= 2; });
    add("s_tp*2", [](Strategy& v) { v.tp *= 2; });
    add("s_sp*2", [](Strategy& v) { v.sp *= 2; });
    add("s_ps*2", [](Strategy& v) { v.ps *= 2; });
    add("s_oss*2", [](Strategy& v) { v.oss *= 2; });
    add("b*2", [](Strategy& v) { v.micro_batch *= 2; });
    os << "  if incremented:\n";
    for (const auto& probe : probes) {
        auto verdict = validate(probe.variant, model, cluster);
        os << "    " << probe.name << ": "
           << (verdict.ok() ? "still feasible" : verdict.violations.front()) << "\n";
    }
    return os.str();
}

}  // namespace seqplan
