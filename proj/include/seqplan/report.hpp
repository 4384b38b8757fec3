#pragma once

#include <iomanip>
#include <sstream>
#include <string>

#include <json.hpp>

#include "seqplan/search.hpp"

namespace seqplan {

inline constexpr int kRecordSchemaVersion = 1;

enum class ReportFormat { Table, Records };

inline nlohmann::json plan_to_record(const RankedPlan& p, std::size_t rank) {
    const Strategy& s = p.strategy;
    nlohmann::json rec;
    rec["schema_version"] = kRecordSchemaVersion;
    rec["rank"] = rank;
    rec["strategy"] = {{"b", s.micro_batch}, {"n", s.micro_batch_num}, {"a", s.recompute},
                       {"pp", s.pp},         {"dp", s.dp},             {"tp", s.tp},
                       {"sp", s.sp},         {"ps", s.ps},             {"gs", s.gs},
                       {"oss", s.oss}};
    rec["memory_bytes"] = {{"params", p.cost.mem.params},
                           {"grads", p.cost.mem.grads},
                           {"optstate", p.cost.mem.optstate},
                           {"act", p.cost.mem.act},
                           {"other", p.cost.mem.other},
                           {"total", p.cost.mem.total()}};
    rec["comm_layer_s"] = {{"tp", p.cost.comm.tp},
                           {"sp", p.cost.comm.sp},
                           {"ps", p.cost.comm.ps},
                           {"oss", p.cost.comm.oss},
                           {"gs", p.cost.comm.gs}};
    rec["time_s"] = {{"comp_per_layer", p.cost.t_comp_per_layer},
                     {"layer_overlapped", p.cost.t_layer_overlapped},
                     {"other", p.cost.t_other},
                     {"fwd_bwd", p.cost.t_fwd_bwd},
                     {"update", p.cost.t_update},
                     {"step", p.cost.t_step}};
    rec["bubble_factor"] = p.cost.bubble_factor;
    rec["placement"] = nlohmann::json::object();
    for (const auto& [kind, axis] : p.placement.axis)
        rec["placement"][to_string(kind)] = to_string(axis);
    rec["predicted"] = {{"tgs", p.throughput.tokens_per_gpu_per_s}, {"mfu", p.throughput.mfu}};
    return rec;
}

inline RankedPlan plan_from_record(const nlohmann::json& rec) {
    RankedPlan p;
    const auto& s = rec.at("strategy");
    p.strategy.micro_batch = s.at("b");
    p.strategy.micro_batch_num = s.at("n");
    p.strategy.recompute = s.at("a");
    p.strategy.pp = s.at("pp");
    p.strategy.dp = s.at("dp");
    p.strategy.tp = s.at("tp");
    p.strategy.sp = s.at("sp");
    p.strategy.ps = s.at("ps");
    p.strategy.gs = s.at("gs");
    p.strategy.oss = s.at("oss");
    const auto& m = rec.at("memory_bytes");
    p.cost.mem.params = m.at("params");
    p.cost.mem.grads = m.at("grads");
    p.cost.mem.optstate = m.at("optstate");
    p.cost.mem.act = m.at("act");
    p.cost.mem.other = m.at("other");
    const auto& c = rec.at("comm_layer_s");
    p.cost.comm.tp = c.at("tp");
    p.cost.comm.sp = c.at("sp");
    p.cost.comm.ps = c.at("ps");
    p.cost.comm.oss = c.at("oss");
    p.cost.comm.gs = c.at("gs");
    const auto& t = rec.at("time_s");
    p.cost.t_comp_per_layer = t.at("comp_per_layer");
    p.cost.t_layer_overlapped = t.at("layer_overlapped");
    p.cost.t_other = t.at("other");
    p.cost.t_fwd_bwd = t.at("fwd_bwd");
    p.cost.t_update = t.at("update");
    p.cost.t_step = t.at("step");
    p.cost.bubble_factor = rec.at("bubble_factor");
    for (const auto& [kind, axis] : rec.at("placement").items()) {
        GroupKind k = kind == "tp/sp" ? GroupKind::TpSp
                      : kind == "ps"  ? GroupKind::Ps
                      : kind == "oss" ? GroupKind::Oss
                      : kind == "gs"  ? GroupKind::Gs
                                      : GroupKind::Dp;
        p.placement.axis[k] = mesh_axis_from_string(axis.get<std::string>());
    }
    p.throughput.tokens_per_gpu_per_s = rec.at("predicted").at("tgs");
    p.throughput.mfu = rec.at("predicted").at("mfu");
    return p;
}

/// Renders a plan report either as an aligned human-readable table (memory in
/// GiB, times in ms) or as line-delimited JSON records, one plan per line.
/// The records form round-trips losslessly through plan_from_record.
inline std::string render_report(const PlanReport& report, ReportFormat format) {
    std::ostringstream os;
    if (format == ReportFormat::Records) {
        for (std::size_t i = 0; i < report.plans.size(); ++i)
            os << plan_to_record(report.plans[i], i).dump() << "\n";
        return os.str();
    }
    if (report.empty()) {
        os << "no feasible plan\n";
        return os.str();
    }
    constexpr double GiB = 1024.0 * 1024.0 * 1024.0;
    os << std::left << std::setw(5) << "rank" << std::setw(26) << "strategy (pp,dp,tp,sp)"
       << std::setw(22) << "shard (ps,gs,oss)" << std::setw(12) << "b/n/a" << std::right
       << std::setw(10) << "mem GiB" << std::setw(12) << "step ms" << std::setw(12) << "TGS"
       << std::setw(8) << "MFU%" << "\n";
    for (std::size_t i = 0; i < report.plans.size(); ++i) {
        const auto& p = report.plans[i];
        const auto& s = p.strategy;
        std::ostringstream par, shard, bna;
        par << s.pp << "," << s.dp << "," << s.tp << "," << s.sp;
        shard << s.ps << "," << s.gs << "," << s.oss;
        bna << s.micro_batch << "/" << s.micro_batch_num << "/" << s.recompute;
        os << std::left << std::setw(5) << i << std::setw(26) << par.str() << std::setw(22)
           << shard.str() << std::setw(12) << bna.str() << std::right << std::fixed
           << std::setprecision(2) << std::setw(10) << p.cost.mem.total() / GiB
           << std::setprecision(3) << std::setw(12) << p.cost.t_step * 1e3 << std::setprecision(1)
           << std::setw(12) << p.throughput.tokens_per_gpu_per_s << std::setw(8)
           << p.throughput.mfu * 100 << "\n";
    }
    os << "candidates " << report.stats.candidates << ", memory-feasible "
       << report.stats.memory_ok << ", pruned " << report.stats.pruned_memory << "\n";
    return os.str();
}

/// Memory/communication bar-chart data for one plan as CSV.
inline std::string breakdown_csv(const RankedPlan& p) {
    std::ostringstream os;
    os << "kind,component,value\n";
    os << "memory_bytes,params," << std::int64_t(p.cost.mem.params) << "\n";
    os << "memory_bytes,grads," << std::int64_t(p.cost.mem.grads) << "\n";
    os << "memory_bytes,optstate," << std::int64_t(p.cost.mem.optstate) << "\n";
    os << "memory_bytes,act," << std::int64_t(p.cost.mem.act) << "\n";
    os << "memory_bytes,other," << std::int64_t(p.cost.mem.other) << "\n";
    os << std::setprecision(17);
    os << "comm_layer_s,tp," << p.cost.comm.tp << "\n";
    os << "comm_layer_s,sp," << p.cost.comm.sp << "\n";
    os << "comm_layer_s,ps," << p.cost.comm.ps << "\n";
    os << "comm_layer_s,oss," << p.cost.comm.oss << "\n";
    os << "comm_layer_s,gs," << p.cost.comm.gs << "\n";
    return os.str();
}

}  // namespace seqplan
