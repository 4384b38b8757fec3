// Command-line front end: plan search, single-strategy estimation, constraint
// validation, overlap and memory-pool simulation, and profile inspection.

#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "seqplan/seqplan.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitNoPlan = 2;

struct StrategyFlags {
    std::int64_t b = 1, n = 1, a = 0, pp = 1, dp = 1, tp = 1, sp = 1, ps = 1, gs = 1, oss = 1;

    void attach(CLI::App* app) {
        app->add_option("--b", b, "micro-batch size (sequences)");
        app->add_option("--n", n, "micro-batch count");
        app->add_option("--a", a, "activation recomputation (0 or 1)");
        app->add_option("--pp", pp, "pipeline parallel size");
        app->add_option("--dp", dp, "data parallel size");
        app->add_option("--tp", tp, "tensor parallel size");
        app->add_option("--sp", sp, "sequence parallel size");
        app->add_option("--ps", ps, "parameter sharding factor");
        app->add_option("--gs", gs, "gradient sharding factor");
        app->add_option("--oss", oss, "optimizer state sharding factor");
    }

    seqplan::Strategy to_strategy() const {
        seqplan::Strategy s;
        s.micro_batch = b;
        s.micro_batch_num = n;
        s.recompute = a;
        s.pp = pp;
        s.dp = dp;
        s.tp = tp;
        s.sp = sp;
        s.ps = ps;
        s.gs = gs;
        s.oss = oss;
        return s;
    }
};

seqplan::RunConfig load_config(const std::string& config_path, const std::string& preset,
                               const std::string& profile_path) {
    seqplan::RunConfig rc;
    if (!config_path.empty()) {
        rc = seqplan::load_run_config(config_path);
    } else if (!preset.empty()) {
        rc.model = seqplan::model_preset(preset);
        rc.cluster.total_gpus = 8;
        rc.cluster.gpus_per_node = 8;
        rc.cluster.gpu_memory_capacity = 80LL << 30;
    } else {
        throw std::runtime_error("either --config or --preset is required");
    }
    if (!preset.empty() && !config_path.empty()) {
        // Flag overrides file.
        auto cfg = seqplan::model_preset(preset);
        cfg.seq_len = rc.model.seq_len;
        cfg.global_batch_tokens = rc.model.global_batch_tokens;
        cfg.bytes_per_element = rc.model.bytes_per_element;
        rc.model = cfg;
    }
    if (!profile_path.empty()) rc.bandwidth_profile_path = profile_path;
    return rc;
}

seqplan::BandwidthProfile load_profile(const seqplan::RunConfig& rc, double flat_bw) {
    if (!rc.bandwidth_profile_path.empty())
        return seqplan::load_bandwidth_csv_file(rc.bandwidth_profile_path);
    return seqplan::BandwidthProfile::flat(flat_bw);
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"analytical planner and simulators for hierarchical LLM parallelization"};
    app.require_subcommand(1);

    std::string config_path, preset, profile_path, format = "table";
    double flat_bw = 100e9;
    app.add_option("--config", config_path, "run config file (JSON)");
    app.add_option("--preset", preset, "built-in model preset (7b|13b|30b|65b)");
    app.add_option("--profile", profile_path, "bandwidth profile CSV");
    app.add_option("--flat-bandwidth", flat_bw,
                   "fallback constant bandwidth (bytes/s) when no profile is given");
    app.add_option("--format", format, "output format: table|records")
        ->check(CLI::IsMember({"table", "records"}));

    // plan
    auto* plan_cmd = app.add_subcommand("plan", "search the strategy space, rank the top-K");
    std::int64_t top_k = 10;
    double memory_slack = 1.0;
    std::optional<std::size_t> explain_rank;
    plan_cmd->add_option("--top-k", top_k, "number of plans to keep");
    plan_cmd->add_option("--memory-slack", memory_slack, "capacity gate multiplier");
    plan_cmd->add_option("--explain", explain_rank, "print the rationale for one rank");

    // estimate
    auto* est_cmd = app.add_subcommand("estimate", "cost breakdown for one strategy");
    StrategyFlags est_flags;
    est_flags.attach(est_cmd);
    std::string emit_breakdown;
    est_cmd->add_option("--emit-breakdown", emit_breakdown, "write memory/comm bar data as CSV");

    // validate
    auto* val_cmd = app.add_subcommand("validate", "feasibility verdict for one strategy");
    StrategyFlags val_flags;
    val_flags.attach(val_cmd);

    // simulate-overlap
    auto* ov_cmd = app.add_subcommand("simulate-overlap", "two-stream overlap timeline");
    std::int64_t ov_layers = 4;
    double ov_compute = 10e-3, ov_gather = 10e-3, ov_rs = 10e-3, ov_issue = 0.0, ov_ratio = 1.30;
    std::string ov_pass = "backward", emit_timeline;
    ov_cmd->add_option("--layers", ov_layers, "layer count");
    ov_cmd->add_option("--compute", ov_compute, "forward compute seconds per layer");
    ov_cmd->add_option("--gather", ov_gather, "all-gather seconds per layer");
    ov_cmd->add_option("--reduce-scatter", ov_rs, "reduce-scatter seconds per layer");
    ov_cmd->add_option("--issue-delay", ov_issue, "fixed per-event launch delay (s)");
    ov_cmd->add_option("--slowdown-ratio", ov_ratio, "analytic overlap slowdown ratio");
    ov_cmd->add_option("--pass", ov_pass, "forward|backward")
        ->check(CLI::IsMember({"forward", "backward"}));
    ov_cmd->add_option("--emit-timeline", emit_timeline, "write the event timeline as CSV");

    // simulate-mempool
    auto* mp_cmd = app.add_subcommand("simulate-mempool", "caching-allocator fragmentation");
    StrategyFlags mp_flags;
    mp_flags.a = 1;
    mp_flags.attach(mp_cmd);
    bool mp_pinned = false, mp_premap = false;
    std::int64_t mp_consolidate = 0;
    mp_cmd->add_flag("--pinned-comm-pool", mp_pinned, "dedicated rotating comm-buffer segments");
    mp_cmd->add_option("--consolidate-every-k-mlp", mp_consolidate,
                       "pack every k MLP outputs into one fresh segment (0 = off)");
    mp_cmd->add_flag("--grad-premap", mp_premap, "pre-map gradients to one contiguous region");

    // profile-check
    auto* pc_cmd = app.add_subcommand("profile-check", "validate a bandwidth CSV, print curves");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int rc = app.exit(e);
        return rc == 0 ? kExitOk : kExitUsage;
    }

    const bool records = format == "records";
    try {
        if (pc_cmd->parsed()) {
            if (profile_path.empty()) throw std::runtime_error("profile-check requires --profile");
            auto prof = seqplan::load_bandwidth_csv_file(profile_path);
            std::cout << "op,participants,axis,message_bytes,interpolated_bandwidth\n";
            for (const auto& e : prof.entries()) {
                for (std::int64_t v : {1LL << 16, 1LL << 20, 1LL << 24, 1LL << 28})
                    std::cout << seqplan::to_string(e.op) << "," << e.participants << ","
                              << seqplan::to_string(e.axis) << "," << v << ","
                              << prof.lookup(e.op, e.participants, e.axis, v) << "\n";
            }
            return kExitOk;
        }

        auto rc = load_config(config_path, preset, profile_path);

        if (val_cmd->parsed()) {
            auto verdict = seqplan::validate(val_flags.to_strategy(), rc.model, rc.cluster);
            nlohmann::json out;
            out["feasible"] = verdict.ok();
            out["violations"] = verdict.violations;
            std::cout << out.dump() << "\n";
            return kExitOk;
        }

        if (est_cmd->parsed()) {
            auto profile = load_profile(rc, flat_bw);
            auto s = est_flags.to_strategy();
            auto cost = seqplan::estimate_step(s, rc.model, rc.cluster, profile, rc.compute,
                                               rc.overlap);
            seqplan::RankedPlan plan{s, cost, seqplan::place_groups(rc.cluster, s),
                                     seqplan::estimate_throughput(cost, rc.model, rc.cluster,
                                                                  rc.compute.peak_flops_per_gpu)};
            if (!emit_breakdown.empty()) {
                std::ofstream out(emit_breakdown);
                if (!out) throw std::runtime_error("cannot write " + emit_breakdown);
                out << seqplan::breakdown_csv(plan);
            }
            if (records) {
                std::cout << seqplan::plan_to_record(plan, 0).dump() << "\n";
            } else {
                seqplan::PlanReport rep;
                rep.plans.push_back(plan);
                rep.stats.candidates = rep.stats.memory_ok = 1;
                std::cout << seqplan::render_report(rep, seqplan::ReportFormat::Table);
            }
            return kExitOk;
        }

        if (plan_cmd->parsed()) {
            auto profile = load_profile(rc, flat_bw);
            seqplan::SearchOptions opts;
            opts.top_k = top_k;
            opts.memory_slack = memory_slack;
            auto report = seqplan::search_plans(rc.model, rc.cluster, profile, rc.compute,
                                                rc.overlap, opts);
            std::cout << seqplan::render_report(report, records ? seqplan::ReportFormat::Records
                                                                : seqplan::ReportFormat::Table);
            if (explain_rank)
                std::cout << seqplan::explain_plan(report, rc.model, rc.cluster, *explain_rank);
            if (report.empty()) {
                if (records) std::cerr << "no feasible plan\n";
                return kExitNoPlan;
            }
            return kExitOk;
        }

        if (ov_cmd->parsed()) {
            std::vector<seqplan::LayerWorkload> layers(
                std::size_t(ov_layers),
                seqplan::LayerWorkload::balanced(ov_compute, ov_gather, ov_rs));
            seqplan::Timeline tl =
                ov_pass == "forward"
                    ? seqplan::simulate_forward(layers, seqplan::ForwardPolicy::InterLayerPrefetch,
                                                ov_issue)
                    : seqplan::simulate_backward(layers, seqplan::BackwardPolicy::Selective,
                                                 ov_issue);
            seqplan::Timeline baseline =
                ov_pass == "forward"
                    ? seqplan::simulate_forward(layers, seqplan::ForwardPolicy::Naive, ov_issue)
                    : seqplan::simulate_backward(layers, seqplan::BackwardPolicy::Fused, ov_issue);
            auto ratio = seqplan::compare_to_analytic(tl, ov_ratio);
            if (!emit_timeline.empty()) {
                std::ofstream out(emit_timeline);
                if (!out) throw std::runtime_error("cannot write " + emit_timeline);
                out << "stream,kind,layer,start_s,end_s\n";
                for (const auto& e : tl.events)
                    out << (e.stream == seqplan::StreamKind::Compute ? "compute" : "comm") << ","
                        << e.kind << "," << e.layer << "," << e.start << "," << e.end << "\n";
            }
            nlohmann::json out;
            out["pass"] = ov_pass;
            out["makespan_s"] = tl.makespan;
            out["baseline_makespan_s"] = baseline.makespan;
            out["total_compute_s"] = ratio.total_compute;
            out["total_comm_s"] = ratio.total_comm;
            out["analytic_s"] = ratio.analytic;
            out["makespan_over_analytic"] = ratio.ratio;
            std::cout << out.dump(records ? -1 : 2) << "\n";
            return kExitOk;
        }

        if (mp_cmd->parsed()) {
            auto s = mp_flags.to_strategy();
            auto trace = seqplan::synthesize_trace(rc.model, s, rc.cluster);
            seqplan::MempoolPolicy policy;
            policy.pinned_comm_pool = mp_pinned;
            policy.consolidate_every_k_mlp = mp_consolidate;
            policy.grad_premap = mp_premap;
            policy.capacity = rc.cluster.gpu_memory_capacity;
            auto rep = seqplan::run_mempool(trace, policy);
            nlohmann::json out;
            out["trace_ops"] = trace.ops.size();
            out["fragment_threshold_bytes"] = rep.fragment_threshold;
            out["peak_reserved_bytes"] = rep.peak_reserved;
            out["peak_fragmented_bytes"] = rep.peak_fragmented;
            out["final_fragmented_bytes"] = rep.final_fragmented;
            out["oom_events"] = rep.oom_events;
            auto sizes = nlohmann::json::object();
            for (const auto& [size, count] : rep.peak_fragment_sizes)
                sizes[std::to_string(size)] = count;
            out["peak_fragment_size_histogram"] = sizes;
            std::cout << out.dump(records ? -1 : 2) << "\n";
            return kExitOk;
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitUsage;
    }
    return kExitUsage;
}
