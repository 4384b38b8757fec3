#pragma once

#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <stdexcept>
#include <tuple>

#include "seqplan/bandwidth.hpp"
#include "seqplan/model.hpp"
#include "seqplan/placement.hpp"
#include "seqplan/strategy.hpp"

namespace seqplan {

/// Per-layer forward compute time source. Profiled mode looks entries up by
/// exact (micro_batch, tokens per rank, tp) key; analytic mode derives the
/// time from a FLOP count at a fixed achievable fraction of peak.
struct ComputeModel {
    enum class Mode { Analytic, Profiled };
    struct ProfiledKey {
        std::int64_t micro_batch;
        std::int64_t tokens_per_rank;  // S / sp
        std::int64_t tp;
        auto operator<=>(const ProfiledKey&) const = default;
    };

    Mode mode = Mode::Analytic;
    double peak_flops_per_gpu = 312e12;
    double efficiency = 0.5;                       // fraction of peak, (0, 1]
    std::map<ProfiledKey, double> layer_forward_s;  // profiled mode only
    double other_forward_s = 0.0;                   // profiled embedding+head time

    void ensure_valid() const {
        if (mode == Mode::Analytic) {
            if (peak_flops_per_gpu <= 0) throw std::invalid_argument("peak_flops must be positive");
            if (efficiency <= 0 || efficiency > 1)
                throw std::invalid_argument("efficiency must be in (0, 1]");
        }
        for (const auto& [k, t] : layer_forward_s)
            if (t <= 0) throw std::invalid_argument("profiled layer times must be positive");
    }
};

/// Slowdown of overlapped communication/computation from SM contention.
struct OverlapModel {
    double slowdown_ratio = 1.30;

    void ensure_valid() const {
        if (slowdown_ratio < 1.0) throw std::invalid_argument("slowdown ratio must be >= 1");
    }
};

/// Whether the optimizer-state gradient aggregation is priced as printed
/// (reduce-scatter + all-reduce) or as the all-reduce + all-gather variant.
enum class OssCommVariant { ReduceScatterAllReduce, AllReduceAllGather };

struct EstimatorOptions {
    OssCommVariant oss_variant = OssCommVariant::ReduceScatterAllReduce;
    double update_memory_bandwidth = 1e12;  // bytes/s for the element-wise update
};

/// Per-GPU memory components in bytes. The transformer-layer components are
/// reported separately from the embedding/head states, activation tail, and
/// communication buffers aggregated in `other`.
struct MemoryBreakdown {
    double params = 0, grads = 0, optstate = 0, act = 0, other = 0;
    // other, itemized
    double other_params = 0, other_grads = 0, other_optstate = 0, other_act = 0,
           other_buffers = 0;

    double total() const { return params + grads + optstate + act + other; }
    /// Full optimizer-state bytes per GPU, embedding/head included.
    double total_optstate() const { return optstate + other_optstate; }
};

/// Per-layer, per-step communication time split by source (seconds).
/// tp/sp/ps recur every micro-batch; oss is once per step, gs is n-1 times.
struct CommBreakdown {
    double tp = 0, sp = 0, ps = 0, oss = 0, gs = 0;

    double recurring() const { return tp + sp + ps; }
    double once_per_step() const { return oss + gs; }
    double total() const { return recurring() + once_per_step(); }
};

struct CostBreakdown {
    MemoryBreakdown mem;
    CommBreakdown comm;                // per layer, per step
    double t_comp_per_layer = 0;       // one micro-batch, fwd+bwd(+recompute)
    double t_comm_act = 0;             // per layer per step (tp or sp source)
    double t_comm_param = 0;           // per layer per step (ps source)
    double t_comm_grad_oss = 0;        // per layer per step (oss + gs sources)
    double t_layer_overlapped = 0;     // OPro, per layer per micro-batch
    double t_other = 0;                // embedding/head, per micro-batch
    double t_fwd_bwd = 0;
    double t_update = 0;
    double t_step = 0;
    double bubble_factor = 0;          // n + pp - 1
};

namespace detail {
inline void ensure_feasible(const Strategy& s, const ModelConfig& model,
                            const ClusterConfig& cluster) {
    auto verdict = validate(s, model, cluster);
    if (!verdict.ok()) {
        std::string msg = "infeasible strategy " + s.to_string() + ":";
        for (const auto& viol : verdict.violations) msg += " " + viol + ";";
        throw std::invalid_argument(msg);
    }
}
}  // namespace detail

/// Per-GPU memory for a feasible strategy.
///
/// Transformer layers: parameters at e*L*Psi / (pp*tp*ps), gradients further
/// over gs, optimizer states at 3x parameter bytes further over oss.
/// Activations carry the 1F1B in-flight factor min(pp, n) and the (34-32a)
/// recomputation coefficient. `other` holds embedding/head states under the
/// same sharding denominators (pp excluded: those layers live on one stage),
/// the logits-side activation tail, and a double communication buffer for two
/// layers' gathered parameters when ps > 1.
inline MemoryBreakdown estimate_memory(const Strategy& s, const ModelConfig& model,
                                       const ClusterConfig& cluster) {
    detail::ensure_feasible(s, model, cluster);
    const double e = double(model.bytes_per_element);
    const double psi = double(layer_param_count(model));
    const double L = double(model.layers);
    const double emb = double(2 * model.vocab * model.hidden_dim);

    MemoryBreakdown m;
    m.params = e * L * psi / double(s.pp * s.tp * s.ps);
    m.grads = e * L * psi / double(s.pp * s.tp * s.ps * s.gs);
    m.optstate = 3 * e * L * psi / double(s.pp * s.tp * s.ps * s.oss);

    // (34 - 32a) embeds 2-byte elements; scale by e/2 for other widths.
    const double inflight = double(std::min(s.pp, s.micro_batch_num));
    m.act = inflight * (e / 2.0) * double(34 - 32 * s.recompute) * double(s.micro_batch) *
            double(model.seq_len) * double(model.hidden_dim) * L / double(s.pp * s.sp);

    m.other_params = e * emb / double(s.tp * s.ps);
    m.other_grads = e * emb / double(s.tp * s.ps * s.gs);
    m.other_optstate = 3 * e * emb / double(s.tp * s.ps * s.oss);
    m.other_act = e * double(s.micro_batch) * double(model.seq_len) *
                  double(model.hidden_dim + model.vocab) / double(s.sp);
    m.other_buffers = s.ps > 1 ? 2.0 * e * psi / double(s.tp) : 0.0;
    m.other = m.other_params + m.other_grads + m.other_optstate + m.other_act + m.other_buffers;
    return m;
}

/// Per-layer communication time for a full step, split by source.
///
/// Tensor mode (tp == sp > 1): 2n reduce-scatters and 3n all-gathers of
/// e*b*S*H bytes. Sequence mode (sp > 1, tp == 1): 2n all-to-alls of 3*e*b*S*H
/// plus 2n of e*b*S*H bytes. Parameter sharding: 2n all-gathers and n
/// reduce-scatters of the layer's tp-partitioned parameter bytes. Optimizer
/// sharding runs once per step; gradient sharding all-reduces n-1 times.
/// Pipeline point-to-point traffic is not priced.
inline CommBreakdown estimate_comm_layer(const Strategy& s, const ModelConfig& model,
                                         const ClusterConfig& cluster,
                                         const MeshPlacement& placement,
                                         const BandwidthProfile& profile,
                                         const EstimatorOptions& opts = {}) {
    detail::ensure_feasible(s, model, cluster);
    const double n = double(s.micro_batch_num);
    const std::int64_t e = model.bytes_per_element;
    const std::int64_t act_bytes = e * s.micro_batch * model.seq_len * model.hidden_dim;
    const std::int64_t psi = layer_param_count(model);
    const std::int64_t layer_param_bytes = e * psi / s.tp;
    const std::int64_t shard_bytes = e * psi / (s.tp * s.ps);
    const std::int64_t grad_sync_group = cluster.total_gpus / (s.pp * s.tp * s.ps);

    CommBreakdown c;
    if (s.tp == s.sp && s.tp > 1) {
        const MeshAxis ax = placement[GroupKind::TpSp];
        c.tp = 2 * n * collective_time(profile, CollectiveOp::ReduceScatter, act_bytes, s.tp, ax) +
               3 * n * collective_time(profile, CollectiveOp::AllGather, act_bytes, s.tp, ax);
    } else if (s.sp > 1) {
        const MeshAxis ax = placement[GroupKind::TpSp];
        c.sp = 2 * n * collective_time(profile, CollectiveOp::AllToAll, 3 * act_bytes, s.sp, ax) +
               2 * n * collective_time(profile, CollectiveOp::AllToAll, act_bytes, s.sp, ax);
    }
    if (s.ps > 1) {
        const MeshAxis ax = placement[GroupKind::Ps];
        c.ps = 2 * n * collective_time(profile, CollectiveOp::AllGather, layer_param_bytes, s.ps, ax) +
               n * collective_time(profile, CollectiveOp::ReduceScatter, layer_param_bytes, s.ps, ax);
    }
    {
        const MeshAxis ax_oss = placement[GroupKind::Oss];
        const MeshAxis ax_sync = placement[GroupKind::Gs];
        if (opts.oss_variant == OssCommVariant::ReduceScatterAllReduce) {
            c.oss = collective_time(profile, CollectiveOp::ReduceScatter, shard_bytes, s.oss, ax_oss) +
                    collective_time(profile, CollectiveOp::AllReduce, shard_bytes, grad_sync_group,
                                    ax_sync);
        } else {
            c.oss = collective_time(profile, CollectiveOp::AllReduce, shard_bytes, grad_sync_group,
                                    ax_sync) +
                    collective_time(profile, CollectiveOp::AllGather, shard_bytes, s.oss, ax_oss);
        }
    }
    if (s.gs > 1)
        c.gs = (n - 1) * collective_time(profile, CollectiveOp::AllReduce, shard_bytes,
                                         grad_sync_group, placement[GroupKind::Gs]);
    return c;
}

namespace detail {
/// Forward FLOPs of one transformer layer for one micro-batch on one rank:
/// QKV, output projection, and ratio-4 MLP matmuls over S/sp tokens, plus
/// causal attention scores over the full S x S/sp block, both tp-partitioned.
inline double layer_forward_flops(const Strategy& s, const ModelConfig& model) {
    const double b = double(s.micro_batch);
    const double tokens = double(model.seq_len) / double(s.sp);
    const double h = double(model.hidden_dim);
    const double matmul = (2.0 * 3.0 + 2.0 + 16.0) * b * tokens * h * h / double(s.tp);
    const double attention = 4.0 * b * double(model.seq_len) * tokens * h / double(s.tp);
    return matmul + attention;
}
}  // namespace detail

/// Per-layer compute time for one micro-batch: forward plus backward at twice
/// the forward cost, plus one extra forward when recomputation is on.
inline double estimate_comp_layer(const Strategy& s, const ModelConfig& model,
                                  const ComputeModel& compute) {
    compute.ensure_valid();
    const double passes = 3.0 + double(s.recompute);
    if (compute.mode == ComputeModel::Mode::Profiled) {
        ComputeModel::ProfiledKey key{s.micro_batch, model.seq_len / s.sp, s.tp};
        auto it = compute.layer_forward_s.find(key);
        if (it == compute.layer_forward_s.end())
            throw std::runtime_error("no profiled layer time for (b=" +
                                     std::to_string(key.micro_batch) + ", tokens=" +
                                     std::to_string(key.tokens_per_rank) + ", tp=" +
                                     std::to_string(key.tp) + ")");
        return passes * it->second;
    }
    const double fwd = detail::layer_forward_flops(s, model) /
                       (compute.peak_flops_per_gpu * compute.efficiency);
    return passes * fwd;
}

/// Embedding + head time for one micro-batch. The head matmul dominates;
/// the embedding lookup is not priced.
inline double estimate_other_time(const Strategy& s, const ModelConfig& model,
                                  const ComputeModel& compute) {
    if (compute.mode == ComputeModel::Mode::Profiled) return compute.other_forward_s;
    const double fwd = 2.0 * double(s.micro_batch) * (double(model.seq_len) / double(s.sp)) *
                       double(model.hidden_dim) * double(model.vocab) /
                       double(s.tp) / (compute.peak_flops_per_gpu * compute.efficiency);
    return 3.0 * fwd;
}

/// Bubble-expanded forward/backward time:
/// (n + pp - 1) * (t_other + ceil(L/pp) * per_layer_overlapped).
inline double fwd_bwd_time(std::int64_t n, std::int64_t pp, std::int64_t layers, double t_other,
                           double per_layer_overlapped) {
    const double layers_per_stage = double((layers + pp - 1) / pp);
    return double(n + pp - 1) * (t_other + layers_per_stage * per_layer_overlapped);
}

/// Full step-time estimate for a feasible strategy.
///
/// The overlapped per-layer time is R * max(recurring comm per micro-batch,
/// compute per micro-batch); the once-per-step optimizer/gradient sync terms
/// are charged to the update phase together with the element-wise state
/// update at the configured memory bandwidth.
inline CostBreakdown estimate_step(const Strategy& s, const ModelConfig& model,
                                   const ClusterConfig& cluster, const BandwidthProfile& profile,
                                   const ComputeModel& compute, const OverlapModel& overlap,
                                   const EstimatorOptions& opts = {}) {
    overlap.ensure_valid();
    const MeshPlacement placement = place_groups(cluster, s);

    CostBreakdown out;
    out.mem = estimate_memory(s, model, cluster);
    out.comm = estimate_comm_layer(s, model, cluster, placement, profile, opts);
    out.t_comp_per_layer = estimate_comp_layer(s, model, compute);
    out.t_comm_act = out.comm.tp + out.comm.sp;
    out.t_comm_param = out.comm.ps;
    out.t_comm_grad_oss = out.comm.oss + out.comm.gs;
    out.t_other = estimate_other_time(s, model, compute);

    const double n = double(s.micro_batch_num);
    const double comm_per_microbatch = out.comm.recurring() / n;
    out.t_layer_overlapped =
        overlap.slowdown_ratio * std::max(comm_per_microbatch, out.t_comp_per_layer);
    out.bubble_factor = n + double(s.pp) - 1.0;
    out.t_fwd_bwd = fwd_bwd_time(s.micro_batch_num, s.pp, model.layers, out.t_other,
                                 out.t_layer_overlapped);

    const double layers_per_stage = double((model.layers + s.pp - 1) / s.pp);
    out.t_update = layers_per_stage * out.comm.once_per_step() +
                   out.mem.total_optstate() / opts.update_memory_bandwidth;
    out.t_step = out.t_fwd_bwd + out.t_update;
    return out;
}

struct ThroughputEstimate {
    double tokens_per_gpu_per_s = 0;  // TGS
    double mfu = 0;
};

/// TGS = B / (t_step * N); MFU from 6*params FLOPs per token plus the causal
/// attention term, against aggregate peak.
inline ThroughputEstimate estimate_throughput(const CostBreakdown& cost, const ModelConfig& model,
                                              const ClusterConfig& cluster,
                                              double peak_flops_per_gpu) {
    if (cost.t_step <= 0) throw std::invalid_argument("step time must be positive");
    ThroughputEstimate t;
    const double B = double(model.global_batch_tokens);
    const double N = double(cluster.total_gpus);
    t.tokens_per_gpu_per_s = B / (cost.t_step * N);
    const double step_flops =
        6.0 * double(total_param_count(model)) * B +
        12.0 * double(model.layers) * double(model.hidden_dim) * double(model.seq_len) * B * 0.5;
    t.mfu = step_flops / (cost.t_step * N * peak_flops_per_gpu);
    return t;
}

}  // namespace seqplan
