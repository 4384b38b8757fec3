#pragma once

#include <algorithm>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace seqplan {

/// Per-layer event durations (seconds) for the overlap timeline simulator.
/// The G-X / G-W split is the input-gradient vs weight-gradient half of the
/// backward pass; together they default to twice the forward cost.
struct LayerWorkload {
    double forward = 0;
    double grad_input = 0;    // G-X
    double grad_weight = 0;   // G-W
    double all_gather = 0;    // parameter gather, seconds at profiled bandwidth
    double reduce_scatter = 0;

    static LayerWorkload balanced(double forward, double all_gather, double reduce_scatter) {
        return LayerWorkload{forward, forward, forward, all_gather, reduce_scatter};
    }
};

enum class StreamKind { Compute, Comm };

struct TimelineEvent {
    StreamKind stream;
    std::string kind;  // "forward", "grad_input", "grad_weight", "all_gather", "reduce_scatter"
    std::int64_t layer;
    double start;
    double end;
};

struct Timeline {
    std::vector<TimelineEvent> events;
    double makespan = 0;

    double stream_busy(StreamKind s) const {
        double total = 0;
        for (const auto& e : events)
            if (e.stream == s) total += e.end - e.start;
        return total;
    }
};

enum class ForwardPolicy { Naive, InterLayerPrefetch };
enum class BackwardPolicy { Fused, Selective };

namespace detail {
/// One compute stream, one comm stream; events issue in FIFO order per stream
/// and may additionally wait on dependencies. Optional fixed issue delay
/// models CPU launch latency.
class TwoStreamSchedule {
public:
    explicit TwoStreamSchedule(double issue_delay = 0.0) : issue_delay_(issue_delay) {}

    double run(Timeline& tl, StreamKind stream, const std::string& kind, std::int64_t layer,
               double duration, double ready_at = 0.0) {
        double& head = stream == StreamKind::Compute ? compute_head_ : comm_head_;
        const double start = std::max(head, ready_at) + issue_delay_;
        const double end = start + duration;
        head = end;
        if (duration > 0) tl.events.push_back({stream, kind, layer, start, end});
        tl.makespan = std::max(tl.makespan, end);
        return end;
    }

private:
    double issue_delay_;
    double compute_head_ = 0;
    double comm_head_ = 0;
};
}  // namespace detail

/// Forward pass over the layers in order. Naive serializes gather(i) then
/// compute(i). Prefetch runs gather(i+1) on the comm stream while layer i
/// computes; gather(0) is always exposed.
inline Timeline simulate_forward(const std::vector<LayerWorkload>& layers, ForwardPolicy policy,
                                 double issue_delay = 0.0) {
    if (layers.empty()) throw std::invalid_argument("need at least one layer");
    Timeline tl;
    detail::TwoStreamSchedule sched(issue_delay);
    if (policy == ForwardPolicy::Naive) {
        double prev = 0;
        for (std::size_t i = 0; i < layers.size(); ++i) {
            const double gathered =
                sched.run(tl, StreamKind::Comm, "all_gather", std::int64_t(i),
                          layers[i].all_gather, prev);
            prev = sched.run(tl, StreamKind::Compute, "forward", std::int64_t(i),
                             layers[i].forward, gathered);
        }
    } else {
        std::vector<double> gathered(layers.size());
        for (std::size_t i = 0; i < layers.size(); ++i)
            gathered[i] = sched.run(tl, StreamKind::Comm, "all_gather", std::int64_t(i),
                                    layers[i].all_gather);
        double prev = 0;
        for (std::size_t i = 0; i < layers.size(); ++i)
            prev = sched.run(tl, StreamKind::Compute, "forward", std::int64_t(i),
                             layers[i].forward, std::max(prev, gathered[i]));
    }
    return tl;
}

/// Backward pass over the layers in reverse order.
///
/// Fused: per layer, gather then a single fused G-X+G-W block then
/// reduce-scatter, all on the critical path. Selective: G-W runs first so its
/// reduce-scatter can overlap the remaining compute; the next layer's gather
/// is issued on the comm stream ahead of the current reduce-scatter. G-X(i)
/// feeds both halves of layer i-1.
inline Timeline simulate_backward(const std::vector<LayerWorkload>& layers, BackwardPolicy policy,
                                  double issue_delay = 0.0) {
    if (layers.empty()) throw std::invalid_argument("need at least one layer");
    Timeline tl;
    detail::TwoStreamSchedule sched(issue_delay);
    const std::int64_t top = std::int64_t(layers.size()) - 1;

    if (policy == BackwardPolicy::Fused) {
        double prev = 0;
        for (std::int64_t i = top; i >= 0; --i) {
            const auto& w = layers[std::size_t(i)];
            const double gathered =
                sched.run(tl, StreamKind::Comm, "all_gather", i, w.all_gather, prev);
            const double computed = sched.run(tl, StreamKind::Compute, "grad_fused", i,
                                              w.grad_input + w.grad_weight, gathered);
            prev = sched.run(tl, StreamKind::Comm, "reduce_scatter", i, w.reduce_scatter, computed);
        }
        return tl;
    }

    const double first_gather =
        sched.run(tl, StreamKind::Comm, "all_gather", top, layers[std::size_t(top)].all_gather);
    std::vector<double> gathered(layers.size(), 0.0);
    gathered[std::size_t(top)] = first_gather;
    double incoming_grad = 0;  // end of G-X(i+1)
    for (std::int64_t i = top; i >= 0; --i) {
        const auto& w = layers[std::size_t(i)];
        // Backward prefetch: the next layer's gather goes on the comm stream
        // ahead of this layer's reduce-scatter.
        if (i > 0)
            gathered[std::size_t(i - 1)] = sched.run(tl, StreamKind::Comm, "all_gather", i - 1,
                                                     layers[std::size_t(i - 1)].all_gather);
        const double ready = std::max(gathered[std::size_t(i)], incoming_grad);
        const double gw_done = sched.run(tl, StreamKind::Compute, "grad_weight", i, w.grad_weight,
                                         ready);
        incoming_grad = sched.run(tl, StreamKind::Compute, "grad_input", i, w.grad_input, ready);
        sched.run(tl, StreamKind::Comm, "reduce_scatter", i, w.reduce_scatter, gw_done);
    }
    return tl;
}

struct OverlapRatioReport {
    double makespan = 0;
    double total_compute = 0;
    double total_comm = 0;
    double analytic = 0;  // R * max(total compute, total comm)
    double ratio = 0;     // makespan / analytic
};

/// Compares a simulated timeline against the analytical overlapped-time
/// model R * max(compute, comm).
inline OverlapRatioReport compare_to_analytic(const Timeline& tl, double slowdown_ratio) {
    OverlapRatioReport r;
    r.makespan = tl.makespan;
    r.total_compute = tl.stream_busy(StreamKind::Compute);
    r.total_comm = tl.stream_busy(StreamKind::Comm);
    r.analytic = slowdown_ratio * std::max(r.total_compute, r.total_comm);
    r.ratio = r.analytic > 0 ? r.makespan / r.analytic : 1.0;
    return r;
}

}  // namespace seqplan
