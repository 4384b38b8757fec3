#pragma once

#include <algorithm>
#include <cstdint>
#include <limits>
#include <map>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include "seqplan/cost.hpp"
#include "seqplan/model.hpp"
#include "seqplan/strategy.hpp"

namespace seqplan {

enum class AllocTag { MlpIntermediate, MlpOutput, Grad, CommBuffer, Other };

inline const char* to_string(AllocTag t) {
    switch (t) {
        case AllocTag::MlpIntermediate: return "mlp-intermediate";
        case AllocTag::MlpOutput: return "mlp-output";
        case AllocTag::Grad: return "grad";
        case AllocTag::CommBuffer: return "comm-buffer";
        case AllocTag::Other: return "other";
    }
    return "?";
}

struct TraceOp {
    enum class Kind { Alloc, Free, StepBoundary };
    Kind kind;
    std::int64_t id = 0;
    std::int64_t size = 0;
    AllocTag tag = AllocTag::Other;

    static TraceOp alloc(std::int64_t id, std::int64_t size, AllocTag tag) {
        return TraceOp{Kind::Alloc, id, size, tag};
    }
    static TraceOp free(std::int64_t id) { return TraceOp{Kind::Free, id, 0, AllocTag::Other}; }
    static TraceOp step_boundary() { return TraceOp{Kind::StepBoundary}; }
};

struct Trace {
    std::vector<TraceOp> ops;

    void validate() const {
        std::unordered_map<std::int64_t, bool> live;  // id -> currently allocated
        for (const auto& op : ops) {
            if (op.kind == TraceOp::Kind::Alloc) {
                auto [it, inserted] = live.emplace(op.id, true);
                if (!inserted) throw std::invalid_argument("duplicate alloc id " +
                                                           std::to_string(op.id));
                if (op.size <= 0) throw std::invalid_argument("alloc size must be positive");
            } else if (op.kind == TraceOp::Kind::Free) {
                auto it = live.find(op.id);
                if (it == live.end() || !it->second)
                    throw std::invalid_argument("free of non-live id " + std::to_string(op.id));
                it->second = false;
            }
        }
    }

    /// Smallest allocation size that occurs more than once; chunks below it
    /// count as fragmentation.
    std::int64_t smallest_recurring_request() const {
        std::map<std::int64_t, int> counts;
        for (const auto& op : ops)
            if (op.kind == TraceOp::Kind::Alloc) ++counts[op.size];
        for (const auto& [size, count] : counts)
            if (count > 1) return size;
        return 0;
    }
};

/// LLaMA-style MLP intermediate dimension: 8H/3 rounded up to a multiple
/// of 256.
inline std::int64_t mlp_intermediate_dim(std::int64_t hidden_dim) {
    const std::int64_t raw = (8 * hidden_dim + 2) / 3;
    return (raw + 255) / 256 * 256;
}

/// Allocation trace of a training step under activation checkpointing.
///
/// Per MLP layer in forward: three intermediate allocations (gate projection,
/// up projection, their product), the checkpoint release of all three, then
/// the persistent layer output. Backward walks layers in reverse, allocating
/// a gradient per layer before releasing that layer's output. Communication
/// buffers for parameter gathers are interleaved when ps > 1.
inline Trace synthesize_trace(const ModelConfig& model, const Strategy& s,
                              const ClusterConfig& cluster) {
    detail::ensure_feasible(s, model, cluster);
    if (s.recompute != 1)
        throw std::invalid_argument("trace synthesis models the checkpointed (a=1) regime");
    const std::int64_t e = model.bytes_per_element;
    const std::int64_t tokens = s.micro_batch * model.seq_len / s.sp;
    const std::int64_t intermediate = tokens * mlp_intermediate_dim(model.hidden_dim) * e;
    const std::int64_t output = tokens * model.hidden_dim * e;
    const std::int64_t layers = model.layers / std::max<std::int64_t>(s.pp, 1);
    const std::int64_t comm = s.ps > 1 ? e * layer_param_count(model) / s.tp : 0;

    Trace trace;
    std::int64_t next_id = 0;
    for (std::int64_t mb = 0; mb < s.micro_batch_num; ++mb) {
        std::vector<std::int64_t> outputs;
        for (std::int64_t layer = 0; layer < layers; ++layer) {
            std::int64_t comm_id = -1;
            if (comm > 0) {
                comm_id = next_id++;
                trace.ops.push_back(TraceOp::alloc(comm_id, comm, AllocTag::CommBuffer));
            }
            std::int64_t a = next_id++, b = next_id++, c = next_id++;
            trace.ops.push_back(TraceOp::alloc(a, intermediate, AllocTag::MlpIntermediate));
            trace.ops.push_back(TraceOp::alloc(b, intermediate, AllocTag::MlpIntermediate));
            trace.ops.push_back(TraceOp::alloc(c, intermediate, AllocTag::MlpIntermediate));
            trace.ops.push_back(TraceOp::free(a));
            trace.ops.push_back(TraceOp::free(b));
            trace.ops.push_back(TraceOp::free(c));
            std::int64_t out = next_id++;
            trace.ops.push_back(TraceOp::alloc(out, output, AllocTag::MlpOutput));
            outputs.push_back(out);
            if (comm_id >= 0) trace.ops.push_back(TraceOp::free(comm_id));
        }
        // Backward in reverse layer order: gradient materializes, output released.
        for (auto it = outputs.rbegin(); it != outputs.rend(); ++it) {
            std::int64_t grad = next_id++;
            trace.ops.push_back(TraceOp::alloc(grad, output, AllocTag::Grad));
            trace.ops.push_back(TraceOp::free(*it));
            trace.ops.push_back(TraceOp::free(grad));
        }
        trace.ops.push_back(TraceOp::step_boundary());
    }
    return trace;
}

struct MempoolPolicy {
    bool pinned_comm_pool = false;
    std::int64_t consolidate_every_k_mlp = 0;  // 0 = off; the workaround uses 3
    bool grad_premap = false;
    std::int64_t capacity = 0;  // 0 = unlimited
};

struct StepStats {
    std::int64_t reserved = 0;
    std::int64_t allocated = 0;
    std::int64_t free_cached = 0;
    std::int64_t fragmented = 0;
};

struct FragmentationReport {
    std::int64_t peak_reserved = 0;
    std::int64_t peak_fragmented = 0;
    std::int64_t final_fragmented = 0;
    std::int64_t fragment_threshold = 0;
    std::int64_t oom_events = 0;
    std::vector<StepStats> per_step;
    /// Count of free sub-chunks whose size is exactly a given value at peak
    /// fragmentation; lets callers inspect the per-segment remainder pattern.
    std::map<std::int64_t, std::int64_t> peak_fragment_sizes;
};

namespace detail {

/// Best-fit caching pool. Segments are reserved from the device and never
/// returned within the simulation; frees go back to a per-segment chunk list
/// and adjacent free chunks coalesce.
class CachingPool {
public:
    struct Chunk {
        std::int64_t offset;
        std::int64_t size;
        bool used;
    };
    struct Segment {
        std::int64_t size;
        std::vector<Chunk> chunks;  // tiles the segment exactly, ordered by offset
    };

    std::int64_t reserved() const { return reserved_; }
    std::int64_t allocated() const { return allocated_; }

    /// Returns true if a new segment had to be reserved.
    bool alloc(std::int64_t id, std::int64_t size) {
        // Best fit: smallest cached free chunk that can hold the request.
        std::size_t best_seg = SIZE_MAX, best_chunk = SIZE_MAX;
        std::int64_t best_size = std::numeric_limits<std::int64_t>::max();
        for (std::size_t si = 0; si < segments_.size(); ++si) {
            const auto& seg = segments_[si];
            for (std::size_t ci = 0; ci < seg.chunks.size(); ++ci) {
                const auto& c = seg.chunks[ci];
                if (!c.used && c.size >= size && c.size < best_size) {
                    best_seg = si;
                    best_chunk = ci;
                    best_size = c.size;
                }
            }
        }
        if (best_seg == SIZE_MAX) {
            segments_.push_back(Segment{size, {Chunk{0, size, true}}});
            reserved_ += size;
            allocated_ += size;
            live_[id] = {segments_.size() - 1, 0};
            return true;
        }
        auto& seg = segments_[best_seg];
        const std::int64_t offset = seg.chunks[best_chunk].offset;
        if (seg.chunks[best_chunk].size > size) {
            Chunk rest{offset + size, seg.chunks[best_chunk].size - size, false};
            seg.chunks[best_chunk].size = size;
            // insert may reallocate; do not hold references across it
            seg.chunks.insert(seg.chunks.begin() + std::ptrdiff_t(best_chunk) + 1, rest);
        }
        seg.chunks[best_chunk].used = true;
        allocated_ += size;
        live_[id] = {best_seg, offset};
        return false;
    }

    void free(std::int64_t id) {
        auto it = live_.find(id);
        if (it == live_.end()) throw std::invalid_argument("free of unknown id");
        auto [si, offset] = it->second;
        live_.erase(it);
        auto& seg = segments_[si];
        for (std::size_t ci = 0; ci < seg.chunks.size(); ++ci) {
            if (seg.chunks[ci].offset != offset) continue;
            seg.chunks[ci].used = false;
            allocated_ -= seg.chunks[ci].size;
            coalesce(seg, ci);
            return;
        }
        throw std::logic_error("live chunk not found in segment");
    }

    /// Sum of free chunk sizes below/at-or-above the threshold, and a size
    /// histogram of the sub-threshold ones. A whole-segment free chunk is
    /// cached capacity, not fragmentation, regardless of size.
    void free_space(std::int64_t threshold, std::int64_t& cached, std::int64_t& fragmented,
                    std::map<std::int64_t, std::int64_t>* histogram = nullptr) const {
        cached = 0;
        fragmented = 0;
        for (const auto& seg : segments_) {
            for (const auto& c : seg.chunks) {
                if (c.used) continue;
                const bool whole_segment = c.size == seg.size;
                if (!whole_segment && c.size < threshold) {
                    fragmented += c.size;
                    if (histogram) ++(*histogram)[c.size];
                } else {
                    cached += c.size;
                }
            }
        }
    }

private:
    void coalesce(Segment& seg, std::size_t ci) {
        if (ci + 1 < seg.chunks.size() && !seg.chunks[ci + 1].used) {
            seg.chunks[ci].size += seg.chunks[ci + 1].size;
            seg.chunks.erase(seg.chunks.begin() + std::ptrdiff_t(ci) + 1);
        }
        if (ci > 0 && !seg.chunks[ci - 1].used) {
            seg.chunks[ci - 1].size += seg.chunks[ci].size;
            seg.chunks.erase(seg.chunks.begin() + std::ptrdiff_t(ci));
        }
    }

    std::vector<Segment> segments_;
    std::unordered_map<std::int64_t, std::pair<std::size_t, std::int64_t>> live_;
    std::int64_t reserved_ = 0;
    std::int64_t allocated_ = 0;
};

}  // namespace detail

/// Replays a trace through the caching best-fit pool under the given policy
/// flags and reports fragmentation statistics per step.
///
/// With the pinned communication pool, comm-buffer requests rotate through two
/// dedicated segments and never touch the general pool. With consolidation,
/// every k MLP outputs are packed into one fresh contiguous segment instead of
/// best-fitting into cached remainders. Gradient pre-mapping reserves one
/// contiguous gradient region up front and routes gradient requests there.
inline FragmentationReport run_mempool(const Trace& trace, const MempoolPolicy& policy) {
    trace.validate();
    FragmentationReport report;
    report.fragment_threshold = trace.smallest_recurring_request();

    detail::CachingPool pool;
    // Pinned double buffer for comm requests, sized lazily from the first two.
    std::int64_t pinned_reserved = 0, pinned_allocated = 0;
    std::unordered_map<std::int64_t, std::int64_t> pinned_live;  // id -> size
    // Consolidation: outputs are redirected into fresh packed segments.
    std::int64_t consolidated_reserved = 0, consolidated_allocated = 0, consolidated_slots = 0;
    std::unordered_map<std::int64_t, std::int64_t> consolidated_live;
    // Gradient pre-mapped arena.
    std::int64_t grad_reserved = 0, grad_allocated = 0;
    std::unordered_map<std::int64_t, std::int64_t> grad_live;
    if (policy.grad_premap) {
        std::int64_t peak = 0, cur = 0;
        std::unordered_map<std::int64_t, std::int64_t> sizes;
        for (const auto& op : trace.ops) {
            if (op.kind == TraceOp::Kind::Alloc && op.tag == AllocTag::Grad) {
                sizes[op.id] = op.size;
                cur += op.size;
                peak = std::max(peak, cur);
            } else if (op.kind == TraceOp::Kind::Free && sizes.count(op.id)) {
                cur -= sizes[op.id];
            }
        }
        grad_reserved = peak;
    }

    auto snapshot = [&]() {
        StepStats st;
        std::int64_t cached = 0, fragmented = 0;
        std::map<std::int64_t, std::int64_t> histogram;
        pool.free_space(report.fragment_threshold, cached, fragmented, &histogram);
        st.reserved = pool.reserved() + pinned_reserved + consolidated_reserved + grad_reserved;
        st.allocated = pool.allocated() + pinned_allocated + consolidated_allocated + grad_allocated;
        st.free_cached = cached + (pinned_reserved - pinned_allocated) +
                         (consolidated_reserved - consolidated_allocated) +
                         (grad_reserved - grad_allocated);
        st.fragmented = fragmented;
        if (fragmented > report.peak_fragmented) {
            report.peak_fragmented = fragmented;
            report.peak_fragment_sizes = histogram;
        }
        report.peak_reserved = std::max(report.peak_reserved, st.reserved);
        if (policy.capacity > 0 && st.reserved > policy.capacity) ++report.oom_events;
        report.final_fragmented = fragmented;
        return st;
    };

    for (const auto& op : trace.ops) {
        switch (op.kind) {
            case TraceOp::Kind::Alloc: {
                if (policy.pinned_comm_pool && op.tag == AllocTag::CommBuffer) {
                    // Double buffer: capacity for two outstanding gathers.
                    pinned_live[op.id] = op.size;
                    pinned_allocated += op.size;
                    pinned_reserved = std::max(pinned_reserved, 2 * op.size);
                    pinned_reserved = std::max(pinned_reserved, pinned_allocated);
                } else if (policy.consolidate_every_k_mlp > 0 && op.tag == AllocTag::MlpOutput) {
                    if (consolidated_slots == 0) {
                        consolidated_reserved += policy.consolidate_every_k_mlp * op.size;
                        consolidated_slots = policy.consolidate_every_k_mlp;
                    }
                    consolidated_live[op.id] = op.size;
                    consolidated_allocated += op.size;
                    --consolidated_slots;
                } else if (policy.grad_premap && op.tag == AllocTag::Grad) {
                    grad_live[op.id] = op.size;
                    grad_allocated += op.size;
                } else {
                    pool.alloc(op.id, op.size);
                }
                snapshot();
                break;
            }
            case TraceOp::Kind::Free: {
                if (auto it = pinned_live.find(op.id); it != pinned_live.end()) {
                    pinned_allocated -= it->second;
                    pinned_live.erase(it);
                } else if (auto it2 = consolidated_live.find(op.id);
                           it2 != consolidated_live.end()) {
                    consolidated_allocated -= it2->second;
                    consolidated_live.erase(it2);
                } else if (auto it3 = grad_live.find(op.id); it3 != grad_live.end()) {
                    grad_allocated -= it3->second;
                    grad_live.erase(it3);
                } else {
                    pool.free(op.id);
                }
                snapshot();
                break;
            }
            case TraceOp::Kind::StepBoundary:
                report.per_step.push_back(snapshot());
                break;
        }
    }
    if (report.per_step.empty() && !trace.ops.empty()) report.per_step.push_back(snapshot());
    if (trace.ops.empty()) report.per_step.push_back(StepStats{});
    return report;
}

}  // namespace seqplan
