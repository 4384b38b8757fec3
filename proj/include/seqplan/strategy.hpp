#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "seqplan/bandwidth.hpp"
#include "seqplan/model.hpp"

namespace seqplan {

/// The 10-component plan vector: micro-batch size/count, recomputation flag,
/// four parallelism sizes, three sharding factors.
struct Strategy {
    std::int64_t micro_batch = 1;      // b, sequences per micro-batch
    std::int64_t micro_batch_num = 1;  // n
    std::int64_t recompute = 0;        // a, 0 or 1
    std::int64_t pp = 1;               // s_pp
    std::int64_t dp = 1;               // s_dp
    std::int64_t tp = 1;               // s_tp
    std::int64_t sp = 1;               // s_sp
    std::int64_t ps = 1;               // s_ps
    std::int64_t gs = 1;               // s_gs
    std::int64_t oss = 1;              // s_oss

    std::array<std::int64_t, 10> tuple() const {
        return {micro_batch, micro_batch_num, recompute, pp, dp, tp, sp, ps, gs, oss};
    }

    friend bool operator==(const Strategy& a, const Strategy& b) {
        return a.tuple() == b.tuple();
    }
    friend bool operator<(const Strategy& a, const Strategy& b) {
        return a.tuple() < b.tuple();
    }

    std::string to_string() const {
        std::string s = "[b=" + std::to_string(micro_batch) +
                        " n=" + std::to_string(micro_batch_num) +
                        " a=" + std::to_string(recompute) + " pp=" + std::to_string(pp) +
                        " dp=" + std::to_string(dp) + " tp=" + std::to_string(tp) +
                        " sp=" + std::to_string(sp) + " ps=" + std::to_string(ps) +
                        " gs=" + std::to_string(gs) + " oss=" + std::to_string(oss) + "]";
        return s;
    }
};

/// Replication/sharding layout of a tensor with E elements over R GPUs:
/// each GPU holds E/F elements, replicated across R/F groups.
struct ShardingLayout {
    std::int64_t factor = 1;            // F
    std::int64_t replica_groups = 1;    // R/F
    std::int64_t elements_per_gpu = 0;  // E/F

    static ShardingLayout make(std::int64_t elements, std::int64_t gpus, std::int64_t factor) {
        if (factor < 1 || gpus % factor != 0)
            throw std::invalid_argument("sharding factor must divide the replica GPU count");
        return ShardingLayout{factor, gpus / factor, elements / factor};
    }
};

struct FeasibilityVerdict {
    std::vector<std::string> violations;
    bool ok() const { return violations.empty(); }
};

/// Checks every constraint of the plan-selection integer program. Returns the
/// full violation list rather than failing fast; infeasibility is a verdict,
/// not an error.
inline FeasibilityVerdict validate(const Strategy& s, const ModelConfig& model,
                                   const ClusterConfig& cluster) {
    FeasibilityVerdict v;
    auto fail = [&](const std::string& msg) { v.violations.push_back(msg); };

    const std::int64_t N = cluster.total_gpus;
    if (s.micro_batch < 1 || s.micro_batch_num < 1 || s.pp < 1 || s.dp < 1 || s.tp < 1 ||
        s.sp < 1 || s.ps < 1 || s.gs < 1 || s.oss < 1) {
        fail("all strategy components must be >= 1");
        return v;
    }
    if (s.recompute != 0 && s.recompute != 1) fail("recompute flag must be 0 or 1");

    if (s.micro_batch * model.seq_len * s.micro_batch_num * s.dp != model.global_batch_tokens)
        fail("b*S*n*dp must equal the global batch (tokens)");
    if (s.dp * s.sp * s.pp != N) fail("dp*sp*pp must equal the GPU count");
    if (N % (s.ps * s.pp * s.tp) != 0) fail("ps*pp*tp must divide the GPU count");
    if (N % (s.ps * s.oss * s.pp * s.tp) != 0) fail("ps*oss*pp*tp must divide the GPU count");
    if (s.gs != 1 && s.gs != s.oss) fail("gs must be 1 or equal to oss");
    if (!(s.tp == s.sp || s.tp == 1))
        fail("tp must equal sp (tensor mode) or be 1 (sequence mode)");
    if (s.ps > N / (s.pp * s.tp)) fail("ps exceeds the parameter replica group size");
    if (s.ps * s.oss > N / (s.pp * s.tp)) fail("oss exceeds the remaining replica group size");
    if (s.sp > model.heads || model.heads % s.sp != 0)
        fail("head count must be divisible by sp (and sp <= heads)");
    if (s.pp > model.layers) fail("pp must not exceed the layer count");
    return v;
}

struct EnumerationBounds {
    std::int64_t max_pp = 0;           // 0 = up to min(N, L)
    std::int64_t max_sp = 0;           // 0 = up to N/pp
    std::int64_t max_micro_batch = 0;  // 0 = up to B/(S*dp)
};

namespace detail {
inline std::vector<std::int64_t> divisors(std::int64_t n) {
    std::vector<std::int64_t> lo, hi;
    for (std::int64_t d = 1; d * d <= n; ++d) {
        if (n % d != 0) continue;
        lo.push_back(d);
        if (d != n / d) hi.push_back(n / d);
    }
    lo.insert(lo.end(), hi.rbegin(), hi.rend());
    return lo;
}
}  // namespace detail

/// Enumerates the feasible strategy space once, in deterministic order:
/// pp over divisors of N, sp/tp over powers of two, dp forced by the GPU
/// constraint, micro-batch over factorizations of the per-replica batch,
/// sharding factors over the admissible divisor chains, gs restricted to
/// {1, oss}, both recomputation settings. Every emitted strategy passes
/// validate().
inline void enumerate_strategies(const ModelConfig& model, const ClusterConfig& cluster,
                                 const EnumerationBounds& bounds,
                                 const std::function<void(const Strategy&)>& yield) {
    model.ensure_valid();
    cluster.ensure_valid();
    const std::int64_t N = cluster.total_gpus;
    const std::int64_t B = model.global_batch_tokens;
    const std::int64_t S = model.seq_len;

    for (std::int64_t pp : detail::divisors(N)) {
        if (pp > model.layers) continue;
        if (bounds.max_pp > 0 && pp > bounds.max_pp) continue;
        for (std::int64_t sp = 1; sp <= N / pp; sp *= 2) {
            if ((N / pp) % sp != 0) continue;
            if (sp > model.heads || model.heads % sp != 0) continue;
            if (bounds.max_sp > 0 && sp > bounds.max_sp) continue;
            const std::int64_t dp = N / (pp * sp);
            if (B % (S * dp) != 0) continue;
            const std::int64_t tokens_per_replica = B / (S * dp);  // b * n
            // Sequence mode (tp=1) always; tensor mode additionally when sp>1.
            for (std::int64_t tp : sp > 1 ? std::vector<std::int64_t>{1, sp}
                                          : std::vector<std::int64_t>{1}) {
                const std::int64_t replica = N / (pp * tp);
                for (std::int64_t ps : detail::divisors(replica)) {
                    for (std::int64_t oss : detail::divisors(replica / ps)) {
                        for (std::int64_t gs : oss > 1 ? std::vector<std::int64_t>{1, oss}
                                                       : std::vector<std::int64_t>{1}) {
                            for (std::int64_t b = 1; b <= tokens_per_replica; ++b) {
                                if (tokens_per_replica % b != 0) continue;
                                if (bounds.max_micro_batch > 0 && b > bounds.max_micro_batch)
                                    continue;
                                for (std::int64_t a : {0, 1}) {
                                    Strategy s;
                                    s.micro_batch = b;
                                    s.micro_batch_num = tokens_per_replica / b;
                                    s.recompute = a;
                                    s.pp = pp;
                                    s.dp = dp;
                                    s.tp = tp;
                                    s.sp = sp;
                                    s.ps = ps;
                                    s.gs = gs;
                                    s.oss = oss;
                                    if (validate(s, model, cluster).ok()) yield(s);
                                }
                            }
                        }
                    }
                }
            }
        }
    }
}

inline std::vector<Strategy> enumerate_strategies(const ModelConfig& model,
                                                  const ClusterConfig& cluster,
                                                  const EnumerationBounds& bounds = {}) {
    std::vector<Strategy> out;
    enumerate_strategies(model, cluster, bounds,
                         [&](const Strategy& s) { out.push_back(s); });
    return out;
}

}  // namespace seqplan
