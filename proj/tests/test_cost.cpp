#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "seqplan/cost.hpp"

using namespace seqplan;

namespace {

ModelConfig model_7b(std::int64_t seq_len = 4096, std::int64_t batch_seqs = 4) {
    ModelConfig cfg;
    cfg.hidden_dim = 4096;
    cfg.layers = 32;
    cfg.heads = 32;
    cfg.vocab = 100000;
    cfg.seq_len = seq_len;
    cfg.global_batch_tokens = batch_seqs * seq_len;
    return cfg;
}

Strategy serial(std::int64_t b, std::int64_t n, std::int64_t a = 0) {
    Strategy s;
    s.micro_batch = b;
    s.micro_batch_num = n;
    s.recompute = a;
    return s;
}

ComputeModel unit_compute() {
    ComputeModel c;
    c.peak_flops_per_gpu = 1.0;
    c.efficiency = 1.0;
    return c;
}

}  // namespace

TEST_CASE("all-1 activation memory matches the closed form") {
    auto model = model_7b(4096, 4);
    ClusterConfig cluster{1, 1, 1LL << 60};
    auto m = estimate_memory(serial(1, 4, 0), model, cluster);
    CHECK(m.act == doctest::Approx(34.0 * 4096 * 4096 * 32).epsilon(1e-12));
    CHECK(m.act == doctest::Approx(18'253'611'008.0).epsilon(1e-12));
}

TEST_CASE("case study optimizer state reduction") {
    auto model = model_7b(262144, 16);  // 256k seq, dp=4 below
    ClusterConfig cluster{128, 8, 80LL << 30};
    Strategy s;
    s.micro_batch = 1;
    s.micro_batch_num = 4;
    s.dp = 4;
    s.sp = 32;
    s.ps = 4;
    s.oss = 2;
    auto m = estimate_memory(s, model, cluster);
    // Transformer layers only: 6 * Psi * L / (ps * oss).
    CHECK(m.optstate == doctest::Approx(6.0 * 201'334'784 * 32 / 8).epsilon(1e-12));
    CHECK(m.optstate / 1e9 == doctest::Approx(4.832).epsilon(1e-3));
    // Embedding/head states included: about 5.45 GB, the published drop
    // from roughly 42 GB.
    CHECK(m.total_optstate() / 1e9 == doctest::Approx(5.446).epsilon(1e-3));
}

TEST_CASE("recomputation scales activations by 2/34") {
    auto model = model_7b();
    ClusterConfig cluster{1, 1, 1LL << 60};
    auto m0 = estimate_memory(serial(1, 4, 0), model, cluster);
    auto m1 = estimate_memory(serial(1, 4, 1), model, cluster);
    CHECK(m1.act / m0.act == doctest::Approx(2.0 / 34.0).epsilon(1e-12));
}

TEST_CASE("memory monotone in each sharding factor") {
    auto model = model_7b(4096, 64);
    ClusterConfig cluster{64, 8, 1LL << 60};
    Strategy base;
    base.micro_batch = 1;
    base.micro_batch_num = 2;
    base.dp = 32;
    base.sp = 2;
    base.pp = 1;
    base.ps = 2;
    base.gs = 1;
    base.oss = 2;
    REQUIRE(validate(base, model, cluster).ok());
    auto m = estimate_memory(base, model, cluster);

    auto bumped = base;
    bumped.ps = 4;
    CHECK(estimate_memory(bumped, model, cluster).params <= m.params);
    bumped = base;
    bumped.oss = 4;
    CHECK(estimate_memory(bumped, model, cluster).optstate <= m.optstate);
    bumped = base;
    bumped.gs = base.oss;
    CHECK(estimate_memory(bumped, model, cluster).grads <= m.grads);
    bumped = base;
    bumped.sp = 4;
    bumped.dp = 16;
    bumped.micro_batch_num = 4;  // keep b*S*n*dp == B
    REQUIRE(validate(bumped, model, cluster).ok());
    CHECK(estimate_memory(bumped, model, cluster).act <= m.act);
}

TEST_CASE("closed-form consistency without sharding") {
    // ps = gs = oss = 1 and n >= pp reduces to the summary closed form with
    // the 2/2/6 byte coefficients.
    auto model = model_7b(4096, 32);
    ClusterConfig cluster{16, 8, 1LL << 60};
    Strategy s;
    s.micro_batch = 1;
    s.micro_batch_num = 8;
    s.pp = 2;
    s.dp = 4;
    s.tp = 2;
    s.sp = 2;
    REQUIRE(validate(s, model, cluster).ok());
    auto m = estimate_memory(s, model, cluster);
    const double psi = 201'334'784.0, L = 32;
    CHECK(m.params == doctest::Approx(2 * L * psi / (2 * 2)).epsilon(1e-12));
    CHECK(m.grads == doctest::Approx(2 * L * psi / (2 * 2)).epsilon(1e-12));
    CHECK(m.optstate == doctest::Approx(6 * L * psi / (2 * 2)).epsilon(1e-12));
    // min(pp, n) = pp here, so the in-flight factor cancels 1/pp and only the
    // sequence split remains.
    CHECK(m.act == doctest::Approx(34.0 * 4096 * 4096 * L / 2).epsilon(1e-12));
}

TEST_CASE("infeasible strategy is an error") {
    auto model = model_7b();
    ClusterConfig cluster{1, 1, 1LL << 60};
    Strategy s = serial(1, 4);
    s.tp = 2;
    CHECK_THROWS_AS(estimate_memory(s, model, cluster), std::invalid_argument);
}

TEST_CASE("tensor-parallel communication closed form") {
    ModelConfig model;
    model.hidden_dim = 4096;
    model.layers = 32;
    model.heads = 32;
    model.vocab = 100000;
    model.seq_len = 4096;
    model.global_batch_tokens = 4096 * 16;
    ClusterConfig cluster{8, 8, 1LL << 60};
    Strategy s;
    s.micro_batch = 1;
    s.micro_batch_num = 16;
    s.dp = 1;
    s.tp = 8;
    s.sp = 8;
    REQUIRE(validate(s, model, cluster).ok());
    auto profile = BandwidthProfile::flat(200e9);
    auto placement = place_groups(cluster, s);
    auto c = estimate_comm_layer(s, model, cluster, placement, profile);
    // Per micro-batch: 5 collectives of 2bSH bytes at a flat 200 GB/s.
    const double expected_per_mb = 5.0 * (2.0 * 4096 * 4096) / 200e9;
    CHECK(std::abs(c.tp / 16.0 - expected_per_mb) / expected_per_mb < 1e-12);
    CHECK(c.tp / 16.0 == doctest::Approx(0.839e-3).epsilon(1e-3));
    CHECK(c.sp == 0.0);
    CHECK(c.ps == 0.0);
}

TEST_CASE("sequence-parallel all-to-all closed form") {
    ModelConfig model;
    model.hidden_dim = 512;
    model.layers = 4;
    model.heads = 4;
    model.vocab = 1000;
    model.seq_len = 1024;
    model.global_batch_tokens = 1024 * 2;
    ClusterConfig cluster{4, 4, 1LL << 60};
    Strategy s;
    s.micro_batch = 1;
    s.micro_batch_num = 2;
    s.dp = 1;
    s.sp = 4;
    REQUIRE(validate(s, model, cluster).ok());
    auto profile = BandwidthProfile::flat(100e9);
    auto c = estimate_comm_layer(s, model, cluster, place_groups(cluster, s), profile);
    const double expected =
        2.0 * 2 * (6.0 * 1024 * 512) / 1e11 + 2.0 * 2 * (2.0 * 1024 * 512) / 1e11;
    CHECK(std::abs(c.sp - expected) / expected < 1e-12);
    CHECK(c.sp == doctest::Approx(0.1678e-3).epsilon(1e-3));
}

TEST_CASE("pure data parallelism leaves only the gradient sync") {
    auto model = model_7b(4096, 8);
    ClusterConfig cluster{4, 4, 1LL << 60};
    Strategy s;
    s.micro_batch = 1;
    s.micro_batch_num = 2;
    s.dp = 4;
    REQUIRE(validate(s, model, cluster).ok());
    auto c = estimate_comm_layer(s, model, cluster, place_groups(cluster, s),
                                 BandwidthProfile::flat(100e9));
    CHECK(c.tp == 0.0);
    CHECK(c.sp == 0.0);
    CHECK(c.ps == 0.0);
    CHECK(c.gs == 0.0);
    CHECK(c.oss > 0.0);  // the all-reduce over the replica group survives
}

TEST_CASE("oss comm variants differ") {
    auto model = model_7b(4096, 8);
    ClusterConfig cluster{8, 8, 1LL << 60};
    Strategy s;
    s.micro_batch = 1;
    s.micro_batch_num = 1;
    s.dp = 8;
    s.ps = 2;
    s.oss = 2;
    REQUIRE(validate(s, model, cluster).ok());
    BandwidthProfile prof;
    for (MeshAxis ax : {MeshAxis::Intra, MeshAxis::Inter}) {
        prof.add({CollectiveOp::AllReduce, 2, ax, 1, 100e9});
        prof.add({CollectiveOp::AllReduce, 4, ax, 1, 100e9});
        prof.add({CollectiveOp::ReduceScatter, 2, ax, 1, 50e9});
        prof.add({CollectiveOp::AllGather, 2, ax, 1, 25e9});
    }
    auto placement = place_groups(cluster, s);
    EstimatorOptions rs_ar, ar_ag;
    ar_ag.oss_variant = OssCommVariant::AllReduceAllGather;
    auto c1 = estimate_comm_layer(s, model, cluster, placement, prof, rs_ar);
    auto c2 = estimate_comm_layer(s, model, cluster, placement, prof, ar_ag);
    CHECK(c1.oss != doctest::Approx(c2.oss));
}

TEST_CASE("analytic compute with unit peak equals the FLOP count") {
    ModelConfig model;
    model.hidden_dim = 1;
    model.layers = 1;
    model.heads = 1;
    model.vocab = 1;
    model.seq_len = 1;
    model.global_batch_tokens = 1;
    Strategy s = serial(1, 1, 0);
    const double t = estimate_comp_layer(s, model, unit_compute());
    // matmul 24*b*S*H^2 + attention 4*b*S*S*H, fwd+bwd = 3x.
    CHECK(t == doctest::Approx(3.0 * (24.0 + 4.0)).epsilon(1e-12));
}

TEST_CASE("doubling sp halves the per-rank compute") {
    ModelConfig model;
    model.hidden_dim = 256;
    model.layers = 2;
    model.heads = 8;
    model.vocab = 1000;
    model.seq_len = 2048;
    model.global_batch_tokens = 2048 * 8;
    Strategy s;
    s.micro_batch = 1;
    s.micro_batch_num = 1;
    s.sp = 2;
    s.dp = 4;
    Strategy s2 = s;
    s2.sp = 4;
    s2.dp = 2;
    const double t1 = estimate_comp_layer(s, model, unit_compute());
    const double t2 = estimate_comp_layer(s2, model, unit_compute());
    CHECK(t2 == doctest::Approx(t1 / 2).epsilon(1e-12));
}

TEST_CASE("analytic FLOPs cross-checked by an independent counter") {
    ModelConfig model = model_7b();
    Strategy s = serial(1, 4, 0);
    ComputeModel c;
    c.peak_flops_per_gpu = 312e12;
    c.efficiency = 0.5;
    // Independent count: per-matrix matmul FLOPs (2*m*n*k each) plus the two
    // attention batched matmuls (QK^T and PV).
    const double b = 1, S = 4096, H = 4096;
    double flops = 0;
    flops += 2 * b * S * H * (3 * H);  // QKV
    flops += 2 * b * S * H * H;        // output projection
    flops += 2 * b * S * H * (4 * H) + 2 * b * S * (4 * H) * H;  // MLP
    flops += 2 * b * S * S * H + 2 * b * S * S * H;              // QK^T, PV
    const double expected = 3.0 * flops / (312e12 * 0.5);
    CHECK(estimate_comp_layer(s, model, c) == doctest::Approx(expected).epsilon(1e-12));
}

TEST_CASE("recomputation adds one forward pass") {
    auto model = model_7b();
    const double t0 = estimate_comp_layer(serial(1, 4, 0), model, unit_compute());
    const double t1 = estimate_comp_layer(serial(1, 4, 1), model, unit_compute());
    CHECK(t1 / t0 == doctest::Approx(4.0 / 3.0).epsilon(1e-12));
}

TEST_CASE("profiled mode requires an exact key") {
    auto model = model_7b();
    ComputeModel c;
    c.mode = ComputeModel::Mode::Profiled;
    c.layer_forward_s[{1, 4096, 1}] = 2e-3;
    CHECK(estimate_comp_layer(serial(1, 4, 0), model, c) == doctest::Approx(6e-3));
    CHECK_THROWS_AS(estimate_comp_layer(serial(2, 2, 0), model, c), std::runtime_error);
}

TEST_CASE("bubble formula") {
    CHECK(fwd_bwd_time(4, 2, 4, 0.0, 10e-3) == doctest::Approx(100e-3).epsilon(1e-12));
    CHECK(fwd_bwd_time(1, 1, 4, 5e-3, 10e-3) == doctest::Approx(45e-3).epsilon(1e-12));
    // Bubble law across a grid.
    for (std::int64_t n : {1, 2, 4, 8}) {
        for (std::int64_t pp : {1, 2, 4}) {
            for (std::int64_t L : {4, 8, 12}) {
                const double ratio = fwd_bwd_time(n, pp, L, 0.0, 1.0) / fwd_bwd_time(n, 1, L, 0.0, 1.0);
                const double expected = double(n + pp - 1) * double((L + pp - 1) / pp) / (double(n) * L);
                CHECK(ratio == doctest::Approx(expected).epsilon(1e-12));
            }
        }
    }
}

TEST_CASE("overlapped time saturates at the compute side") {
    auto model = model_7b(4096, 8);
    ClusterConfig cluster{4, 4, 1LL << 60};
    Strategy s;
    s.micro_batch = 1;
    s.micro_batch_num = 2;
    s.dp = 4;
    REQUIRE(validate(s, model, cluster).ok());
    ComputeModel slow;  // compute dominates any comm
    slow.peak_flops_per_gpu = 1e9;
    slow.efficiency = 1.0;
    OverlapModel ov{1.3};
    auto cost = estimate_step(s, model, cluster, BandwidthProfile::flat(1e15), slow, ov);
    CHECK(cost.t_layer_overlapped == doctest::Approx(1.3 * cost.t_comp_per_layer).epsilon(1e-12));
}

TEST_CASE("overlapped time is bracketed") {
    auto model = model_7b(4096, 8);
    ClusterConfig cluster{8, 8, 1LL << 60};
    Strategy s;
    s.micro_batch = 1;
    s.micro_batch_num = 4;
    s.dp = 2;
    s.tp = 4;
    s.sp = 4;
    s.ps = 2;
    REQUIRE(validate(s, model, cluster).ok());
    ComputeModel c;
    OverlapModel ov{1.25};
    auto cost = estimate_step(s, model, cluster, BandwidthProfile::flat(50e9), c, ov);
    const double comm_mb = cost.comm.recurring() / 4.0;
    CHECK(cost.t_layer_overlapped / ov.slowdown_ratio >=
          cost.t_comp_per_layer * (1 - 1e-12));
    CHECK(cost.t_layer_overlapped / ov.slowdown_ratio <=
          (cost.t_comp_per_layer + comm_mb) * (1 + 1e-12));
    CHECK(cost.t_step >= cost.t_update);
    CHECK(cost.bubble_factor == doctest::Approx(4.0));
}

TEST_CASE("throughput predictions") {
    auto model = model_7b();
    model.global_batch_tokens = 4'194'304;
    ClusterConfig cluster{128, 8, 80LL << 30};
    CostBreakdown cost;
    cost.t_step = 30.0;
    auto t = estimate_throughput(cost, model, cluster, 312e12);
    CHECK(t.tokens_per_gpu_per_s == doctest::Approx(1092.27).epsilon(1e-4));

    CostBreakdown doubled = cost;
    doubled.t_step = 60.0;
    auto t2 = estimate_throughput(doubled, model, cluster, 312e12);
    CHECK(t2.tokens_per_gpu_per_s == doctest::Approx(t.tokens_per_gpu_per_s / 2).epsilon(1e-12));
    CHECK(t2.mfu == doctest::Approx(t.mfu / 2).epsilon(1e-12));

    auto t3 = estimate_throughput(cost, model, cluster, 1e30);
    CHECK(t3.mfu < 1e-10);

    CostBreakdown zero;
    CHECK_THROWS_AS(estimate_throughput(zero, model, cluster, 312e12), std::invalid_argument);
}
