#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <random>

#include "seqplan/search.hpp"

using namespace seqplan;

namespace {

ModelConfig small_model(std::int64_t batch_seqs) {
    ModelConfig cfg;
    cfg.hidden_dim = 128;
    cfg.layers = 4;
    cfg.heads = 8;
    cfg.vocab = 512;
    cfg.seq_len = 256;
    cfg.global_batch_tokens = batch_seqs * cfg.seq_len;
    return cfg;
}

// Reference ranking: estimate every feasible, memory-admissible strategy and
// sort the full list, bypassing the incremental top-K maintenance.
std::vector<RankedPlan> exhaustive(const ModelConfig& model, const ClusterConfig& cluster,
                                   const BandwidthProfile& profile, const ComputeModel& compute,
                                   const OverlapModel& overlap, const SearchOptions& opts) {
    std::vector<RankedPlan> all;
    for (const auto& s : enumerate_strategies(model, cluster, opts.bounds)) {
        RankedPlan p;
        p.strategy = s;
        p.cost.mem = estimate_memory(s, model, cluster);
        if (p.cost.mem.total() > double(cluster.gpu_memory_capacity) * opts.memory_slack) continue;
        p.cost = estimate_step(s, model, cluster, profile, compute, overlap, opts.estimator);
        p.placement = place_groups(cluster, s);
        p.throughput = estimate_throughput(p.cost, model, cluster, compute.peak_flops_per_gpu);
        all.push_back(p);
    }
    std::stable_sort(all.begin(), all.end(), [](const RankedPlan& a, const RankedPlan& b) {
        if (a.cost.t_step != b.cost.t_step) return a.cost.t_step < b.cost.t_step;
        return a.strategy.tuple() < b.strategy.tuple();
    });
    if (std::int64_t(all.size()) > opts.top_k) all.resize(std::size_t(opts.top_k));
    return all;
}

void check_same(const std::vector<RankedPlan>& got, const std::vector<RankedPlan>& want) {
    REQUIRE(got.size() == want.size());
    for (std::size_t i = 0; i < got.size(); ++i) {
        CHECK(got[i].strategy.tuple() == want[i].strategy.tuple());
        CHECK(got[i].cost.t_step == want[i].cost.t_step);
    }
}

}  // namespace

TEST_CASE("top-K matches exhaustive enumerate-then-sort") {
    auto model = small_model(8);
    ClusterConfig cluster{8, 4, 2LL << 30};
    ComputeModel compute;
    compute.peak_flops_per_gpu = 10e12;
    OverlapModel overlap;
    auto profile = BandwidthProfile::flat(50e9);
    for (std::int64_t k : {1, 3, 10, 10000}) {
        SearchOptions opts;
        opts.top_k = k;
        auto report = search_plans(model, cluster, profile, compute, overlap, opts);
        check_same(report.plans, exhaustive(model, cluster, profile, compute, overlap, opts));
    }
}

TEST_CASE("randomized instances agree with the exhaustive reference") {
    std::mt19937 rng(2024);
    ComputeModel compute;
    compute.peak_flops_per_gpu = 5e12;
    OverlapModel overlap;
    const std::int64_t sizes[] = {1, 2, 4, 8, 16};
    for (int trial = 0; trial < 30; ++trial) {
        ModelConfig model;
        model.hidden_dim = 64 << (rng() % 2);
        model.layers = 2 + std::int64_t(rng() % 5);
        model.heads = 8;
        model.vocab = 256;
        model.seq_len = 128 << (rng() % 3);
        const std::int64_t N = sizes[rng() % 5];
        model.global_batch_tokens = model.seq_len * N * (1 + std::int64_t(rng() % 3));
        ClusterConfig cluster{N, std::min<std::int64_t>(N, 1 + std::int64_t(rng() % 8)), 0};
        cluster.gpus_per_node = N % cluster.gpus_per_node == 0 ? cluster.gpus_per_node : 1;
        cluster.gpu_memory_capacity = (1LL << 28) << (rng() % 5);
        auto profile = BandwidthProfile::flat(double(1 + rng() % 100) * 1e9);
        SearchOptions opts;
        opts.top_k = 1 + std::int64_t(rng() % 6);
        opts.memory_slack = 0.5 + double(rng() % 100) / 100.0;
        auto report = search_plans(model, cluster, profile, compute, overlap, opts);
        check_same(report.plans, exhaustive(model, cluster, profile, compute, overlap, opts));
    }
}

TEST_CASE("results are sorted and within capacity") {
    auto model = small_model(16);
    ClusterConfig cluster{16, 8, 1LL << 30};
    ComputeModel compute;
    OverlapModel overlap;
    SearchOptions opts;
    opts.top_k = 50;
    auto report = search_plans(model, cluster, BandwidthProfile::flat(25e9), compute, overlap, opts);
    REQUIRE_FALSE(report.empty());
    for (std::size_t i = 1; i < report.plans.size(); ++i)
        CHECK(report.plans[i - 1].cost.t_step <= report.plans[i].cost.t_step);
    for (const auto& p : report.plans) {
        CHECK(p.cost.mem.total() <= double(cluster.gpu_memory_capacity));
        CHECK(validate(p.strategy, model, cluster).ok());
    }
    CHECK(report.stats.candidates ==
          report.stats.memory_ok + report.stats.pruned_memory);
}

TEST_CASE("memory slack widens the feasible set") {
    auto model = small_model(8);
    // Capacity chosen so the serial-ish plans are tight.
    ClusterConfig cluster{8, 8, 48LL << 20};
    ComputeModel compute;
    OverlapModel overlap;
    auto profile = BandwidthProfile::flat(25e9);
    SearchOptions tight, loose;
    tight.top_k = loose.top_k = 1000;
    tight.memory_slack = 1.0;
    loose.memory_slack = 4.0;
    auto r1 = search_plans(model, cluster, profile, compute, overlap, tight);
    auto r2 = search_plans(model, cluster, profile, compute, overlap, loose);
    CHECK(r2.stats.memory_ok >= r1.stats.memory_ok);
    CHECK(r2.plans.size() >= r1.plans.size());
}

TEST_CASE("impossible capacity yields an empty report") {
    auto model = small_model(8);
    ClusterConfig cluster{8, 8, 1};  // one byte per GPU
    auto report = search_plans(model, cluster, BandwidthProfile::flat(25e9), ComputeModel{},
                               OverlapModel{});
    CHECK(report.empty());
    CHECK(report.stats.pruned_memory == report.stats.candidates);
}

TEST_CASE("deterministic across repeated runs") {
    auto model = small_model(8);
    ClusterConfig cluster{8, 4, 2LL << 30};
    auto profile = BandwidthProfile::flat(50e9);
    auto r1 = search_plans(model, cluster, profile, ComputeModel{}, OverlapModel{});
    auto r2 = search_plans(model, cluster, profile, ComputeModel{}, OverlapModel{});
    REQUIRE(r1.plans.size() == r2.plans.size());
    for (std::size_t i = 0; i < r1.plans.size(); ++i) {
        CHECK(r1.plans[i].strategy.tuple() == r2.plans[i].strategy.tuple());
        CHECK(r1.plans[i].cost.t_step == r2.plans[i].cost.t_step);
    }
}

TEST_CASE("explain covers the plan and its doubling probes") {
    auto model = small_model(8);
    ClusterConfig cluster{8, 4, 2LL << 30};
    auto report =
        search_plans(model, cluster, BandwidthProfile::flat(50e9), ComputeModel{}, OverlapModel{});
    REQUIRE_FALSE(report.empty());
    auto text = explain_plan(report, model, cluster, 0);
    CHECK(text.find("step time") != std::string::npos);
    CHECK(text.find("memory:") != std::string::npos);
    CHECK(text.find("s_sp*2") != std::string::npos);
    CHECK_THROWS_AS(explain_plan(report, model, cluster, report.plans.size()), std::out_of_range);
}

TEST_CASE("top_k must be positive") {
    auto model = small_model(8);
    ClusterConfig cluster{8, 4, 2LL << 30};
    SearchOptions opts;
    opts.top_k = 0;
    CHECK_THROWS_AS(
        search_plans(model, cluster, BandwidthProfile::flat(50e9), ComputeModel{}, OverlapModel{}, opts),
        std::invalid_argument);
}
