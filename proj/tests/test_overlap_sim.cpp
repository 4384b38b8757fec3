#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <map>
#include <random>

#include "seqplan/overlap_sim.hpp"

using namespace seqplan;

namespace {

std::vector<LayerWorkload> uniform(std::size_t n, double fwd, double gather, double rs) {
    return std::vector<LayerWorkload>(n, LayerWorkload::balanced(fwd, gather, rs));
}

// Structural invariants every timeline must satisfy: events on one stream do
// not overlap, times are ordered, and the makespan is the latest end.
void check_invariants(const Timeline& tl) {
    std::map<StreamKind, std::vector<std::pair<double, double>>> per_stream;
    double latest = 0;
    for (const auto& e : tl.events) {
        CHECK(e.start >= 0);
        CHECK(e.end >= e.start);
        per_stream[e.stream].push_back({e.start, e.end});
        latest = std::max(latest, e.end);
    }
    CHECK(tl.makespan == doctest::Approx(latest));
    for (auto& [stream, spans] : per_stream) {
        std::sort(spans.begin(), spans.end());
        for (std::size_t i = 1; i < spans.size(); ++i)
            CHECK(spans[i].first >= spans[i - 1].second - 1e-12);
    }
}

double event_end(const Timeline& tl, const std::string& kind, std::int64_t layer) {
    for (const auto& e : tl.events)
        if (e.kind == kind && e.layer == layer) return e.end;
    REQUIRE(false);
    return 0;
}

double event_start(const Timeline& tl, const std::string& kind, std::int64_t layer) {
    for (const auto& e : tl.events)
        if (e.kind == kind && e.layer == layer) return e.start;
    REQUIRE(false);
    return 0;
}

}  // namespace

TEST_CASE("forward: prefetch hides the second gather") {
    auto layers = uniform(2, 10, 10, 0);
    auto naive = simulate_forward(layers, ForwardPolicy::Naive);
    auto prefetch = simulate_forward(layers, ForwardPolicy::InterLayerPrefetch);
    check_invariants(naive);
    check_invariants(prefetch);
    CHECK(naive.makespan == doctest::Approx(40.0));
    CHECK(prefetch.makespan == doctest::Approx(30.0));
    // The first gather is always exposed.
    CHECK(event_start(prefetch, "forward", 0) >= event_end(prefetch, "all_gather", 0) - 1e-12);
}

TEST_CASE("forward: zero gathers collapse to pure compute") {
    auto layers = uniform(4, 5, 0, 0);
    for (auto policy : {ForwardPolicy::Naive, ForwardPolicy::InterLayerPrefetch}) {
        auto tl = simulate_forward(layers, policy);
        CHECK(tl.makespan == doctest::Approx(20.0));
        CHECK(tl.stream_busy(StreamKind::Comm) == 0.0);
    }
}

TEST_CASE("backward: selective beats fused on the pinned workload") {
    auto layers = uniform(2, 10, 10, 10);
    auto fused = simulate_backward(layers, BackwardPolicy::Fused);
    auto selective = simulate_backward(layers, BackwardPolicy::Selective);
    check_invariants(fused);
    check_invariants(selective);
    CHECK(fused.makespan == doctest::Approx(80.0));
    CHECK(selective.makespan == doctest::Approx(50.0));
}

TEST_CASE("backward: single layer leaves the last reduce-scatter hidden behind G-X") {
    auto tl = simulate_backward(uniform(1, 10, 10, 10), BackwardPolicy::Selective);
    check_invariants(tl);
    CHECK(tl.makespan == doctest::Approx(30.0));
    CHECK(event_end(tl, "reduce_scatter", 0) <= tl.makespan + 1e-12);
}

TEST_CASE("backward orderings are respected") {
    auto layers = uniform(3, 4, 3, 5);
    auto tl = simulate_backward(layers, BackwardPolicy::Selective);
    check_invariants(tl);
    for (std::int64_t i = 2; i >= 0; --i) {
        // Weight gradient waits for the layer's gathered parameters.
        CHECK(event_start(tl, "grad_weight", i) >= event_end(tl, "all_gather", i) - 1e-12);
        // Reduce-scatter waits for the weight gradient it ships.
        CHECK(event_start(tl, "reduce_scatter", i) >= event_end(tl, "grad_weight", i) - 1e-12);
        // Both halves wait for the downstream input gradient.
        if (i < 2) {
            CHECK(event_start(tl, "grad_weight", i) >= event_end(tl, "grad_input", i + 1) - 1e-12);
            CHECK(event_start(tl, "grad_input", i) >= event_end(tl, "grad_input", i + 1) - 1e-12);
        }
        // Prefetch: gather(i-1) is issued before reduce_scatter(i) on the comm stream.
        if (i > 0)
            CHECK(event_start(tl, "all_gather", i - 1) <=
                  event_start(tl, "reduce_scatter", i) + 1e-12);
    }
}

TEST_CASE("selective never loses to fused") {
    std::mt19937 rng(11);
    std::uniform_real_distribution<double> d(0.1, 20.0);
    for (int trial = 0; trial < 200; ++trial) {
        std::vector<LayerWorkload> layers(1 + rng() % 6);
        for (auto& w : layers) w = LayerWorkload{d(rng), d(rng), d(rng), d(rng), d(rng)};
        auto fused = simulate_backward(layers, BackwardPolicy::Fused);
        auto selective = simulate_backward(layers, BackwardPolicy::Selective);
        check_invariants(fused);
        check_invariants(selective);
        CHECK(selective.makespan <= fused.makespan + 1e-9);
        // Lower bound: no schedule beats the busier stream.
        CHECK(selective.makespan >= selective.stream_busy(StreamKind::Compute) - 1e-9);
        CHECK(selective.makespan >= selective.stream_busy(StreamKind::Comm) - 1e-9);
    }
}

TEST_CASE("issue delay stretches the schedule") {
    auto layers = uniform(3, 5, 4, 4);
    auto base = simulate_backward(layers, BackwardPolicy::Selective, 0.0);
    auto delayed = simulate_backward(layers, BackwardPolicy::Selective, 0.5);
    CHECK(delayed.makespan > base.makespan);
}

TEST_CASE("empty workload is rejected") {
    CHECK_THROWS_AS(simulate_forward({}, ForwardPolicy::Naive), std::invalid_argument);
    CHECK_THROWS_AS(simulate_backward({}, BackwardPolicy::Selective), std::invalid_argument);
}

TEST_CASE("comparison against the analytic overlap model") {
    auto layers = uniform(4, 10, 6, 6);
    auto tl = simulate_backward(layers, BackwardPolicy::Selective);
    auto r = compare_to_analytic(tl, 1.0);
    CHECK(r.total_compute == doctest::Approx(4 * 20.0));
    CHECK(r.total_comm == doctest::Approx(4 * 12.0));
    CHECK(r.analytic == doctest::Approx(80.0));
    CHECK(r.ratio == doctest::Approx(tl.makespan / 80.0));
    // With slack for the exposed head/tail, the analytic model with its
    // slowdown ratio should bracket the simulated makespan from above.
    auto padded = compare_to_analytic(tl, 1.30);
    CHECK(padded.analytic >= r.total_compute);
}
