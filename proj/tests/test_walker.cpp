#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <map>
#include <set>

#include "crawl/error.hpp"
#include "crawl/walks.hpp"
#include "test_util.hpp"

using namespace crawl;

namespace {

// chi-square critical values at significance 1e-3 for df 1..6
const double kChi2Crit[] = {0, 10.828, 13.816, 16.266, 18.467, 20.515, 22.458};

Graph path2() { return Graph(2, {{0, 1}}); }

Graph star_k13() { return Graph(4, {{0, 1}, {0, 2}, {0, 3}}); }

}  // namespace

TEST_CASE("start node policy") {
    Graph g = make_cycle(8);
    auto starts = start_nodes(g, 1.0, 123);
    REQUIRE(starts.size() == 8);
    for (NodeId v = 0; v < 8; ++v) CHECK(starts[v] == v);  // one walk per node

    Graph g10 = make_cycle(10);
    CHECK(start_nodes(g10, 0.2, 5).size() == 2);

    // Round half up: 0.5 * 5 = 2.5 -> 3.
    Graph g5 = make_cycle(5);
    CHECK(start_nodes(g5, 0.5, 5).size() == 3);

    CHECK_THROWS_AS(start_nodes(g, 0.0, 1), InvalidArgument);
    CHECK_THROWS_AS(start_nodes(g, 1.5, 1), InvalidArgument);
}

TEST_CASE("degree-one exception forces backtracking") {
    Graph g = path2();
    WalkSet ws = sample_walks_from(g, WalkStrategy::NonBacktracking, {0}, 4, 7);
    REQUIRE(ws.m == 1);
    const NodeId expect[] = {0, 1, 0, 1, 0};
    for (int i = 0; i <= 4; ++i) CHECK(ws.at(0, i) == expect[i]);
}

TEST_CASE("star center returns with certainty under uniform walks") {
    Graph g = star_k13();
    for (uint64_t seed = 0; seed < 32; ++seed) {
        WalkSet ws = sample_walks_from(g, WalkStrategy::Uniform, {0}, 2, seed);
        CHECK(ws.at(0, 2) == 0);  // leaves have degree 1
    }
}

TEST_CASE("non-backtracking cycle walks pick a direction and keep it") {
    Graph g = make_cycle(4);
    int clockwise = 0;
    const int trials = 10000;
    for (int t = 0; t < trials; ++t) {
        WalkSet ws = sample_walks_from(g, WalkStrategy::NonBacktracking, {0}, 4, 1000 + t);
        // After the first step the walk is forced; only two walks exist.
        bool cw = ws.at(0, 1) == 1;
        for (int i = 0; i <= 4; ++i) {
            int expect = cw ? i % 4 : (4 - i % 4) % 4;
            REQUIRE(ws.at(0, i) == expect);
        }
        clockwise += cw ? 1 : 0;
    }
    // Empirical frequency within 3 sigma of 1/2.
    double sigma = std::sqrt(0.25 * trials);
    CHECK(std::abs(clockwise - trials / 2.0) < 3 * sigma);
}

TEST_CASE("edge validity and nb constraint over random graphs") {
    RngStream rng(99, 1);
    for (int trial = 0; trial < 40; ++trial) {
        int n = 4 + static_cast<int>(rng.uniform_int(9));
        Graph g = testutil::random_connectedish_graph(n, 0.35, rng);
        for (WalkStrategy st : {WalkStrategy::Uniform, WalkStrategy::NonBacktracking}) {
            WalkSet ws = sample_walks(g, st, 1.0, 12, 555 + trial);
            for (int w = 0; w < ws.m; ++w) {
                for (int i = 0; i < ws.ell; ++i) {
                    REQUIRE(g.is_edge(ws.at(w, i), ws.at(w, i + 1)));
                    if (st == WalkStrategy::NonBacktracking && i >= 1 &&
                        g.degree(ws.at(w, i)) > 1) {
                        REQUIRE(ws.at(w, i + 1) != ws.at(w, i - 1));
                    }
                }
            }
        }
    }
}

TEST_CASE("single-step transition frequencies match the uniform law") {
    Graph g = make_csl(11, 3);  // degree 4 everywhere
    const int N = 100000;

    SUBCASE("uniform strategy from a fixed node") {
        std::map<NodeId, int> counts;
        for (int t = 0; t < N; ++t) {
            WalkSet ws = sample_walks_from(g, WalkStrategy::Uniform, {5}, 1, 10000 + t);
            ++counts[ws.at(0, 1)];
        }
        REQUIRE(counts.size() == 4);
        double chi2 = 0.0, expect = N / 4.0;
        for (const auto& [v, c] : counts) chi2 += (c - expect) * (c - expect) / expect;
        CHECK(chi2 < kChi2Crit[3]);
    }

    SUBCASE("nb strategy excludes the previous node") {
        // Second step from node 5 with previous node fixed by the start pair.
        std::map<NodeId, int> counts;
        int used = 0;
        for (int t = 0; t < 4 * N && used < N; ++t) {
            WalkSet ws = sample_walks_from(g, WalkStrategy::NonBacktracking, {2}, 2, 50000 + t);
            if (ws.at(0, 1) != 5) continue;  // condition on passing through node 5
            ++counts[ws.at(0, 2)];
            ++used;
        }
        REQUIRE(counts.size() == 3);
        CHECK(counts.count(2) == 0);
        double chi2 = 0.0, expect = used / 3.0;
        for (const auto& [v, c] : counts) chi2 += (c - expect) * (c - expect) / expect;
        CHECK(chi2 < kChi2Crit[2]);
    }
}

TEST_CASE("determinism: identical arguments give identical walk sets") {
    Graph g = make_csl(11, 2);
    WalkSet a = sample_walks(g, WalkStrategy::NonBacktracking, 1.0, 50, 4242);
    WalkSet b = sample_walks(g, WalkStrategy::NonBacktracking, 1.0, 50, 4242);
    CHECK(a.nodes == b.nodes);
    WalkSet c = sample_walks(g, WalkStrategy::NonBacktracking, 1.0, 50, 4243);
    CHECK(a.nodes != c.nodes);
}

TEST_CASE("walklet slicing") {
    Graph g = path2();
    WalkSet ws = sample_walks_from(g, WalkStrategy::NonBacktracking, {0}, 4, 7);
    // Walk is (0,1,0,1,0).
    auto w0 = walklet(ws, 0, 2, 0);
    CHECK(w0 == std::vector<NodeId>{0});
    auto w2 = walklet(ws, 0, 2, 2);
    CHECK(w2 == std::vector<NodeId>{1, 0, 1});
    CHECK_THROWS_AS(walklet(ws, 0, 0, 2), InvalidArgument);
    CHECK_THROWS_AS(walklet(ws, 0, 2, 3), InvalidArgument);  // odd window

    // On a long cycle an nb walklet of width s+1 < girth never repeats.
    Graph c8 = make_cycle(8);
    WalkSet cw = sample_walks(c8, WalkStrategy::NonBacktracking, 1.0, 10, 11);
    for (int w = 0; w < cw.m; ++w) {
        auto seg = walklet(cw, w, 5, 4);
        std::set<NodeId> uniq(seg.begin(), seg.end());
        CHECK(uniq.size() == 5);
    }
}
