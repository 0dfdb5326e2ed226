#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "crawl/error.hpp"
#include "crawl/expressiveness.hpp"
#include "window_properties.hpp"

using namespace crawl;

TEST_CASE("dynamic program agrees with full walk enumeration") {
    RngStream rng(606, 0);
    std::vector<Graph> instances;
    instances.push_back(make_cycle(6));
    instances.push_back(make_three_paths(2, false));
    instances.push_back(Graph(2, {{0, 1}}));
    for (int t = 0; t < 4; ++t)
        instances.push_back(testutil::random_connectedish_graph(5 + t, 0.5, rng));

    for (const auto& g : instances) {
        for (WalkStrategy st : {WalkStrategy::Uniform, WalkStrategy::NonBacktracking}) {
            for (int s : {1, 2, 3}) {
                auto dp = exact_feature_distribution(g, st, s, 5);
                auto en = enumerate_feature_distribution(g, st, s, 5);
                REQUIRE(dp.probs.size() == en.probs.size());
                for (const auto& [key, p] : dp.probs) {
                    REQUIRE(en.probs.count(key) == 1);
                    REQUIRE(p == en.probs.at(key));  // exact rational equality
                }
                CHECK(tv_distance_exact(dp, en) == 0);
            }
        }
    }
}

TEST_CASE("single-edge graph has one deterministic feature matrix") {
    Graph p2(2, {{0, 1}});
    auto d = exact_feature_distribution(p2, WalkStrategy::NonBacktracking, 2, 6);
    REQUIRE(d.probs.size() == 1);
    CHECK(d.probs.begin()->second == 1);
}

TEST_CASE("total variation distance basics") {
    Graph c6 = make_cycle(6);
    auto d = exact_feature_distribution(c6, WalkStrategy::Uniform, 2, 3);
    CHECK(tv_distance_exact(d, d) == 0);

    // Disjoint supports under nb walks: on the cycle the walk never turns
    // back (all-zero matrix), on the single edge it always does.
    Graph p2(2, {{0, 1}});
    auto dnb = exact_feature_distribution(c6, WalkStrategy::NonBacktracking, 2, 3);
    auto dp = exact_feature_distribution(p2, WalkStrategy::NonBacktracking, 2, 3);
    CHECK(tv_distance_exact(dnb, dp) == 1);

    auto other = exact_feature_distribution(c6, WalkStrategy::Uniform, 2, 4);
    CHECK_THROWS_AS(tv_distance_exact(d, other), InvalidArgument);
}

TEST_CASE("cycle pair indistinguishability boundary") {
    // C_2m vs C_m + C_m: identical distributions while the window cannot
    // close the short cycle (s + 1 <= girth - 1, i.e. s <= m - 2), positive
    // total variation from s = m - 1 on where the wrap edge appears.
    for (int m : {3, 4, 5}) {
        Graph whole = make_cycle(2 * m);
        Graph half = make_cycle(m);
        Graph pair = disjoint_union(half, half);
        const int ell = std::min(10, 2 * m);
        for (WalkStrategy st : {WalkStrategy::Uniform, WalkStrategy::NonBacktracking}) {
            for (int s = 1; s <= m - 2; ++s) {
                auto dw = exact_feature_distribution(whole, st, s, ell);
                auto dp = exact_feature_distribution(pair, st, s, ell);
                INFO("m=", m, " s=", s, " strategy=", to_string(st));
                CHECK(tv_distance_exact(dw, dp) == 0);
            }
            auto dw = exact_feature_distribution(whole, st, m - 1, ell);
            auto dp = exact_feature_distribution(pair, st, m - 1, ell);
            INFO("m=", m, " onset strategy=", to_string(st));
            CHECK(tv_distance_exact(dw, dp) > 0);
        }
    }
}

TEST_CASE("three-path gadgets are invisible to non-backtracking walks") {
    for (int n : {2, 3}) {
        for (int ell : {4, 7, 10}) {
            ThreePathReport rep = nb_indistinguishability_check(n, ell);
            CHECK(rep.s == 2 * n - 3);
            CHECK(rep.tv_nb == 0);
            CHECK(rep.nb_single_zero_matrix);
        }
    }
    // Uniform walks that reach both junctions do distinguish the pair.
    ThreePathReport rep = nb_indistinguishability_check(3, 10);
    CHECK(rep.tv_uniform > 0);
}

TEST_CASE("sampled distribution converges to the exact one") {
    Graph c6 = make_cycle(6);
    auto exact = exact_feature_distribution(c6, WalkStrategy::Uniform, 2, 4);
    auto sampled = sampled_feature_distribution(c6, WalkStrategy::Uniform, 2, 4, 1000000, 99);
    double sum = 0.0;
    for (const auto& [k, p] : sampled.probs_float) sum += p;
    CHECK(sum == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(tv_distance(sampled, exact) < 0.02);
}

TEST_CASE("resource budgets trip a resource error") {
    Graph big = make_csl(41, 2);
    CHECK_THROWS_AS(exact_feature_distribution(big, WalkStrategy::Uniform, 4, 12, 1000),
                    ResourceError);
    CHECK_THROWS_AS(enumerate_feature_distribution(big, WalkStrategy::Uniform, 4, 12, 1000),
                    ResourceError);
}

TEST_CASE("walklet subgraph oracle") {
    Graph g = make_cycle(6);
    std::vector<NodeId> w1 = {0, 1, 2, 3};
    CHECK(walklet_subgraph_oracle(g, w1, g, w1));
    // Shifted window on the same cycle: isomorphic.
    std::vector<NodeId> w2 = {2, 3, 4, 5};
    CHECK(walklet_subgraph_oracle(g, w1, g, w2));
    // Wrap-around window closes the hexagon edge {5, 0}: not isomorphic to
    // an open path segment.
    std::vector<NodeId> w3 = {4, 5, 0, 1};
    CHECK(walklet_subgraph_oracle(g, w1, g, w3));  // both induce paths
    Graph c4 = make_cycle(4);
    std::vector<NodeId> wc4 = {0, 1, 2, 3};
    CHECK_FALSE(walklet_subgraph_oracle(c4, wc4, g, w1));  // cycle vs path
    // Repeats must line up position-wise.
    std::vector<NodeId> wr1 = {0, 1, 0, 1};
    std::vector<NodeId> wr2 = {0, 1, 2, 1};
    Graph p2(2, {{0, 1}});
    CHECK(walklet_subgraph_oracle(p2, wr1, p2, wr1));
    CHECK_FALSE(walklet_subgraph_oracle(p2, wr1, g, wr2));
}

TEST_CASE("window properties on random graphs") {
    RngStream rng(2024, 5);
    for (int s : {2, 3}) {
        testutil::WindowPropertyStats stats;
        testutil::check_property1(stats, 250, s, 10, rng);
        CHECK(stats.property1_checked == 250);
        CHECK(stats.property1_holds == stats.property1_checked);

        testutil::check_property2(stats, 250, s, 12, rng);
        CHECK(stats.property2_checked == 250);
        CHECK(stats.property2_holds == stats.property2_checked);
    }
}
