#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <map>
#include <set>

#include "crawl/dataset_io.hpp"
#include "crawl/error.hpp"
#include "crawl/graph.hpp"
#include "test_util.hpp"

using namespace crawl;

TEST_CASE("cycle generator") {
    Graph c3 = make_cycle(3);
    CHECK(c3.n_nodes() == 3);
    CHECK(c3.n_edges() == 3);
    Graph c8 = make_cycle(8);
    for (NodeId v = 0; v < 8; ++v) CHECK(c8.degree(v) == 2);
    CHECK_THROWS_AS(make_cycle(2), InvalidArgument);
}

TEST_CASE("disjoint union") {
    Graph c4 = make_cycle(4);
    Graph u = disjoint_union(c4, c4);
    CHECK(u.n_nodes() == 8);
    CHECK(u.n_edges() == 8);
    for (NodeId v = 0; v < 8; ++v) CHECK(u.degree(v) == 2);
    CHECK_FALSE(u.is_edge(0, 4));

    // Same degree sequence as C_6 but a different component structure.
    Graph c3 = make_cycle(3);
    Graph two_triangles = disjoint_union(c3, c3);
    Graph c6 = make_cycle(6);
    CHECK(two_triangles.n_edges() == c6.n_edges());
    CHECK_FALSE(testutil::is_isomorphic(two_triangles, c6));
}

TEST_CASE("three-path gadgets") {
    for (int n = 2; n <= 20; ++n) {
        Graph balanced = make_three_paths(n, true);
        Graph skewed = make_three_paths(n, false);
        CHECK(balanced.n_nodes() == 3 * n - 1);
        CHECK(skewed.n_nodes() == 3 * n - 1);
        CHECK(balanced.n_edges() == 3 * n);
        CHECK(skewed.n_edges() == 3 * n);
    }
    Graph g3 = make_three_paths(3, true);
    CHECK(g3.n_nodes() == 8);
    CHECK(g3.degree(0) == 3);
    CHECK(g3.degree(1) == 3);
    for (NodeId v = 2; v < 8; ++v) CHECK(g3.degree(v) == 2);

    Graph g3s = make_three_paths(3, false);
    CHECK(g3s.n_nodes() == 8);
    CHECK(g3s.degree(0) == 3);
    CHECK(g3s.degree(1) == 3);
    CHECK_FALSE(testutil::is_isomorphic(g3, g3s));

    CHECK_THROWS_AS(make_three_paths(1, true), InvalidArgument);
}

TEST_CASE("skip-link graphs are 4-regular") {
    Graph a = make_csl(11, 2);
    CHECK(a.n_edges() == 22);
    for (NodeId v = 0; v < 11; ++v) CHECK(a.degree(v) == 4);
    Graph b = make_csl(11, 3);
    CHECK(b.n_edges() == 22);
    CHECK_FALSE(testutil::is_isomorphic(a, b));

    Graph big = make_csl(41, 2);
    CHECK(big.n_edges() == 82);
    for (NodeId v = 0; v < 41; ++v) CHECK(big.degree(v) == 4);

    CHECK_THROWS_AS(make_csl(41, 1), InvalidArgument);
    CHECK_THROWS_AS(make_csl(41, 21), InvalidArgument);
    CHECK_THROWS_AS(make_csl(4, 2), InvalidArgument);
}

TEST_CASE("csl dataset composition") {
    Dataset ds = make_csl_dataset();
    REQUIRE(ds.graphs.size() == 150);
    CHECK(ds.task.kind == TaskKind::Classification);
    CHECK(ds.task.num_classes == 10);
    CHECK(ds.num_folds() == 5);

    for (const auto& g : ds.graphs) {
        REQUIRE(g.n_nodes() == 41);
        for (NodeId v = 0; v < g.n_nodes(); ++v) REQUIRE(g.degree(v) == 4);
    }

    // Same-class graphs share the distance-profile invariant and classes do
    // not collide, so the ten classes stay distinct after relabeling.
    // Distance profiles plus 7-cycle counts: preserved by relabeling and
    // distinct across the ten skip classes.
    auto invariant = [](const Graph& g) {
        return testutil::distance_profile(g) + "#" +
               std::to_string(testutil::count_cycles(g, 7));
    };
    std::vector<std::string> class_profiles;
    for (int cls = 0; cls < 10; ++cls) {
        std::string profile = invariant(ds.graphs[cls * 15]);
        for (int c = 1; c < 15; ++c) {
            CHECK(invariant(ds.graphs[cls * 15 + c]) == profile);
            CHECK(*ds.graphs[cls * 15 + c].label() == doctest::Approx(cls));
        }
        class_profiles.push_back(std::move(profile));
    }
    std::set<std::string> distinct(class_profiles.begin(), class_profiles.end());
    CHECK(distinct.size() == 10);

    // Stratified folds: 30 graphs each, 3 per class.
    for (int f = 0; f < 5; ++f) {
        auto ids = ds.fold_indices(f);
        CHECK(ids.size() == 30);
        std::map<int, int> per_class;
        for (int i : ids) ++per_class[static_cast<int>(*ds.graphs[i].label())];
        for (const auto& [cls, count] : per_class) CHECK(count == 3);
    }
}

TEST_CASE("relabeling preserves the isomorphism class") {
    RngStream rng(7, 7);
    for (int trial = 0; trial < 20; ++trial) {
        int n = 5 + static_cast<int>(rng.uniform_int(7));
        Graph g = testutil::random_connectedish_graph(n, 0.4, rng);
        Graph h = relabel(g, testutil::random_permutation(n, rng));
        CHECK(testutil::is_isomorphic(g, h));
    }
}

TEST_CASE("graph validation") {
    CHECK_THROWS_AS(Graph(3, {{0, 0}}), InvalidArgument);          // self-loop
    CHECK_THROWS_AS(Graph(3, {{0, 1}, {1, 0}}), InvalidArgument);  // duplicate
    CHECK_THROWS_AS(Graph(3, {{0, 1}}), InvalidArgument);          // isolated node 2
    CHECK_THROWS_AS(Graph(3, {{0, 5}}), InvalidArgument);          // out of range
    Graph ok(3, {{0, 1}, {1, 2}});
    CHECK(ok.is_edge(1, 0));
    CHECK_FALSE(ok.is_edge(0, 2));
    CHECK(ok.edge_id(2, 1) == ok.edge_id(1, 2));
}

TEST_CASE("dataset json round trip") {
    Dataset ds;
    ds.task = {TaskKind::Classification, 2};
    Graph c3 = make_cycle(3);
    c3.set_label(0.0);
    FeatureTable nf;
    nf.rows = 4;
    nf.cols = 2;
    nf.values = {1, 2, 3, 4, 5, 6, 7, 8};
    FeatureTable ef;
    ef.rows = 4;
    ef.cols = 1;
    ef.values = {0.5, -1.5, 2.25, 0.0};
    Graph c4(4, {{0, 1}, {1, 2}, {2, 3}, {3, 0}}, nf, ef, 1.0);
    ds.graphs.push_back(c3);
    ds.graphs.push_back(c4);
    ds.folds = {0, 1};

    std::string path = (std::filesystem::temp_directory_path() / "crawl_ds_test.json").string();
    save_dataset(ds, path);
    Dataset back = load_dataset(path);
    REQUIRE(back.graphs.size() == 2);
    CHECK(back.task.num_classes == 2);
    CHECK(back.folds == ds.folds);
    CHECK(back.graphs[0].edges() == ds.graphs[0].edges());
    CHECK(back.graphs[1].edges() == ds.graphs[1].edges());
    CHECK(back.graphs[1].node_features().values == nf.values);
    CHECK(back.graphs[1].edge_features().values == ef.values);
    CHECK(*back.graphs[1].label() == 1.0);
    std::filesystem::remove(path);
}

TEST_CASE("dataset json rejects invalid graphs") {
    CHECK_THROWS_AS(dataset_from_json_text("{not json"), InvalidArgument);
    std::string doc =
        R"({"task":{"type":"regression"},"graphs":[{"n":2,"edges":[[0,0],[0,1]]}]})";
    CHECK_THROWS_AS(dataset_from_json_text(doc), InvalidArgument);
    std::string doc2 = R"({"task":{"type":"regression"},"graphs":[{"n":3,"edges":[[0,1]]}]})";
    CHECK_THROWS_AS(dataset_from_json_text(doc2), InvalidArgument);
    Dataset empty = dataset_from_json_text(R"({"task":{"type":"regression"},"graphs":[]})");
    CHECK(empty.graphs.empty());
}

TEST_CASE("constant feature injection") {
    Graph c3 = make_cycle(3);
    Graph with = with_constant_node_feature(c3);
    REQUIRE(with.node_features().cols == 1);
    for (NodeId v = 0; v < 3; ++v) CHECK(with.node_features().at(v, 0) == 1.0);
    Graph again = with_constant_node_feature(with);
    CHECK(again.node_features().values == with.node_features().values);
}
