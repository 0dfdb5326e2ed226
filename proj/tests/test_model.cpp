#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>

#include "crawl/error.hpp"
#include "crawl/model.hpp"
#include "test_util.hpp"

using namespace crawl;
using nn::TensorPtr;

namespace {

// Two-sample Kolmogorov-Smirnov statistic.
double ks_statistic(std::vector<double> a, std::vector<double> b) {
    std::sort(a.begin(), a.end());
    std::sort(b.begin(), b.end());
    double d = 0.0;
    size_t i = 0, j = 0;
    while (i < a.size() && j < b.size()) {
        if (a[i] <= b[j]) ++i;
        else ++j;
        double fa = static_cast<double>(i) / a.size();
        double fb = static_cast<double>(j) / b.size();
        d = std::max(d, std::abs(fa - fb));
    }
    return d;
}

ModelConfig small_config() {
    ModelConfig cfg;
    cfg.num_layers = 2;
    cfg.hidden = 16;
    cfg.conv_channels = 16;
    cfg.window = 4;
    cfg.train_walk_len = 20;
    cfg.eval_walk_len = 30;
    cfg.out_dim = 10;
    return cfg;
}

}  // namespace

TEST_CASE("center pooling") {
    Graph g = make_cycle(6);
    WalkSet ws = sample_walks(g, WalkStrategy::NonBacktracking, 1.0, 8, 5);
    const int s = 2;
    auto groups = center_groups(ws, s, g.n_nodes());

    // Counting identity: every walk contributes ell - s - 1 center positions.
    size_t total = 0;
    for (const auto& grp : *groups) total += grp.size();
    CHECK(total == static_cast<size_t>(ws.m) * (ws.ell - s - 1));

    // The first and last CNN rows never appear in any group.
    const int out_rows = ws.row_len() - s;
    for (const auto& grp : *groups) {
        for (int64_t slot : grp) {
            int r = static_cast<int>(slot % out_rows);
            CHECK(r >= 1);
            CHECK(r <= ws.ell - s - 1);
        }
    }

    // Mean semantics: one occurrence returns that row, two average.
    auto cnn = nn::make_tensor({ws.m, out_rows, 2});
    RngStream rng(3, 3);
    for (auto& x : cnn->v) x = rng.normal();
    TensorPtr pooled = pool_centers(nullptr, cnn, ws, s, g.n_nodes());
    for (NodeId v = 0; v < g.n_nodes(); ++v) {
        const auto& grp = (*groups)[v];
        for (int64_t c = 0; c < 2; ++c) {
            double expect = 0.0;
            for (int64_t slot : grp) expect += cnn->v[slot * 2 + c];
            if (!grp.empty()) expect /= static_cast<double>(grp.size());
            CHECK(pooled->v[v * 2 + c] == doctest::Approx(expect).epsilon(1e-12));
        }
    }
}

TEST_CASE("nodes without centers pool to zero and share the fallback value") {
    Graph g = make_cycle(8);
    // One short walk: exactly one center position.
    WalkSet ws = sample_walks_from(g, WalkStrategy::NonBacktracking, {0}, 4, 9);
    const int s = 2;
    auto groups = center_groups(ws, s, g.n_nodes());
    size_t nonempty = 0;
    for (const auto& grp : *groups) nonempty += grp.empty() ? 0 : 1;
    CHECK(nonempty == 1);

    auto cnn = nn::make_tensor({1, ws.row_len() - s, 3}, std::vector<double>(9, 1.0));
    TensorPtr pooled = pool_centers(nullptr, cnn, ws, s, g.n_nodes());
    NodeId center_node = ws.at(0, 2);
    for (NodeId v = 0; v < 8; ++v) {
        for (int64_t c = 0; c < 3; ++c)
            CHECK(pooled->v[v * 3 + c] == (v == center_node ? 1.0 : 0.0));
    }
}

TEST_CASE("virtual node update") {
    RngStream rng(8, 8);
    Graph a = make_cycle(3), b = make_cycle(4);
    GraphBatch batch = make_batch({&a, &b});

    auto h = nn::make_tensor({7, 2});
    for (int64_t i = 0; i < 14; ++i) h->v[i] = static_cast<double>(i);
    auto hvn = nn::make_tensor({2, 2});

    SUBCASE("zero MLP weights broadcast only the bias") {
        nn::Mlp mlp({2, 2, 2}, rng);
        for (auto& l : mlp.layers) {
            std::fill(l.w->v.begin(), l.w->v.end(), 0.0);
            std::fill(l.b->v.begin(), l.b->v.end(), 0.0);
        }
        mlp.layers[1].b->v = {0.5, -0.25};
        auto [h_new, hvn_new] =
            virtual_node_update(nullptr, h, hvn, mlp, batch.graph_groups, batch.node2graph);
        for (int64_t i = 0; i < 7; ++i) {
            CHECK(h_new->v[i * 2 + 0] == h->v[i * 2 + 0] + 0.5);
            CHECK(h_new->v[i * 2 + 1] == h->v[i * 2 + 1] - 0.25);
        }
        CHECK(hvn_new->v == std::vector<double>{0.5, -0.25, 0.5, -0.25});
    }

    SUBCASE("the carry sums the graph's node embeddings") {
        nn::Mlp mlp({2, 2, 2}, rng);
        auto [h_new, hvn_new] =
            virtual_node_update(nullptr, h, hvn, mlp, batch.graph_groups, batch.node2graph);
        // Recompute by hand for graph 0 (nodes 0..2).
        double s0 = h->v[0] + h->v[2] + h->v[4];
        double s1 = h->v[1] + h->v[3] + h->v[5];
        auto z = nn::make_tensor({1, 2}, {s0, s1});
        auto expect = mlp.forward(nullptr, z);
        CHECK(hvn_new->v[0] == doctest::Approx(expect->v[0]).epsilon(1e-12));
        CHECK(hvn_new->v[1] == doctest::Approx(expect->v[1]).epsilon(1e-12));
    }
}

TEST_CASE("walks never contain out-of-graph nodes") {
    // The global state is not a graph node; every walk index stays in range.
    Graph g = make_csl(11, 2);
    WalkSet ws = sample_walks(g, WalkStrategy::NonBacktracking, 1.0, 30, 2);
    for (NodeId v : ws.nodes) {
        CHECK(v >= 0);
        CHECK(v < g.n_nodes());
    }
}

TEST_CASE("parameter counting") {
    ModelConfig cfg = small_config();
    CrawlNet net(cfg, 1);
    nn::ParamMap pm = net.params();
    CHECK(pm.total_size() == count_parameters(cfg));

    // With a virtual node.
    ModelConfig cfg_vn = cfg;
    cfg_vn.virtual_node = true;
    CrawlNet net_vn(cfg_vn, 1);
    CHECK(net_vn.params().total_size() == count_parameters(cfg_vn));

    // Linear readout.
    ModelConfig cfg_lin = cfg;
    cfg_lin.readout = ReadoutKind::Linear;
    CrawlNet net_lin(cfg_lin, 1);
    CHECK(net_lin.params().total_size() == count_parameters(cfg_lin));

    // Layer-owned parameters grow additively with depth.
    ModelConfig cfg2 = cfg;
    cfg2.num_layers = 4;
    int64_t base = count_parameters(cfg);
    int64_t doubled = count_parameters(cfg2);
    int64_t shared = count_parameters([&] {
        ModelConfig c = cfg;
        c.num_layers = 1;
        return c;
    }());
    CHECK(doubled - base == base - shared + (base - shared));  // 2 extra layers

    // The skip-link task configuration stays under the parameter budget.
    ModelConfig csl;
    csl.num_layers = 3;
    csl.hidden = 48;
    csl.conv_channels = 48;
    csl.window = 8;
    csl.out_dim = 10;
    CHECK(count_parameters(csl) < 100000);
}

TEST_CASE("deterministic forward and eval-length flexibility") {
    ModelConfig cfg = small_config();
    Dataset ds = make_csl_dataset();
    CrawlNet net(cfg, 99);

    GraphBatch batch = make_batch({&ds.graphs[0], &ds.graphs[15]});
    WalkSet ws = sample_walks(batch.merged, cfg.strategy, 1.0, cfg.train_walk_len, 7);
    auto out1 = net.forward(nullptr, batch, ws, false, RngStream(0, 0));
    auto out2 = net.forward(nullptr, batch, ws, false, RngStream(0, 0));
    CHECK(out1->v == out2->v);
    REQUIRE(out1->shape == std::vector<int64_t>{2, 10});

    // Longer evaluation walks reuse the same parameters.
    WalkSet longer = sample_walks(batch.merged, cfg.strategy, 1.0, 77, 7);
    auto out3 = net.forward(nullptr, batch, ws, false, RngStream(0, 0));
    CHECK_NOTHROW(net.forward(nullptr, batch, longer, false, RngStream(0, 0)));
    CHECK(out3->v == out1->v);

    // Walks shorter than the kernel are rejected.
    WalkSet tiny = sample_walks(batch.merged, cfg.strategy, 1.0, 3, 7);
    CHECK_THROWS_AS(net.forward(nullptr, batch, tiny, false, RngStream(0, 0)),
                    InvalidArgument);
}

TEST_CASE("prediction distribution is invariant under relabeling") {
    // Untrained model, isomorphic relabeled pair, 200 walk seeds: pooled
    // logits must agree in distribution (two-sample KS at alpha = 1e-3).
    ModelConfig cfg = small_config();
    cfg.eval_walk_len = 30;
    Graph g = make_csl(11, 2);
    RngStream rng(17, 17);
    Graph h = relabel(g, testutil::random_permutation(11, rng));
    CrawlNet net(cfg, 4);

    const int seeds = 200;
    std::vector<double> sa, sb;
    for (int t = 0; t < seeds; ++t) {
        sa.push_back(net.predict(g, 1000 + t)[0]);
        sb.push_back(net.predict(h, 9000 + t)[0]);
    }
    double d = ks_statistic(sa, sb);
    // Critical value at alpha = 1e-3 for n = m = 200.
    double crit = 1.9495 * std::sqrt(2.0 / seeds);
    CHECK(d < crit);
}

TEST_CASE("output variance shrinks as the walk count grows") {
    ModelConfig cfg = small_config();
    Graph g = make_csl(41, 5);
    CrawlNet net(cfg, 12);
    GraphBatch batch = make_batch({&g});

    auto variance_at = [&](int multiplier) {
        std::vector<double> outs;
        for (int t = 0; t < 64; ++t) {
            std::vector<NodeId> starts;
            for (int rep = 0; rep < multiplier; ++rep)
                for (NodeId v = 0; v < g.n_nodes(); ++v) starts.push_back(v);
            WalkSet ws = sample_walks_from(batch.merged, cfg.strategy, starts, cfg.eval_walk_len,
                                      500 + t);
            outs.push_back(net.forward(nullptr, batch, ws, false, RngStream(0, 0))->v[0]);
        }
        double mean = 0.0;
        for (double x : outs) mean += x;
        mean /= outs.size();
        double var = 0.0;
        for (double x : outs) var += (x - mean) * (x - mean);
        return var / outs.size();
    };

    double v1 = variance_at(1);
    double v4 = variance_at(4);
    CHECK(v4 < v1);
}

TEST_CASE("checkpoint round trip is bit-exact") {
    ModelConfig cfg = small_config();
    CrawlNet net(cfg, 31);
    auto dir = std::filesystem::temp_directory_path();
    std::string p1 = (dir / "crawl_ckpt_a.bin").string();
    std::string p2 = (dir / "crawl_ckpt_b.bin").string();
    net.save_checkpoint(p1);
    CrawlNet back = CrawlNet::load_checkpoint(p1);
    back.save_checkpoint(p2);

    std::ifstream f1(p1, std::ios::binary), f2(p2, std::ios::binary);
    std::string b1((std::istreambuf_iterator<char>(f1)), std::istreambuf_iterator<char>());
    std::string b2((std::istreambuf_iterator<char>(f2)), std::istreambuf_iterator<char>());
    REQUIRE(!b1.empty());
    CHECK(b1 == b2);

    CHECK(back.config().hidden == cfg.hidden);
    CHECK_THROWS_AS(CrawlNet::load_checkpoint("/nonexistent/path.ckpt"), InvalidArgument);
    std::filesystem::remove(p1);
    std::filesystem::remove(p2);
}
