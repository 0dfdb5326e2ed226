#pragma once

// Randomized checks of the two walk-window facts the feature matrices
// guarantee:
//   (1) equal structural rows at positions i-s+1..i of two walks imply the
//       position-wise node map over i-s..i is an induced-subgraph
//       isomorphism;
//   (2) a position-wise induced-subgraph isomorphism over the doubled
//       window i-2s+1..i forces equal rows at i-s+1..i.
// Shared by the unit suite and the acceptance runner.

#include <deque>
#include <map>
#include <string>
#include <vector>

#include "crawl/expressiveness.hpp"
#include "crawl/graph.hpp"
#include "crawl/walks.hpp"
#include "test_util.hpp"

namespace crawl::testutil {

struct WindowPropertyStats {
    int64_t property1_checked = 0;
    int64_t property1_holds = 0;
    int64_t property2_checked = 0;
    int64_t property2_holds = 0;
};

struct SampledWindow {
    const Graph* graph;
    std::vector<NodeId> walk;
    std::string bits;
    int pos;  // window end position i
};

// Property (1): bucket windows from random graphs by their structural-row
// signature; any two windows in one bucket must induce isomorphic
// subgraphs under the position-wise map.
inline void check_property1(WindowPropertyStats& stats, int64_t target_pairs, int s, int ell,
                            RngStream& rng) {
    const int width = 2 * s - 1;
    std::deque<Graph> graphs;  // stable addresses for the window records
    std::vector<SampledWindow> windows;
    std::map<std::string, std::vector<size_t>> buckets;

    while (stats.property1_checked < target_pairs) {
        int n = 5 + static_cast<int>(rng.uniform_int(6));
        graphs.push_back(random_connectedish_graph(n, 0.45, rng));
        const Graph& g = graphs.back();
        WalkStrategy st =
            rng.uniform() < 0.5 ? WalkStrategy::Uniform : WalkStrategy::NonBacktracking;
        WalkSet ws = sample_walks(g, st, 1.0, ell, rng.next_u64());
        for (int w = 0; w < ws.m; ++w) {
            std::vector<NodeId> walk(ws.row(w), ws.row(w) + ws.row_len());
            std::string bits = feature_matrix_bits(g, walk, s);
            for (int i = s; i <= ell; ++i) {
                std::string sig = bits.substr((i - s + 1) * width, s * width);
                size_t idx = windows.size();
                windows.push_back({&g, walk, bits, i});
                auto& bucket = buckets[sig];
                // Compare against a handful of earlier windows with the
                // same rows.
                for (size_t k = 0; k < bucket.size() && k < 4; ++k) {
                    const SampledWindow& other = windows[bucket[k]];
                    std::vector<NodeId> nodes_a(walk.begin() + (i - s), walk.begin() + i + 1);
                    std::vector<NodeId> nodes_b(other.walk.begin() + (other.pos - s),
                                                other.walk.begin() + other.pos + 1);
                    ++stats.property1_checked;
                    if (walklet_subgraph_oracle(g, nodes_a, *other.graph, nodes_b))
                        ++stats.property1_holds;
                    if (stats.property1_checked >= target_pairs) return;
                }
                bucket.push_back(idx);
            }
        }
    }
}

// Property (2): relabeled graph pairs give position-wise isomorphisms over
// any window by construction; the corresponding rows must agree.
inline void check_property2(WindowPropertyStats& stats, int64_t target_cases, int s, int ell,
                            RngStream& rng) {
    const int width = 2 * s - 1;
    while (stats.property2_checked < target_cases) {
        int n = 5 + static_cast<int>(rng.uniform_int(6));
        Graph g = random_connectedish_graph(n, 0.45, rng);
        auto perm = random_permutation(n, rng);
        Graph h = relabel(g, perm);
        WalkStrategy st =
            rng.uniform() < 0.5 ? WalkStrategy::Uniform : WalkStrategy::NonBacktracking;
        WalkSet ws = sample_walks(g, st, 1.0, ell, rng.next_u64());
        for (int w = 0; w < ws.m && stats.property2_checked < target_cases; ++w) {
            std::vector<NodeId> walk(ws.row(w), ws.row(w) + ws.row_len());
            std::vector<NodeId> mapped(walk.size());
            for (size_t i = 0; i < walk.size(); ++i) mapped[i] = perm[walk[i]];

            std::string bits_g = feature_matrix_bits(g, walk, s);
            std::string bits_h = feature_matrix_bits(h, mapped, s);
            for (int i = 2 * s - 1; i <= ell && stats.property2_checked < target_cases; ++i) {
                // The doubled window map is an induced isomorphism by
                // construction; verify the oracle agrees, then compare rows.
                std::vector<NodeId> wa(walk.begin() + (i - 2 * s + 1), walk.begin() + i + 1);
                std::vector<NodeId> wb(mapped.begin() + (i - 2 * s + 1),
                                       mapped.begin() + i + 1);
                if (!walklet_subgraph_oracle(g, wa, h, wb)) continue;
                ++stats.property2_checked;
                if (bits_g.substr((i - s + 1) * width, s * width) ==
                    bits_h.substr((i - s + 1) * width, s * width))
                    ++stats.property2_holds;
            }
        }
    }
}

}  // namespace crawl::testutil
