#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "crawl/graph.hpp"

namespace crawl {

enum class WalkStrategy { Uniform, NonBacktracking };

WalkStrategy walk_strategy_from_string(const std::string& s);
std::string to_string(WalkStrategy s);

// m walks of `ell` edges each; row i holds ell+1 node indices.
struct WalkSet {
    int m = 0;
    int ell = 0;
    WalkStrategy strategy = WalkStrategy::Uniform;
    uint64_t seed = 0;
    NodeId n_nodes = 0;  // of the source graph
    std::vector<NodeId> nodes;  // m x (ell+1), row-major

    NodeId at(int walk, int pos) const { return nodes[static_cast<size_t>(walk) * (ell + 1) + pos]; }
    const NodeId* row(int walk) const { return nodes.data() + static_cast<size_t>(walk) * (ell + 1); }
    int row_len() const { return ell + 1; }
};

// p_star = 1 starts one walk at every node (the identity list). Otherwise
// round(p_star * |V|) nodes are drawn uniformly with replacement, rounding
// half up, at least one.
std::vector<NodeId> start_nodes(const Graph& g, double p_star, uint64_t seed);

// Row i is drawn from the independent stream (seed, i), so results do not
// depend on sampling order.
WalkSet sample_walks_from(const Graph& g, WalkStrategy strategy,
                          const std::vector<NodeId>& starts, int ell, uint64_t seed);
WalkSet sample_walks(const Graph& g, WalkStrategy strategy, double p_star, int ell,
                     uint64_t seed);

// The s+1 nodes centered at walk position center_pos. s must be even and the
// window must lie inside the walk.
std::vector<NodeId> walklet(const WalkSet& ws, int walk_idx, int center_pos, int s);

}  // namespace crawl
