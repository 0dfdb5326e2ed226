#include "crawl/walks.hpp"

#include <cmath>

#include "crawl/error.hpp"
#include "crawl/rng.hpp"

namespace crawl {

WalkStrategy walk_strategy_from_string(const std::string& s) {
    if (s == "uniform" || s == "un") return WalkStrategy::Uniform;
    if (s == "non_backtracking" || s == "nb") return WalkStrategy::NonBacktracking;
    throw InvalidArgument("unknown walk strategy: " + s);
}

std::string to_string(WalkStrategy s) {
    return s == WalkStrategy::Uniform ? "uniform" : "non_backtracking";
}

std::vector<NodeId> start_nodes(const Graph& g, double p_star, uint64_t seed) {
    if (!(p_star > 0.0) || p_star > 1.0)
        throw InvalidArgument("p_star must lie in (0, 1]");
    const NodeId n = g.n_nodes();
    std::vector<NodeId> starts;
    if (p_star == 1.0) {
        starts.resize(n);
        for (NodeId v = 0; v < n; ++v) starts[v] = v;
        return starts;
    }
    int m = static_cast<int>(std::floor(p_star * n + 0.5));
    if (m < 1) m = 1;
    RngStream rng(seed, RngStream::stream_id("walk_starts"));
    starts.reserve(m);
    for (int i = 0; i < m; ++i) starts.push_back(static_cast<NodeId>(rng.uniform_int(n)));
    return starts;
}

namespace {

inline NodeId step_uniform(const Graph& g, NodeId cur, RngStream& rng) {
    const auto& nb = g.neighbors(cur);
    return nb[rng.uniform_int(nb.size())];
}

inline NodeId step_non_backtracking(const Graph& g, NodeId cur, NodeId prev, RngStream& rng) {
    const auto& nb = g.neighbors(cur);
    const size_t deg = nb.size();
    if (deg == 1) return nb[0];
    // Draw over neighbors excluding prev; skip past its sorted position.
    size_t idx = rng.uniform_int(deg - 1);
    size_t prev_pos = std::lower_bound(nb.begin(), nb.end(), prev) - nb.begin();
    if (idx >= prev_pos) ++idx;
    return nb[idx];
}

}  // namespace

WalkSet sample_walks_from(const Graph& g, WalkStrategy strategy,
                          const std::vector<NodeId>& starts, int ell, uint64_t seed) {
    if (starts.empty()) throw InvalidArgument("need at least one start node");
    if (ell < 1) throw InvalidArgument("walk length must be >= 1");
    for (NodeId s : starts) {
        if (s < 0 || s >= g.n_nodes()) throw InvalidArgument("start node out of range");
    }
    WalkSet ws;
    ws.m = static_cast<int>(starts.size());
    ws.ell = ell;
    ws.strategy = strategy;
    ws.seed = seed;
    ws.n_nodes = g.n_nodes();
    ws.nodes.resize(static_cast<size_t>(ws.m) * (ell + 1));
    for (int i = 0; i < ws.m; ++i) {
        RngStream rng(seed, RngStream::stream_id("walk", static_cast<uint64_t>(i)));
        NodeId* row = ws.nodes.data() + static_cast<size_t>(i) * (ell + 1);
        row[0] = starts[i];
        for (int t = 0; t < ell; ++t) {
            // The first step has no previous node to exclude.
            if (strategy == WalkStrategy::NonBacktracking && t > 0) {
                row[t + 1] = step_non_backtracking(g, row[t], row[t - 1], rng);
            } else {
                row[t + 1] = step_uniform(g, row[t], rng);
            }
        }
    }
    return ws;
}

WalkSet sample_walks(const Graph& g, WalkStrategy strategy, double p_star, int ell,
                     uint64_t seed) {
    return sample_walks_from(g, strategy, start_nodes(g, p_star, seed), ell, seed);
}

std::vector<NodeId> walklet(const WalkSet& ws, int walk_idx, int center_pos, int s) {
    if (s < 0 || s % 2 != 0) throw InvalidArgument("window size must be even and nonnegative");
    if (walk_idx < 0 || walk_idx >= ws.m) throw InvalidArgument("walk index out of range");
    int half = s / 2;
    if (center_pos < half || center_pos > ws.ell - half)
        throw InvalidArgument("walklet window out of bounds");
    const NodeId* row = ws.row(walk_idx);
    return std::vector<NodeId>(row + center_pos - half, row + center_pos + half + 1);
}

}  // namespace crawl
