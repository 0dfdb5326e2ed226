#include "crawl/graph.hpp"

#include <algorithm>
#include <numeric>
#include <set>

#include "crawl/error.hpp"
#include "crawl/rng.hpp"

namespace crawl {

Graph::Graph(NodeId n_nodes, std::vector<std::pair<NodeId, NodeId>> edges)
    : Graph(n_nodes, std::move(edges), FeatureTable{}, FeatureTable{}, std::nullopt) {}

Graph::Graph(NodeId n_nodes, std::vector<std::pair<NodeId, NodeId>> edges,
             FeatureTable node_features, FeatureTable edge_features,
             std::optional<double> label)
    : n_nodes_(n_nodes),
      edges_(std::move(edges)),
      node_features_(std::move(node_features)),
      edge_features_(std::move(edge_features)),
      label_(label) {
    for (auto& [u, v] : edges_) {
        if (u > v) std::swap(u, v);
    }
    std::sort(edges_.begin(), edges_.end());
    validate();
    build_adjacency();
}

void Graph::validate() const {
    if (n_nodes_ <= 0) throw InvalidArgument("graph must have at least one node");
    for (size_t i = 0; i < edges_.size(); ++i) {
        auto [u, v] = edges_[i];
        if (u < 0 || v < 0 || u >= n_nodes_ || v >= n_nodes_)
            throw InvalidArgument("edge endpoint out of range: (" + std::to_string(u) + "," +
                                  std::to_string(v) + ")");
        if (u == v) throw InvalidArgument("self-loop at node " + std::to_string(u));
        if (i > 0 && edges_[i] == edges_[i - 1])
            throw InvalidArgument("duplicate edge (" + std::to_string(u) + "," +
                                  std::to_string(v) + ")");
    }
    std::vector<int> deg(n_nodes_, 0);
    for (auto [u, v] : edges_) {
        ++deg[u];
        ++deg[v];
    }
    for (NodeId v = 0; v < n_nodes_; ++v) {
        if (deg[v] == 0) throw InvalidArgument("isolated node " + std::to_string(v));
    }
    if (!node_features_.empty() && node_features_.rows != n_nodes_)
        throw InvalidArgument("node feature row count does not match node count");
    if (!edge_features_.empty() && edge_features_.rows != static_cast<int64_t>(edges_.size()))
        throw InvalidArgument("edge feature row count does not match edge count");
}

void Graph::build_adjacency() {
    adj_.assign(n_nodes_, {});
    adj_edge_ids_.assign(n_nodes_, {});
    for (EdgeId e = 0; e < static_cast<EdgeId>(edges_.size()); ++e) {
        auto [u, v] = edges_[e];
        adj_[u].push_back(v);
        adj_[v].push_back(u);
        adj_edge_ids_[u].push_back(e);
        adj_edge_ids_[v].push_back(e);
    }
    for (NodeId v = 0; v < n_nodes_; ++v) {
        std::vector<size_t> order(adj_[v].size());
        std::iota(order.begin(), order.end(), size_t{0});
        std::sort(order.begin(), order.end(),
                  [&](size_t a, size_t b) { return adj_[v][a] < adj_[v][b]; });
        std::vector<NodeId> nb(adj_[v].size());
        std::vector<EdgeId> ids(adj_[v].size());
        for (size_t i = 0; i < order.size(); ++i) {
            nb[i] = adj_[v][order[i]];
            ids[i] = adj_edge_ids_[v][order[i]];
        }
        adj_[v] = std::move(nb);
        adj_edge_ids_[v] = std::move(ids);
    }
}

bool Graph::is_edge(NodeId u, NodeId v) const {
    if (u < 0 || v < 0 || u >= n_nodes_ || v >= n_nodes_) return false;
    const auto& nb = adj_[u];
    return std::binary_search(nb.begin(), nb.end(), v);
}

EdgeId Graph::edge_id(NodeId u, NodeId v) const {
    if (u < 0 || v < 0 || u >= n_nodes_ || v >= n_nodes_) return -1;
    const auto& nb = adj_[u];
    auto it = std::lower_bound(nb.begin(), nb.end(), v);
    if (it == nb.end() || *it != v) return -1;
    return adj_edge_ids_[u][it - nb.begin()];
}

int Dataset::num_folds() const {
    int k = 0;
    for (int f : folds) k = std::max(k, f + 1);
    return k;
}

std::vector<int> Dataset::fold_indices(int fold) const {
    std::vector<int> out;
    for (size_t i = 0; i < folds.size(); ++i) {
        if (folds[i] == fold) out.push_back(static_cast<int>(i));
    }
    return out;
}

Graph make_cycle(NodeId n) {
    if (n < 3) throw InvalidArgument("cycle needs n >= 3");
    std::vector<std::pair<NodeId, NodeId>> edges;
    edges.reserve(n);
    for (NodeId i = 0; i < n; ++i) edges.emplace_back(i, (i + 1) % n);
    return Graph(n, std::move(edges));
}

Graph disjoint_union(const Graph& a, const Graph& b) {
    std::vector<std::pair<NodeId, NodeId>> edges = a.edges();
    for (auto [u, v] : b.edges()) edges.emplace_back(u + a.n_nodes(), v + a.n_nodes());

    FeatureTable nf, ef;
    if (a.has_node_features() && b.has_node_features() &&
        a.node_features().cols == b.node_features().cols) {
        nf.cols = a.node_features().cols;
        nf.rows = a.n_nodes() + b.n_nodes();
        nf.values = a.node_features().values;
        nf.values.insert(nf.values.end(), b.node_features().values.begin(),
                         b.node_features().values.end());
    }
    if (a.has_edge_features() && b.has_edge_features() &&
        a.edge_features().cols == b.edge_features().cols) {
        // Edge ids follow canonical edge order, so rebuild rows after the
        // merged graph re-sorts them.
        Graph merged(a.n_nodes() + b.n_nodes(), edges);
        ef.cols = a.edge_features().cols;
        ef.rows = merged.n_edges();
        ef.values.assign(ef.rows * ef.cols, 0.0);
        for (EdgeId e = 0; e < merged.n_edges(); ++e) {
            auto [u, v] = merged.edges()[e];
            const double* src;
            if (v < a.n_nodes()) {
                src = a.edge_features().row(a.edge_id(u, v));
            } else {
                src = b.edge_features().row(b.edge_id(u - a.n_nodes(), v - a.n_nodes()));
            }
            std::copy(src, src + ef.cols, ef.values.data() + e * ef.cols);
        }
    }
    return Graph(a.n_nodes() + b.n_nodes(), std::move(edges), std::move(nf), std::move(ef),
                 std::nullopt);
}

Graph make_three_paths(NodeId n, bool balanced) {
    if (n < 2) throw InvalidArgument("three-path gadget needs n >= 2");
    const NodeId x = 0, y = 1;
    std::vector<std::pair<NodeId, NodeId>> edges;
    NodeId next = 2;
    auto add_path = [&](NodeId len) {
        // len edges between x and y via len-1 fresh internal nodes.
        NodeId prev = x;
        for (NodeId i = 0; i + 1 < len; ++i) {
            edges.emplace_back(prev, next);
            prev = next++;
        }
        edges.emplace_back(prev, y);
    };
    if (balanced) {
        add_path(n);
        add_path(n);
        add_path(n);
    } else {
        add_path(n - 1);
        add_path(n);
        add_path(n + 1);
    }
    return Graph(next, std::move(edges));
}

Graph make_csl(NodeId n_nodes, NodeId skip) {
    if (n_nodes < 5) throw InvalidArgument("skip-link graph needs n >= 5");
    if (skip < 2 || 2 * skip >= n_nodes)
        throw InvalidArgument("skip must satisfy 2 <= skip < n/2");
    std::vector<std::pair<NodeId, NodeId>> edges;
    edges.reserve(2 * n_nodes);
    for (NodeId i = 0; i < n_nodes; ++i) {
        edges.emplace_back(i, (i + 1) % n_nodes);
        edges.emplace_back(i, (i + skip) % n_nodes);
    }
    return Graph(n_nodes, std::move(edges));
}

const std::vector<NodeId>& csl_skips() {
    static const std::vector<NodeId> skips = {2, 3, 4, 5, 6, 9, 11, 12, 13, 16};
    return skips;
}

Graph relabel(const Graph& g, const std::vector<NodeId>& perm) {
    if (static_cast<NodeId>(perm.size()) != g.n_nodes())
        throw InvalidArgument("permutation size does not match node count");
    std::vector<bool> seen(perm.size(), false);
    for (NodeId p : perm) {
        if (p < 0 || p >= g.n_nodes() || seen[p])
            throw InvalidArgument("not a permutation");
        seen[p] = true;
    }
    std::vector<std::pair<NodeId, NodeId>> edges;
    edges.reserve(g.edges().size());
    for (auto [u, v] : g.edges()) edges.emplace_back(perm[u], perm[v]);

    FeatureTable nf;
    if (g.has_node_features()) {
        nf.rows = g.node_features().rows;
        nf.cols = g.node_features().cols;
        nf.values.assign(nf.rows * nf.cols, 0.0);
        for (NodeId v = 0; v < g.n_nodes(); ++v) {
            const double* src = g.node_features().row(v);
            std::copy(src, src + nf.cols, nf.values.data() + perm[v] * nf.cols);
        }
    }
    FeatureTable ef;
    if (g.has_edge_features()) {
        Graph shape(g.n_nodes(), edges);
        ef.rows = g.n_edges();
        ef.cols = g.edge_features().cols;
        ef.values.assign(ef.rows * ef.cols, 0.0);
        for (EdgeId e = 0; e < g.n_edges(); ++e) {
            auto [u, v] = g.edges()[e];
            EdgeId ne = shape.edge_id(perm[u], perm[v]);
            const double* src = g.edge_features().row(e);
            std::copy(src, src + ef.cols, ef.values.data() + ne * ef.cols);
        }
    }
    return Graph(g.n_nodes(), std::move(edges), std::move(nf), std::move(ef), g.label());
}

Graph with_constant_node_feature(const Graph& g) {
    if (g.has_node_features()) return g;
    FeatureTable nf;
    nf.rows = g.n_nodes();
    nf.cols = 1;
    nf.values.assign(g.n_nodes(), 1.0);
    return Graph(g.n_nodes(), g.edges(), std::move(nf), g.edge_features(), g.label());
}

Dataset make_csl_dataset(uint64_t seed) {
    const NodeId n = 41;
    const int copies = 15;
    const int num_folds = 5;
    const auto& skips = csl_skips();

    Dataset ds;
    ds.task = Task{TaskKind::Classification, static_cast<int>(skips.size())};
    for (size_t cls = 0; cls < skips.size(); ++cls) {
        Graph canonical = make_csl(n, skips[cls]);
        for (int c = 0; c < copies; ++c) {
            RngStream rng(seed, RngStream::stream_id("csl_relabel", cls, c));
            std::vector<NodeId> perm(n);
            std::iota(perm.begin(), perm.end(), 0);
            for (NodeId i = n - 1; i > 0; --i) {
                NodeId j = static_cast<NodeId>(rng.uniform_int(i + 1));
                std::swap(perm[i], perm[j]);
            }
            Graph g = relabel(canonical, perm);
            g.set_label(static_cast<double>(cls));
            ds.graphs.push_back(std::move(g));
        }
    }
    // Stratified folds: shuffle each class's 15 copies, then deal 3 per fold.
    ds.folds.assign(ds.graphs.size(), 0);
    for (size_t cls = 0; cls < skips.size(); ++cls) {
        RngStream rng(seed, RngStream::stream_id("csl_folds", cls));
        std::vector<int> order(copies);
        std::iota(order.begin(), order.end(), 0);
        for (int i = copies - 1; i > 0; --i) {
            int j = static_cast<int>(rng.uniform_int(i + 1));
            std::swap(order[i], order[j]);
        }
        for (int c = 0; c < copies; ++c) {
            ds.folds[cls * copies + order[c]] = c % num_folds;
        }
    }
    return ds;
}

}  // namespace crawl
