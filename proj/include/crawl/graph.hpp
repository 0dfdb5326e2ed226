#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace crawl {

using NodeId = int32_t;
using EdgeId = int32_t;

// Row-major dense feature table, rows x cols. Empty when cols == 0.
struct FeatureTable {
    int64_t rows = 0;
    int64_t cols = 0;
    std::vector<double> values;

    double at(int64_t r, int64_t c) const { return values[r * cols + c]; }
    double* row(int64_t r) { return values.data() + r * cols; }
    const double* row(int64_t r) const { return values.data() + r * cols; }
    bool empty() const { return cols == 0; }
};

// Simple undirected graph with sorted adjacency lists. Immutable after
// construction; validation rejects self-loops, duplicate edges, isolated
// nodes and out-of-range endpoints.
class Graph {
public:
    Graph(NodeId n_nodes, std::vector<std::pair<NodeId, NodeId>> edges);
    Graph(NodeId n_nodes, std::vector<std::pair<NodeId, NodeId>> edges,
          FeatureTable node_features, FeatureTable edge_features,
          std::optional<double> label);

    NodeId n_nodes() const { return n_nodes_; }
    EdgeId n_edges() const { return static_cast<EdgeId>(edges_.size()); }

    // Edges in canonical (min,max) order, sorted.
    const std::vector<std::pair<NodeId, NodeId>>& edges() const { return edges_; }

    const std::vector<NodeId>& neighbors(NodeId v) const { return adj_[v]; }
    int degree(NodeId v) const { return static_cast<int>(adj_[v].size()); }

    // O(log deg) membership query.
    bool is_edge(NodeId u, NodeId v) const;

    // Index into edges()/edge_features() for an existing edge, -1 otherwise.
    EdgeId edge_id(NodeId u, NodeId v) const;

    const FeatureTable& node_features() const { return node_features_; }
    const FeatureTable& edge_features() const { return edge_features_; }
    bool has_node_features() const { return !node_features_.empty(); }
    bool has_edge_features() const { return !edge_features_.empty(); }
    std::optional<double> label() const { return label_; }

    void set_label(std::optional<double> y) { label_ = y; }

private:
    void build_adjacency();
    void validate() const;

    NodeId n_nodes_ = 0;
    std::vector<std::pair<NodeId, NodeId>> edges_;
    std::vector<std::vector<NodeId>> adj_;
    std::vector<std::vector<EdgeId>> adj_edge_ids_;
    FeatureTable node_features_;
    FeatureTable edge_features_;
    std::optional<double> label_;
};

enum class TaskKind { Classification, Regression };

struct Task {
    TaskKind kind = TaskKind::Classification;
    int num_classes = 0;  // classification only
};

// Graph collection with a per-graph fold assignment.
struct Dataset {
    Task task;
    std::vector<Graph> graphs;
    std::vector<int> folds;  // same length as graphs

    int num_folds() const;
    std::vector<int> fold_indices(int fold) const;
};

// Generators
Graph make_cycle(NodeId n);
Graph disjoint_union(const Graph& a, const Graph& b);

// Two endpoints joined by three internally disjoint paths. balanced=true
// gives lengths (n, n, n), balanced=false gives (n-1, n, n+1); the order is
// 3n-1 either way.
Graph make_three_paths(NodeId n, bool balanced);

// Cycle 0-1-...-(n-1)-0 plus skip chords {i, i+skip mod n}; 4-regular.
Graph make_csl(NodeId n_nodes, NodeId skip);

// The canonical skip set on 41 nodes used for the isomorphism-class
// classification task.
const std::vector<NodeId>& csl_skips();

// 150 graphs: 15 random relabelings of CSL(41, skip) for each of the ten
// skips, labeled by class, with 5 stratified folds (3 graphs per class per
// fold).
Dataset make_csl_dataset(uint64_t seed = 0xC51ull);

// Applies a node permutation; perm[v] is the new index of node v.
Graph relabel(const Graph& g, const std::vector<NodeId>& perm);

// Adds a constant 1.0 node feature when the graph has none. The model
// requires at least one input channel.
Graph with_constant_node_feature(const Graph& g);

}  // namespace crawl
