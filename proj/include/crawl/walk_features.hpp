#pragma once

#include <memory>
#include <vector>

#include "crawl/graph.hpp"
#include "crawl/tensor.hpp"
#include "crawl/walks.hpp"

namespace crawl {

// Structural encoding toggles. Disabling a block removes its columns
// entirely rather than zero-filling them.
struct Encodings {
    bool identity = true;
    bool adjacency = true;
};

// Column widths for the structural blocks at window size s.
inline int64_t identity_width(int s, const Encodings& e) { return e.identity ? s : 0; }
inline int64_t adjacency_width(int s, const Encodings& e) {
    return e.adjacency ? std::max(s - 1, 0) : 0;
}

// Per-position feature rows for every walk: node embedding, incoming-edge
// embedding (zero on row 0), identity bits against the s predecessors and
// adjacency bits against predecessors two to s steps back. A walk with E
// edges yields E+1 rows.
struct WalkFeatureTensor {
    int m = 0;
    int rows = 0;  // ell + 1
    int64_t d = 0;
    int64_t d_edge = 0;
    int s = 0;
    Encodings enc;
    std::vector<double> data;  // m x rows x d_x

    int64_t d_x() const { return d + d_edge + identity_width(s, enc) + adjacency_width(s, enc); }
    const double* row(int walk, int pos) const {
        return data.data() + (static_cast<int64_t>(walk) * rows + pos) * d_x();
    }
};

// node_emb must cover all nodes (rows == |V|); edge_emb all edges or be
// empty. s must be even (the pooling step needs an exact walklet center).
WalkFeatureTensor build_features(const Graph& g, const WalkSet& ws, const FeatureTable& node_emb,
                                 const FeatureTable& edge_emb, int s, const Encodings& enc);

// The (s+1) x d_x block of rows feeding one CNN output position.
std::vector<double> window_rows(const WalkFeatureTensor& t, int walk_idx, int center_pos);

// ---- differentiable path used by the model --------------------------------

// Constant columns of the walk feature tensor: edge block plus structural
// bits. Shape [m, rows, d_edge + identity_width + adjacency_width]. These do
// not depend on the trainable node embedding, so they are built once per
// walk set and reused by every layer.
nn::TensorPtr structural_blocks(const Graph& g, const WalkSet& ws, int s, const Encodings& enc);

// Flattened row indices (walk * rows + pos) per node; group v lists each
// occurrence of v in the walks.
std::shared_ptr<const nn::RowGroups> node_occurrences(const WalkSet& ws, NodeId n_nodes);

// X[i,r] = (h[walk node] | const_cols[i,r]). Gradient flows into h through
// the gather; occurrences must come from node_occurrences(ws, h rows).
nn::TensorPtr assemble_walk_tensor(nn::Tape* tape, const nn::TensorPtr& h,
                                   const nn::TensorPtr& const_cols, const WalkSet& ws,
                                   std::shared_ptr<const nn::RowGroups> occurrences);

}  // namespace crawl
