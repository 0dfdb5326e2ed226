#include "crawl/walk_features.hpp"

#include "crawl/error.hpp"
#include "crawl/parallel.hpp"

namespace crawl {

namespace {

// Writes the identity/adjacency bits for one walk row into out.
// Column layout: identity j = 1..s, then adjacency j = 1..s-1 where column j
// compares against the node j+1 steps back.
inline void structural_row(const Graph& g, const NodeId* walk, int i, int s,
                           const Encodings& enc, double* out) {
    int64_t col = 0;
    if (enc.identity) {
        for (int j = 1; j <= s; ++j)
            out[col++] = (i - j >= 0 && walk[i] == walk[i - j]) ? 1.0 : 0.0;
    }
    if (enc.adjacency) {
        for (int j = 1; j <= s - 1; ++j)
            out[col++] = (i - j >= 1 && g.is_edge(walk[i], walk[i - j - 1])) ? 1.0 : 0.0;
    }
}

}  // namespace

WalkFeatureTensor build_features(const Graph& g, const WalkSet& ws, const FeatureTable& node_emb,
                                 const FeatureTable& edge_emb, int s, const Encodings& enc) {
    if (s < 0 || s % 2 != 0)
        throw InvalidArgument("window size must be even and nonnegative");
    if (node_emb.rows != g.n_nodes())
        throw InvalidArgument("node embedding must cover every node");
    if (!edge_emb.empty() && edge_emb.rows != g.n_edges())
        throw InvalidArgument("edge embedding must cover every edge");
    if (ws.n_nodes != g.n_nodes())
        throw InvalidArgument("walk set does not belong to this graph");

    WalkFeatureTensor t;
    t.m = ws.m;
    t.rows = ws.row_len();
    t.d = node_emb.cols;
    t.d_edge = edge_emb.cols;
    t.s = s;
    t.enc = enc;
    const int64_t dx = t.d_x();
    t.data.assign(static_cast<int64_t>(t.m) * t.rows * dx, 0.0);

    for (int w = 0; w < ws.m; ++w) {
        const NodeId* walk = ws.row(w);
        for (int i = 0; i < t.rows; ++i) {
            double* out = t.data.data() + (static_cast<int64_t>(w) * t.rows + i) * dx;
            const double* nf = node_emb.row(walk[i]);
            std::copy(nf, nf + t.d, out);
            if (t.d_edge > 0 && i > 0) {
                const double* ef = edge_emb.row(g.edge_id(walk[i - 1], walk[i]));
                std::copy(ef, ef + t.d_edge, out + t.d);
            }
            structural_row(g, walk, i, s, enc, out + t.d + t.d_edge);
        }
    }
    return t;
}

std::vector<double> window_rows(const WalkFeatureTensor& t, int walk_idx, int center_pos) {
    if (walk_idx < 0 || walk_idx >= t.m) throw InvalidArgument("walk index out of range");
    const int half = t.s / 2;
    if (center_pos < half || center_pos > t.rows - 1 - half)
        throw InvalidArgument("window out of bounds");
    const int64_t dx = t.d_x();
    std::vector<double> out(static_cast<int64_t>(t.s + 1) * dx);
    for (int r = 0; r <= t.s; ++r) {
        const double* src = t.row(walk_idx, center_pos - half + r);
        std::copy(src, src + dx, out.data() + static_cast<int64_t>(r) * dx);
    }
    return out;
}

nn::TensorPtr structural_blocks(const Graph& g, const WalkSet& ws, int s, const Encodings& enc) {
    if (s < 0 || s % 2 != 0)
        throw InvalidArgument("window size must be even and nonnegative");
    const int64_t d_edge = g.has_edge_features() ? g.edge_features().cols : 0;
    const int64_t width = d_edge + identity_width(s, enc) + adjacency_width(s, enc);
    const int rows = ws.row_len();
    auto out = nn::make_tensor({ws.m, rows, width});
    double* od = out->v.data();
    parallel_chunks(ws.m, num_threads() * 4, [&](int, int64_t w0, int64_t w1) {
        for (int64_t w = w0; w < w1; ++w) {
            const NodeId* walk = ws.row(static_cast<int>(w));
            for (int i = 0; i < rows; ++i) {
                double* row = od + (w * rows + i) * width;
                if (d_edge > 0 && i > 0) {
                    const double* ef = g.edge_features().row(g.edge_id(walk[i - 1], walk[i]));
                    std::copy(ef, ef + d_edge, row);
                }
                structural_row(g, walk, i, s, enc, row + d_edge);
            }
        }
    });
    return out;
}

std::shared_ptr<const nn::RowGroups> node_occurrences(const WalkSet& ws, NodeId n_nodes) {
    auto groups = std::make_shared<nn::RowGroups>(n_nodes);
    const int rows = ws.row_len();
    for (int w = 0; w < ws.m; ++w) {
        const NodeId* walk = ws.row(w);
        for (int i = 0; i < rows; ++i)
            (*groups)[walk[i]].push_back(static_cast<int64_t>(w) * rows + i);
    }
    return groups;
}

nn::TensorPtr assemble_walk_tensor(nn::Tape* tape, const nn::TensorPtr& h,
                                   const nn::TensorPtr& const_cols, const WalkSet& ws,
                                   std::shared_ptr<const nn::RowGroups> occurrences) {
    if (h->shape.size() != 2) throw InvalidArgument("assemble: h must be [N,d]");
    const int64_t n_nodes = h->dim(0), d = h->dim(1);
    if (n_nodes != ws.n_nodes) throw InvalidArgument("assemble: node count mismatch");
    const int64_t m = const_cols->dim(0), rows = const_cols->dim(1), rest = const_cols->dim(2);
    if (m != ws.m || rows != ws.row_len())
        throw InvalidArgument("assemble: walk shape mismatch");

    const int64_t dx = d + rest;
    auto x = nn::make_tensor({m, rows, dx});
    const double* hd = h->v.data();
    const double* cd = const_cols->v.data();
    double* xd = x->v.data();
    parallel_chunks(m, num_threads() * 4, [&](int, int64_t w0, int64_t w1) {
        for (int64_t w = w0; w < w1; ++w) {
            const NodeId* walk = ws.row(static_cast<int>(w));
            for (int64_t i = 0; i < rows; ++i) {
                double* row = xd + (w * rows + i) * dx;
                const double* hr = hd + static_cast<int64_t>(walk[i]) * d;
                std::copy(hr, hr + d, row);
                const double* cr = cd + (w * rows + i) * rest;
                std::copy(cr, cr + rest, row + d);
            }
        }
    });

    if (tape) {
        h->ensure_grad();
        x->ensure_grad();
        tape->record([h, x, occurrences, d, dx, n_nodes] {
            const double* dxd = x->g.data();
            double* dhd = h->g.data();
            parallel_for(n_nodes, [&](int64_t v) {
                double* dhr = dhd + v * d;
                for (int64_t slot : (*occurrences)[v]) {
                    const double* src = dxd + slot * dx;
                    for (int64_t c = 0; c < d; ++c) dhr[c] += src[c];
                }
            });
        });
    }
    return x;
}

}  // namespace crawl
