#pragma once

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "crawl/graph.hpp"
#include "crawl/nn.hpp"
#include "crawl/walk_features.hpp"
#include "crawl/walks.hpp"

namespace crawl {

enum class GlobalPooling { Mean, Sum };
enum class ReadoutKind { Mlp, Linear };

struct ModelConfig {
    int num_layers = 3;       // L
    int64_t hidden = 48;      // d, node embedding width
    int64_t conv_channels = 48;  // d', conv stack width
    int window = 8;           // s, even; the conv kernel size is s+1
    GlobalPooling pooling = GlobalPooling::Mean;
    ReadoutKind readout = ReadoutKind::Mlp;
    double dropout = 0.0;
    bool virtual_node = false;
    Encodings encodings;
    WalkStrategy strategy = WalkStrategy::NonBacktracking;
    int train_walk_len = 50;   // ell during training
    int eval_walk_len = 150;   // ell during evaluation
    double p_star = 1.0;

    // Data-derived widths.
    int64_t in_dim = 1;    // node feature width fed to the input projection
    int64_t edge_dim = 0;  // edge feature width
    int64_t out_dim = 1;   // classes, or 1 for regression

    int kernel() const { return window + 1; }
    int64_t feature_width() const {
        return hidden + edge_dim + identity_width(window, encodings) +
               adjacency_width(window, encodings);
    }
    void validate() const;
};

std::string to_json_text(const ModelConfig& cfg);
ModelConfig model_config_from_json_text(const std::string& text);

// Exact trainable parameter count of the configured model.
int64_t count_parameters(const ModelConfig& cfg);

// Graphs batched by concatenation with node-index offsets. Walks never
// cross graph boundaries because there are no cross edges.
struct GraphBatch {
    Graph merged;
    std::vector<int> node2graph;
    std::shared_ptr<nn::RowGroups> graph_groups;  // node ids per graph
    std::vector<int> class_labels;
    std::vector<double> real_targets;
    int n_graphs = 0;

    explicit GraphBatch(Graph g) : merged(std::move(g)) {}
};

GraphBatch make_batch(const std::vector<const Graph*>& graphs);

// Flattened CNN-output row indices per node, restricted to walklet centers
// strictly inside (s/2, ell - s/2). The first and last full window rows
// never contribute.
std::shared_ptr<const nn::RowGroups> center_groups(const WalkSet& ws, int s, NodeId n_nodes);

// Mean of CNN rows at each node's centers; nodes with no center get zero.
// cnn_out: [m, rows-s, c] -> [n_nodes, c].
nn::TensorPtr pool_centers(nn::Tape* tape, const nn::TensorPtr& cnn_out, const WalkSet& ws,
                           int s, NodeId n_nodes);

// One global-state update: hvn_new = mlp(hvn_prev + sum of h rows per graph),
// then hvn_new is broadcast-added to every node of its graph.
std::pair<nn::TensorPtr, nn::TensorPtr> virtual_node_update(
    nn::Tape* tape, const nn::TensorPtr& h, const nn::TensorPtr& hvn_prev, const nn::Mlp& mlp,
    const std::shared_ptr<const nn::RowGroups>& graph_groups, const std::vector<int>& node2graph);

struct CrawlLayer {
    nn::ConvModule conv;
    nn::Mlp update;             // d' -> 2d -> d
    std::optional<nn::Mlp> vn;  // d -> d -> d

    CrawlLayer(const ModelConfig& cfg, bool with_vn, RngStream& rng);
};

class CrawlNet {
public:
    CrawlNet(const ModelConfig& cfg, uint64_t init_seed);

    const ModelConfig& config() const { return cfg_; }

    nn::ParamMap params();
    std::vector<std::pair<std::string, std::vector<double>*>> state_buffers();

    // Exact deep copy: parameters and batch-norm state at full precision.
    CrawlNet clone();

    // Logits [B, out_dim] for a batch. The walk set must cover the merged
    // graph; dropout_rng is consumed only in training mode.
    nn::TensorPtr forward(nn::Tape* tape, const GraphBatch& batch, const WalkSet& ws,
                          bool training, RngStream dropout_rng);

    // Single-graph convenience: samples walks at eval length and returns the
    // output row. Inference mode.
    std::vector<double> predict(const Graph& g, uint64_t walk_seed);

    void save_checkpoint(const std::string& path) const;
    static CrawlNet load_checkpoint(const std::string& path);

private:
    ModelConfig cfg_;
    nn::Linear input_proj_;
    std::vector<CrawlLayer> layers_;
    nn::BatchNorm final_bn_;
    nn::Mlp readout_;
};

// FNV-1a over the parameter bytes; used to assert evaluation never mutates
// a model.
uint64_t params_fingerprint(CrawlNet& net);

}  // namespace crawl
