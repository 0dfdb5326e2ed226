#include "crawl/model.hpp"

#include <cstring>
#include <fstream>

#include <json.hpp>

#include "crawl/error.hpp"

namespace crawl {

using nlohmann::json;
using nn::TensorPtr;

void ModelConfig::validate() const {
    if (num_layers < 1) throw InvalidArgument("need at least one layer");
    if (hidden < 1 || conv_channels < 1) throw InvalidArgument("widths must be positive");
    if (window < 0 || window % 2 != 0) throw InvalidArgument("window size s must be even");
    if (dropout < 0.0 || dropout >= 1.0) throw InvalidArgument("dropout must lie in [0,1)");
    if (train_walk_len < kernel() || eval_walk_len < kernel())
        throw InvalidArgument("walk length must be at least s+1");
    if (!(p_star > 0.0) || p_star > 1.0) throw InvalidArgument("p_star must lie in (0,1]");
    if (in_dim < 1) throw InvalidArgument("in_dim must be at least 1");
    if (out_dim < 1) throw InvalidArgument("out_dim must be at least 1");
}

std::string to_json_text(const ModelConfig& cfg) {
    json j;
    j["L"] = cfg.num_layers;
    j["d"] = cfg.hidden;
    j["d_conv"] = cfg.conv_channels;
    j["s"] = cfg.window;
    j["pooling"] = cfg.pooling == GlobalPooling::Mean ? "mean" : "sum";
    j["readout"] = cfg.readout == ReadoutKind::Mlp ? "mlp" : "linear";
    j["dropout"] = cfg.dropout;
    j["vn"] = cfg.virtual_node;
    j["encodings"] = {{"identity", cfg.encodings.identity},
                      {"adjacency", cfg.encodings.adjacency}};
    j["strategy"] = to_string(cfg.strategy);
    j["ell_train"] = cfg.train_walk_len;
    j["ell_eval"] = cfg.eval_walk_len;
    j["p_star"] = cfg.p_star;
    j["in_dim"] = cfg.in_dim;
    j["edge_dim"] = cfg.edge_dim;
    j["out_dim"] = cfg.out_dim;
    return j.dump();
}

ModelConfig model_config_from_json_text(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::parse_error& e) {
        throw InvalidArgument(std::string("config parse error: ") + e.what());
    }
    ModelConfig cfg;
    try {
        if (j.contains("L")) cfg.num_layers = j["L"].get<int>();
        if (j.contains("d")) cfg.hidden = j["d"].get<int64_t>();
        cfg.conv_channels = j.contains("d_conv") ? j["d_conv"].get<int64_t>() : cfg.hidden;
        if (j.contains("s")) cfg.window = j["s"].get<int>();
        if (j.contains("pooling")) {
            std::string p = j["pooling"].get<std::string>();
            if (p == "mean") cfg.pooling = GlobalPooling::Mean;
            else if (p == "sum") cfg.pooling = GlobalPooling::Sum;
            else throw InvalidArgument("unknown pooling: " + p);
        }
        if (j.contains("readout")) {
            std::string r = j["readout"].get<std::string>();
            if (r == "mlp") cfg.readout = ReadoutKind::Mlp;
            else if (r == "linear") cfg.readout = ReadoutKind::Linear;
            else throw InvalidArgument("unknown readout: " + r);
        }
        if (j.contains("dropout")) cfg.dropout = j["dropout"].get<double>();
        if (j.contains("vn")) cfg.virtual_node = j["vn"].get<bool>();
        if (j.contains("encodings")) {
            cfg.encodings.identity = j["encodings"].value("identity", true);
            cfg.encodings.adjacency = j["encodings"].value("adjacency", true);
        }
        if (j.contains("strategy"))
            cfg.strategy = walk_strategy_from_string(j["strategy"].get<std::string>());
        if (j.contains("ell_train")) cfg.train_walk_len = j["ell_train"].get<int>();
        if (j.contains("ell_eval")) cfg.eval_walk_len = j["ell_eval"].get<int>();
        if (j.contains("p_star")) cfg.p_star = j["p_star"].get<double>();
        if (j.contains("in_dim")) cfg.in_dim = j["in_dim"].get<int64_t>();
        if (j.contains("edge_dim")) cfg.edge_dim = j["edge_dim"].get<int64_t>();
        if (j.contains("out_dim")) cfg.out_dim = j["out_dim"].get<int64_t>();
    } catch (const json::exception& e) {
        throw InvalidArgument(std::string("config schema error: ") + e.what());
    }
    cfg.validate();
    return cfg;
}

int64_t count_parameters(const ModelConfig& cfg) {
    const int64_t d = cfg.hidden, c = cfg.conv_channels, k = cfg.kernel();
    const int64_t dx = cfg.feature_width();
    int64_t total = cfg.in_dim * d + d;  // input projection
    const int64_t per_layer = (dx * c + c * k + c * c + 2 * c)    // conv module + bn affine
                              + (c * 2 * d + 2 * d + 2 * d * d + d);  // update MLP
    total += per_layer * cfg.num_layers;
    if (cfg.virtual_node && cfg.num_layers > 1)
        total += (cfg.num_layers - 1) * (2 * d * d + 2 * d);
    total += 2 * d;  // final bn affine
    if (cfg.readout == ReadoutKind::Mlp)
        total += d * d + d + d * cfg.out_dim + cfg.out_dim;
    else
        total += d * cfg.out_dim + cfg.out_dim;
    return total;
}

GraphBatch make_batch(const std::vector<const Graph*>& graphs) {
    if (graphs.empty()) throw InvalidArgument("empty batch");
    std::vector<Graph> prepared;
    prepared.reserve(graphs.size());
    for (const Graph* g : graphs) prepared.push_back(with_constant_node_feature(*g));

    int64_t d_v = prepared[0].node_features().cols;
    int64_t d_e = prepared[0].has_edge_features() ? prepared[0].edge_features().cols : 0;
    NodeId total_nodes = 0;
    EdgeId total_edges = 0;
    for (const auto& g : prepared) {
        if (g.node_features().cols != d_v)
            throw InvalidArgument("inconsistent node feature widths in batch");
        int64_t ge = g.has_edge_features() ? g.edge_features().cols : 0;
        if (ge != d_e) throw InvalidArgument("inconsistent edge feature widths in batch");
        total_nodes += g.n_nodes();
        total_edges += g.n_edges();
    }

    std::vector<std::pair<NodeId, NodeId>> edges;
    edges.reserve(total_edges);
    FeatureTable nf;
    nf.rows = total_nodes;
    nf.cols = d_v;
    nf.values.reserve(total_nodes * d_v);
    std::vector<int> node2graph;
    auto graph_groups = std::make_shared<nn::RowGroups>(prepared.size());
    std::vector<int> class_labels;
    std::vector<double> real_targets;
    NodeId offset = 0;
    for (size_t gi = 0; gi < prepared.size(); ++gi) {
        const Graph& g = prepared[gi];
        for (auto [u, v] : g.edges()) edges.emplace_back(u + offset, v + offset);
        nf.values.insert(nf.values.end(), g.node_features().values.begin(),
                         g.node_features().values.end());
        for (NodeId v = 0; v < g.n_nodes(); ++v) {
            node2graph.push_back(static_cast<int>(gi));
            (*graph_groups)[gi].push_back(offset + v);
        }
        if (auto y = g.label()) {
            class_labels.push_back(static_cast<int>(*y));
            real_targets.push_back(*y);
        }
        offset += g.n_nodes();
    }

    FeatureTable ef;
    if (d_e > 0) {
        // Merged edge ids follow the canonical global order; remap rows.
        Graph shape(total_nodes, edges);
        ef.rows = shape.n_edges();
        ef.cols = d_e;
        ef.values.assign(ef.rows * d_e, 0.0);
        NodeId off = 0;
        for (const auto& g : prepared) {
            for (EdgeId e = 0; e < g.n_edges(); ++e) {
                auto [u, v] = g.edges()[e];
                EdgeId ne = shape.edge_id(u + off, v + off);
                const double* src = g.edge_features().row(e);
                std::copy(src, src + d_e, ef.values.data() + static_cast<int64_t>(ne) * d_e);
            }
            off += g.n_nodes();
        }
    }
    GraphBatch b(
        Graph(total_nodes, std::move(edges), std::move(nf), std::move(ef), std::nullopt));
    b.n_graphs = static_cast<int>(prepared.size());
    b.node2graph = std::move(node2graph);
    b.graph_groups = std::move(graph_groups);
    b.class_labels = std::move(class_labels);
    b.real_targets = std::move(real_targets);
    return b;
}

std::shared_ptr<const nn::RowGroups> center_groups(const WalkSet& ws, int s, NodeId n_nodes) {
    if (s < 0 || s % 2 != 0) throw InvalidArgument("window size must be even");
    auto groups = std::make_shared<nn::RowGroups>(n_nodes);
    const int ell = ws.ell;
    const int out_rows = ws.row_len() - s;  // CNN output rows per walk
    const int half = s / 2;
    // Walklet centers j with s/2 < j < ell - s/2, both strict; the CNN row
    // for center j is j - s/2.
    const int j_lo = half + 1;
    const int j_hi = ell - half - 1;
    for (int w = 0; w < ws.m; ++w) {
        const NodeId* walk = ws.row(w);
        for (int j = j_lo; j <= j_hi; ++j) {
            (*groups)[walk[j]].push_back(static_cast<int64_t>(w) * out_rows + (j - half));
        }
    }
    return groups;
}

nn::TensorPtr pool_centers(nn::Tape* tape, const nn::TensorPtr& cnn_out, const WalkSet& ws,
                           int s, NodeId n_nodes) {
    if (cnn_out->shape.size() != 3 || cnn_out->dim(0) != ws.m ||
        cnn_out->dim(1) != ws.row_len() - s)
        throw InvalidArgument("pool_centers: cnn output shape mismatch");
    return nn::group_reduce(tape, cnn_out, center_groups(ws, s, n_nodes), /*mean=*/true);
}

std::pair<TensorPtr, TensorPtr> virtual_node_update(
    nn::Tape* tape, const TensorPtr& h, const TensorPtr& hvn_prev, const nn::Mlp& mlp,
    const std::shared_ptr<const nn::RowGroups>& graph_groups,
    const std::vector<int>& node2graph) {
    TensorPtr sums = nn::group_reduce(tape, h, graph_groups, /*mean=*/false);
    TensorPtr carry = nn::add(tape, sums, hvn_prev);
    TensorPtr hvn = mlp.forward(tape, carry);
    TensorPtr h_new = nn::group_broadcast_add(tape, h, hvn, node2graph);
    return {h_new, hvn};
}

CrawlLayer::CrawlLayer(const ModelConfig& cfg, bool with_vn, RngStream& rng)
    : conv(cfg.feature_width(), cfg.conv_channels, cfg.kernel(), rng),
      update({cfg.conv_channels, 2 * cfg.hidden, cfg.hidden}, rng) {
    if (with_vn) vn = nn::Mlp({cfg.hidden, cfg.hidden, cfg.hidden}, rng);
}

CrawlNet::CrawlNet(const ModelConfig& cfg, uint64_t init_seed) : cfg_(cfg), final_bn_(cfg.hidden) {
    cfg_.validate();
    RngStream rng(init_seed, RngStream::stream_id("init"));
    input_proj_ = nn::Linear(cfg_.in_dim, cfg_.hidden, rng);
    for (int t = 0; t < cfg_.num_layers; ++t) {
        bool with_vn = cfg_.virtual_node && t + 1 < cfg_.num_layers;
        layers_.emplace_back(cfg_, with_vn, rng);
    }
    if (cfg_.readout == ReadoutKind::Mlp) {
        readout_ = nn::Mlp({cfg_.hidden, cfg_.hidden, cfg_.out_dim}, rng);
    } else {
        readout_ = nn::Mlp({cfg_.hidden, cfg_.out_dim}, rng);
    }
}

nn::ParamMap CrawlNet::params() {
    nn::ParamMap pm;
    input_proj_.collect(pm, "input");
    for (size_t t = 0; t < layers_.size(); ++t) {
        std::string p = "layer" + std::to_string(t);
        layers_[t].conv.collect(pm, p + ".conv");
        layers_[t].update.collect(pm, p + ".update");
        if (layers_[t].vn) layers_[t].vn->collect(pm, p + ".vn");
    }
    final_bn_.collect(pm, "final_bn");
    readout_.collect(pm, "readout");
    return pm;
}

std::vector<std::pair<std::string, std::vector<double>*>> CrawlNet::state_buffers() {
    std::vector<std::pair<std::string, std::vector<double>*>> out;
    for (size_t t = 0; t < layers_.size(); ++t) {
        std::string p = "layer" + std::to_string(t) + ".conv.bn";
        out.emplace_back(p + ".running_mean", &layers_[t].conv.bn.running_mean);
        out.emplace_back(p + ".running_var", &layers_[t].conv.bn.running_var);
    }
    out.emplace_back("final_bn.running_mean", &final_bn_.running_mean);
    out.emplace_back("final_bn.running_var", &final_bn_.running_var);
    return out;
}

CrawlNet CrawlNet::clone() {
    CrawlNet copy(cfg_, 0);
    nn::ParamMap src = params();
    nn::ParamMap dst = copy.params();
    for (size_t i = 0; i < src.items.size(); ++i) dst.items[i].second->v = src.items[i].second->v;
    auto sbuf = state_buffers();
    auto dbuf = copy.state_buffers();
    for (size_t i = 0; i < sbuf.size(); ++i) *dbuf[i].second = *sbuf[i].second;
    return copy;
}

TensorPtr CrawlNet::forward(nn::Tape* tape, const GraphBatch& batch, const WalkSet& ws,
                            bool training, RngStream dropout_rng) {
    const Graph& g = batch.merged;
    if (ws.row_len() < cfg_.kernel())
        throw InvalidArgument("walks must have at least s+1 rows");
    if (g.node_features().cols != cfg_.in_dim)
        throw InvalidArgument("node feature width does not match model in_dim");

    auto const_cols = structural_blocks(g, ws, cfg_.window, cfg_.encodings);
    auto occurrences = node_occurrences(ws, g.n_nodes());
    auto centers = center_groups(ws, cfg_.window, g.n_nodes());

    auto x0 = nn::make_tensor({g.n_nodes(), cfg_.in_dim}, g.node_features().values);
    TensorPtr h = input_proj_.forward(tape, x0);

    TensorPtr hvn = nn::make_tensor({batch.n_graphs, cfg_.hidden});
    for (size_t t = 0; t < layers_.size(); ++t) {
        CrawlLayer& layer = layers_[t];
        TensorPtr x = assemble_walk_tensor(tape, h, const_cols, ws, occurrences);
        TensorPtr cnn = layer.conv.forward(tape, x, training);
        TensorPtr pooled = nn::group_reduce(tape, cnn, centers, /*mean=*/true);
        TensorPtr upd = layer.update.forward(tape, pooled);
        h = nn::add(tape, h, upd);
        if (layer.vn) {
            auto [h_new, hvn_new] =
                virtual_node_update(tape, h, hvn, *layer.vn, batch.graph_groups, batch.node2graph);
            h = h_new;
            hvn = hvn_new;
        }
    }

    TensorPtr hb = final_bn_.forward(tape, h, training);
    hb = nn::relu(tape, hb);
    TensorPtr pooled = nn::group_reduce(tape, hb, batch.graph_groups,
                                        cfg_.pooling == GlobalPooling::Mean);
    pooled = nn::dropout(tape, pooled, cfg_.dropout, training, dropout_rng);
    return readout_.forward(tape, pooled);
}

std::vector<double> CrawlNet::predict(const Graph& g, uint64_t walk_seed) {
    GraphBatch batch = make_batch({&g});
    WalkSet ws = sample_walks(batch.merged, cfg_.strategy, cfg_.p_star, cfg_.eval_walk_len,
                              walk_seed);
    TensorPtr out = forward(nullptr, batch, ws, false, RngStream(0, 0));
    return out->v;
}

// ---- checkpoint -----------------------------------------------------------
// Layout: magic "CRWLCKPT", u32 version, u64 manifest length, manifest JSON,
// then little-endian f32 blobs at the offsets the manifest records.

namespace {

constexpr char kMagic[8] = {'C', 'R', 'W', 'L', 'C', 'K', 'P', 'T'};
constexpr uint32_t kVersion = 1;

void put_u32(std::string& out, uint32_t x) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((x >> (8 * i)) & 0xFF));
}

void put_u64(std::string& out, uint64_t x) {
    for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((x >> (8 * i)) & 0xFF));
}

void put_f32_le(std::string& out, float f) {
    uint32_t bits;
    std::memcpy(&bits, &f, 4);
    put_u32(out, bits);
}

float get_f32_le(const unsigned char* p) {
    uint32_t bits = static_cast<uint32_t>(p[0]) | (static_cast<uint32_t>(p[1]) << 8) |
                    (static_cast<uint32_t>(p[2]) << 16) | (static_cast<uint32_t>(p[3]) << 24);
    float f;
    std::memcpy(&f, &bits, 4);
    return f;
}

}  // namespace

void CrawlNet::save_checkpoint(const std::string& path) const {
    auto& self = const_cast<CrawlNet&>(*this);
    json manifest;
    manifest["format"] = "crawl-checkpoint";
    manifest["version"] = kVersion;
    manifest["config"] = json::parse(to_json_text(cfg_));

    std::string blobs;
    json tensors = json::array();
    auto emit = [&](const std::string& name, const std::vector<int64_t>& shape,
                    const std::vector<double>& values) {
        json t;
        t["name"] = name;
        t["shape"] = shape;
        t["dtype"] = "f32";
        t["offset"] = blobs.size();
        t["count"] = values.size();
        for (double v : values) put_f32_le(blobs, static_cast<float>(v));
        tensors.push_back(std::move(t));
    };
    for (const auto& [name, t] : self.params().items) emit(name, t->shape, t->v);
    for (const auto& [name, buf] : self.state_buffers())
        emit(name, {static_cast<int64_t>(buf->size())}, *buf);
    manifest["tensors"] = std::move(tensors);

    std::string head = manifest.dump();
    std::ofstream out(path, std::ios::binary);
    if (!out) throw InvalidArgument("cannot write checkpoint: " + path);
    std::string front(kMagic, 8);
    put_u32(front, kVersion);
    put_u64(front, head.size());
    out.write(front.data(), static_cast<std::streamsize>(front.size()));
    out.write(head.data(), static_cast<std::streamsize>(head.size()));
    out.write(blobs.data(), static_cast<std::streamsize>(blobs.size()));
    if (!out) throw InvalidArgument("failed writing checkpoint: " + path);
}

CrawlNet CrawlNet::load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw InvalidArgument("cannot open checkpoint: " + path);
    std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    if (bytes.size() < 20 || std::memcmp(bytes.data(), kMagic, 8) != 0)
        throw InvalidArgument("not a checkpoint file: " + path);
    const unsigned char* p = reinterpret_cast<const unsigned char*>(bytes.data());
    uint32_t version = static_cast<uint32_t>(p[8]) | (static_cast<uint32_t>(p[9]) << 8) |
                       (static_cast<uint32_t>(p[10]) << 16) | (static_cast<uint32_t>(p[11]) << 24);
    if (version != kVersion)
        throw InvalidArgument("unsupported checkpoint version " + std::to_string(version));
    uint64_t head_len = 0;
    for (int i = 0; i < 8; ++i) head_len |= static_cast<uint64_t>(p[12 + i]) << (8 * i);
    if (bytes.size() < 20 + head_len) throw InvalidArgument("truncated checkpoint: " + path);

    json manifest;
    try {
        manifest = json::parse(bytes.substr(20, head_len));
    } catch (const json::parse_error& e) {
        throw InvalidArgument(std::string("checkpoint manifest parse error: ") + e.what());
    }
    ModelConfig cfg = model_config_from_json_text(manifest.at("config").dump());
    CrawlNet net(cfg, /*init_seed=*/0);

    const unsigned char* blob = p + 20 + head_len;
    const size_t blob_len = bytes.size() - 20 - head_len;
    auto fill = [&](const json& jt, std::vector<double>& dst) {
        size_t count = jt.at("count").get<size_t>();
        size_t offset = jt.at("offset").get<size_t>();
        if (jt.at("dtype").get<std::string>() != "f32")
            throw InvalidArgument("unsupported tensor dtype in checkpoint");
        if (count != dst.size())
            throw InvalidArgument("tensor size mismatch for " + jt.at("name").get<std::string>());
        if (offset + 4 * count > blob_len) throw InvalidArgument("truncated checkpoint blob");
        for (size_t i = 0; i < count; ++i)
            dst[i] = static_cast<double>(get_f32_le(blob + offset + 4 * i));
    };

    nn::ParamMap pm = net.params();
    auto buffers = net.state_buffers();
    for (const auto& jt : manifest.at("tensors")) {
        std::string name = jt.at("name").get<std::string>();
        if (TensorPtr t = pm.find(name)) {
            fill(jt, t->v);
            continue;
        }
        bool found = false;
        for (auto& [bname, buf] : buffers) {
            if (bname == name) {
                fill(jt, *buf);
                found = true;
                break;
            }
        }
        if (!found) throw InvalidArgument("unknown tensor in checkpoint: " + name);
    }
    return net;
}

uint64_t params_fingerprint(CrawlNet& net) {
    uint64_t h = 0xCBF29CE484222325ull;
    auto mix_bytes = [&h](const void* data, size_t n) {
        const unsigned char* b = static_cast<const unsigned char*>(data);
        for (size_t i = 0; i < n; ++i) {
            h ^= b[i];
            h *= 0x100000001B3ull;
        }
    };
    for (const auto& [name, t] : net.params().items)
        mix_bytes(t->v.data(), t->v.size() * sizeof(double));
    for (const auto& [name, buf] : net.state_buffers())
        mix_bytes(buf->data(), buf->size() * sizeof(double));
    return h;
}

}  // namespace crawl
