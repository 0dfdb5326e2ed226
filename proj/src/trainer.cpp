#include "crawl/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include <json.hpp>

#include "crawl/error.hpp"
#include "crawl/rng.hpp"

namespace crawl {

using nlohmann::json;

std::string to_json_text(const TrainConfig& cfg) {
    json j = json::parse(to_json_text(cfg.model));
    j["lr"] = cfg.lr0;
    j["decay"] = cfg.lr_decay;
    j["patience"] = cfg.patience;
    j["lr_floor"] = cfg.lr_floor;
    j["batch_size"] = cfg.batch_size;
    j["max_epochs"] = cfg.max_epochs;
    j["r_val"] = cfg.r_val;
    j["r_test"] = cfg.r_test;
    return j.dump();
}

TrainConfig train_config_from_json_text(const std::string& text) {
    TrainConfig cfg;
    cfg.model = model_config_from_json_text(text);
    json j;
    try {
        j = json::parse(text);
    } catch (const json::parse_error& e) {
        throw InvalidArgument(std::string("config parse error: ") + e.what());
    }
    try {
        if (j.contains("lr")) cfg.lr0 = j["lr"].get<double>();
        if (j.contains("decay")) cfg.lr_decay = j["decay"].get<double>();
        if (j.contains("patience")) cfg.patience = j["patience"].get<int>();
        if (j.contains("lr_floor")) cfg.lr_floor = j["lr_floor"].get<double>();
        if (j.contains("batch_size")) cfg.batch_size = j["batch_size"].get<int>();
        if (j.contains("max_epochs")) cfg.max_epochs = j["max_epochs"].get<int>();
        if (j.contains("r_val")) cfg.r_val = j["r_val"].get<int>();
        if (j.contains("r_test")) cfg.r_test = j["r_test"].get<int>();
    } catch (const json::exception& e) {
        throw InvalidArgument(std::string("config schema error: ") + e.what());
    }
    if (cfg.lr0 <= 0 || cfg.lr_decay <= 0 || cfg.lr_decay >= 1 || cfg.patience < 1 ||
        cfg.batch_size < 1 || cfg.r_val < 1 || cfg.r_test < 1)
        throw InvalidArgument("invalid training hyperparameters");
    return cfg;
}

namespace {

struct TaskHeads {
    TaskKind kind;
    int num_classes;
};

// Node/edge feature widths and the output head are data properties; graphs
// without node features get the constant channel.
void resolve_dims(ModelConfig& m, const Dataset& ds) {
    int64_t in_dim = 1, edge_dim = 0;
    for (const auto& g : ds.graphs) {
        if (g.has_node_features()) in_dim = std::max(in_dim, g.node_features().cols);
        if (g.has_edge_features()) edge_dim = std::max(edge_dim, g.edge_features().cols);
    }
    m.in_dim = in_dim;
    m.edge_dim = edge_dim;
    m.out_dim = ds.task.kind == TaskKind::Classification ? ds.task.num_classes : 1;
}

GraphBatch build_batch(const Dataset& ds, const std::vector<int>& ids, size_t begin, size_t end) {
    std::vector<const Graph*> ptrs;
    ptrs.reserve(end - begin);
    for (size_t i = begin; i < end; ++i) ptrs.push_back(&ds.graphs[ids[i]]);
    return make_batch(ptrs);
}

double batch_score_sum(CrawlNet& net, const Dataset& ds, const GraphBatch& batch,
                       const nn::TensorPtr& out) {
    double s = 0.0;
    if (ds.task.kind == TaskKind::Classification) {
        const int64_t C = out->dim(1);
        for (int i = 0; i < batch.n_graphs; ++i) {
            const double* row = out->v.data() + static_cast<int64_t>(i) * C;
            int arg = 0;
            for (int64_t c = 1; c < C; ++c)
                if (row[c] > row[arg]) arg = static_cast<int>(c);
            if (arg == batch.class_labels[i]) s += 1.0;
        }
    } else {
        for (int i = 0; i < batch.n_graphs; ++i)
            s += std::abs(out->v[i] - batch.real_targets[i]);
    }
    return s;
}

}  // namespace

std::vector<double> evaluate(CrawlNet& net, const Dataset& ds, const std::vector<int>& graph_ids,
                             const std::vector<uint64_t>& eval_seeds, int batch_size) {
    if (graph_ids.empty()) throw InvalidArgument("evaluate: empty graph set");
    const ModelConfig& m = net.config();
    std::vector<double> scores;
    scores.reserve(eval_seeds.size());
    for (uint64_t seed : eval_seeds) {
        double total = 0.0;
        for (size_t b = 0; b < graph_ids.size(); b += batch_size) {
            size_t e = std::min(graph_ids.size(), b + batch_size);
            GraphBatch batch = build_batch(ds, graph_ids, b, e);
            uint64_t walk_seed = RngStream::stream_id("eval_walks", seed, b);
            WalkSet ws =
                sample_walks(batch.merged, m.strategy, m.p_star, m.eval_walk_len, walk_seed);
            nn::TensorPtr out = net.forward(nullptr, batch, ws, false, RngStream(0, 0));
            total += batch_score_sum(net, ds, batch, out);
        }
        scores.push_back(total / static_cast<double>(graph_ids.size()));
    }
    return scores;
}

TrainResult train(const Dataset& ds, const FoldSpec& folds, const TrainConfig& cfg,
                  uint64_t seed, const std::function<void(const EpochRecord&)>& on_epoch) {
    if (ds.graphs.empty()) throw InvalidArgument("train: empty dataset");
    std::vector<int> train_ids, val_ids;
    for (size_t i = 0; i < ds.graphs.size(); ++i) {
        int f = ds.folds[i];
        if (f == folds.val_fold) {
            val_ids.push_back(static_cast<int>(i));
        } else if (std::find(folds.train_folds.begin(), folds.train_folds.end(), f) !=
                   folds.train_folds.end()) {
            train_ids.push_back(static_cast<int>(i));
        }
    }
    if (train_ids.empty() || val_ids.empty())
        throw InvalidArgument("train: fold spec yields empty train or validation set");

    TrainConfig resolved = cfg;
    resolve_dims(resolved.model, ds);
    resolved.model.validate();

    auto net = std::make_shared<CrawlNet>(resolved.model, seed);
    nn::ParamMap pm = net->params();
    std::vector<nn::TensorPtr> plist;
    for (auto& [name, t] : pm.items) plist.push_back(t);
    nn::Adam adam(plist, cfg.lr0);
    PlateauSchedule sched(cfg.lr0, cfg.lr_decay, cfg.patience, cfg.lr_floor);

    const bool classify = ds.task.kind == TaskKind::Classification;
    const uint64_t val_walk_seed = RngStream::stream_id("val_walks", seed);

    TrainResult result;
    result.best_val_score = classify ? -1.0 : std::numeric_limits<double>::max();
    double best_monitored = -std::numeric_limits<double>::max();

    for (int epoch = 0; epoch < cfg.max_epochs && !sched.done(); ++epoch) {
        // Shuffle training graphs.
        std::vector<int> order = train_ids;
        {
            RngStream rng(seed, RngStream::stream_id("shuffle", epoch));
            for (size_t i = order.size() - 1; i > 0; --i) {
                size_t j = rng.uniform_int(i + 1);
                std::swap(order[i], order[j]);
            }
        }
        adam.set_lr(sched.lr());
        double loss_sum = 0.0;
        int64_t loss_graphs = 0;
        int step = 0;
        for (size_t b = 0; b < order.size(); b += cfg.batch_size, ++step) {
            size_t e = std::min(order.size(), b + cfg.batch_size);
            GraphBatch batch = build_batch(ds, order, b, e);
            uint64_t walk_seed = RngStream::stream_id("train_walks", seed ^ epoch, step);
            WalkSet ws = sample_walks(batch.merged, resolved.model.strategy,
                                      resolved.model.p_star, resolved.model.train_walk_len,
                                      walk_seed);
            nn::Tape tape;
            RngStream drop_rng(seed, RngStream::stream_id("dropout", epoch, step));
            nn::TensorPtr loss;
            try {
                nn::TensorPtr out = net->forward(&tape, batch, ws, true, drop_rng);
                loss = classify ? nn::cross_entropy(&tape, out, batch.class_labels)
                                : nn::l1_loss(&tape, out, batch.real_targets);
            } catch (const NumericalError& err) {
                throw NumericalError("training diverged at epoch " + std::to_string(epoch) +
                                     " step " + std::to_string(step) + " (lr " +
                                     std::to_string(sched.lr()) + "): " + err.what());
            }
            adam.zero_grad();
            loss->g[0] = 1.0;
            tape.backward();
            adam.step();
            for (const auto& p : plist) {
                for (double v : p->v) {
                    if (!std::isfinite(v))
                        throw NumericalError(
                            "training diverged (non-finite parameter) at epoch " +
                            std::to_string(epoch) + " step " + std::to_string(step) + " (lr " +
                            std::to_string(sched.lr()) + ")");
                }
            }
            loss_sum += loss->v[0] * static_cast<double>(batch.n_graphs);
            loss_graphs += batch.n_graphs;
        }

        std::vector<uint64_t> val_seeds;
        for (int r = 0; r < cfg.r_val; ++r)
            val_seeds.push_back(RngStream::stream_id("val_walks_r", val_walk_seed, r));
        std::vector<double> vs = evaluate(*net, ds, val_ids, val_seeds, cfg.batch_size);
        double val_score = std::accumulate(vs.begin(), vs.end(), 0.0) / vs.size();

        EpochRecord rec{epoch, sched.lr(), loss_sum / static_cast<double>(loss_graphs),
                        val_score};
        result.history.push_back(rec);
        if (on_epoch) on_epoch(rec);

        // The monitored metric is always "higher is better". The schedule
        // counts ties as stagnation, but the retained checkpoint moves to
        // the latest model matching the best score: at a plateau the later,
        // longer-trained weights generalize better.
        const double monitored = classify ? val_score : -val_score;
        sched.observe(monitored);
        if (!result.best_model || monitored >= best_monitored) {
            best_monitored = monitored;
            result.best_val_score = val_score;
            result.best_epoch = epoch;
            result.best_model = std::make_shared<CrawlNet>(net->clone());
        }
        result.epochs_run = epoch + 1;
    }
    if (!result.best_model) result.best_model = std::make_shared<CrawlNet>(net->clone());
    return result;
}

double imd(const std::vector<std::vector<double>>& scores) {
    if (scores.empty()) throw InvalidArgument("imd: empty grid");
    const size_t r = scores[0].size();
    if (r < 2) throw InvalidArgument("imd: needs at least two evaluation runs per model");
    double acc = 0.0;
    for (const auto& row : scores) {
        if (row.size() != r) throw InvalidArgument("imd: ragged grid");
        double mean = std::accumulate(row.begin(), row.end(), 0.0) / r;
        double ss = 0.0;
        for (double x : row) ss += (x - mean) * (x - mean);
        acc += std::sqrt(ss / r);
    }
    return acc / static_cast<double>(scores.size());
}

double cmd(const std::vector<std::vector<double>>& scores) {
    if (scores.size() < 2) throw InvalidArgument("cmd: needs at least two models");
    const size_t r = scores[0].size();
    if (r < 1) throw InvalidArgument("cmd: empty rows");
    std::vector<double> means;
    for (const auto& row : scores) {
        if (row.size() != r) throw InvalidArgument("cmd: ragged grid");
        means.push_back(std::accumulate(row.begin(), row.end(), 0.0) / r);
    }
    double mean = std::accumulate(means.begin(), means.end(), 0.0) / means.size();
    double ss = 0.0;
    for (double x : means) ss += (x - mean) * (x - mean);
    return std::sqrt(ss / means.size());
}

KfoldResult kfold_run(const Dataset& ds, const TrainConfig& cfg, uint64_t seed,
                      const std::function<void(int, const EpochRecord&)>& on_epoch) {
    const int K = ds.num_folds();
    if (K < 2) throw InvalidArgument("kfold_run: needs at least two folds");
    KfoldResult result;
    for (int i = 0; i < K; ++i) {
        FoldSpec spec;
        spec.test_fold = i;
        spec.val_fold = (i + 1) % K;
        for (int f = 0; f < K; ++f)
            if (f != spec.test_fold && f != spec.val_fold) spec.train_folds.push_back(f);

        uint64_t run_seed = RngStream::stream_id("kfold_run", seed, i);
        auto cb = on_epoch ? std::function<void(const EpochRecord&)>(
                                 [&, i](const EpochRecord& r) { on_epoch(i, r); })
                           : std::function<void(const EpochRecord&)>();
        TrainResult tr = train(ds, spec, cfg, run_seed, cb);

        std::vector<int> test_ids = ds.fold_indices(i);
        std::vector<uint64_t> seeds;
        for (int j = 0; j < cfg.r_test; ++j)
            seeds.push_back(RngStream::stream_id("test_walks", run_seed, j));
        std::vector<double> row = evaluate(*tr.best_model, ds, test_ids, seeds, cfg.batch_size);
        double fold_mean = std::accumulate(row.begin(), row.end(), 0.0) / row.size();
        result.fold_means.push_back(fold_mean);
        result.test_scores.push_back(std::move(row));
        result.runs.push_back(std::move(tr));
    }
    double total = 0.0;
    int64_t n = 0;
    for (const auto& row : result.test_scores)
        for (double x : row) {
            total += x;
            ++n;
        }
    result.mean_score = total / static_cast<double>(n);
    result.imd_value = imd(result.test_scores);
    result.cmd_value = cmd(result.test_scores);
    return result;
}

std::vector<AblationCell> ablation_matrix(const Dataset& ds, const TrainConfig& base_cfg,
                                          uint64_t seed) {
    const std::vector<std::pair<std::string, Encodings>> encs = {
        {"none", {false, false}},
        {"identity", {true, false}},
        {"adjacency", {false, true}},
        {"both", {true, true}},
    };
    const std::vector<WalkStrategy> strategies = {WalkStrategy::Uniform,
                                                  WalkStrategy::NonBacktracking};
    std::vector<AblationCell> cells;
    for (const auto& [name, enc] : encs) {
        for (WalkStrategy strat : strategies) {
            TrainConfig cfg = base_cfg;
            cfg.model.encodings = enc;
            cfg.model.strategy = strat;
            uint64_t cell_seed =
                RngStream::stream_id("ablation", RngStream::stream_id(name),
                                     static_cast<uint64_t>(strat)) ^ seed;
            KfoldResult kr = kfold_run(ds, cfg, cell_seed);
            cells.push_back({name, strat, kr.mean_score, kr.cmd_value, kr.imd_value});
        }
    }
    return cells;
}

void write_history_csv(const std::vector<EpochRecord>& history, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw InvalidArgument("cannot write csv: " + path);
    out << "epoch,lr,train_loss,val_score\n";
    out.precision(17);
    for (const auto& r : history)
        out << r.epoch << "," << r.lr << "," << r.train_loss << "," << r.val_score << "\n";
}

std::string kfold_summary_json(const KfoldResult& result) {
    json j;
    j["scores"] = result.test_scores;
    j["fold_means"] = result.fold_means;
    j["mean"] = result.mean_score;
    j["imd"] = result.imd_value;
    j["cmd"] = result.cmd_value;
    return j.dump(2);
}

uint64_t file_fingerprint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw InvalidArgument("cannot open file: " + path);
    uint64_t h = 0xCBF29CE484222325ull;
    char buf[4096];
    while (in.read(buf, sizeof(buf)) || in.gcount() > 0) {
        for (std::streamsize i = 0; i < in.gcount(); ++i) {
            h ^= static_cast<unsigned char>(buf[i]);
            h *= 0x100000001B3ull;
        }
        if (!in) break;
    }
    return h;
}

}  // namespace crawl
