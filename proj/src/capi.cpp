#include "crawl.h"

#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>

#include <json.hpp>

#include "crawl/dataset_io.hpp"
#include "crawl/error.hpp"
#include "crawl/expressiveness.hpp"
#include "crawl/gradcheck_suite.hpp"
#include "crawl/graph.hpp"
#include "crawl/model.hpp"
#include "crawl/parallel.hpp"
#include "crawl/trainer.hpp"

using nlohmann::json;

struct crawl_dataset {
    crawl::Dataset ds;
};

struct crawl_model {
    crawl::CrawlNet net;
};

namespace {

thread_local std::string g_last_error;

char* dup_string(const std::string& s) {
    char* out = static_cast<char*>(std::malloc(s.size() + 1));
    std::memcpy(out, s.c_str(), s.size() + 1);
    return out;
}

template <typename Fn>
crawl_status guarded(Fn&& fn) {
    try {
        fn();
        return CRAWL_OK;
    } catch (const crawl::InvalidArgument& e) {
        g_last_error = e.what();
        return CRAWL_INVALID_ARGUMENT;
    } catch (const crawl::NumericalError& e) {
        g_last_error = e.what();
        return CRAWL_NUMERICAL_ERROR;
    } catch (const crawl::ResourceError& e) {
        g_last_error = e.what();
        return CRAWL_RESOURCE_ERROR;
    } catch (const std::exception& e) {
        g_last_error = e.what();
        return CRAWL_INVALID_ARGUMENT;
    }
}

crawl::Graph parse_graph_spec(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::parse_error& e) {
        throw crawl::InvalidArgument(std::string("graph spec parse error: ") + e.what());
    }
    if (j.contains("gen")) {
        std::string gen = j["gen"].get<std::string>();
        if (gen == "cycle") return crawl::make_cycle(j.at("n").get<int>());
        if (gen == "cycle_pair") {
            // Two disjoint cycles of length n/2.
            int n = j.at("n").get<int>();
            if (n % 2 != 0) throw crawl::InvalidArgument("cycle_pair needs even n");
            crawl::Graph half = crawl::make_cycle(n / 2);
            return crawl::disjoint_union(half, half);
        }
        if (gen == "three_paths")
            return crawl::make_three_paths(j.at("n").get<int>(), j.value("balanced", true));
        if (gen == "csl") return crawl::make_csl(j.at("n").get<int>(), j.at("skip").get<int>());
        throw crawl::InvalidArgument("unknown graph generator: " + gen);
    }
    std::vector<std::pair<crawl::NodeId, crawl::NodeId>> edges;
    for (const auto& e : j.at("edges")) edges.emplace_back(e[0].get<int>(), e[1].get<int>());
    return crawl::Graph(j.at("n").get<int>(), std::move(edges));
}

void write_text_file(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw crawl::InvalidArgument("cannot write " + path);
    out << text;
}

// Resolved config, seed and output hashes: enough to replay the run.
void write_manifest(const std::string& out_dir, const std::string& command,
                    const std::string& resolved_config, uint64_t seed,
                    const std::vector<std::string>& outputs) {
    json m;
    m["command"] = command;
    m["config"] = json::parse(resolved_config);
    m["seed"] = seed;
    json h = json::object();
    for (const auto& p : outputs)
        h[p] = std::to_string(crawl::file_fingerprint(p));
    m["output_hashes"] = std::move(h);
    write_text_file(out_dir + "/manifest.json", m.dump(2));
}

}  // namespace

extern "C" {

const char* crawl_version(void) { return "crawl 1.0.0"; }

const char* crawl_last_error(void) { return g_last_error.c_str(); }

void crawl_string_free(char* s) { std::free(s); }

void crawl_set_num_threads(int n) { crawl::set_num_threads(n); }

crawl_status crawl_dataset_generate(const char* name, const char* params_json,
                                    crawl_dataset** out) {
    return guarded([&] {
        if (!name || !out) throw crawl::InvalidArgument("null argument");
        json params = params_json && *params_json ? json::parse(params_json) : json::object();
        crawl::Dataset ds;
        std::string which = name;
        if (which == "csl") {
            ds = crawl::make_csl_dataset(params.value("seed", 0xC51ull));
        } else if (which == "cycles") {
            int n = params.value("n", 8);
            if (n % 2 != 0) throw crawl::InvalidArgument("cycles generator needs even n");
            crawl::Graph whole = crawl::make_cycle(n);
            crawl::Graph half = crawl::make_cycle(n / 2);
            crawl::Graph pair = crawl::disjoint_union(half, half);
            whole.set_label(0.0);
            pair.set_label(1.0);
            ds.task = {crawl::TaskKind::Classification, 2};
            ds.graphs.push_back(std::move(whole));
            ds.graphs.push_back(std::move(pair));
            ds.folds = {0, 0};
        } else if (which == "threepaths") {
            int n = params.value("n", 3);
            crawl::Graph balanced = crawl::make_three_paths(n, true);
            crawl::Graph skewed = crawl::make_three_paths(n, false);
            balanced.set_label(0.0);
            skewed.set_label(1.0);
            ds.task = {crawl::TaskKind::Classification, 2};
            ds.graphs.push_back(std::move(balanced));
            ds.graphs.push_back(std::move(skewed));
            ds.folds = {0, 0};
        } else {
            throw crawl::InvalidArgument("unknown dataset generator: " + which);
        }
        *out = new crawl_dataset{std::move(ds)};
    });
}

crawl_status crawl_dataset_load(const char* path, crawl_dataset** out) {
    return guarded([&] {
        if (!path || !out) throw crawl::InvalidArgument("null argument");
        *out = new crawl_dataset{crawl::load_dataset(path)};
    });
}

crawl_status crawl_dataset_save(const crawl_dataset* ds, const char* path) {
    return guarded([&] {
        if (!ds || !path) throw crawl::InvalidArgument("null argument");
        crawl::save_dataset(ds->ds, path);
    });
}

crawl_status crawl_dataset_info(const crawl_dataset* ds, char** json_out) {
    return guarded([&] {
        if (!ds || !json_out) throw crawl::InvalidArgument("null argument");
        json j;
        j["n_graphs"] = ds->ds.graphs.size();
        j["task"] = ds->ds.task.kind == crawl::TaskKind::Classification ? "classification"
                                                                        : "regression";
        j["num_classes"] = ds->ds.task.num_classes;
        j["folds"] = ds->ds.num_folds();
        int64_t nodes = 0;
        for (const auto& g : ds->ds.graphs) nodes += g.n_nodes();
        j["n_nodes_total"] = nodes;
        *json_out = dup_string(j.dump(2));
    });
}

void crawl_dataset_free(crawl_dataset* ds) { delete ds; }

crawl_status crawl_kfold_train(const crawl_dataset* ds, const char* config_json, uint64_t seed,
                               const char* out_dir, char** summary_json) {
    return guarded([&] {
        if (!ds || !config_json || !out_dir) throw crawl::InvalidArgument("null argument");
        crawl::TrainConfig cfg = crawl::train_config_from_json_text(config_json);
        std::filesystem::create_directories(out_dir);
        std::string dir(out_dir);

        crawl::KfoldResult result = crawl::kfold_run(ds->ds, cfg, seed);
        std::vector<std::string> outputs;
        for (size_t i = 0; i < result.runs.size(); ++i) {
            std::string ck = dir + "/model_fold" + std::to_string(i) + ".ckpt";
            result.runs[i].best_model->save_checkpoint(ck);
            std::string csv = dir + "/history_fold" + std::to_string(i) + ".csv";
            crawl::write_history_csv(result.runs[i].history, csv);
            outputs.push_back(ck);
            outputs.push_back(csv);
        }
        std::string summary = crawl::kfold_summary_json(result);
        write_text_file(dir + "/summary.json", summary);
        outputs.push_back(dir + "/summary.json");
        write_manifest(dir, "kfold_train", crawl::to_json_text(cfg), seed, outputs);
        if (summary_json) *summary_json = dup_string(summary);
    });
}

crawl_status crawl_train_single(const crawl_dataset* ds, const char* config_json, uint64_t seed,
                                int val_fold, int test_fold, const char* out_dir,
                                char** summary_json) {
    return guarded([&] {
        if (!ds || !config_json || !out_dir) throw crawl::InvalidArgument("null argument");
        crawl::TrainConfig cfg = crawl::train_config_from_json_text(config_json);
        std::filesystem::create_directories(out_dir);
        std::string dir(out_dir);

        const int K = ds->ds.num_folds();
        crawl::FoldSpec spec;
        spec.val_fold = val_fold;
        spec.test_fold = test_fold;
        for (int f = 0; f < K; ++f)
            if (f != val_fold && f != test_fold) spec.train_folds.push_back(f);

        crawl::TrainResult tr = crawl::train(ds->ds, spec, cfg, seed);
        std::string ck = dir + "/model.ckpt";
        tr.best_model->save_checkpoint(ck);
        std::string csv = dir + "/history.csv";
        crawl::write_history_csv(tr.history, csv);

        json j;
        j["best_val_score"] = tr.best_val_score;
        j["best_epoch"] = tr.best_epoch;
        j["epochs_run"] = tr.epochs_run;
        if (test_fold >= 0) {
            std::vector<uint64_t> seeds;
            for (int r = 0; r < cfg.r_test; ++r)
                seeds.push_back(crawl::RngStream::stream_id("test_walks", seed, r));
            std::vector<double> scores = crawl::evaluate(
                *tr.best_model, ds->ds, ds->ds.fold_indices(test_fold), seeds, cfg.batch_size);
            j["test_scores"] = scores;
        }
        std::string summary = j.dump(2);
        write_text_file(dir + "/summary.json", summary);
        write_manifest(dir, "train", crawl::to_json_text(cfg), seed,
                       {ck, csv, dir + "/summary.json"});
        if (summary_json) *summary_json = dup_string(summary);
    });
}

crawl_status crawl_ablation(const crawl_dataset* ds, const char* config_json, uint64_t seed,
                            const char* out_dir, char** table_json) {
    return guarded([&] {
        if (!ds || !config_json || !out_dir) throw crawl::InvalidArgument("null argument");
        crawl::TrainConfig cfg = crawl::train_config_from_json_text(config_json);
        std::filesystem::create_directories(out_dir);
        std::string dir(out_dir);
        auto cells = crawl::ablation_matrix(ds->ds, cfg, seed);
        json rows = json::array();
        for (const auto& c : cells) {
            rows.push_back({{"encodings", c.encodings},
                            {"strategy", to_string(c.strategy)},
                            {"mean", c.mean_score},
                            {"cmd", c.cmd_value},
                            {"imd", c.imd_value}});
        }
        std::string table = rows.dump(2);
        write_text_file(dir + "/ablation.json", table);
        write_manifest(dir, "ablate", crawl::to_json_text(cfg), seed, {dir + "/ablation.json"});
        if (table_json) *table_json = dup_string(table);
    });
}

crawl_status crawl_model_load(const char* path, crawl_model** out) {
    return guarded([&] {
        if (!path || !out) throw crawl::InvalidArgument("null argument");
        *out = new crawl_model{crawl::CrawlNet::load_checkpoint(path)};
    });
}

crawl_status crawl_model_save(const crawl_model* m, const char* path) {
    return guarded([&] {
        if (!m || !path) throw crawl::InvalidArgument("null argument");
        m->net.save_checkpoint(path);
    });
}

crawl_status crawl_model_info(const crawl_model* m, char** json_out) {
    return guarded([&] {
        if (!m || !json_out) throw crawl::InvalidArgument("null argument");
        json j;
        j["config"] = json::parse(crawl::to_json_text(m->net.config()));
        j["parameter_count"] = crawl::count_parameters(m->net.config());
        *json_out = dup_string(j.dump(2));
    });
}

crawl_status crawl_evaluate(const crawl_model* m, const crawl_dataset* ds,
                            const char* options_json, char** scores_json) {
    return guarded([&] {
        if (!m || !ds || !scores_json) throw crawl::InvalidArgument("null argument");
        json opts = options_json && *options_json ? json::parse(options_json) : json::object();
        int fold = opts.value("fold", -1);
        int r = opts.value("r", 10);
        uint64_t seed = opts.value("seed", 1ull);
        int batch_size = opts.value("batch_size", 15);
        std::vector<int> ids;
        if (fold >= 0) {
            ids = ds->ds.fold_indices(fold);
        } else {
            for (size_t i = 0; i < ds->ds.graphs.size(); ++i) ids.push_back(static_cast<int>(i));
        }
        std::vector<uint64_t> seeds;
        for (int i = 0; i < r; ++i)
            seeds.push_back(crawl::RngStream::stream_id("eval_seed", seed, i));
        auto& net = const_cast<crawl::CrawlNet&>(m->net);
        std::vector<double> scores = crawl::evaluate(net, ds->ds, ids, seeds, batch_size);
        json j;
        j["scores"] = scores;
        double mean = 0.0;
        for (double s : scores) mean += s;
        j["mean"] = mean / scores.size();
        *scores_json = dup_string(j.dump(2));
    });
}

void crawl_model_free(crawl_model* m) { delete m; }

crawl_status crawl_distinguish(const char* graph1_json, const char* graph2_json,
                               const char* options_json, char** report_json) {
    return guarded([&] {
        if (!graph1_json || !graph2_json || !report_json)
            throw crawl::InvalidArgument("null argument");
        json opts = options_json && *options_json ? json::parse(options_json) : json::object();
        crawl::Graph g1 = parse_graph_spec(graph1_json);
        crawl::Graph g2 = parse_graph_spec(graph2_json);
        crawl::WalkStrategy strategy =
            crawl::walk_strategy_from_string(opts.value("strategy", "nb"));
        int s = opts.value("s", 3);
        int ell = opts.value("ell", 8);
        std::string mode = opts.value("mode", "exact");
        int64_t n_samples = opts.value("n_samples", 100000);
        uint64_t seed = opts.value("seed", 1ull);
        *report_json = dup_string(crawl::distinguish_report_json(
            g1, "graph1", g2, "graph2", strategy, s, ell, mode, n_samples, seed));
    });
}

crawl_status crawl_gradcheck(char** report_json) {
    return guarded([&] {
        if (!report_json) throw crawl::InvalidArgument("null argument");
        auto results = crawl::run_gradient_audit();
        json rows = json::array();
        bool all_pass = true;
        for (const auto& r : results) {
            rows.push_back({{"name", r.name},
                            {"max_rel_err", r.max_rel_err},
                            {"n_coords", r.n_coords},
                            {"pass", r.pass}});
            all_pass = all_pass && r.pass;
        }
        json j;
        j["checks"] = std::move(rows);
        j["all_pass"] = all_pass;
        *report_json = dup_string(j.dump(2));
        if (!all_pass) throw crawl::NumericalError("gradient audit failed");
    });
}

crawl_status crawl_count_parameters(const char* config_json, int64_t* out) {
    return guarded([&] {
        if (!config_json || !out) throw crawl::InvalidArgument("null argument");
        crawl::ModelConfig cfg = crawl::model_config_from_json_text(config_json);
        *out = crawl::count_parameters(cfg);
    });
}

}  // extern "C"
