// Command-line front end. Everything goes through the C API in crawl.h; the
// core library is linked as a shared object.

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "crawl.h"

using nlohmann::json;

namespace {

int status_to_exit(crawl_status st) { return static_cast<int>(st); }

[[noreturn]] void fail(crawl_status st) {
    std::cerr << "error: " << crawl_last_error() << "\n";
    std::exit(status_to_exit(st));
}

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        std::cerr << "error: cannot open " << path << "\n";
        std::exit(1);
    }
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_file(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    out << text;
}

uint64_t fnv1a_file(const std::string& path) {
    std::string bytes = read_file(path);
    uint64_t h = 0xCBF29CE484222325ull;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 0x100000001B3ull;
    }
    return h;
}

// Dotted-path overrides: "encodings.identity=false", "lr=0.001".
void apply_override(json& cfg, const std::string& kv) {
    auto eq = kv.find('=');
    if (eq == std::string::npos) {
        std::cerr << "error: override must look like key=value: " << kv << "\n";
        std::exit(1);
    }
    std::string path = kv.substr(0, eq);
    std::string value = kv.substr(eq + 1);
    json* node = &cfg;
    size_t start = 0;
    while (true) {
        size_t dot = path.find('.', start);
        std::string key = path.substr(start, dot == std::string::npos ? dot : dot - start);
        if (dot == std::string::npos) {
            json parsed;
            try {
                parsed = json::parse(value);
            } catch (...) {
                parsed = value;  // plain string
            }
            (*node)[key] = parsed;
            return;
        }
        node = &(*node)[key];
        start = dot + 1;
    }
}

std::string resolve_config(const std::string& config_path,
                           const std::vector<std::string>& overrides) {
    json cfg = config_path.empty() ? json::object() : json::parse(read_file(config_path));
    for (const auto& kv : overrides) apply_override(cfg, kv);
    return cfg.dump();
}

std::string graph_spec_arg(const std::string& arg) {
    // A path to a JSON file or an inline spec/shorthand.
    if (std::filesystem::exists(arg)) return read_file(arg);
    if (!arg.empty() && arg.front() == '{') return arg;
    // Shorthands: cycle8, cyclepair8, threepaths3, threepaths3-skewed, csl41-2.
    auto num_after = [&](size_t pos) { return std::stoi(arg.substr(pos)); };
    if (arg.rfind("cyclepair", 0) == 0)
        return json{{"gen", "cycle_pair"}, {"n", num_after(9)}}.dump();
    if (arg.rfind("cycle", 0) == 0) return json{{"gen", "cycle"}, {"n", num_after(5)}}.dump();
    if (arg.rfind("threepaths", 0) == 0) {
        std::string rest = arg.substr(10);
        bool skewed = rest.size() > 1 && rest.find("-skewed") != std::string::npos;
        int n = std::stoi(rest);
        return json{{"gen", "three_paths"}, {"n", n}, {"balanced", !skewed}}.dump();
    }
    if (arg.rfind("csl", 0) == 0) {
        auto dash = arg.find('-');
        if (dash != std::string::npos)
            return json{{"gen", "csl"},
                        {"n", std::stoi(arg.substr(3, dash - 3))},
                        {"skip", std::stoi(arg.substr(dash + 1))}}
                .dump();
    }
    std::cerr << "error: unrecognized graph spec: " << arg << "\n";
    std::exit(1);
}

void write_local_manifest(const std::string& out_path, const std::string& command,
                          const json& config, uint64_t seed) {
    json m;
    m["command"] = command;
    m["config"] = config;
    m["seed"] = seed;
    m["output_hashes"] = {{out_path, std::to_string(fnv1a_file(out_path))}};
    write_file(out_path + ".manifest.json", m.dump(2));
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"random-walk convolutional graph learning toolkit"};
    app.require_subcommand(1);

    int threads = 0;
    app.add_option("--threads", threads, "worker threads (default: all cores)");

    // gen
    auto* gen = app.add_subcommand("gen", "generate a dataset file");
    std::string gen_name, gen_out = "dataset.json";
    int gen_n = 8;
    uint64_t gen_seed = 0xC51ull;
    gen->add_option("name", gen_name, "csl | cycles | threepaths")->required();
    gen->add_option("--n", gen_n, "size parameter for cycles/threepaths");
    gen->add_option("--seed", gen_seed, "generator seed (csl relabelings)");
    gen->add_option("--out", gen_out, "output path")->required();

    // train
    auto* train = app.add_subcommand("train", "train with k-fold cross-validation");
    std::string tr_data, tr_config, tr_out = "run";
    std::vector<std::string> tr_set;
    uint64_t tr_seed = 1;
    bool tr_single = false;
    int tr_val_fold = 1, tr_test_fold = 0;
    train->add_option("--data", tr_data, "dataset JSON")->required();
    train->add_option("--config", tr_config, "config JSON file");
    train->add_option("--set", tr_set, "config override key=value (repeatable)");
    train->add_option("--out", tr_out, "output directory");
    train->add_option("--seed", tr_seed, "root seed");
    train->add_flag("--single", tr_single, "one run instead of the fold rotation");
    train->add_option("--val-fold", tr_val_fold, "validation fold (single mode)");
    train->add_option("--test-fold", tr_test_fold, "test fold (single mode)");

    // eval
    auto* eval = app.add_subcommand("eval", "evaluate a checkpoint");
    std::string ev_model, ev_data;
    int ev_fold = -1, ev_r = 10, ev_batch = 15;
    uint64_t ev_seed = 1;
    eval->add_option("--model", ev_model, "checkpoint path")->required();
    eval->add_option("--data", ev_data, "dataset JSON")->required();
    eval->add_option("--fold", ev_fold, "restrict to one fold (-1: all graphs)");
    eval->add_option("--r", ev_r, "walk-seed evaluations");
    eval->add_option("--seed", ev_seed, "evaluation seed");
    eval->add_option("--batch-size", ev_batch, "evaluation batch size");

    // ablate
    auto* ablate = app.add_subcommand("ablate", "encoding x strategy ablation grid");
    std::string ab_data, ab_config, ab_out = "ablation";
    std::vector<std::string> ab_set;
    uint64_t ab_seed = 1;
    ablate->add_option("--data", ab_data, "dataset JSON")->required();
    ablate->add_option("--config", ab_config, "config JSON file");
    ablate->add_option("--set", ab_set, "config override key=value (repeatable)");
    ablate->add_option("--out", ab_out, "output directory");
    ablate->add_option("--seed", ab_seed, "root seed");

    // distinguish
    auto* dist = app.add_subcommand("distinguish",
                                    "compare walk feature distributions of two graphs");
    std::string d_g1, d_g2, d_strategy = "nb", d_mode = "exact", d_out;
    int d_s = 3, d_ell = 8;
    int64_t d_samples = 100000;
    uint64_t d_seed = 1;
    dist->add_option("g1", d_g1, "graph spec (file, JSON, or shorthand like cycle8)")
        ->required();
    dist->add_option("g2", d_g2, "graph spec")->required();
    dist->add_option("--strategy", d_strategy, "uniform | nb");
    dist->add_option("--s", d_s, "window size");
    dist->add_option("--ell", d_ell, "walk length");
    dist->add_option("--mode", d_mode, "exact | sampled");
    dist->add_option("--n-samples", d_samples, "samples in sampled mode");
    dist->add_option("--seed", d_seed, "sampling seed");
    dist->add_option("--out", d_out, "write the JSON report here");

    // gradcheck
    auto* gc = app.add_subcommand("gradcheck", "finite-difference audit of all kernels");

    // params
    auto* par = app.add_subcommand("params", "print the trainable parameter count");
    std::string pa_config;
    std::vector<std::string> pa_set;
    par->add_option("--config", pa_config, "config JSON file");
    par->add_option("--set", pa_set, "config override key=value (repeatable)");

    CLI11_PARSE(app, argc, argv);
    if (threads > 0) crawl_set_num_threads(threads);

    if (*gen) {
        json params;
        if (gen_name == "csl") params["seed"] = gen_seed;
        else params["n"] = gen_n;
        crawl_dataset* ds = nullptr;
        crawl_status st = crawl_dataset_generate(gen_name.c_str(), params.dump().c_str(), &ds);
        if (st != CRAWL_OK) fail(st);
        st = crawl_dataset_save(ds, gen_out.c_str());
        if (st != CRAWL_OK) fail(st);
        char* info = nullptr;
        crawl_dataset_info(ds, &info);
        std::cout << info << "\n";
        crawl_string_free(info);
        crawl_dataset_free(ds);
        write_local_manifest(gen_out, "gen " + gen_name, params, gen_seed);
        return 0;
    }

    if (*train) {
        std::string config = resolve_config(tr_config, tr_set);
        crawl_dataset* ds = nullptr;
        crawl_status st = crawl_dataset_load(tr_data.c_str(), &ds);
        if (st != CRAWL_OK) fail(st);
        char* summary = nullptr;
        st = tr_single ? crawl_train_single(ds, config.c_str(), tr_seed, tr_val_fold,
                                            tr_test_fold, tr_out.c_str(), &summary)
                       : crawl_kfold_train(ds, config.c_str(), tr_seed, tr_out.c_str(),
                                           &summary);
        crawl_dataset_free(ds);
        if (st != CRAWL_OK) fail(st);
        std::cout << summary << "\n";
        crawl_string_free(summary);
        return 0;
    }

    if (*eval) {
        crawl_dataset* ds = nullptr;
        crawl_status st = crawl_dataset_load(ev_data.c_str(), &ds);
        if (st != CRAWL_OK) fail(st);
        crawl_model* m = nullptr;
        st = crawl_model_load(ev_model.c_str(), &m);
        if (st != CRAWL_OK) fail(st);
        json opts{{"fold", ev_fold}, {"r", ev_r}, {"seed", ev_seed}, {"batch_size", ev_batch}};
        char* scores = nullptr;
        st = crawl_evaluate(m, ds, opts.dump().c_str(), &scores);
        crawl_model_free(m);
        crawl_dataset_free(ds);
        if (st != CRAWL_OK) fail(st);
        std::cout << scores << "\n";
        crawl_string_free(scores);
        return 0;
    }

    if (*ablate) {
        std::string config = resolve_config(ab_config, ab_set);
        crawl_dataset* ds = nullptr;
        crawl_status st = crawl_dataset_load(ab_data.c_str(), &ds);
        if (st != CRAWL_OK) fail(st);
        char* table = nullptr;
        st = crawl_ablation(ds, config.c_str(), ab_seed, ab_out.c_str(), &table);
        crawl_dataset_free(ds);
        if (st != CRAWL_OK) fail(st);
        std::cout << table << "\n";
        crawl_string_free(table);
        return 0;
    }

    if (*dist) {
        json opts{{"strategy", d_strategy}, {"s", d_s},       {"ell", d_ell},
                  {"mode", d_mode},         {"n_samples", d_samples}, {"seed", d_seed}};
        char* report = nullptr;
        crawl_status st = crawl_distinguish(graph_spec_arg(d_g1).c_str(),
                                            graph_spec_arg(d_g2).c_str(), opts.dump().c_str(),
                                            &report);
        if (st != CRAWL_OK) fail(st);
        std::cout << report << "\n";
        if (!d_out.empty()) {
            write_file(d_out, report);
            write_local_manifest(d_out, "distinguish", opts, d_seed);
        }
        crawl_string_free(report);
        return 0;
    }

    if (*gc) {
        char* report = nullptr;
        crawl_status st = crawl_gradcheck(&report);
        if (report) {
            std::cout << report << "\n";
            crawl_string_free(report);
        }
        if (st != CRAWL_OK) fail(st);
        return 0;
    }

    if (*par) {
        std::string config = resolve_config(pa_config, pa_set);
        int64_t count = 0;
        crawl_status st = crawl_count_parameters(config.c_str(), &count);
        if (st != CRAWL_OK) fail(st);
        std::cout << count << "\n";
        return 0;
    }
    return 0;
}
