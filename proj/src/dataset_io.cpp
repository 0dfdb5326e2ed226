#include "crawl/dataset_io.hpp"

#include <fstream>
#include <sstream>

#include <json.hpp>

#include "crawl/error.hpp"

namespace crawl {

using nlohmann::json;

namespace {

FeatureTable parse_table(const json& arr, const char* what, size_t expected_rows) {
    FeatureTable t;
    if (arr.empty()) return t;
    t.rows = static_cast<int64_t>(arr.size());
    t.cols = static_cast<int64_t>(arr[0].size());
    if (t.cols == 0) throw InvalidArgument(std::string(what) + ": empty feature rows");
    if (expected_rows != arr.size())
        throw InvalidArgument(std::string(what) + ": row count mismatch");
    t.values.reserve(t.rows * t.cols);
    for (const auto& row : arr) {
        if (static_cast<int64_t>(row.size()) != t.cols)
            throw InvalidArgument(std::string(what) + ": ragged feature rows");
        for (const auto& v : row) t.values.push_back(v.get<double>());
    }
    return t;
}

json table_to_json(const FeatureTable& t) {
    json arr = json::array();
    for (int64_t r = 0; r < t.rows; ++r) {
        json row = json::array();
        for (int64_t c = 0; c < t.cols; ++c) row.push_back(t.at(r, c));
        arr.push_back(std::move(row));
    }
    return arr;
}

}  // namespace

Dataset dataset_from_json_text(const std::string& text) {
    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::parse_error& e) {
        throw InvalidArgument(std::string("dataset parse error: ") + e.what());
    }
    try {
        Dataset ds;
        const auto& task = doc.at("task");
        std::string type = task.at("type").get<std::string>();
        if (type == "classification") {
            ds.task.kind = TaskKind::Classification;
            ds.task.num_classes = task.at("num_classes").get<int>();
            if (ds.task.num_classes < 2)
                throw InvalidArgument("classification task needs num_classes >= 2");
        } else if (type == "regression") {
            ds.task.kind = TaskKind::Regression;
        } else {
            throw InvalidArgument("unknown task type: " + type);
        }
        for (const auto& jg : doc.at("graphs")) {
            NodeId n = jg.at("n").get<NodeId>();
            std::vector<std::pair<NodeId, NodeId>> edges;
            for (const auto& je : jg.at("edges")) {
                if (je.size() != 2) throw InvalidArgument("edge entries must be pairs");
                edges.emplace_back(je[0].get<NodeId>(), je[1].get<NodeId>());
            }
            FeatureTable nf, ef;
            if (jg.contains("x")) nf = parse_table(jg["x"], "x", static_cast<size_t>(n));
            if (jg.contains("e")) ef = parse_table(jg["e"], "e", edges.size());
            std::optional<double> y;
            if (jg.contains("y") && !jg["y"].is_null()) y = jg["y"].get<double>();
            ds.graphs.emplace_back(n, std::move(edges), std::move(nf), std::move(ef), y);
        }
        if (doc.contains("folds")) {
            ds.folds = doc["folds"].get<std::vector<int>>();
            if (ds.folds.size() != ds.graphs.size())
                throw InvalidArgument("folds length must match graph count");
            for (int f : ds.folds)
                if (f < 0) throw InvalidArgument("fold indices must be nonnegative");
        } else {
            ds.folds.assign(ds.graphs.size(), 0);
        }
        return ds;
    } catch (const json::exception& e) {
        throw InvalidArgument(std::string("dataset schema error: ") + e.what());
    }
}

std::string dataset_to_json_text(const Dataset& ds) {
    json doc;
    if (ds.task.kind == TaskKind::Classification) {
        doc["task"] = {{"type", "classification"}, {"num_classes", ds.task.num_classes}};
    } else {
        doc["task"] = {{"type", "regression"}};
    }
    json graphs = json::array();
    for (const auto& g : ds.graphs) {
        json jg;
        jg["n"] = g.n_nodes();
        json edges = json::array();
        for (auto [u, v] : g.edges()) edges.push_back(json::array({u, v}));
        jg["edges"] = std::move(edges);
        if (g.has_node_features()) jg["x"] = table_to_json(g.node_features());
        if (g.has_edge_features()) jg["e"] = table_to_json(g.edge_features());
        if (g.label()) jg["y"] = *g.label();
        graphs.push_back(std::move(jg));
    }
    doc["graphs"] = std::move(graphs);
    doc["folds"] = ds.folds;
    return doc.dump();
}

Dataset load_dataset(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw InvalidArgument("cannot open dataset file: " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return dataset_from_json_text(ss.str());
}

void save_dataset(const Dataset& ds, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw InvalidArgument("cannot write dataset file: " + path);
    out << dataset_to_json_text(ds);
    if (!out) throw InvalidArgument("failed writing dataset file: " + path);
}

}  // namespace crawl
