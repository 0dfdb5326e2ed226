#pragma once

#include <string>

#include "crawl/graph.hpp"

namespace crawl {

// One JSON document per dataset:
//   {"task": {"type": "classification", "num_classes": k} | {"type": "regression"},
//    "graphs": [{"n": int, "edges": [[u,v],...], "x": [[...]], "e": [[...]], "y": num}, ...],
//    "folds": [int, ...]}
// "x", "e" and "y" are optional per graph; "folds" defaults to all-zero.
Dataset load_dataset(const std::string& path);
void save_dataset(const Dataset& ds, const std::string& path);

Dataset dataset_from_json_text(const std::string& text);
std::string dataset_to_json_text(const Dataset& ds);

}  // namespace crawl
