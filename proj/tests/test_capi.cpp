// Exercises the shared-library surface the way an external consumer would:
// only crawl.h, opaque handles, status codes.
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstring>
#include <filesystem>
#include <string>

#include <json.hpp>

#include "crawl.h"

using nlohmann::json;

namespace {

std::string tmp_path(const std::string& name) {
    return (std::filesystem::temp_directory_path() / name).string();
}

}  // namespace

TEST_CASE("version string") {
    CHECK(std::strlen(crawl_version()) > 0);
}

TEST_CASE("dataset generate, info, save, load") {
    crawl_dataset* ds = nullptr;
    REQUIRE(crawl_dataset_generate("csl", "{}", &ds) == CRAWL_OK);
    char* info = nullptr;
    REQUIRE(crawl_dataset_info(ds, &info) == CRAWL_OK);
    json j = json::parse(info);
    crawl_string_free(info);
    CHECK(j["n_graphs"] == 150);
    CHECK(j["num_classes"] == 10);
    CHECK(j["folds"] == 5);
    CHECK(j["task"] == "classification");

    std::string path = tmp_path("capi_csl.json");
    REQUIRE(crawl_dataset_save(ds, path.c_str()) == CRAWL_OK);
    crawl_dataset_free(ds);

    crawl_dataset* back = nullptr;
    REQUIRE(crawl_dataset_load(path.c_str(), &back) == CRAWL_OK);
    char* info2 = nullptr;
    REQUIRE(crawl_dataset_info(back, &info2) == CRAWL_OK);
    CHECK(json::parse(info2)["n_graphs"] == 150);
    crawl_string_free(info2);
    crawl_dataset_free(back);
    std::filesystem::remove(path);
}

TEST_CASE("error reporting") {
    crawl_dataset* ds = nullptr;
    CHECK(crawl_dataset_load("/no/such/file.json", &ds) == CRAWL_INVALID_ARGUMENT);
    CHECK(std::strlen(crawl_last_error()) > 0);
    CHECK(crawl_dataset_generate("unknown-name", "{}", &ds) == CRAWL_INVALID_ARGUMENT);
}

TEST_CASE("distinguish through the C API") {
    const char* g1 = R"({"gen":"cycle","n":8})";
    const char* g2 = R"({"gen":"cycle_pair","n":8})";
    char* report = nullptr;
    REQUIRE(crawl_distinguish(g1, g2, R"({"strategy":"nb","s":2,"ell":8,"mode":"exact"})",
                              &report) == CRAWL_OK);
    json j = json::parse(report);
    crawl_string_free(report);
    CHECK(j["tv"] == 0.0);
    CHECK(j["tv_exact"] == "0");
    CHECK(j["mode"] == "exact");
}

TEST_CASE("parameter counting through the C API") {
    int64_t n = 0;
    REQUIRE(crawl_count_parameters(R"({"L":3,"d":48,"s":8,"out_dim":10})", &n) == CRAWL_OK);
    CHECK(n > 0);
    CHECK(n < 100000);
    CHECK(crawl_count_parameters("{\"s\":3}", &n) == CRAWL_INVALID_ARGUMENT);  // odd window
}

TEST_CASE("training, checkpointing and evaluation through the C API") {
    crawl_dataset* ds = nullptr;
    REQUIRE(crawl_dataset_generate("csl", "{}", &ds) == CRAWL_OK);

    std::string dir = tmp_path("capi_run");
    std::filesystem::remove_all(dir);
    const char* config = R"({
        "L": 1, "d": 8, "d_conv": 8, "s": 2, "ell_train": 6, "ell_eval": 8,
        "batch_size": 30, "max_epochs": 2, "r_test": 2
    })";
    char* summary = nullptr;
    REQUIRE(crawl_train_single(ds, config, 7, 1, 0, dir.c_str(), &summary) == CRAWL_OK);
    json js = json::parse(summary);
    crawl_string_free(summary);
    CHECK(js.contains("best_val_score"));
    CHECK(js["test_scores"].size() == 2);

    CHECK(std::filesystem::exists(dir + "/model.ckpt"));
    CHECK(std::filesystem::exists(dir + "/history.csv"));
    CHECK(std::filesystem::exists(dir + "/summary.json"));
    CHECK(std::filesystem::exists(dir + "/manifest.json"));

    crawl_model* m = nullptr;
    REQUIRE(crawl_model_load((dir + "/model.ckpt").c_str(), &m) == CRAWL_OK);
    char* info = nullptr;
    REQUIRE(crawl_model_info(m, &info) == CRAWL_OK);
    json ji = json::parse(info);
    crawl_string_free(info);
    CHECK(ji["config"]["d"] == 8);
    CHECK(ji["parameter_count"].get<int64_t>() > 0);

    char* scores = nullptr;
    REQUIRE(crawl_evaluate(m, ds, R"({"fold":0,"r":3,"batch_size":30})", &scores) == CRAWL_OK);
    json jsc = json::parse(scores);
    crawl_string_free(scores);
    CHECK(jsc["scores"].size() == 3);

    crawl_model_free(m);
    crawl_dataset_free(ds);
    std::filesystem::remove_all(dir);
}

TEST_CASE("gradient audit through the C API") {
    char* report = nullptr;
    REQUIRE(crawl_gradcheck(&report) == CRAWL_OK);
    json j = json::parse(report);
    crawl_string_free(report);
    CHECK(j["all_pass"] == true);
    CHECK(j["checks"].size() >= 10);
}
