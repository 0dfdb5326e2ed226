#pragma once

#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "crawl/graph.hpp"
#include "crawl/model.hpp"

namespace crawl {

struct TrainConfig {
    ModelConfig model;
    double lr0 = 1e-3;
    double lr_decay = 0.5;
    int patience = 10;      // epochs without strict val improvement before decay
    double lr_floor = 1e-6; // training stops once lr drops below this
    int batch_size = 15;
    int max_epochs = 100000;  // safety cap; the schedule stops first
    int r_val = 1;            // walk-seed evaluations per validation pass
    int r_test = 10;
};

std::string to_json_text(const TrainConfig& cfg);
TrainConfig train_config_from_json_text(const std::string& text);

struct EpochRecord {
    int epoch = 0;
    double lr = 0.0;
    double train_loss = 0.0;
    double val_score = 0.0;
};

struct TrainResult {
    std::shared_ptr<CrawlNet> best_model;
    std::vector<EpochRecord> history;
    double best_val_score = 0.0;
    int best_epoch = -1;
    int epochs_run = 0;
};

// Learning-rate schedule as an explicit state machine so it can be unit
// tested against scripted validation traces. Scores are "higher is better";
// observe() returns the lr for the next epoch and done() reports the stop
// condition (lr fell below the floor).
class PlateauSchedule {
public:
    PlateauSchedule(double lr0, double decay, int patience, double floor)
        : lr_(lr0), decay_(decay), patience_(patience), floor_(floor) {}

    double lr() const { return lr_; }
    bool done() const { return lr_ < floor_; }
    bool improved_last() const { return improved_last_; }

    // Ties count as stagnation; only a strict improvement resets the counter.
    void observe(double val_score) {
        if (!best_ || val_score > *best_) {
            best_ = val_score;
            stale_ = 0;
            improved_last_ = true;
            return;
        }
        improved_last_ = false;
        if (++stale_ >= patience_) {
            lr_ *= decay_;
            stale_ = 0;
        }
    }

private:
    double lr_;
    double decay_;
    int patience_;
    double floor_;
    std::optional<double> best_;
    int stale_ = 0;
    bool improved_last_ = false;
};

struct FoldSpec {
    std::vector<int> train_folds;
    int val_fold = -1;
    int test_fold = -1;
};

// Training follows the plateau schedule exactly: walks are resampled on
// every forward pass at ell_train, the validation metric is computed each
// epoch with a fixed held-out walk seed, and the best-validation model is
// retained. Classification maximizes accuracy; regression minimizes MAE
// (internally negated so that higher is better).
TrainResult train(const Dataset& ds, const FoldSpec& folds, const TrainConfig& cfg,
                  uint64_t seed,
                  const std::function<void(const EpochRecord&)>& on_epoch = nullptr);

// Score per walk seed on one fold; accuracy for classification, MAE for
// regression. Parameters are frozen.
std::vector<double> evaluate(CrawlNet& net, const Dataset& ds, const std::vector<int>& graph_ids,
                             const std::vector<uint64_t>& eval_seeds, int batch_size);

// Mean over models of the per-model standard deviation across evaluation
// seeds. scores: q x r grid (q models, r seeds). Population standard
// deviation throughout.
double imd(const std::vector<std::vector<double>>& scores);
// Standard deviation across models of the per-model mean.
double cmd(const std::vector<std::vector<double>>& scores);

struct KfoldResult {
    std::vector<std::vector<double>> test_scores;  // q x r grid
    std::vector<double> fold_means;
    double mean_score = 0.0;
    double imd_value = 0.0;
    double cmd_value = 0.0;
    std::vector<TrainResult> runs;
};

// Rotates each fold through the test position once; one fold serves as
// validation, the rest train.
KfoldResult kfold_run(const Dataset& ds, const TrainConfig& cfg, uint64_t seed,
                      const std::function<void(int fold, const EpochRecord&)>& on_epoch = nullptr);

struct AblationCell {
    std::string encodings;  // none | identity | adjacency | both
    WalkStrategy strategy;
    double mean_score = 0.0;
    double cmd_value = 0.0;
    double imd_value = 0.0;
};

// {none, identity, adjacency, both} x {uniform, non-backtracking}, each via
// the full k-fold protocol.
std::vector<AblationCell> ablation_matrix(const Dataset& ds, const TrainConfig& base_cfg,
                                          uint64_t seed);

// CSV with one row per epoch: epoch, lr, train_loss, val_score.
void write_history_csv(const std::vector<EpochRecord>& history, const std::string& path);

// {"scores": q x r grid, "imd": ..., "cmd": ..., "mean": ...}
std::string kfold_summary_json(const KfoldResult& result);

uint64_t file_fingerprint(const std::string& path);

}  // namespace crawl
