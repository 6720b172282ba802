#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "sthsep/config.hpp"
#include "sthsep/dataset.hpp"
#include "sthsep/metrics.hpp"
#include "sthsep/model.hpp"
#include "sthsep/train.hpp"

namespace sthsep {

inline constexpr int report_schema_version = 1;

struct PreparedData {
    SpatioTemporalDataset dataset;
    NormStats norm;
    std::vector<Window> train, val, test;  // normalized, each cut within its own split
    std::string data_hash;
    std::vector<std::string> warnings;
};

// 70/10/20 chronological split, train-only z-score, windows per split.
PreparedData prepare_data(const SpatioTemporalDataset& ds, const ModelConfig& cfg);

struct ForecastReport {
    std::uint64_t seed = 0;
    nlohmann::json config;
    Metrics val, test;
    std::map<std::string, Metrics> baselines;  // test split
    double runtime_s = 0;
    std::size_t best_epoch = 0;
    std::size_t epochs_run = 0;
    std::string history_hash;
    std::string data_hash;
    std::vector<std::string> warnings;
    std::string predictions_path;

    nlohmann::json to_json() const;
};

// Test-split baselines on de-normalized windows.
std::map<std::string, Metrics> evaluate_baselines(const PreparedData& data, std::vector<std::string>* warnings);

struct RunOptions {
    std::string out_dir;  // empty: nothing written
    bool verbose = false;
};

// Builds, trains and evaluates one model. With an output directory it
// writes report.json, predictions.csv and checkpoint.json there.
ForecastReport run_experiment(const ModelConfig& cfg, const PreparedData& data, const RunOptions& opts = {});

// Evaluates a trained model without training.
ForecastReport evaluate_model(Model& model, const PreparedData& data, const RunOptions& opts = {});

void write_predictions_csv(const std::string& path, const std::vector<Window>& windows,
                           const std::vector<Tensor>& predictions, const NormStats& norm);

struct AblationRow {
    std::string sweep;
    std::string setting;
    ForecastReport report;
};

// sweep is one of gamma, k, temporal. Every setting shares seed and data.
std::vector<AblationRow> ablate(const ModelConfig& base, const PreparedData& data, const std::string& sweep,
                                const std::vector<std::string>& settings, const RunOptions& opts = {});

void write_ablation_csv(const std::string& path, const std::vector<AblationRow>& rows);

std::vector<std::string> default_sweep(const std::string& sweep);

}  // namespace sthsep
