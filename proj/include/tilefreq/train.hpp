#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "tilefreq/eval.hpp"
#include "tilefreq/geo.hpp"
#include "tilefreq/grid_io.hpp"
#include "tilefreq/losses.hpp"
#include "tilefreq/lsh.hpp"
#include "tilefreq/metadata.hpp"
#include "tilefreq/model.hpp"

namespace tilefreq {

struct TrainConfig {
    LossHyper loss;
    double learning_rate = 0.05;
    int batch_size = 32;
    int epochs = 10;
    double val_fraction = 0.1;
    std::uint64_t seed = 0;
    double geo_noise_mean_m = 5000.0;
    bool apply_geo_noise = false;  // jitter the first two feature dims (coords) of training batches
    PredictionMode prediction = PredictionMode::by_topk(20);
};

struct ClassifierData {
    std::vector<int> site_ids;                  // parallel to features
    std::vector<std::vector<double>> features;  // raw, unstandardized
    const LabelMatrix* labels = nullptr;
};

struct TrainReport {
    std::vector<double> train_loss;    // per epoch
    std::vector<double> val_micro_f1;  // per epoch (empty for tile2vec)
    ModelParams params;                // best epoch by validation micro-F1
    int best_epoch = -1;
    std::uint64_t seed = 0;
    double wall_seconds = 0.0;
    // standardization stats, computed from the training split only
    std::vector<double> feature_mean, feature_std;
    std::vector<int> train_sites, val_sites;  // ascending site ids
};

// Isotropic Gaussian jitter with per-axis sigma = meanMeters / sqrt(pi/2),
// so the expected displacement magnitude equals meanMeters.
std::vector<PlanePoint> geo_noise(std::span<const PlanePoint> coords, double mean_meters,
                                  std::uint64_t seed);

// Seeded 90-10 site-level split, training-split standardization, minibatch
// SGD on the configured loss, per-epoch validation micro-F1 under the
// configured prediction mode; returns best-epoch parameters.
TrainReport train_classifier(const ClassifierData& data, const ArchSpec& arch,
                             const TrainConfig& config);

struct Tile2VecData {
    std::vector<CoeffRecord> tiles;
    std::vector<Triplet> triplets;
    // optional multiobjective term: ASL on a linear probe against these
    // dense per-site label rows (length = arch.num_classes)
    const std::unordered_map<int, std::vector<double>>* aggregated_labels = nullptr;
};

// SGD on the triplet loss over the tileCnn encoder (pre-ReLU latent); adds
// the ASL probe term when aggregated labels are provided.
TrainReport train_tile2vec(const Tile2VecData& data, const ArchSpec& arch,
                           const TrainConfig& config);

// CSV `epoch,trainLoss,valMicroF1` (valMicroF1 left empty when absent).
void write_train_report_csv(const TrainReport& report, const std::string& path);

// Standardize features with the report's training statistics.
std::vector<double> standardize(const TrainReport& report, std::span<const double> raw);

}  // namespace tilefreq
