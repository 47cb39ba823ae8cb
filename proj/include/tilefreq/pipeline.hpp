#pragma once

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

#include "tilefreq/lsh.hpp"
#include "tilefreq/model.hpp"
#include "tilefreq/synth.hpp"
#include "tilefreq/train.hpp"

namespace tilefreq {

// Malformed configuration (exit code 2); everything else that goes wrong
// while running a task is a task failure (exit code 1).
struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

enum class DatasetMode { synthetic, csv };

struct PipelineConfig {
    std::filesystem::path work_dir;
    std::uint64_t seed = 0;

    DatasetMode mode = DatasetMode::synthetic;
    SynthConfig synth;  // synthetic mode (seed mirrors the pipeline seed)
    std::filesystem::path metadata_path;  // csv mode
    std::filesystem::path tiles_dir;      // csv mode, optional
    std::filesystem::path truth_path;     // csv mode, optional (evaluate)

    int codec_k = 8;
    std::vector<int> channel_selection;  // empty = keep all channels

    LshParams lsh;  // seed mirrors the pipeline seed
    std::vector<double> radii_km = {5.0, 10.0, 50.0};
    int lsh_topk = 10;
    double self_join_cutoff_km = 50.0;

    TrainConfig train;  // seed mirrors the pipeline seed
    Arch arch_geo = Arch::mlp256;
    int latent_dim = 256;
    int conv_channels = 16;
    int conv1_channels = 16;
    int triplet_count = 2000;
    int triplet_batch = 32;
    double triplet_max_dist_km = 100.0;
    bool multiobjective = false;
    double agg_radius_km = 5.0;

    std::string predict_source = "geo";  // geo | cnn | knn
    KnnMode knn_mode = KnnMode::by_topk(10);
};

// Parses the INI-style config; unknown sections/keys and malformed values
// raise ConfigError naming the [section].key path. The TILEFREQ_WORKDIR
// environment variable overrides [pipeline].workDir.
PipelineConfig load_config(const std::filesystem::path& path);

// Task names in topological order for this config's graph.
std::vector<std::string> pipeline_task_names(const PipelineConfig& config);

// Runs the target and its incomplete transitive dependencies; returns the
// number of tasks actually executed (0 when everything was up to date).
// ConfigError for an unknown target; std::runtime_error for task failures.
int run_pipeline(const PipelineConfig& config, const std::string& target);

// Topologically ordered plan listing with per-task status; no side effects.
std::string describe_pipeline(const PipelineConfig& config);

}  // namespace tilefreq
