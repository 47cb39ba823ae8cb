#pragma once

#include <cstdint>
#include <unordered_map>
#include <utility>
#include <vector>

#include "tilefreq/dct.hpp"
#include "tilefreq/geo.hpp"
#include "tilefreq/metadata.hpp"

namespace tilefreq {

struct SynthConfig {
    int num_sites = 1000;
    int num_species = 50;
    int num_clusters = 10;
    double cluster_radius = 10000.0;  // meters
    int tile_size = 32;               // power of two
    int channels = 3;
    std::uint64_t seed = 0;
};

struct SynthDataset {
    std::vector<SurveyRecord> records;          // train occurrence rows + test rows
    LabelMatrix labels;                          // over train sites
    LabelMatrix truth;                           // held-out test-site ground truth
    std::vector<std::pair<int, Tile>> tiles;     // per site, ascending site id
    std::vector<int> train_site_ids, test_site_ids;  // ascending
    std::unordered_map<int, int> cluster_of;         // site id -> cluster index
    std::unordered_map<int, PlanePoint> position_of;  // site id -> projected coords
};

// Clustered sites in the validated core region, cluster-correlated species
// subsets, and smooth low-frequency sinusoid tiles whose parameters follow
// the cluster. A fixed 10% of sites (seeded shuffle) become test rows.
// Fully deterministic given config.seed.
SynthDataset synth_generate(const SynthConfig& config);

}  // namespace tilefreq
