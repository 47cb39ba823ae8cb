#include "tilefreq/synth.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "tilefreq/rng.hpp"

namespace tilefreq {

namespace {

constexpr std::uint64_t kCentroidStream = 1;
constexpr std::uint64_t kSiteStream = 2;
constexpr std::uint64_t kLabelStream = 3;
constexpr std::uint64_t kClusterTileStream = 4;
constexpr std::uint64_t kSiteTileStream = 5;
constexpr std::uint64_t kSplitStream = 6;
constexpr std::uint64_t kMetaStream = 7;

constexpr int kTileComponents = 3;
constexpr double kTestFraction = 0.1;
constexpr double kLabelProb = 0.7;

// Validated core of the projection: jittered cluster grid stays inside it.
constexpr double kOriginEasting = 3.65e6;
constexpr double kOriginNorthing = 2.55e6;

double unit(std::uint64_t seed, std::uint64_t stream, std::uint64_t counter) {
    return u64_to_unit(keyed_u64(seed, stream, counter));
}

void check_config(const SynthConfig& c) {
    if (c.num_sites < 1 || c.num_species < 1 || c.num_clusters < 1 || c.channels < 1) {
        throw std::invalid_argument("SynthConfig: counts must be positive");
    }
    if (c.cluster_radius <= 0.0) throw std::invalid_argument("SynthConfig: clusterRadius must be > 0");
    if (c.tile_size < 1 || (c.tile_size & (c.tile_size - 1)) != 0) {
        throw std::invalid_argument("SynthConfig: tileSize must be a power of two");
    }
}

}  // namespace

SynthDataset synth_generate(const SynthConfig& config) {
    check_config(config);
    const int n = config.num_sites;
    const int species = config.num_species;
    const int clusters = config.num_clusters;
    const std::uint64_t seed = config.seed;

    // jittered-grid centroids; cell size keeps neighboring clusters a few
    // radii apart but caps the total extent inside the core region
    const int grid = static_cast<int>(std::ceil(std::sqrt(static_cast<double>(clusters))));
    double cell = std::max(6.0 * config.cluster_radius, 25000.0);
    cell = std::min(cell, 800000.0 / grid);
    std::vector<PlanePoint> centroids(clusters);
    for (int c = 0; c < clusters; ++c) {
        int row = c / grid, col = c % grid;
        double jx = (unit(seed, kCentroidStream, 2 * c) - 0.5) * 0.3 * cell;
        double jy = (unit(seed, kCentroidStream, 2 * c + 1) - 0.5) * 0.3 * cell;
        centroids[c] = {kOriginEasting + (col + 0.5) * cell + jx,
                        kOriginNorthing + (row + 0.5) * cell + jy};
    }

    SynthDataset ds;
    std::vector<PlanePoint> positions(n);
    std::vector<int> site_of(n);
    for (int i = 0; i < n; ++i) {
        int c = i % clusters;
        double r = config.cluster_radius * std::sqrt(unit(seed, kSiteStream, 2 * i));
        double theta = 2.0 * M_PI * unit(seed, kSiteStream, 2 * i + 1);
        positions[i] = {centroids[c].easting + r * std::cos(theta),
                        centroids[c].northing + r * std::sin(theta)};
        site_of[i] = i + 1;  // site ids 1..n, ascending with i
        ds.cluster_of[site_of[i]] = c;
        ds.position_of[site_of[i]] = positions[i];
    }

    // cluster species blocks: contiguous (wrapping) ranges so nearby sites
    // share labels and distant clusters mostly do not
    const int block = std::min(species, std::max(3, (2 * species) / clusters));
    auto site_species = [&](int i) {
        int c = i % clusters;
        int start = static_cast<int>((static_cast<long long>(c) * species) / clusters);
        std::vector<int> out;
        for (int j = 0; j < block; ++j) {
            int sp = 1 + (start + j) % species;
            if (unit(seed, kLabelStream, static_cast<std::uint64_t>(i) * species + (sp - 1)) < kLabelProb) {
                out.push_back(sp);
            }
        }
        if (out.empty()) out.push_back(1 + start % species);
        std::sort(out.begin(), out.end());
        return out;
    };

    // seeded shuffle; the first ~10% of the permutation become test sites
    std::vector<int> perm(n);
    std::iota(perm.begin(), perm.end(), 0);
    Rng shuffle_rng(seed, kSplitStream);
    for (int i = n - 1; i > 0; --i) {
        int j = static_cast<int>(shuffle_rng.next_below(static_cast<std::uint64_t>(i) + 1));
        std::swap(perm[i], perm[j]);
    }
    int num_test = std::min(n - 1, std::max(1, static_cast<int>(std::lround(n * kTestFraction))));
    if (n == 1) num_test = 0;
    std::vector<char> is_test(n, 0);
    for (int t = 0; t < num_test; ++t) is_test[perm[t]] = 1;

    std::vector<std::pair<int, std::vector<int>>> truth_rows;
    for (int i = 0; i < n; ++i) {
        const PlanePoint& pos = positions[i];
        GeoPoint geo = inverse_laea(pos.easting, pos.northing);
        SurveyRecord base;
        base.survey_id = site_of[i];
        base.lat_proj = pos.northing;
        base.lon_proj = pos.easting;
        base.lat = geo.lat;
        base.lon = geo.lon;
        base.year = 2018 + (i % 4);
        double u_miss = unit(seed, kMetaStream, 2 * i);
        if (u_miss >= 0.1) {
            base.geo_uncertainty_m = 5.0 + 45.0 * unit(seed, kMetaStream, 2 * i + 1);
        }
        std::vector<int> sp = site_species(i);
        if (is_test[i]) {
            base.dataset = DatasetTag::PresenceAbsentTest;
            ds.records.push_back(base);
            ds.test_site_ids.push_back(site_of[i]);
            truth_rows.emplace_back(site_of[i], std::move(sp));
        } else {
            base.dataset = DatasetTag::PresenceAbsentTrain;
            for (int s : sp) {
                SurveyRecord rec = base;
                rec.species_id = s;
                ds.records.push_back(rec);
            }
            ds.train_site_ids.push_back(site_of[i]);
        }
    }
    std::vector<SurveyRecord> train_records;
    for (const SurveyRecord& r : ds.records) {
        if (r.dataset == DatasetTag::PresenceAbsentTrain) train_records.push_back(r);
    }
    ds.labels = build_label_matrix(train_records);
    ds.truth = LabelMatrix::from_rows(truth_rows);

    // smooth tiles: per channel a mixture of low-frequency separable
    // cosines; mixture parameters follow the cluster with a small per-site
    // perturbation, so tile content correlates with the species subset
    const int ts = config.tile_size;
    ds.tiles.reserve(n);
    for (int i = 0; i < n; ++i) {
        int c = i % clusters;
        Tile tile(config.channels, ts, ts);
        for (int ch = 0; ch < config.channels; ++ch) {
            double amp[kTileComponents], fu[kTileComponents], fv[kTileComponents];
            for (int j = 0; j < kTileComponents; ++j) {
                std::uint64_t cbase =
                    (static_cast<std::uint64_t>(c) * config.channels + ch) * kTileComponents + j;
                std::uint64_t sbase =
                    (static_cast<std::uint64_t>(i) * config.channels + ch) * kTileComponents + j;
                amp[j] = 0.5 + unit(seed, kClusterTileStream, 3 * cbase) +
                         0.15 * (unit(seed, kSiteTileStream, sbase) - 0.5);
                fu[j] = 2.5 * unit(seed, kClusterTileStream, 3 * cbase + 1);
                fv[j] = 2.5 * unit(seed, kClusterTileStream, 3 * cbase + 2);
            }
            for (int y = 0; y < ts; ++y) {
                for (int x = 0; x < ts; ++x) {
                    double v = 0.0;
                    for (int j = 0; j < kTileComponents; ++j) {
                        v += amp[j] * std::cos(M_PI * fu[j] * (y + 0.5) / ts) *
                             std::cos(M_PI * fv[j] * (x + 0.5) / ts);
                    }
                    tile.at(ch, y, x) = v;
                }
            }
        }
        ds.tiles.emplace_back(site_of[i], std::move(tile));
    }
    return ds;
}

}  // namespace tilefreq
