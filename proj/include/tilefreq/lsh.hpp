#pragma once

#include <cstdint>
#include <unordered_map>
#include <utility>
#include <vector>

#include "tilefreq/geo.hpp"
#include "tilefreq/metadata.hpp"

namespace tilefreq {

struct LshParams {
    double bucket_length = 20.0;
    int num_tables = 5;
    std::uint64_t seed = 0;
};

struct Neighbor {
    int site_id = 0;
    double distance = 0.0;  // exact Euclidean distance in projected meters
};

struct NeighborSet {
    int query_site_id = -1;  // -1 when the query was raw coordinates
    std::vector<Neighbor> neighbors;  // ascending distance, ties by ascending site id
    bool short_result = false;        // query_topk found fewer than k points
};

struct JoinPair {
    int site_a = 0;  // site_a < site_b
    int site_b = 0;
    double distance = 0.0;
};

// Bucketed random-projection LSH over projected plane coordinates. The
// bucket of a point in table t is floor(dot(point, direction_t) / bucketLength);
// queries probe the point's bucket plus the adjacent bucket on each side and
// post-filter every candidate by exact distance, so precision is 1.0 and only
// recall is approximate.
class LshIndex {
public:
    static LshIndex build(const std::vector<std::pair<int, PlanePoint>>& points,
                          const LshParams& params);

    NeighborSet query_radius(int site_id, double radius) const;
    NeighborSet query_radius(const PlanePoint& point, double radius) const;
    NeighborSet query_topk(int site_id, int k) const;
    NeighborSet query_topk(const PlanePoint& point, int k) const;

    // All unordered pairs within max_dist, ascending (site_a, site_b).
    std::vector<JoinPair> self_join(double max_dist) const;
    std::vector<JoinPair> self_join_serial(double max_dist) const;

    const LshParams& params() const { return params_; }
    std::size_t size() const { return ids_.size(); }
    const std::vector<int>& site_ids() const { return ids_; }
    bool contains(int site_id) const { return id_to_idx_.count(site_id) != 0; }
    PlanePoint point_of(int site_id) const;  // lookup error when unknown

    // exposed for tests: bucket of a point in a given table
    long long bucket_of(const PlanePoint& point, int table) const;

private:
    std::vector<int> candidates_ring(const PlanePoint& point, long long ring) const;
    NeighborSet filter_radius(const PlanePoint& point, double radius, int exclude_site) const;
    NeighborSet query_topk_impl(const PlanePoint& point, int k, int exclude_site) const;
    std::vector<JoinPair> join_rows(int idx, double max_dist) const;

    LshParams params_;
    std::vector<int> ids_;          // ascending site id
    std::vector<PlanePoint> pts_;   // parallel to ids_
    std::unordered_map<int, int> id_to_idx_;
    std::vector<std::pair<double, double>> directions_;  // unit vectors, one per table
    std::vector<std::unordered_map<long long, std::vector<int>>> tables_;
    std::vector<long long> min_bucket_, max_bucket_;  // per table, for ring exhaustion
};

void write_self_join_csv(const std::vector<JoinPair>& pairs, const std::string& path);
std::vector<JoinPair> read_self_join_csv(const std::string& path);

struct KnnMode {
    enum class Kind { radius, topk };
    Kind kind = Kind::topk;
    double radius = 0.0;
    int k = 10;

    static KnnMode by_radius(double r) { return {Kind::radius, r, 0}; }
    static KnnMode by_topk(int k) { return {Kind::topk, 0.0, k}; }
};

// Species ranked by descending occurrence count over the neighborhood's label
// rows, ties by ascending species id. The index must cover labeled sites only.
std::vector<int> knn_predict(const LshIndex& index, const LabelMatrix& labels,
                             int site_id, const KnnMode& mode);
std::vector<int> knn_predict(const LshIndex& index, const LabelMatrix& labels,
                             const PlanePoint& point, const KnnMode& mode);

// Union of the label rows of every indexed site within radius of site_id,
// including the site itself; dense 0/1 vector over labels.species_ids().
std::vector<std::uint8_t> aggregate_species_in_radius(const LabelMatrix& labels,
                                                      const LshIndex& index,
                                                      int site_id, double radius);

struct Triplet {
    int anchor = 0;
    int neighbor = 0;
    int distant = 0;
};

// (anchor, neighbor) sampled uniformly from self_join(max_dist) pairs
// restricted to sites_with_tiles; distant drawn from the other anchors of the
// same batch. Deterministic given seed.
std::vector<Triplet> sample_triplets(const LshIndex& index,
                                     const std::vector<int>& sites_with_tiles,
                                     int count, double max_dist, int batch_size,
                                     std::uint64_t seed);

}  // namespace tilefreq
