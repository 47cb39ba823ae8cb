#include "tilefreq/lsh.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <unordered_set>

#include "tilefreq/rng.hpp"

namespace tilefreq {

namespace {
constexpr std::uint64_t kDirectionStream = 0x6c736864697273ULL;  // "lshdirs"
constexpr std::uint64_t kTripletStream = 0x747269706c6574ULL;    // "triplet"

void sort_neighbors(std::vector<Neighbor>& ns) {
    std::sort(ns.begin(), ns.end(), [](const Neighbor& a, const Neighbor& b) {
        if (a.distance != b.distance) return a.distance < b.distance;
        return a.site_id < b.site_id;
    });
}
}  // namespace

LshIndex LshIndex::build(const std::vector<std::pair<int, PlanePoint>>& points,
                         const LshParams& params) {
    if (points.empty()) throw std::invalid_argument("LshIndex::build: no points");
    if (params.bucket_length <= 0.0) throw std::invalid_argument("LshIndex::build: bucketLength must be > 0");
    if (params.num_tables < 1) throw std::invalid_argument("LshIndex::build: numTables must be >= 1");
    for (const auto& [id, p] : points) {
        if (!std::isfinite(p.easting) || !std::isfinite(p.northing)) {
            throw std::invalid_argument("LshIndex::build: non-finite coordinates for site "
                                        + std::to_string(id));
        }
    }

    LshIndex index;
    index.params_ = params;

    std::vector<std::pair<int, PlanePoint>> sorted = points;
    std::sort(sorted.begin(), sorted.end(),
              [](const auto& a, const auto& b) { return a.first < b.first; });
    for (std::size_t i = 1; i < sorted.size(); ++i) {
        if (sorted[i].first == sorted[i - 1].first) {
            throw std::invalid_argument("LshIndex::build: duplicate siteId "
                                        + std::to_string(sorted[i].first));
        }
    }
    index.ids_.reserve(sorted.size());
    index.pts_.reserve(sorted.size());
    for (const auto& [id, p] : sorted) {
        index.id_to_idx_[id] = static_cast<int>(index.ids_.size());
        index.ids_.push_back(id);
        index.pts_.push_back(p);
    }

    Rng rng(params.seed, kDirectionStream);
    index.directions_.reserve(params.num_tables);
    for (int t = 0; t < params.num_tables; ++t) {
        double angle = rng.next_unit() * 2.0 * M_PI;
        index.directions_.emplace_back(std::cos(angle), std::sin(angle));
    }

    index.tables_.resize(params.num_tables);
    index.min_bucket_.assign(params.num_tables, 0);
    index.max_bucket_.assign(params.num_tables, 0);
    for (int t = 0; t < params.num_tables; ++t) {
        auto& table = index.tables_[t];
        for (std::size_t i = 0; i < index.pts_.size(); ++i) {
            long long b = index.bucket_of(index.pts_[i], t);
            table[b].push_back(static_cast<int>(i));
            if (i == 0) {
                index.min_bucket_[t] = index.max_bucket_[t] = b;
            } else {
                index.min_bucket_[t] = std::min(index.min_bucket_[t], b);
                index.max_bucket_[t] = std::max(index.max_bucket_[t], b);
            }
        }
    }
    return index;
}

long long LshIndex::bucket_of(const PlanePoint& point, int table) const {
    const auto& [dx, dy] = directions_[table];
    double dot = point.easting * dx + point.northing * dy;
    return static_cast<long long>(std::floor(dot / params_.bucket_length));
}

PlanePoint LshIndex::point_of(int site_id) const {
    auto it = id_to_idx_.find(site_id);
    if (it == id_to_idx_.end()) {
        throw std::out_of_range("unknown siteId " + std::to_string(site_id));
    }
    return pts_[it->second];
}

std::vector<int> LshIndex::candidates_ring(const PlanePoint& point, long long ring) const {
    std::vector<int> cands;
    for (int t = 0; t < params_.num_tables; ++t) {
        long long b0 = bucket_of(point, t);
        for (long long db = -ring; db <= ring; ++db) {
            auto it = tables_[t].find(b0 + db);
            if (it == tables_[t].end()) continue;
            cands.insert(cands.end(), it->second.begin(), it->second.end());
        }
    }
    std::sort(cands.begin(), cands.end());
    cands.erase(std::unique(cands.begin(), cands.end()), cands.end());
    return cands;
}

NeighborSet LshIndex::filter_radius(const PlanePoint& point, double radius, int exclude_site) const {
    NeighborSet out;
    out.query_site_id = exclude_site;
    for (int idx : candidates_ring(point, 1)) {
        if (ids_[idx] == exclude_site) continue;
        double d = planar_distance(point, pts_[idx]);
        if (d <= radius) out.neighbors.push_back({ids_[idx], d});
    }
    sort_neighbors(out.neighbors);
    return out;
}

NeighborSet LshIndex::query_radius(int site_id, double radius) const {
    if (radius <= 0.0) throw std::invalid_argument("query_radius: radius must be > 0");
    return filter_radius(point_of(site_id), radius, site_id);
}

NeighborSet LshIndex::query_radius(const PlanePoint& point, double radius) const {
    if (radius <= 0.0) throw std::invalid_argument("query_radius: radius must be > 0");
    return filter_radius(point, radius, -1);
}

NeighborSet LshIndex::query_topk(const PlanePoint& point, int k) const {
    if (k < 1) throw std::invalid_argument("query_topk: k must be >= 1");
    return query_topk_impl(point, k, -1);
}

NeighborSet LshIndex::query_topk(int site_id, int k) const {
    if (k < 1) throw std::invalid_argument("query_topk: k must be >= 1");
    return query_topk_impl(point_of(site_id), k, site_id);
}

NeighborSet LshIndex::query_topk_impl(const PlanePoint& point, int k, int exclude_site) const {
    // Probing +-r rings collects every point within projected distance
    // r * bucketLength on each table, and projections never exceed the true
    // distance; the k-th best exact distance is final once it drops under
    // that guarantee, so candidates can't be mere projection-slab mates.
    std::vector<int> cands;
    long long ring = 1;
    while (true) {
        cands = candidates_ring(point, ring);
        std::vector<double> dists;
        dists.reserve(cands.size());
        for (int idx : cands) {
            if (ids_[idx] != exclude_site) dists.push_back(planar_distance(point, pts_[idx]));
        }
        bool safe = false;
        if (static_cast<int>(dists.size()) >= k) {
            std::nth_element(dists.begin(), dists.begin() + (k - 1), dists.end());
            safe = dists[k - 1] <= static_cast<double>(ring) * params_.bucket_length;
        }
        bool exhausted = true;
        for (int t = 0; t < params_.num_tables; ++t) {
            long long b0 = bucket_of(point, t);
            if (b0 - ring > min_bucket_[t] || b0 + ring < max_bucket_[t]) {
                exhausted = false;
                break;
            }
        }
        if (safe || exhausted) break;
        ring *= 2;
    }

    NeighborSet out;
    out.query_site_id = exclude_site;
    for (int idx : cands) {
        if (ids_[idx] == exclude_site) continue;
        out.neighbors.push_back({ids_[idx], planar_distance(point, pts_[idx])});
    }
    sort_neighbors(out.neighbors);
    if (static_cast<int>(out.neighbors.size()) > k) out.neighbors.resize(k);
    out.short_result = static_cast<int>(out.neighbors.size()) < k;
    return out;
}

std::vector<JoinPair> LshIndex::join_rows(int idx, double max_dist) const {
    std::vector<JoinPair> rows;
    for (int cand : candidates_ring(pts_[idx], 1)) {
        if (cand <= idx) continue;  // ids_ ascending, so this keeps site_a < site_b
        double d = planar_distance(pts_[idx], pts_[cand]);
        if (d <= max_dist) rows.push_back({ids_[idx], ids_[cand], d});
    }
    return rows;
}

std::vector<JoinPair> LshIndex::self_join_serial(double max_dist) const {
    if (max_dist <= 0.0) throw std::invalid_argument("self_join: maxDist must be > 0");
    std::vector<JoinPair> out;
    for (int i = 0; i < static_cast<int>(ids_.size()); ++i) {
        std::vector<JoinPair> rows = join_rows(i, max_dist);
        out.insert(out.end(), rows.begin(), rows.end());
    }
    return out;
}

std::vector<JoinPair> LshIndex::self_join(double max_dist) const {
    if (max_dist <= 0.0) throw std::invalid_argument("self_join: maxDist must be > 0");
    const int n = static_cast<int>(ids_.size());
    std::vector<std::vector<JoinPair>> per_site(n);
#pragma omp parallel for schedule(dynamic, 64)
    for (int i = 0; i < n; ++i) per_site[i] = join_rows(i, max_dist);
    std::vector<JoinPair> out;
    std::size_t total = 0;
    for (const auto& rows : per_site) total += rows.size();
    out.reserve(total);
    for (const auto& rows : per_site) out.insert(out.end(), rows.begin(), rows.end());
    return out;
}

void write_self_join_csv(const std::vector<JoinPair>& pairs, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open for writing: " + path);
    out << "siteA,siteB,distanceMeters\n";
    char buf[64];
    for (const auto& p : pairs) {
        std::snprintf(buf, sizeof(buf), "%.17g", p.distance);
        out << p.site_a << ',' << p.site_b << ',' << buf << '\n';
    }
    if (!out) throw std::runtime_error("write failed: " + path);
}

std::vector<JoinPair> read_self_join_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open: " + path);
    std::string line;
    if (!std::getline(in, line) || line != "siteA,siteB,distanceMeters") {
        throw std::runtime_error("bad self-join header: " + path);
    }
    std::vector<JoinPair> pairs;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        JoinPair p;
        char* end = nullptr;
        p.site_a = static_cast<int>(std::strtol(line.c_str(), &end, 10));
        if (*end != ',') throw std::runtime_error("bad self-join row: " + line);
        p.site_b = static_cast<int>(std::strtol(end + 1, &end, 10));
        if (*end != ',') throw std::runtime_error("bad self-join row: " + line);
        p.distance = std::strtod(end + 1, &end);
        pairs.push_back(p);
    }
    return pairs;
}

namespace {
std::vector<int> rank_species(const LshIndex&, const LabelMatrix& labels,
                              const NeighborSet& neighbors) {
    std::unordered_map<int, int> counts;
    for (const Neighbor& nb : neighbors.neighbors) {
        for (int sp : labels.labels_of(nb.site_id)) ++counts[sp];
    }
    std::vector<std::pair<int, int>> ranked(counts.begin(), counts.end());  // (species, count)
    std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
        if (a.second != b.second) return a.second > b.second;
        return a.first < b.first;
    });
    std::vector<int> out;
    out.reserve(ranked.size());
    for (const auto& [sp, cnt] : ranked) out.push_back(sp);
    return out;
}

NeighborSet run_mode(const LshIndex& index, const PlanePoint& point, const KnnMode& mode) {
    if (mode.kind == KnnMode::Kind::radius) return index.query_radius(point, mode.radius);
    return index.query_topk(point, mode.k);
}
}  // namespace

std::vector<int> knn_predict(const LshIndex& index, const LabelMatrix& labels,
                             int site_id, const KnnMode& mode) {
    NeighborSet ns = (mode.kind == KnnMode::Kind::radius)
                         ? index.query_radius(site_id, mode.radius)
                         : index.query_topk(site_id, mode.k);
    return rank_species(index, labels, ns);
}

std::vector<int> knn_predict(const LshIndex& index, const LabelMatrix& labels,
                             const PlanePoint& point, const KnnMode& mode) {
    return rank_species(index, labels, run_mode(index, point, mode));
}

std::vector<std::uint8_t> aggregate_species_in_radius(const LabelMatrix& labels,
                                                      const LshIndex& index,
                                                      int site_id, double radius) {
    if (radius < 0.0) throw std::invalid_argument("aggregate_species_in_radius: radius must be >= 0");
    std::vector<std::uint8_t> dense(labels.species_ids().size(), 0);
    auto mark = [&](int site) {
        for (int sp : labels.labels_of(site)) {
            int j = labels.species_index(sp);
            if (j >= 0) dense[j] = 1;
        }
    };
    index.point_of(site_id);  // lookup error for unknown sites
    mark(site_id);
    if (radius > 0.0) {
        for (const Neighbor& nb : index.query_radius(site_id, radius).neighbors) mark(nb.site_id);
    }
    return dense;
}

std::vector<Triplet> sample_triplets(const LshIndex& index,
                                     const std::vector<int>& sites_with_tiles,
                                     int count, double max_dist, int batch_size,
                                     std::uint64_t seed) {
    if (count < 1) throw std::invalid_argument("sample_triplets: count must be >= 1");
    if (batch_size < 2) throw std::invalid_argument("sample_triplets: batchSize must be >= 2");
    if (sites_with_tiles.size() < 2) {
        throw std::invalid_argument("sample_triplets: need at least 2 sites with tiles");
    }
    std::unordered_set<int> tiled(sites_with_tiles.begin(), sites_with_tiles.end());
    std::vector<JoinPair> pairs;
    for (const JoinPair& p : index.self_join(max_dist)) {
        if (tiled.count(p.site_a) && tiled.count(p.site_b)) pairs.push_back(p);
    }
    if (pairs.empty()) {
        throw std::runtime_error("sample_triplets: no pairs within max distance");
    }

    Rng rng(seed, kTripletStream);
    std::vector<Triplet> out;
    out.reserve(count);
    std::vector<int> anchors(batch_size), neighbors(batch_size);
    int stalled_rounds = 0;
    while (static_cast<int>(out.size()) < count) {
        for (int j = 0; j < batch_size; ++j) {
            const JoinPair& p = pairs[rng.next_below(pairs.size())];
            bool flip = (rng.next_u64() & 1) != 0;
            anchors[j] = flip ? p.site_b : p.site_a;
            neighbors[j] = flip ? p.site_a : p.site_b;
        }
        std::size_t before = out.size();
        for (int j = 0; j < batch_size && static_cast<int>(out.size()) < count; ++j) {
            for (int attempt = 0; attempt < 64; ++attempt) {
                int l = static_cast<int>(rng.next_below(batch_size));
                if (l == j) continue;
                int distant = anchors[l];
                if (distant == anchors[j] || distant == neighbors[j]) continue;
                out.push_back({anchors[j], neighbors[j], distant});
                break;
            }
        }
        stalled_rounds = (out.size() == before) ? stalled_rounds + 1 : 0;
        if (stalled_rounds > 1000) {
            throw std::runtime_error("sample_triplets: cannot draw distinct distant tiles");
        }
    }
    return out;
}

}  // namespace tilefreq
