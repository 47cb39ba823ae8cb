#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <set>
#include <stdexcept>
#include <vector>

#include <doctest.h>

#include "oracles.hpp"
#include "tilefreq/lsh.hpp"
#include "tilefreq/rng.hpp"

using namespace tilefreq;

namespace {

std::vector<std::pair<int, PlanePoint>> uniform_points(int n, double extent,
                                                       std::uint64_t seed) {
    Rng rng(seed, 40);
    std::vector<std::pair<int, PlanePoint>> pts;
    pts.reserve(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
        pts.push_back({i + 1, PlanePoint{rng.next_in(0.0, extent), rng.next_in(0.0, extent)}});
    }
    return pts;
}

std::vector<int> ids_of(const NeighborSet& ns) {
    std::vector<int> out;
    for (const Neighbor& n : ns.neighbors) out.push_back(n.site_id);
    return out;
}

}  // namespace

TEST_CASE("bucket assignment uses floor, not truncation") {
    // floor(-x) != -floor(x) for non-integral x: for nearly every random
    // point, bucket(p) + bucket(-p) == -1; truncation would give 0
    auto pts = uniform_points(50, 10000.0, 1);
    LshParams params;
    params.bucket_length = 20.0;
    params.seed = 3;
    LshIndex index = LshIndex::build(pts, params);
    int checked = 0;
    for (const auto& [id, p] : pts) {
        for (int t = 0; t < params.num_tables; ++t) {
            PlanePoint neg{-p.easting, -p.northing};
            long long b = index.bucket_of(p, t);
            long long bn = index.bucket_of(neg, t);
            CHECK(b + bn == -1);
            ++checked;
        }
    }
    CHECK(checked == 250);
}

TEST_CASE("bucket index scales with the projection length") {
    // dot = 45 at bucketLength 20 -> bucket 2; dot = -45 -> bucket -3
    CHECK(std::floor(45.0 / 20.0) == 2.0);
    CHECK(std::floor(-45.0 / 20.0) == -3.0);
    // the index must agree for points scaled along a fixed direction: scaling
    // point coordinates scales the dot product, so bucket(c*p) is monotone
    auto pts = uniform_points(3, 1000.0, 2);
    LshParams params;
    params.bucket_length = 50.0;
    LshIndex index = LshIndex::build(pts, params);
    PlanePoint base{400.0, 300.0};
    for (int t = 0; t < params.num_tables; ++t) {
        CHECK(index.bucket_of(PlanePoint{0.0, 0.0}, t) == 0);  // dot = 0 -> floor(0) = 0
        // the sign of dot(base, direction) is the table's private coin flip,
        // so the scan is monotone in one direction or the other
        std::vector<long long> buckets;
        for (double c : {-2.0, -1.0, -0.5, 0.5, 1.0, 2.0}) {
            buckets.push_back(index.bucket_of(PlanePoint{base.easting * c, base.northing * c}, t));
        }
        CHECK((std::is_sorted(buckets.begin(), buckets.end()) ||
               std::is_sorted(buckets.rbegin(), buckets.rend())));
    }
}

TEST_CASE("radius queries are exact-precision and high-recall vs brute force") {
    const double extent = 1000.0;  // 1 km square
    const double radius = 200.0;
    auto pts = uniform_points(100, extent, 3);
    LshParams params;
    params.bucket_length = 200.0;
    params.seed = 7;
    LshIndex index = LshIndex::build(pts, params);

    int found = 0, actual = 0;
    for (const auto& [id, p] : pts) {
        NeighborSet ns = index.query_radius(id, radius);
        CHECK(ns.query_site_id == id);
        for (const Neighbor& n : ns.neighbors) {
            CHECK(n.distance <= radius);  // precision 1.0
            CHECK(n.site_id != id);
            CHECK(n.distance ==
                  doctest::Approx(oracles::plane_dist(p, index.point_of(n.site_id))));
        }
        auto brute = oracles::brute_radius(pts, p, radius, id);
        found += static_cast<int>(ns.neighbors.size());
        actual += static_cast<int>(brute.size());
        // every reported neighbor is a true neighbor
        std::set<int> truth(brute.begin(), brute.end());
        for (int sid : ids_of(ns)) CHECK(truth.count(sid) == 1);
    }
    REQUIRE(actual > 0);
    CHECK(static_cast<double>(found) / actual >= 0.95);
}

TEST_CASE("radius query results are sorted by distance then id") {
    auto pts = uniform_points(200, 500.0, 4);
    LshParams params;
    params.bucket_length = 500.0;
    LshIndex index = LshIndex::build(pts, params);
    NeighborSet ns = index.query_radius(PlanePoint{250.0, 250.0}, 300.0);
    for (std::size_t i = 1; i < ns.neighbors.size(); ++i) {
        const Neighbor& a = ns.neighbors[i - 1];
        const Neighbor& b = ns.neighbors[i];
        CHECK((a.distance < b.distance ||
               (a.distance == b.distance && a.site_id < b.site_id)));
    }
}

TEST_CASE("topk expands its ring until it finds the true nearest neighbors") {
    // bucketLength much smaller than typical spacing forces ring expansion
    auto pts = uniform_points(300, 10000.0, 5);
    LshParams params;
    params.bucket_length = 20.0;
    params.seed = 11;
    LshIndex index = LshIndex::build(pts, params);

    for (int rep = 0; rep < 20; ++rep) {
        const auto& [qid, qp] = pts[static_cast<std::size_t>(rep * 7)];
        NeighborSet ns = index.query_topk(qid, 5);
        CHECK(ns.neighbors.size() == 5);
        CHECK_FALSE(ns.short_result);
        auto brute = oracles::brute_topk(pts, qp, 5, qid);
        CHECK(ids_of(ns) == brute);
    }
}

TEST_CASE("topk on a raw point includes every indexed site and flags short results") {
    auto pts = uniform_points(3, 100.0, 6);
    LshParams params;
    params.bucket_length = 50.0;
    LshIndex index = LshIndex::build(pts, params);
    NeighborSet ns = index.query_topk(PlanePoint{50.0, 50.0}, 10);
    CHECK(ns.query_site_id == -1);
    CHECK(ns.neighbors.size() == 3);
    CHECK(ns.short_result);
}

TEST_CASE("self-join on a tight cluster yields the complete graph") {
    std::vector<std::pair<int, PlanePoint>> pts;
    for (int i = 0; i < 6; ++i) {
        pts.push_back({i + 1, PlanePoint{100.0 + i * 2.0, 200.0 + (i % 2)}});
    }
    LshParams params;
    params.bucket_length = 100.0;  // >= diameter
    LshIndex index = LshIndex::build(pts, params);
    auto pairs = index.self_join(100.0);
    CHECK(pairs.size() == 15);  // 6*5/2
    for (const JoinPair& jp : pairs) {
        CHECK(jp.site_a < jp.site_b);
        CHECK(jp.distance <= 100.0);
    }
    // ascending (site_a, site_b)
    for (std::size_t i = 1; i < pairs.size(); ++i) {
        CHECK((pairs[i - 1].site_a < pairs[i].site_a ||
               (pairs[i - 1].site_a == pairs[i].site_a &&
                pairs[i - 1].site_b < pairs[i].site_b)));
    }
}

TEST_CASE("two points sixty kilometers apart do not join at a fifty km cutoff") {
    std::vector<std::pair<int, PlanePoint>> pts{
        {1, PlanePoint{0.0, 0.0}},
        {2, PlanePoint{60000.0, 0.0}},
    };
    LshParams params;
    params.bucket_length = 100000.0;
    LshIndex index = LshIndex::build(pts, params);
    CHECK(index.self_join(50000.0).empty());
    CHECK(index.self_join(60000.0).size() == 1);
}

TEST_CASE("parallel self-join is bit-identical to the serial reference") {
    auto pts = uniform_points(2000, 20000.0, 8);
    LshParams params;
    params.bucket_length = 1000.0;
    params.seed = 2;
    LshIndex index = LshIndex::build(pts, params);
    auto par = index.self_join(1000.0);
    auto ser = index.self_join_serial(1000.0);
    REQUIRE(par.size() == ser.size());
    for (std::size_t i = 0; i < par.size(); ++i) {
        CHECK(par[i].site_a == ser[i].site_a);
        CHECK(par[i].site_b == ser[i].site_b);
        CHECK(par[i].distance == ser[i].distance);
    }
}

TEST_CASE("self-join csv round-trips") {
    auto pts = uniform_points(50, 1000.0, 9);
    LshParams params;
    params.bucket_length = 500.0;
    LshIndex index = LshIndex::build(pts, params);
    auto pairs = index.self_join(400.0);
    REQUIRE_FALSE(pairs.empty());

    auto dir = std::filesystem::temp_directory_path() / "tilefreq_lsh_tests";
    std::filesystem::create_directories(dir);
    std::string path = (dir / "join.csv").string();
    write_self_join_csv(pairs, path);

    std::ifstream in(path);
    std::string header;
    REQUIRE(std::getline(in, header));
    CHECK(header == "siteA,siteB,distanceMeters");

    auto back = read_self_join_csv(path);
    REQUIRE(back.size() == pairs.size());
    for (std::size_t i = 0; i < pairs.size(); ++i) {
        CHECK(back[i].site_a == pairs[i].site_a);
        CHECK(back[i].site_b == pairs[i].site_b);
        CHECK(back[i].distance == pairs[i].distance);  // %.17g round-trip
    }
}

TEST_CASE("build input validation") {
    LshParams params;
    CHECK_THROWS_AS(LshIndex::build({}, params), std::invalid_argument);
    CHECK_THROWS_AS(LshIndex::build({{1, PlanePoint{0, 0}}, {1, PlanePoint{1, 1}}}, params),
                    std::invalid_argument);
    double nan = std::nan("");
    CHECK_THROWS_AS(LshIndex::build({{1, PlanePoint{nan, 0}}}, params),
                    std::invalid_argument);
    LshParams bad = params;
    bad.bucket_length = 0.0;
    CHECK_THROWS_AS(LshIndex::build({{1, PlanePoint{0, 0}}}, bad), std::invalid_argument);
    CHECK_THROWS_AS(LshIndex::build({{1, PlanePoint{0, 0}}}, params).query_radius(2, 10.0),
                    std::out_of_range);
}

TEST_CASE("knn_predict ranks species by neighborhood frequency") {
    // three labeled sites near the query, one far away
    std::vector<std::pair<int, PlanePoint>> pts{
        {1, PlanePoint{0.0, 0.0}},
        {2, PlanePoint{10.0, 0.0}},
        {3, PlanePoint{0.0, 10.0}},
        {4, PlanePoint{100000.0, 100000.0}},
    };
    LabelMatrix labels = LabelMatrix::from_rows({
        {1, {7, 9}},
        {2, {7}},
        {3, {9, 11}},
        {4, {500}},
    });
    LshParams params;
    params.bucket_length = 1000.0;
    LshIndex index = LshIndex::build(pts, params);

    // top-3 neighbors of a nearby point: sites 1, 2, 3
    // counts: species 7 -> 2, 9 -> 2, 11 -> 1; ties by ascending id
    auto ranked = knn_predict(index, labels, PlanePoint{1.0, 1.0}, KnnMode::by_topk(3));
    CHECK(ranked == std::vector<int>{7, 9, 11});

    // radius mode: everything within 50 m of site 1 (sites 2 and 3 plus itself)
    auto by_radius = knn_predict(index, labels, 1, KnnMode::by_radius(50.0));
    CHECK(by_radius == std::vector<int>{7, 9, 11});
}

TEST_CASE("aggregate_species_in_radius unions label rows, radius zero keeps own labels") {
    std::vector<std::pair<int, PlanePoint>> pts{
        {1, PlanePoint{0.0, 0.0}},
        {2, PlanePoint{30.0, 0.0}},
    };
    LabelMatrix labels = LabelMatrix::from_rows({{1, {5}}, {2, {6}}});
    LshParams params;
    params.bucket_length = 100.0;
    LshIndex index = LshIndex::build(pts, params);

    auto own = aggregate_species_in_radius(labels, index, 1, 0.0);
    CHECK(own == std::vector<std::uint8_t>{1, 0});
    auto both = aggregate_species_in_radius(labels, index, 1, 40.0);
    CHECK(both == std::vector<std::uint8_t>{1, 1});
    CHECK_THROWS_AS(aggregate_species_in_radius(labels, index, 99, 10.0), std::out_of_range);
}

TEST_CASE("triplet sampling is deterministic and respects the pair cutoff") {
    auto pts = uniform_points(80, 2000.0, 10);
    LshParams params;
    params.bucket_length = 500.0;
    params.seed = 5;
    LshIndex index = LshIndex::build(pts, params);
    std::vector<int> with_tiles;
    for (int i = 1; i <= 80; i += 2) with_tiles.push_back(i);  // odd ids only

    auto a = sample_triplets(index, with_tiles, 200, 400.0, 16, 42);
    auto b = sample_triplets(index, with_tiles, 200, 400.0, 16, 42);
    REQUIRE(a.size() == 200);
    for (std::size_t i = 0; i < a.size(); ++i) {
        CHECK(a[i].anchor == b[i].anchor);
        CHECK(a[i].neighbor == b[i].neighbor);
        CHECK(a[i].distant == b[i].distant);
    }

    std::set<int> tiled(with_tiles.begin(), with_tiles.end());
    auto join = index.self_join(400.0);
    std::set<std::pair<int, int>> allowed;
    for (const JoinPair& jp : join) {
        if (tiled.count(jp.site_a) && tiled.count(jp.site_b)) {
            allowed.insert({jp.site_a, jp.site_b});
        }
    }
    for (const Triplet& t : a) {
        CHECK(tiled.count(t.anchor) == 1);
        CHECK(tiled.count(t.neighbor) == 1);
        CHECK(tiled.count(t.distant) == 1);
        CHECK(t.anchor != t.neighbor);
        CHECK(t.distant != t.anchor);
        CHECK(t.distant != t.neighbor);
        auto key = std::pair{std::min(t.anchor, t.neighbor), std::max(t.anchor, t.neighbor)};
        CHECK(allowed.count(key) == 1);
    }

    auto c = sample_triplets(index, with_tiles, 200, 400.0, 16, 43);
    bool any_diff = false;
    for (std::size_t i = 0; i < c.size(); ++i) {
        if (c[i].anchor != a[i].anchor || c[i].neighbor != a[i].neighbor) any_diff = true;
    }
    CHECK(any_diff);  // different seed, different draw
}
