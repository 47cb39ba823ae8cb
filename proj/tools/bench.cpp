// Benchmarks the OpenMP kernels against their serial reference
// implementations and verifies the outputs are bit-identical.

#include <chrono>
#include <cstdio>
#include <vector>

#include <CLI11.hpp>

#include "tilefreq/dct.hpp"
#include "tilefreq/geo.hpp"
#include "tilefreq/lsh.hpp"
#include "tilefreq/rng.hpp"

using namespace tilefreq;

namespace {

double seconds_since(std::chrono::steady_clock::time_point start) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

bool blocks_equal(const std::vector<CoeffBlock>& a, const std::vector<CoeffBlock>& b) {
    if (a.size() != b.size()) return false;
    for (std::size_t i = 0; i < a.size(); ++i) {
        if (a[i].channels != b[i].channels || a[i].k != b[i].k ||
            a[i].coeffs != b[i].coeffs) {
            return false;
        }
    }
    return true;
}

bool pairs_equal(const std::vector<JoinPair>& a, const std::vector<JoinPair>& b) {
    if (a.size() != b.size()) return false;
    for (std::size_t i = 0; i < a.size(); ++i) {
        if (a[i].site_a != b[i].site_a || a[i].site_b != b[i].site_b ||
            a[i].distance != b[i].distance) {
            return false;
        }
    }
    return true;
}

void report(const char* name, double serial_s, double parallel_s, bool identical) {
    std::printf("%-18s serial %8.3f s   parallel %8.3f s   speedup %5.2fx   %s\n", name,
                serial_s, parallel_s, parallel_s > 0 ? serial_s / parallel_s : 0.0,
                identical ? "bit-identical" : "MISMATCH");
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"serial vs OpenMP kernel benchmark"};
    int num_tiles = 256;
    int tile_size = 64;
    int k = 8;
    int num_points = 20000;
    std::uint64_t seed = 0;
    app.add_option("--tiles", num_tiles, "number of tiles to compress");
    app.add_option("--tile-size", tile_size, "tile height/width");
    app.add_option("--k", k, "coefficient block size");
    app.add_option("--points", num_points, "number of points for the self-join");
    app.add_option("--seed", seed, "rng seed");
    CLI11_PARSE(app, argc, argv);

    bool ok = true;

    {
        Rng rng(seed, 100);
        std::vector<Tile> tiles;
        tiles.reserve(static_cast<std::size_t>(num_tiles));
        for (int t = 0; t < num_tiles; ++t) {
            Tile tile(3, tile_size, tile_size);
            for (double& v : tile.values) v = rng.next_in(-1.0, 1.0);
            tiles.push_back(std::move(tile));
        }

        auto t0 = std::chrono::steady_clock::now();
        auto serial = compress_tiles_serial(tiles, k);
        double serial_s = seconds_since(t0);

        t0 = std::chrono::steady_clock::now();
        auto parallel = compress_tiles(tiles, k);
        double parallel_s = seconds_since(t0);

        bool identical = blocks_equal(serial, parallel);
        ok = ok && identical;
        report("compress_tiles", serial_s, parallel_s, identical);
    }

    {
        Rng rng(seed, 101);
        std::vector<std::pair<int, PlanePoint>> pts;
        pts.reserve(static_cast<std::size_t>(num_points));
        for (int i = 0; i < num_points; ++i) {
            pts.push_back({i + 1, PlanePoint{rng.next_in(0.0, 100000.0),
                                             rng.next_in(0.0, 100000.0)}});
        }
        LshParams params;
        params.bucket_length = 2000.0;
        params.num_tables = 5;
        params.seed = seed;
        LshIndex index = LshIndex::build(pts, params);
        const double cutoff = 2000.0;

        auto t0 = std::chrono::steady_clock::now();
        auto serial = index.self_join_serial(cutoff);
        double serial_s = seconds_since(t0);

        t0 = std::chrono::steady_clock::now();
        auto parallel = index.self_join(cutoff);
        double parallel_s = seconds_since(t0);

        bool identical = pairs_equal(serial, parallel);
        ok = ok && identical;
        report("lsh_self_join", serial_s, parallel_s, identical);
    }

    if (!ok) {
        std::fprintf(stderr, "kernel outputs diverged from the serial reference\n");
        return 1;
    }
    return 0;
}
