#include "tilefreq/dct.hpp"

#include <cmath>
#include <map>
#include <memory>
#include <mutex>
#include <stdexcept>
#include <string>

namespace tilefreq {

namespace {

// Largest transform length served by the cached-basis matrix multiply.
// Longer signals (the row-major flattened 1D path) go through the direct
// table-based summation, which needs no n x n matrix.
constexpr int kMatmulMax = 2048;

double scale0(int n) { return std::sqrt(1.0 / n); }
double scale(int n) { return std::sqrt(2.0 / n); }

// Row-major n x n orthonormal DCT-II basis: row k holds the k-th analysis
// vector. Entries never leave the cache, so returned references stay valid.
const std::vector<double>& cached_basis(int n) {
    static std::mutex mu;
    static std::map<int, std::unique_ptr<std::vector<double>>> cache;
    std::lock_guard<std::mutex> lock(mu);
    auto& slot = cache[n];
    if (!slot) {
        auto b = std::make_unique<std::vector<double>>(static_cast<std::size_t>(n) * n);
        double s0 = scale0(n), s = scale(n);
        for (int k = 0; k < n; ++k) {
            double sk = (k == 0) ? s0 : s;
            for (int i = 0; i < n; ++i) {
                (*b)[static_cast<std::size_t>(k) * n + i] =
                    sk * std::cos(M_PI * (2.0 * i + 1.0) * k / (2.0 * n));
            }
        }
        slot = std::move(b);
    }
    return *slot;
}

// cos(pi * t / (2n)) for t in [0, 4n): one full period, exact at every index
// ever touched by ((2i+1)k) mod 4n.
std::vector<double> cos_table(int n) {
    std::vector<double> table(static_cast<std::size_t>(4) * n);
    for (int t = 0; t < 4 * n; ++t) {
        table[t] = std::cos(M_PI * t / (2.0 * n));
    }
    return table;
}

std::vector<double> dct_direct(std::span<const double> x) {
    const int n = static_cast<int>(x.size());
    const int period = 4 * n;
    std::vector<double> table = cos_table(n);
    std::vector<double> out(n);
    const double s0 = scale0(n), s = scale(n);
#pragma omp parallel for schedule(static)
    for (int k = 0; k < n; ++k) {
        int step = (2 * k) % period;
        int idx = k;  // (2*0+1)*k
        double acc = 0.0;
        for (int i = 0; i < n; ++i) {
            acc += x[i] * table[idx];
            idx += step;
            if (idx >= period) idx -= period;
        }
        out[k] = acc * (k == 0 ? s0 : s);
    }
    return out;
}

std::vector<double> idct_direct(std::span<const double> y) {
    const int n = static_cast<int>(y.size());
    const int period = 4 * n;
    std::vector<double> table = cos_table(n);
    std::vector<double> scaled(n);
    const double s0 = scale0(n), s = scale(n);
    for (int k = 0; k < n; ++k) scaled[k] = y[k] * (k == 0 ? s0 : s);
    std::vector<double> out(n);
#pragma omp parallel for schedule(static)
    for (int i = 0; i < n; ++i) {
        int step = (2 * i + 1) % period;
        int idx = 0;
        double acc = 0.0;
        for (int k = 0; k < n; ++k) {
            acc += scaled[k] * table[idx];
            idx += step;
            if (idx >= period) idx -= period;
        }
        out[i] = acc;
    }
    return out;
}

void check_plane(std::span<const double> plane, int h, int w, const char* who) {
    if (h < 1 || w < 1) {
        throw std::invalid_argument(std::string(who) + ": empty plane");
    }
    if (h > kMatmulMax || w > kMatmulMax) {
        throw std::invalid_argument(std::string(who) + ": plane dimension exceeds "
                                    + std::to_string(kMatmulMax));
    }
    if (plane.size() != static_cast<std::size_t>(h) * w) {
        throw std::invalid_argument(std::string(who) + ": plane size does not match dims");
    }
}

// T = X * Bw^T restricted to the first kcols coefficients per row.
void row_pass(std::span<const double> x, const std::vector<double>& bw,
              int h, int w, int kcols, std::vector<double>& t) {
    t.assign(static_cast<std::size_t>(h) * kcols, 0.0);
    for (int y = 0; y < h; ++y) {
        const double* row = x.data() + static_cast<std::size_t>(y) * w;
        for (int k = 0; k < kcols; ++k) {
            const double* bk = bw.data() + static_cast<std::size_t>(k) * w;
            double acc = 0.0;
            for (int xx = 0; xx < w; ++xx) acc += row[xx] * bk[xx];
            t[static_cast<std::size_t>(y) * kcols + k] = acc;
        }
    }
}

// out = Bh * T restricted to the first krows output rows.
void col_pass(const std::vector<double>& t, const std::vector<double>& bh,
              int h, int kcols, int krows, std::vector<double>& out) {
    out.assign(static_cast<std::size_t>(krows) * kcols, 0.0);
    for (int m = 0; m < krows; ++m) {
        const double* bm = bh.data() + static_cast<std::size_t>(m) * h;
        for (int k = 0; k < kcols; ++k) {
            double acc = 0.0;
            for (int y = 0; y < h; ++y) acc += bm[y] * t[static_cast<std::size_t>(y) * kcols + k];
            out[static_cast<std::size_t>(m) * kcols + k] = acc;
        }
    }
}

}  // namespace

std::vector<double> dct1d(std::span<const double> signal) {
    if (signal.empty()) {
        throw std::invalid_argument("dct1d: empty input");
    }
    const int n = static_cast<int>(signal.size());
    if (n > kMatmulMax) {
        return dct_direct(signal);
    }
    const auto& b = cached_basis(n);
    std::vector<double> out(n);
    for (int k = 0; k < n; ++k) {
        const double* bk = b.data() + static_cast<std::size_t>(k) * n;
        double acc = 0.0;
        for (int i = 0; i < n; ++i) acc += signal[i] * bk[i];
        out[k] = acc;
    }
    return out;
}

std::vector<double> idct1d(std::span<const double> coeffs) {
    if (coeffs.empty()) {
        throw std::invalid_argument("idct1d: empty input");
    }
    const int n = static_cast<int>(coeffs.size());
    if (n > kMatmulMax) {
        return idct_direct(coeffs);
    }
    const auto& b = cached_basis(n);
    std::vector<double> out(n, 0.0);
    for (int k = 0; k < n; ++k) {
        double c = coeffs[k];
        if (c == 0.0) continue;
        const double* bk = b.data() + static_cast<std::size_t>(k) * n;
        for (int i = 0; i < n; ++i) out[i] += c * bk[i];
    }
    return out;
}

std::vector<double> dct2d(std::span<const double> plane, int h, int w) {
    check_plane(plane, h, w, "dct2d");
    const auto& bh = cached_basis(h);
    const auto& bw = cached_basis(w);
    std::vector<double> t, out;
    row_pass(plane, bw, h, w, w, t);
    col_pass(t, bh, h, w, h, out);
    return out;
}

std::vector<double> idct2d(std::span<const double> coeffs, int h, int w) {
    check_plane(coeffs, h, w, "idct2d");
    const auto& bh = cached_basis(h);
    const auto& bw = cached_basis(w);
    // T = Y * Bw (synthesis along rows)
    std::vector<double> t(static_cast<std::size_t>(h) * w, 0.0);
    for (int y = 0; y < h; ++y) {
        const double* yrow = coeffs.data() + static_cast<std::size_t>(y) * w;
        double* trow = t.data() + static_cast<std::size_t>(y) * w;
        for (int k = 0; k < w; ++k) {
            double c = yrow[k];
            if (c == 0.0) continue;
            const double* bk = bw.data() + static_cast<std::size_t>(k) * w;
            for (int x = 0; x < w; ++x) trow[x] += c * bk[x];
        }
    }
    // out = Bh^T * T (synthesis along columns)
    std::vector<double> out(static_cast<std::size_t>(h) * w, 0.0);
    for (int m = 0; m < h; ++m) {
        const double* trow = t.data() + static_cast<std::size_t>(m) * w;
        const double* bm = bh.data() + static_cast<std::size_t>(m) * h;
        for (int i = 0; i < h; ++i) {
            double c = bm[i];
            double* orow = out.data() + static_cast<std::size_t>(i) * w;
            for (int x = 0; x < w; ++x) orow[x] += c * trow[x];
        }
    }
    return out;
}

CoeffBlock lowpass2d(const Tile& tile, int k) {
    if (k < 1 || k > tile.height || k > tile.width) {
        throw std::invalid_argument("lowpass2d: k must be in [1, min(height, width)]");
    }
    CoeffBlock block(tile.channels, k, tile.height, tile.width);
    const auto& bh = cached_basis(tile.height);
    const auto& bw = cached_basis(tile.width);
    std::vector<double> t, corner;
    for (int c = 0; c < tile.channels; ++c) {
        row_pass(tile.plane(c), bw, tile.height, tile.width, k, t);
        col_pass(t, bh, tile.height, k, k, corner);
        std::copy(corner.begin(), corner.end(),
                  block.coeffs.begin() + static_cast<std::size_t>(c) * k * k);
    }
    return block;
}

Tile reconstruct(const CoeffBlock& block) {
    Tile tile(block.channels, block.source_height, block.source_width);
    std::vector<double> full(static_cast<std::size_t>(block.source_height) * block.source_width);
    for (int c = 0; c < block.channels; ++c) {
        std::fill(full.begin(), full.end(), 0.0);
        for (int i = 0; i < block.k; ++i) {
            for (int j = 0; j < block.k; ++j) {
                full[static_cast<std::size_t>(i) * block.source_width + j] = block.at(c, i, j);
            }
        }
        std::vector<double> plane = idct2d(full, block.source_height, block.source_width);
        std::copy(plane.begin(), plane.end(), tile.plane(c).begin());
    }
    return tile;
}

std::vector<std::vector<double>> lowpass1d_rowmajor(const Tile& tile, int n) {
    const int len = tile.height * tile.width;
    if (n < 1 || n > len) {
        throw std::invalid_argument("lowpass1d_rowmajor: n must be in [1, height*width]");
    }
    std::vector<std::vector<double>> out(tile.channels);
    for (int c = 0; c < tile.channels; ++c) {
        std::vector<double> coeffs = dct1d(tile.plane(c));
        coeffs.resize(n);
        out[c] = std::move(coeffs);
    }
    return out;
}

Tile reconstruct1d_rowmajor(const std::vector<std::vector<double>>& coeffs, int channels, int h, int w) {
    if (static_cast<int>(coeffs.size()) != channels) {
        throw std::invalid_argument("reconstruct1d_rowmajor: channel count mismatch");
    }
    Tile tile(channels, h, w);
    const std::size_t len = static_cast<std::size_t>(h) * w;
    for (int c = 0; c < channels; ++c) {
        std::vector<double> padded(len, 0.0);
        if (coeffs[c].size() > len) {
            throw std::invalid_argument("reconstruct1d_rowmajor: more coefficients than pixels");
        }
        std::copy(coeffs[c].begin(), coeffs[c].end(), padded.begin());
        std::vector<double> plane = idct1d(padded);
        std::copy(plane.begin(), plane.end(), tile.plane(c).begin());
    }
    return tile;
}

SeriesCoeffs ts_compress(std::span<const double> series, int bands, int length,
                         std::span<const std::uint8_t> missing_mask, int n) {
    if (bands < 1 || length < 1) {
        throw std::invalid_argument("ts_compress: need at least one band and one timestep");
    }
    if (series.size() != static_cast<std::size_t>(bands) * length) {
        throw std::invalid_argument("ts_compress: series size does not match bands x length");
    }
    if (!missing_mask.empty() && missing_mask.size() != series.size()) {
        throw std::invalid_argument("ts_compress: mask size does not match series");
    }
    const int padded = std::max(length, n);
    SeriesCoeffs sc;
    sc.bands = bands;
    sc.n = n;
    sc.source_length = padded;
    sc.coeffs.resize(static_cast<std::size_t>(bands) * n);
    std::vector<double> buf(padded);
    for (int b = 0; b < bands; ++b) {
        std::fill(buf.begin(), buf.end(), 0.0);
        for (int t = 0; t < length; ++t) {
            std::size_t idx = static_cast<std::size_t>(b) * length + t;
            bool missing = !missing_mask.empty() && missing_mask[idx] != 0;
            buf[t] = missing ? 0.0 : series[idx];
        }
        std::vector<double> coeffs = dct1d(buf);
        std::copy(coeffs.begin(), coeffs.begin() + n,
                  sc.coeffs.begin() + static_cast<std::size_t>(b) * n);
    }
    return sc;
}

CoeffBlock aug_flip_rows(const CoeffBlock& block) {
    CoeffBlock out = block;
    for (int c = 0; c < out.channels; ++c) {
        for (int i = 1; i < out.k; i += 2) {
            for (int j = 0; j < out.k; ++j) out.at(c, i, j) = -out.at(c, i, j);
        }
    }
    return out;
}

CoeffBlock aug_flip_cols(const CoeffBlock& block) {
    CoeffBlock out = block;
    for (int c = 0; c < out.channels; ++c) {
        for (int i = 0; i < out.k; ++i) {
            for (int j = 1; j < out.k; j += 2) out.at(c, i, j) = -out.at(c, i, j);
        }
    }
    return out;
}

CoeffBlock aug_transpose(const CoeffBlock& block) {
    if (block.source_height != block.source_width) {
        throw std::invalid_argument("aug_transpose: source tile must be square");
    }
    CoeffBlock out = block;
    for (int c = 0; c < out.channels; ++c) {
        for (int i = 0; i < out.k; ++i) {
            for (int j = 0; j < out.k; ++j) out.at(c, i, j) = block.at(c, j, i);
        }
    }
    return out;
}

CoeffBlock aug_rot90(const CoeffBlock& block) {
    return aug_flip_rows(aug_transpose(block));
}

std::vector<CoeffBlock> compress_tiles_serial(const std::vector<Tile>& tiles, int k) {
    std::vector<CoeffBlock> out(tiles.size());
    for (std::size_t i = 0; i < tiles.size(); ++i) out[i] = lowpass2d(tiles[i], k);
    return out;
}

std::vector<CoeffBlock> compress_tiles(const std::vector<Tile>& tiles, int k) {
    // warm the basis cache so worker threads never hit the mutex
    for (const auto& t : tiles) {
        cached_basis(t.height);
        cached_basis(t.width);
    }
    std::vector<CoeffBlock> out(tiles.size());
    const std::int64_t n = static_cast<std::int64_t>(tiles.size());
#pragma omp parallel for schedule(dynamic, 4)
    for (std::int64_t i = 0; i < n; ++i) out[i] = lowpass2d(tiles[i], k);
    return out;
}

std::vector<Tile> reconstruct_tiles_serial(const std::vector<CoeffBlock>& blocks) {
    std::vector<Tile> out(blocks.size());
    for (std::size_t i = 0; i < blocks.size(); ++i) out[i] = reconstruct(blocks[i]);
    return out;
}

std::vector<Tile> reconstruct_tiles(const std::vector<CoeffBlock>& blocks) {
    for (const auto& b : blocks) {
        cached_basis(b.source_height);
        cached_basis(b.source_width);
    }
    std::vector<Tile> out(blocks.size());
    const std::int64_t n = static_cast<std::int64_t>(blocks.size());
#pragma omp parallel for schedule(dynamic, 4)
    for (std::int64_t i = 0; i < n; ++i) out[i] = reconstruct(blocks[i]);
    return out;
}

}  // namespace tilefreq
