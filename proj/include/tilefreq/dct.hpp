#pragma once

#include <cstdint>
#include <span>
#include <vector>

namespace tilefreq {

// Channels x height x width grid of pixel values, channel-major row-major.
struct Tile {
    int channels = 0;
    int height = 0;
    int width = 0;
    std::vector<double> values;

    Tile() = default;
    Tile(int c, int h, int w) : channels(c), height(h), width(w), values(static_cast<std::size_t>(c) * h * w, 0.0) {}

    double& at(int c, int y, int x) { return values[(static_cast<std::size_t>(c) * height + y) * width + x]; }
    double at(int c, int y, int x) const { return values[(static_cast<std::size_t>(c) * height + y) * width + x]; }
    std::span<const double> plane(int c) const {
        return {values.data() + static_cast<std::size_t>(c) * height * width, static_cast<std::size_t>(height) * width};
    }
    std::span<double> plane(int c) {
        return {values.data() + static_cast<std::size_t>(c) * height * width, static_cast<std::size_t>(height) * width};
    }
};

// Retained low-frequency k x k block of per-channel 2D-DCT coefficients.
struct CoeffBlock {
    int channels = 0;
    int k = 0;
    int source_height = 0;
    int source_width = 0;
    std::vector<double> coeffs;  // channels x k x k

    CoeffBlock() = default;
    CoeffBlock(int c, int kk, int sh, int sw)
        : channels(c), k(kk), source_height(sh), source_width(sw),
          coeffs(static_cast<std::size_t>(c) * kk * kk, 0.0) {}

    double& at(int c, int i, int j) { return coeffs[(static_cast<std::size_t>(c) * k + i) * k + j]; }
    double at(int c, int i, int j) const { return coeffs[(static_cast<std::size_t>(c) * k + i) * k + j]; }
};

// Leading 1D-DCT coefficients of a (zero-filled) time series, per band.
struct SeriesCoeffs {
    int bands = 0;
    int n = 0;
    int source_length = 0;
    std::vector<double> coeffs;  // bands x n

    double at(int b, int i) const { return coeffs[static_cast<std::size_t>(b) * n + i]; }
};

// Orthonormal DCT-II and its inverse (DCT-III). Both preserve the Euclidean
// norm; idct1d(dct1d(x)) == x to round-off.
std::vector<double> dct1d(std::span<const double> signal);
std::vector<double> idct1d(std::span<const double> coeffs);

// Separable 2D transforms on a row-major h x w plane.
std::vector<double> dct2d(std::span<const double> plane, int h, int w);
std::vector<double> idct2d(std::span<const double> coeffs, int h, int w);

// Per channel: full 2D-DCT, keep the top-left k x k corner.
CoeffBlock lowpass2d(const Tile& tile, int k);

// Zero-pad the block back to source dims and invert per channel.
Tile reconstruct(const CoeffBlock& block);

// Row-major flattened 1D low-pass, kept as a demonstration of how much
// spatial structure the 1D path loses relative to the 2D corner.
std::vector<std::vector<double>> lowpass1d_rowmajor(const Tile& tile, int n);
Tile reconstruct1d_rowmajor(const std::vector<std::vector<double>>& coeffs, int channels, int h, int w);

// Missing entries are zero-filled, the series is zero-padded to at least n,
// then each band keeps its first n DCT coefficients.
SeriesCoeffs ts_compress(std::span<const double> series, int bands, int length,
                         std::span<const std::uint8_t> missing_mask = {}, int n = 64);

// Coefficient-space augmentations. Each one equals lowpass2d of the matching
// pixel-space transform of the source tile.
CoeffBlock aug_flip_rows(const CoeffBlock& block);   // flip along the vertical pixel axis
CoeffBlock aug_flip_cols(const CoeffBlock& block);   // flip along the horizontal pixel axis
CoeffBlock aug_transpose(const CoeffBlock& block);   // pixel transpose
CoeffBlock aug_rot90(const CoeffBlock& block);       // 90 degree pixel rotation

// Batch kernels. The OpenMP versions produce bit-identical results to the
// serial references; the serial ones are kept for testing and benchmarking.
std::vector<CoeffBlock> compress_tiles(const std::vector<Tile>& tiles, int k);
std::vector<CoeffBlock> compress_tiles_serial(const std::vector<Tile>& tiles, int k);
std::vector<Tile> reconstruct_tiles(const std::vector<CoeffBlock>& blocks);
std::vector<Tile> reconstruct_tiles_serial(const std::vector<CoeffBlock>& blocks);

}  // namespace tilefreq
