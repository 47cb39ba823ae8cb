#include "tilefreq/grid_io.hpp"

#include <fstream>
#include <stdexcept>

#include "tilefreq/binio.hpp"

namespace tilefreq {

namespace {

std::ofstream open_out(const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open for writing: " + path);
    return out;
}

std::ifstream open_in(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open: " + path);
    return in;
}

}  // namespace

void write_tile_file(const Tile& tile, const std::string& path) {
    std::ofstream out = open_out(path);
    out.write("TFG1", 4);
    put_u32(out, static_cast<std::uint32_t>(tile.channels));
    put_u32(out, static_cast<std::uint32_t>(tile.height));
    put_u32(out, static_cast<std::uint32_t>(tile.width));
    for (double v : tile.values) put_f64(out, v);
    if (!out) throw std::runtime_error("write failed: " + path);
}

Tile read_tile_file(const std::string& path) {
    std::ifstream in = open_in(path);
    check_magic(in, "TFG1", path);
    std::uint32_t channels = get_u32(in, path);
    std::uint32_t height = get_u32(in, path);
    std::uint32_t width = get_u32(in, path);
    if (channels == 0 || height == 0 || width == 0) {
        throw std::runtime_error("empty grid dimensions: " + path);
    }
    Tile tile(static_cast<int>(channels), static_cast<int>(height), static_cast<int>(width));
    for (double& v : tile.values) v = get_f64(in, path);
    return tile;
}

void write_coeff_store(const std::vector<CoeffRecord>& records, const std::string& path) {
    std::ofstream out = open_out(path);
    out.write("TFC1", 4);
    put_u32(out, static_cast<std::uint32_t>(records.size()));
    for (const auto& rec : records) {
        put_u32(out, rec.survey_id);
        put_u32(out, static_cast<std::uint32_t>(rec.block.channels));
        put_u32(out, static_cast<std::uint32_t>(rec.block.k));
        put_u32(out, static_cast<std::uint32_t>(rec.block.source_height));
        put_u32(out, static_cast<std::uint32_t>(rec.block.source_width));
        for (double v : rec.block.coeffs) put_f64(out, v);
    }
    if (!out) throw std::runtime_error("write failed: " + path);
}

std::vector<CoeffRecord> read_coeff_store(const std::string& path) {
    std::ifstream in = open_in(path);
    check_magic(in, "TFC1", path);
    std::uint32_t count = get_u32(in, path);
    std::vector<CoeffRecord> records(count);
    for (std::uint32_t i = 0; i < count; ++i) {
        CoeffRecord& rec = records[i];
        rec.survey_id = get_u32(in, path);
        std::uint32_t channels = get_u32(in, path);
        std::uint32_t k = get_u32(in, path);
        std::uint32_t sh = get_u32(in, path);
        std::uint32_t sw = get_u32(in, path);
        rec.block = CoeffBlock(static_cast<int>(channels), static_cast<int>(k),
                               static_cast<int>(sh), static_cast<int>(sw));
        for (double& v : rec.block.coeffs) v = get_f64(in, path);
    }
    return records;
}

}  // namespace tilefreq
