#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "tilefreq/dct.hpp"

namespace tilefreq {

// Raster grid file: magic "TFG1", uint32 channels/height/width, float64
// values channel-major row-major, all little-endian.
void write_tile_file(const Tile& tile, const std::string& path);
Tile read_tile_file(const std::string& path);

// Coefficient store: magic "TFC1", uint32 count, then per record uint32
// surveyId/channels/k/sourceH/sourceW followed by the float64 coefficients.
struct CoeffRecord {
    std::uint32_t survey_id = 0;
    CoeffBlock block;
};

void write_coeff_store(const std::vector<CoeffRecord>& records, const std::string& path);
std::vector<CoeffRecord> read_coeff_store(const std::string& path);

}  // namespace tilefreq
