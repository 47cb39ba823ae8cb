#pragma once

#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

namespace tilefreq {

enum class DatasetTag { PresenceOnly, PresenceAbsentTrain, PresenceAbsentTest };

std::string to_string(DatasetTag tag);
DatasetTag dataset_tag_from_string(const std::string& s);

struct SurveyRecord {
    DatasetTag dataset = DatasetTag::PresenceAbsentTrain;
    int survey_id = 0;
    std::optional<double> lat_proj;  // northing, meters
    std::optional<double> lon_proj;  // easting, meters
    double lat = 0.0;
    double lon = 0.0;
    std::optional<int> year;
    std::optional<double> geo_uncertainty_m;
    std::optional<int> species_id;
};

// Reads the competition-shaped metadata CSV. The header must contain exactly
// the expected column names; empty numeric cells become missing values.
std::vector<SurveyRecord> parse_metadata(const std::filesystem::path& csv_path);

void write_metadata(const std::filesystem::path& csv_path, std::span<const SurveyRecord> records);

// Sparse binary site x species incidence. Site and species id lists are kept
// sorted ascending; a site's row is the deduplicated union of its occurrence
// rows. Test rows contribute sites with empty rows.
class LabelMatrix {
public:
    static LabelMatrix from_records(std::span<const SurveyRecord> records);
    static LabelMatrix from_rows(const std::vector<std::pair<int, std::vector<int>>>& site_rows);

    const std::vector<int>& site_ids() const { return site_ids_; }
    const std::vector<int>& species_ids() const { return species_ids_; }

    bool has_site(int site_id) const { return row_of_.count(site_id) > 0; }
    // Sorted species ids for one site; throws std::out_of_range for unknown sites.
    const std::vector<int>& labels_of(int site_id) const;

    std::size_t entry_count() const;

    int species_index(int species_id) const;  // -1 when unknown

    // Dense 0/1 row over the species_ids() ordering.
    std::vector<double> dense_row(int site_id) const;

    LabelMatrix submatrix(std::span<const int> keep_sites) const;

private:
    std::vector<int> site_ids_;
    std::vector<int> species_ids_;
    std::vector<std::vector<int>> rows_;          // parallel to site_ids_
    std::unordered_map<int, std::size_t> row_of_;  // site id -> row index
    std::unordered_map<int, int> species_idx_;
};

LabelMatrix build_label_matrix(std::span<const SurveyRecord> records);

}  // namespace tilefreq
