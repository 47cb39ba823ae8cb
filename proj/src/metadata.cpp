#include "tilefreq/metadata.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>

namespace tilefreq {

namespace {

const char* kHeader = "dataset,surveyId,lat_proj,lon_proj,lat,lon,year,geoUncertaintyInM,speciesId";

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> out;
    std::string cur;
    for (char ch : line) {
        if (ch == ',') {
            out.push_back(cur);
            cur.clear();
        } else if (ch != '\r') {
            cur.push_back(ch);
        }
    }
    out.push_back(cur);
    return out;
}

std::optional<double> parse_opt_double(const std::string& cell, int line_no, const char* col) {
    if (cell.empty()) return std::nullopt;
    std::size_t pos = 0;
    double v;
    try {
        v = std::stod(cell, &pos);
    } catch (const std::exception&) {
        throw std::runtime_error("metadata row error at line " + std::to_string(line_no)
                                 + ": cannot parse " + col + " value '" + cell + "'");
    }
    if (pos != cell.size()) {
        throw std::runtime_error("metadata row error at line " + std::to_string(line_no)
                                 + ": trailing characters in " + col + " value '" + cell + "'");
    }
    return v;
}

std::optional<int> parse_opt_int(const std::string& cell, int line_no, const char* col) {
    auto v = parse_opt_double(cell, line_no, col);
    if (!v) return std::nullopt;
    double r = std::round(*v);
    if (std::abs(*v - r) > 1e-9) {
        throw std::runtime_error("metadata row error at line " + std::to_string(line_no)
                                 + ": non-integer " + col + " value '" + cell + "'");
    }
    return static_cast<int>(r);
}

}  // namespace

std::string to_string(DatasetTag tag) {
    switch (tag) {
        case DatasetTag::PresenceOnly: return "po";
        case DatasetTag::PresenceAbsentTrain: return "pa_train";
        case DatasetTag::PresenceAbsentTest: return "pa_test";
    }
    return "pa_train";
}

DatasetTag dataset_tag_from_string(const std::string& s) {
    if (s == "po" || s == "presence-only") return DatasetTag::PresenceOnly;
    if (s == "pa_train" || s == "presence-absent-train") return DatasetTag::PresenceAbsentTrain;
    if (s == "pa_test" || s == "presence-absent-test") return DatasetTag::PresenceAbsentTest;
    throw std::runtime_error("unknown dataset tag '" + s + "'");
}

std::vector<SurveyRecord> parse_metadata(const std::filesystem::path& csv_path) {
    std::ifstream in(csv_path);
    if (!in) {
        throw std::runtime_error("cannot open metadata file: " + csv_path.string());
    }
    std::string line;
    if (!std::getline(in, line)) {
        throw std::runtime_error("metadata schema error: empty file " + csv_path.string());
    }
    std::vector<std::string> header = split_csv_line(line);
    std::vector<std::string> expected = split_csv_line(kHeader);
    for (const auto& col : expected) {
        if (std::find(header.begin(), header.end(), col) == header.end()) {
            throw std::runtime_error("metadata schema error: missing column '" + col + "'");
        }
    }
    if (header.size() != expected.size()) {
        throw std::runtime_error("metadata schema error: expected header '" + std::string(kHeader) + "'");
    }
    // column index lookup; header order is allowed to differ
    auto col_idx = [&](const char* name) {
        return static_cast<std::size_t>(std::find(header.begin(), header.end(), name) - header.begin());
    };
    std::size_t c_dataset = col_idx("dataset"), c_id = col_idx("surveyId");
    std::size_t c_latp = col_idx("lat_proj"), c_lonp = col_idx("lon_proj");
    std::size_t c_lat = col_idx("lat"), c_lon = col_idx("lon");
    std::size_t c_year = col_idx("year"), c_unc = col_idx("geoUncertaintyInM");
    std::size_t c_spec = col_idx("speciesId");

    std::vector<SurveyRecord> out;
    int line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty() || line == "\r") continue;
        std::vector<std::string> cells = split_csv_line(line);
        if (cells.size() != header.size()) {
            throw std::runtime_error("metadata row error at line " + std::to_string(line_no)
                                     + ": expected " + std::to_string(header.size()) + " cells, got "
                                     + std::to_string(cells.size()));
        }
        SurveyRecord r;
        r.dataset = dataset_tag_from_string(cells[c_dataset]);
        auto id = parse_opt_int(cells[c_id], line_no, "surveyId");
        if (!id) {
            throw std::runtime_error("metadata row error at line " + std::to_string(line_no)
                                     + ": missing surveyId");
        }
        r.survey_id = *id;
        r.lat_proj = parse_opt_double(cells[c_latp], line_no, "lat_proj");
        r.lon_proj = parse_opt_double(cells[c_lonp], line_no, "lon_proj");
        auto lat = parse_opt_double(cells[c_lat], line_no, "lat");
        auto lon = parse_opt_double(cells[c_lon], line_no, "lon");
        if (!lat || !lon) {
            throw std::runtime_error("metadata row error at line " + std::to_string(line_no)
                                     + ": missing lat/lon");
        }
        if (*lat < -90.0 || *lat > 90.0 || *lon < -180.0 || *lon > 180.0) {
            throw std::runtime_error("metadata row error at line " + std::to_string(line_no)
                                     + ": lat/lon out of range");
        }
        r.lat = *lat;
        r.lon = *lon;
        r.year = parse_opt_int(cells[c_year], line_no, "year");
        r.geo_uncertainty_m = parse_opt_double(cells[c_unc], line_no, "geoUncertaintyInM");
        if (r.geo_uncertainty_m && *r.geo_uncertainty_m < 0.0) {
            throw std::runtime_error("metadata row error at line " + std::to_string(line_no)
                                     + ": negative geoUncertaintyInM");
        }
        r.species_id = parse_opt_int(cells[c_spec], line_no, "speciesId");
        if (r.dataset == DatasetTag::PresenceAbsentTest && r.species_id) {
            throw std::runtime_error("metadata row error at line " + std::to_string(line_no)
                                     + ": test row carries speciesId");
        }
        out.push_back(r);
    }
    return out;
}

void write_metadata(const std::filesystem::path& csv_path, std::span<const SurveyRecord> records) {
    std::ofstream out(csv_path);
    if (!out) {
        throw std::runtime_error("cannot write metadata file: " + csv_path.string());
    }
    out << kHeader << "\n";
    char buf[64];
    auto num = [&buf](double v) {
        std::snprintf(buf, sizeof(buf), "%.10f", v);
        return std::string(buf);
    };
    for (const auto& r : records) {
        out << to_string(r.dataset) << ',' << r.survey_id << ',';
        if (r.lat_proj) out << num(*r.lat_proj);
        out << ',';
        if (r.lon_proj) out << num(*r.lon_proj);
        out << ',' << num(r.lat) << ',' << num(r.lon) << ',';
        if (r.year) out << *r.year;
        out << ',';
        if (r.geo_uncertainty_m) out << num(*r.geo_uncertainty_m);
        out << ',';
        if (r.species_id) out << *r.species_id;
        out << '\n';
    }
    if (!out) {
        throw std::runtime_error("failed writing metadata file: " + csv_path.string());
    }
}

LabelMatrix LabelMatrix::from_records(std::span<const SurveyRecord> records) {
    if (records.empty()) {
        throw std::invalid_argument("build_label_matrix: no records");
    }
    std::vector<std::pair<int, std::vector<int>>> rows;
    std::unordered_map<int, std::size_t> idx;
    for (const auto& r : records) {
        auto [it, inserted] = idx.try_emplace(r.survey_id, rows.size());
        if (inserted) rows.push_back({r.survey_id, {}});
        if (r.species_id) rows[it->second].second.push_back(*r.species_id);
    }
    return from_rows(rows);
}

LabelMatrix LabelMatrix::from_rows(const std::vector<std::pair<int, std::vector<int>>>& site_rows) {
    LabelMatrix m;
    std::vector<std::pair<int, std::vector<int>>> rows = site_rows;
    std::sort(rows.begin(), rows.end(),
              [](const auto& a, const auto& b) { return a.first < b.first; });
    std::set<int> species;
    for (auto& [site, labels] : rows) {
        std::sort(labels.begin(), labels.end());
        labels.erase(std::unique(labels.begin(), labels.end()), labels.end());
        species.insert(labels.begin(), labels.end());
        m.row_of_[site] = m.site_ids_.size();
        m.site_ids_.push_back(site);
        m.rows_.push_back(std::move(labels));
    }
    m.species_ids_.assign(species.begin(), species.end());
    for (std::size_t i = 0; i < m.species_ids_.size(); ++i) {
        m.species_idx_[m.species_ids_[i]] = static_cast<int>(i);
    }
    return m;
}

const std::vector<int>& LabelMatrix::labels_of(int site_id) const {
    auto it = row_of_.find(site_id);
    if (it == row_of_.end()) {
        throw std::out_of_range("LabelMatrix: unknown site " + std::to_string(site_id));
    }
    return rows_[it->second];
}

std::size_t LabelMatrix::entry_count() const {
    std::size_t n = 0;
    for (const auto& row : rows_) n += row.size();
    return n;
}

int LabelMatrix::species_index(int species_id) const {
    auto it = species_idx_.find(species_id);
    return it == species_idx_.end() ? -1 : it->second;
}

std::vector<double> LabelMatrix::dense_row(int site_id) const {
    std::vector<double> row(species_ids_.size(), 0.0);
    for (int sp : labels_of(site_id)) {
        row[static_cast<std::size_t>(species_index(sp))] = 1.0;
    }
    return row;
}

LabelMatrix LabelMatrix::submatrix(std::span<const int> keep_sites) const {
    std::vector<std::pair<int, std::vector<int>>> rows;
    rows.reserve(keep_sites.size());
    for (int s : keep_sites) {
        rows.push_back({s, labels_of(s)});
    }
    return from_rows(rows);
}

LabelMatrix build_label_matrix(std::span<const SurveyRecord> records) {
    return LabelMatrix::from_records(records);
}

}  // namespace tilefreq
