#include "tilefreq/pipeline.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <charconv>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <fstream>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

#include <unistd.h>

#include "tilefreq/dct.hpp"
#include "tilefreq/eval.hpp"
#include "tilefreq/geo.hpp"
#include "tilefreq/grid_io.hpp"
#include "tilefreq/metadata.hpp"

namespace fs = std::filesystem;

namespace tilefreq {

namespace {

std::string trim(const std::string& s) {
    std::size_t b = 0, e = s.size();
    while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
    while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
    return s.substr(b, e - b);
}

std::string fmt_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

std::string key_path(const std::string& section, const std::string& key) {
    return "[" + section + "]." + key;
}

// ---------------------------------------------------------------------------
// INI parsing

struct IniData {
    std::map<std::string, std::map<std::string, std::string>> sections;
};

IniData parse_ini(const fs::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw ConfigError("cannot open config file: " + path.string());
    }
    IniData data;
    std::string line;
    std::string section;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (lineno == 1 && line.size() >= 3 && line.compare(0, 3, "\xEF\xBB\xBF") == 0) {
            line.erase(0, 3);
        }
        std::string t = trim(line);
        if (t.empty() || t[0] == '#' || t[0] == ';') continue;
        if (t.front() == '[') {
            if (t.back() != ']') {
                throw ConfigError(path.string() + ":" + std::to_string(lineno) +
                                  ": unterminated section header '" + t + "'");
            }
            section = trim(t.substr(1, t.size() - 2));
            if (section.empty()) {
                throw ConfigError(path.string() + ":" + std::to_string(lineno) +
                                  ": empty section name");
            }
            data.sections[section];  // remember even if it stays empty
            continue;
        }
        std::size_t eq = t.find('=');
        if (eq == std::string::npos) {
            throw ConfigError(path.string() + ":" + std::to_string(lineno) +
                              ": expected 'key = value', got '" + t + "'");
        }
        if (section.empty()) {
            throw ConfigError(path.string() + ":" + std::to_string(lineno) +
                              ": key outside any [section]");
        }
        std::string key = trim(t.substr(0, eq));
        std::string value = trim(t.substr(eq + 1));
        if (key.empty()) {
            throw ConfigError(path.string() + ":" + std::to_string(lineno) + ": empty key");
        }
        auto [it, inserted] = data.sections[section].emplace(key, value);
        if (!inserted) {
            throw ConfigError(key_path(section, key) + ": duplicate key");
        }
    }
    return data;
}

class ConfigReader {
public:
    explicit ConfigReader(IniData data) : data_(std::move(data)) {}

    std::optional<std::string> raw(const std::string& sec, const std::string& key) {
        consumed_[sec].insert(key);
        auto s = data_.sections.find(sec);
        if (s == data_.sections.end()) return std::nullopt;
        auto k = s->second.find(key);
        if (k == s->second.end()) return std::nullopt;
        return k->second;
    }

    std::string get_string(const std::string& sec, const std::string& key,
                           const std::string& def) {
        auto v = raw(sec, key);
        return v ? *v : def;
    }

    std::int64_t get_int(const std::string& sec, const std::string& key, std::int64_t def) {
        auto v = raw(sec, key);
        return v ? parse_int(*v, key_path(sec, key)) : def;
    }

    std::uint64_t get_u64(const std::string& sec, const std::string& key, std::uint64_t def) {
        auto v = raw(sec, key);
        if (!v) return def;
        std::uint64_t out = 0;
        const char* b = v->data();
        const char* e = b + v->size();
        auto res = std::from_chars(b, e, out);
        if (res.ec != std::errc() || res.ptr != e) {
            throw ConfigError(key_path(sec, key) + ": expected unsigned integer, got '" + *v +
                              "'");
        }
        return out;
    }

    double get_double(const std::string& sec, const std::string& key, double def) {
        auto v = raw(sec, key);
        return v ? parse_double(*v, key_path(sec, key)) : def;
    }

    bool get_bool(const std::string& sec, const std::string& key, bool def) {
        auto v = raw(sec, key);
        if (!v) return def;
        std::string s = *v;
        std::transform(s.begin(), s.end(), s.begin(),
                       [](unsigned char c) { return std::tolower(c); });
        if (s == "true" || s == "1" || s == "yes" || s == "on") return true;
        if (s == "false" || s == "0" || s == "no" || s == "off") return false;
        throw ConfigError(key_path(sec, key) + ": expected boolean, got '" + *v + "'");
    }

    std::vector<double> get_double_list(const std::string& sec, const std::string& key,
                                        std::vector<double> def) {
        auto v = raw(sec, key);
        if (!v) return def;
        std::vector<double> out;
        for (const std::string& tok : split_list(*v)) {
            out.push_back(parse_double(tok, key_path(sec, key)));
        }
        return out;
    }

    std::vector<int> get_int_list(const std::string& sec, const std::string& key,
                                  std::vector<int> def) {
        auto v = raw(sec, key);
        if (!v) return def;
        std::vector<int> out;
        for (const std::string& tok : split_list(*v)) {
            out.push_back(static_cast<int>(parse_int(tok, key_path(sec, key))));
        }
        return out;
    }

    // every key must have been consumed by a getter; sections must be known
    void finish(const std::set<std::string>& known_sections) const {
        for (const auto& [sec, keys] : data_.sections) {
            if (!known_sections.count(sec)) {
                throw ConfigError("unknown section [" + sec + "]");
            }
            auto c = consumed_.find(sec);
            for (const auto& [key, value] : keys) {
                if (c == consumed_.end() || !c->second.count(key)) {
                    throw ConfigError("unknown key " + key_path(sec, key));
                }
            }
        }
    }

private:
    static std::vector<std::string> split_list(const std::string& s) {
        std::vector<std::string> out;
        std::string cur;
        std::stringstream ss(s);
        while (std::getline(ss, cur, ',')) {
            cur = trim(cur);
            if (!cur.empty()) out.push_back(cur);
        }
        return out;
    }

    static std::int64_t parse_int(const std::string& v, const std::string& path) {
        std::int64_t out = 0;
        const char* b = v.data();
        const char* e = b + v.size();
        auto res = std::from_chars(b, e, out);
        if (res.ec != std::errc() || res.ptr != e) {
            throw ConfigError(path + ": expected integer, got '" + v + "'");
        }
        return out;
    }

    static double parse_double(const std::string& v, const std::string& path) {
        double out = 0.0;
        const char* b = v.data();
        const char* e = b + v.size();
        auto res = std::from_chars(b, e, out, std::chars_format::general);
        if (res.ec != std::errc() || res.ptr != e) {
            throw ConfigError(path + ": expected number, got '" + v + "'");
        }
        return out;
    }

    IniData data_;
    std::map<std::string, std::set<std::string>> consumed_;
};

void check_positive_int(std::int64_t v, const std::string& path) {
    if (v < 1) throw ConfigError(path + ": must be >= 1, got " + std::to_string(v));
}

void check_positive(double v, const std::string& path) {
    if (!(v > 0.0)) throw ConfigError(path + ": must be > 0, got " + fmt_double(v));
}

// ---------------------------------------------------------------------------
// Workdir layout

struct Paths {
    fs::path work;
    fs::path marker_dir, lock;
    fs::path metadata_raw, truth, tiles_dir, tiles_list;
    fs::path metadata, projected, coeffs, index_meta, selfjoin_csv, knn_submission;
    fs::path geo_model, geo_report, geo_stats;
    fs::path cnn_model, cnn_report, cnn_stats;
    fs::path t2v_model, t2v_report, t2v_stats;
    fs::path submission, metrics;

    explicit Paths(const fs::path& w)
        : work(w),
          marker_dir(w / ".tilefreq"),
          lock(w / ".tilefreq" / "lock"),
          metadata_raw(w / "metadata_raw.csv"),
          truth(w / "truth.csv"),
          tiles_dir(w / "tiles"),
          tiles_list(w / "tiles.list"),
          metadata(w / "metadata.csv"),
          projected(w / "projected.csv"),
          coeffs(w / "coeffs.tfc1"),
          index_meta(w / "index.meta"),
          selfjoin_csv(w / "selfjoin.csv"),
          knn_submission(w / "knn_submission.csv"),
          geo_model(w / "geo_model.tfm1"),
          geo_report(w / "geo_report.csv"),
          geo_stats(w / "geo_stats.csv"),
          cnn_model(w / "cnn_model.tfm1"),
          cnn_report(w / "cnn_report.csv"),
          cnn_stats(w / "cnn_stats.csv"),
          t2v_model(w / "tile2vec_model.tfm1"),
          t2v_report(w / "tile2vec_report.csv"),
          t2v_stats(w / "tile2vec_stats.csv"),
          submission(w / "submission.csv"),
          metrics(w / "metrics.csv") {}
};

// ---------------------------------------------------------------------------
// Content hashing (FNV-1a 64)

struct Fnv1a {
    std::uint64_t state = 1469598103934665603ULL;

    void update(const void* data, std::size_t n) {
        const auto* p = static_cast<const unsigned char*>(data);
        for (std::size_t i = 0; i < n; ++i) {
            state = (state ^ p[i]) * 1099511628211ULL;
        }
    }

    void update_sized(const std::string& s) {
        std::uint64_t n = s.size();
        update(&n, sizeof(n));
        update(s.data(), s.size());
    }
};

std::optional<std::uint64_t> file_digest(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) return std::nullopt;
    Fnv1a h;
    char buf[65536];
    while (in.read(buf, sizeof(buf)) || in.gcount() > 0) {
        h.update(buf, static_cast<std::size_t>(in.gcount()));
        if (!in) break;
    }
    return h.state;
}

std::string hash_hex(std::uint64_t h) {
    char buf[20];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

// ---------------------------------------------------------------------------
// Tiles manifest

struct TileEntry {
    int site_id = 0;
    fs::path path;
};

std::optional<std::vector<TileEntry>> try_read_tiles_list(const fs::path& list_path,
                                                          const fs::path& work) {
    std::ifstream in(list_path);
    if (!in) return std::nullopt;
    std::vector<TileEntry> out;
    std::string line;
    while (std::getline(in, line)) {
        line = trim(line);
        if (line.empty()) continue;
        std::size_t comma = line.find(',');
        if (comma == std::string::npos) {
            throw std::runtime_error("malformed tiles manifest line in " + list_path.string() +
                                     ": '" + line + "'");
        }
        TileEntry e;
        e.site_id = std::stoi(line.substr(0, comma));
        fs::path p = line.substr(comma + 1);
        e.path = p.is_absolute() ? p : work / p;
        out.push_back(e);
    }
    std::sort(out.begin(), out.end(),
              [](const TileEntry& a, const TileEntry& b) { return a.site_id < b.site_id; });
    for (std::size_t i = 1; i < out.size(); ++i) {
        if (out[i].site_id == out[i - 1].site_id) {
            throw std::runtime_error("duplicate site " + std::to_string(out[i].site_id) +
                                     " in tiles manifest " + list_path.string());
        }
    }
    return out;
}

std::vector<TileEntry> read_tiles_list(const fs::path& list_path, const fs::path& work) {
    auto entries = try_read_tiles_list(list_path, work);
    if (!entries) {
        throw std::runtime_error("missing tiles manifest: " + list_path.string());
    }
    return *entries;
}

// ---------------------------------------------------------------------------
// Shared task helpers

struct SiteTable {
    std::vector<int> train_sites, test_sites;   // ascending
    std::unordered_map<int, PlanePoint> points;  // easting = lonProj, northing = latProj
    LabelMatrix train_labels;                    // over train sites
};

SiteTable load_sites(const fs::path& projected_csv) {
    auto records = parse_metadata(projected_csv);
    SiteTable t;
    std::set<int> train, test;
    std::vector<SurveyRecord> train_records;
    for (const auto& r : records) {
        if (!r.lat_proj || !r.lon_proj) {
            throw std::runtime_error("site " + std::to_string(r.survey_id) +
                                     " lacks projected coordinates (run the project task)");
        }
        PlanePoint p{*r.lon_proj, *r.lat_proj};
        auto [it, fresh] = t.points.emplace(r.survey_id, p);
        if (!fresh &&
            (it->second.easting != p.easting || it->second.northing != p.northing)) {
            throw std::runtime_error("site " + std::to_string(r.survey_id) +
                                     ": inconsistent coordinates across rows");
        }
        if (r.dataset == DatasetTag::PresenceAbsentTest) {
            test.insert(r.survey_id);
        } else {
            train.insert(r.survey_id);
            train_records.push_back(r);
        }
    }
    for (int s : test) {
        if (train.count(s)) {
            throw std::runtime_error("site " + std::to_string(s) +
                                     " appears in both train and test rows");
        }
    }
    t.train_sites.assign(train.begin(), train.end());
    t.test_sites.assign(test.begin(), test.end());
    if (!train_records.empty()) {
        t.train_labels = build_label_matrix(train_records);
    }
    return t;
}

LshIndex build_train_index(const SiteTable& sites, const PipelineConfig& cfg) {
    std::vector<std::pair<int, PlanePoint>> pts;
    pts.reserve(sites.train_sites.size());
    for (int s : sites.train_sites) {
        pts.push_back({s, sites.points.at(s)});
    }
    return LshIndex::build(pts, cfg.lsh);
}

void write_stats_csv(const fs::path& path, const std::vector<double>& mean,
                     const std::vector<double>& stdev) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out << "featureIndex,mean,std\n";
    for (std::size_t i = 0; i < mean.size(); ++i) {
        out << i << ',' << fmt_double(mean[i]) << ',' << fmt_double(stdev[i]) << '\n';
    }
}

std::pair<std::vector<double>, std::vector<double>> read_stats_csv(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot read " + path.string());
    std::string line;
    if (!std::getline(in, line) || trim(line) != "featureIndex,mean,std") {
        throw std::runtime_error("bad stats header in " + path.string());
    }
    std::vector<double> mean, stdev;
    while (std::getline(in, line)) {
        line = trim(line);
        if (line.empty()) continue;
        std::size_t c1 = line.find(',');
        std::size_t c2 = line.find(',', c1 + 1);
        if (c1 == std::string::npos || c2 == std::string::npos) {
            throw std::runtime_error("malformed stats row in " + path.string() + ": " + line);
        }
        mean.push_back(std::strtod(line.substr(c1 + 1, c2 - c1 - 1).c_str(), nullptr));
        stdev.push_back(std::strtod(line.substr(c2 + 1).c_str(), nullptr));
    }
    return {mean, stdev};
}

std::vector<int> decode_scores(std::span<const double> logits, const PredictionMode& mode,
                               const std::vector<int>& species) {
    std::vector<int> idx;
    if (mode.kind == PredictionMode::Kind::topk) {
        idx = decode_topk(logits, mode.k);
    } else {
        std::vector<double> probs(logits.size());
        for (std::size_t i = 0; i < logits.size(); ++i) {
            probs[i] = 1.0 / (1.0 + std::exp(-logits[i]));
        }
        idx = decode_threshold(probs, mode.threshold);
    }
    std::vector<int> out;
    out.reserve(idx.size());
    for (int i : idx) out.push_back(species[static_cast<std::size_t>(i)]);
    return out;  // idx ascending over ascending species ids -> already sorted
}

// sites from the coefficient store restricted to and ordered by `wanted`
struct CoeffTable {
    std::vector<int> sites;  // ascending, subset of wanted
    std::unordered_map<int, const CoeffBlock*> by_site;
};

CoeffTable coeff_table(const std::vector<CoeffRecord>& store, const std::vector<int>& wanted) {
    CoeffTable t;
    for (const auto& rec : store) {
        int id = static_cast<int>(rec.survey_id);
        if (!t.by_site.emplace(id, &rec.block).second) {
            throw std::runtime_error("duplicate site " + std::to_string(id) +
                                     " in coefficient store");
        }
    }
    for (int s : wanted) {
        if (t.by_site.count(s)) t.sites.push_back(s);
    }
    return t;
}

void check_block_dims(const CoeffTable& t) {
    if (t.sites.empty()) return;
    const CoeffBlock* first = t.by_site.at(t.sites.front());
    for (int s : t.sites) {
        const CoeffBlock* b = t.by_site.at(s);
        if (b->channels != first->channels || b->k != first->k) {
            throw std::runtime_error("coefficient store is not homogeneous: site " +
                                     std::to_string(s) + " has " +
                                     std::to_string(b->channels) + "x" + std::to_string(b->k) +
                                     " vs " + std::to_string(first->channels) + "x" +
                                     std::to_string(first->k));
        }
    }
}

// ---------------------------------------------------------------------------
// Task implementations

void run_synth_task(const PipelineConfig& cfg, const Paths& paths) {
    SynthDataset ds = synth_generate(cfg.synth);
    write_metadata(paths.metadata_raw, ds.records);

    PredictionSet truth;
    for (int site : ds.truth.site_ids()) {
        truth.sites[site] = ds.truth.labels_of(site);
    }
    write_submission(truth, paths.truth.string());

    fs::create_directories(paths.tiles_dir);
    std::ofstream list(paths.tiles_list);
    if (!list) throw std::runtime_error("cannot write " + paths.tiles_list.string());
    for (const auto& [site, tile] : ds.tiles) {
        std::string name = std::to_string(site) + ".tfg1";
        write_tile_file(tile, (paths.tiles_dir / name).string());
        list << site << ",tiles/" << name << '\n';
    }
}

void run_ingest_task(const PipelineConfig& cfg, const Paths& paths) {
    if (cfg.mode == DatasetMode::synthetic) {
        auto records = parse_metadata(paths.metadata_raw);
        write_metadata(paths.metadata, records);
        return;
    }
    auto records = parse_metadata(cfg.metadata_path);
    write_metadata(paths.metadata, records);

    std::vector<TileEntry> entries;
    if (!cfg.tiles_dir.empty()) {
        if (!fs::is_directory(cfg.tiles_dir)) {
            throw std::runtime_error("tilesDir is not a directory: " + cfg.tiles_dir.string());
        }
        for (const auto& de : fs::directory_iterator(cfg.tiles_dir)) {
            if (!de.is_regular_file() || de.path().extension() != ".tfg1") continue;
            std::string stem = de.path().stem().string();
            if (stem.empty() ||
                !std::all_of(stem.begin(), stem.end(),
                             [](unsigned char c) { return std::isdigit(c); })) {
                continue;
            }
            entries.push_back({std::stoi(stem), fs::absolute(de.path())});
        }
        std::sort(entries.begin(), entries.end(),
                  [](const TileEntry& a, const TileEntry& b) { return a.site_id < b.site_id; });
    }
    std::ofstream list(paths.tiles_list);
    if (!list) throw std::runtime_error("cannot write " + paths.tiles_list.string());
    for (const auto& e : entries) {
        list << e.site_id << ',' << e.path.string() << '\n';
    }

    if (!cfg.truth_path.empty()) {
        PredictionSet truth = read_submission(cfg.truth_path.string());
        write_submission(truth, paths.truth.string());
    }
}

void run_project_task(const Paths& paths) {
    auto records = parse_metadata(paths.metadata);
    for (auto& r : records) {
        PlanePoint p = project_to_laea(r.lat, r.lon);
        if (r.lat_proj && r.lon_proj) {
            double dx = *r.lon_proj - p.easting;
            double dy = *r.lat_proj - p.northing;
            double err = std::sqrt(dx * dx + dy * dy);
            if (err > 1.0) {
                throw std::runtime_error("site " + std::to_string(r.survey_id) +
                                         ": stored projected coordinates disagree with the "
                                         "projection by " +
                                         fmt_double(err) + " m");
            }
        } else {
            r.lon_proj = p.easting;
            r.lat_proj = p.northing;
        }
    }
    write_metadata(paths.projected, records);
}

void run_compress_task(const PipelineConfig& cfg, const Paths& paths) {
    auto entries = read_tiles_list(paths.tiles_list, paths.work);
    std::vector<int> site_ids;
    std::vector<Tile> tiles;
    site_ids.reserve(entries.size());
    tiles.reserve(entries.size());
    for (const auto& e : entries) {
        Tile t = read_tile_file(e.path.string());
        if (!cfg.channel_selection.empty()) {
            Tile sub(static_cast<int>(cfg.channel_selection.size()), t.height, t.width);
            for (std::size_t ci = 0; ci < cfg.channel_selection.size(); ++ci) {
                int c = cfg.channel_selection[ci];
                if (c < 0 || c >= t.channels) {
                    throw std::runtime_error("channelSelection index " + std::to_string(c) +
                                             " out of range for tile of site " +
                                             std::to_string(e.site_id) + " with " +
                                             std::to_string(t.channels) + " channels");
                }
                auto src = t.plane(c);
                std::copy(src.begin(), src.end(),
                          sub.values.begin() +
                              static_cast<std::ptrdiff_t>(ci) * t.height * t.width);
            }
            t = std::move(sub);
        }
        site_ids.push_back(e.site_id);
        tiles.push_back(std::move(t));
    }
    std::vector<CoeffBlock> blocks = compress_tiles(tiles, cfg.codec_k);
    std::vector<CoeffRecord> out;
    out.reserve(blocks.size());
    for (std::size_t i = 0; i < blocks.size(); ++i) {
        out.push_back({static_cast<std::uint32_t>(site_ids[i]), std::move(blocks[i])});
    }
    write_coeff_store(out, paths.coeffs.string());
}

void run_index_task(const PipelineConfig& cfg, const Paths& paths) {
    SiteTable sites = load_sites(paths.projected);
    LshIndex index = build_train_index(sites, cfg);
    std::ofstream out(paths.index_meta);
    if (!out) throw std::runtime_error("cannot write " + paths.index_meta.string());
    out << "numPoints=" << index.size() << '\n'
        << "bucketLength=" << fmt_double(cfg.lsh.bucket_length) << '\n'
        << "numTables=" << cfg.lsh.num_tables << '\n'
        << "seed=" << cfg.lsh.seed << '\n';
    out << "radiiKm=";
    for (std::size_t i = 0; i < cfg.radii_km.size(); ++i) {
        out << (i ? "," : "") << fmt_double(cfg.radii_km[i]);
    }
    out << '\n' << "topk=" << cfg.lsh_topk << '\n';
}

void run_selfjoin_task(const PipelineConfig& cfg, const Paths& paths) {
    SiteTable sites = load_sites(paths.projected);
    LshIndex index = build_train_index(sites, cfg);
    auto pairs = index.self_join(cfg.self_join_cutoff_km * 1000.0);
    write_self_join_csv(pairs, paths.selfjoin_csv.string());
}

PredictionSet knn_predictions(const SiteTable& sites, const PipelineConfig& cfg) {
    if (sites.train_labels.site_ids().empty()) {
        throw std::runtime_error("no labeled training sites to predict from");
    }
    LshIndex index = build_train_index(sites, cfg);
    PredictionSet preds;
    for (int site : sites.test_sites) {
        std::vector<int> ranked =
            knn_predict(index, sites.train_labels, sites.points.at(site), cfg.knn_mode);
        if (cfg.train.prediction.kind == PredictionMode::Kind::topk &&
            static_cast<int>(ranked.size()) > cfg.train.prediction.k) {
            ranked.resize(static_cast<std::size_t>(cfg.train.prediction.k));
        }
        std::sort(ranked.begin(), ranked.end());
        preds.sites[site] = std::move(ranked);
    }
    return preds;
}

void run_knn_predict_task(const PipelineConfig& cfg, const Paths& paths) {
    SiteTable sites = load_sites(paths.projected);
    write_submission(knn_predictions(sites, cfg), paths.knn_submission.string());
}

void run_train_geo_task(const PipelineConfig& cfg, const Paths& paths) {
    SiteTable sites = load_sites(paths.projected);
    if (sites.train_labels.site_ids().empty()) {
        throw std::runtime_error("no labeled training sites");
    }
    ClassifierData data;
    data.labels = &sites.train_labels;
    data.site_ids = sites.train_sites;
    data.features.reserve(sites.train_sites.size());
    for (int s : sites.train_sites) {
        const PlanePoint& p = sites.points.at(s);
        data.features.push_back({p.easting, p.northing});
    }
    ArchSpec spec;
    spec.arch = cfg.arch_geo;
    spec.input_dim = 2;
    spec.latent_dim = cfg.latent_dim;
    spec.num_classes = static_cast<int>(sites.train_labels.species_ids().size());
    TrainConfig tc = cfg.train;
    TrainReport report = train_classifier(data, spec, tc);
    save_checkpoint(report.params, paths.geo_model.string());
    write_train_report_csv(report, paths.geo_report.string());
    write_stats_csv(paths.geo_stats, report.feature_mean, report.feature_std);
}

void run_train_cnn_task(const PipelineConfig& cfg, const Paths& paths) {
    SiteTable sites = load_sites(paths.projected);
    auto store = read_coeff_store(paths.coeffs.string());
    CoeffTable coeffs = coeff_table(store, sites.train_sites);
    check_block_dims(coeffs);
    if (coeffs.sites.size() < 2) {
        throw std::runtime_error("fewer than 2 training sites have coefficient tiles");
    }
    LabelMatrix labels = sites.train_labels.submatrix(coeffs.sites);
    const CoeffBlock* first = coeffs.by_site.at(coeffs.sites.front());
    ClassifierData data;
    data.labels = &labels;
    data.site_ids = coeffs.sites;
    data.features.reserve(coeffs.sites.size());
    for (int s : coeffs.sites) {
        data.features.push_back(coeffs.by_site.at(s)->coeffs);
    }
    ArchSpec spec;
    spec.arch = Arch::tileCnn;
    spec.channels = first->channels;
    spec.k = first->k;
    spec.conv_channels = cfg.conv_channels;
    spec.conv1_channels = cfg.conv1_channels;
    spec.latent_dim = cfg.latent_dim;
    spec.num_classes = static_cast<int>(labels.species_ids().size());
    TrainConfig tc = cfg.train;
    tc.apply_geo_noise = false;
    TrainReport report = train_classifier(data, spec, tc);
    save_checkpoint(report.params, paths.cnn_model.string());
    write_train_report_csv(report, paths.cnn_report.string());
    write_stats_csv(paths.cnn_stats, report.feature_mean, report.feature_std);
}

void run_train_tile2vec_task(const PipelineConfig& cfg, const Paths& paths) {
    SiteTable sites = load_sites(paths.projected);
    auto store = read_coeff_store(paths.coeffs.string());
    CoeffTable coeffs = coeff_table(store, sites.train_sites);
    check_block_dims(coeffs);
    if (coeffs.sites.size() < 3) {
        throw std::runtime_error("fewer than 3 training sites have coefficient tiles");
    }
    LshIndex index = build_train_index(sites, cfg);

    Tile2VecData data;
    data.tiles.reserve(coeffs.sites.size());
    for (int s : coeffs.sites) {
        data.tiles.push_back({static_cast<std::uint32_t>(s), *coeffs.by_site.at(s)});
    }
    data.triplets = sample_triplets(index, coeffs.sites, cfg.triplet_count,
                                    cfg.triplet_max_dist_km * 1000.0, cfg.triplet_batch,
                                    cfg.seed);

    std::unordered_map<int, std::vector<double>> aggregated;
    if (cfg.multiobjective) {
        for (int s : coeffs.sites) {
            auto bits = aggregate_species_in_radius(sites.train_labels, index, s,
                                                    cfg.agg_radius_km * 1000.0);
            aggregated.emplace(s, std::vector<double>(bits.begin(), bits.end()));
        }
        data.aggregated_labels = &aggregated;
    }

    const CoeffBlock* first = coeffs.by_site.at(coeffs.sites.front());
    ArchSpec spec;
    spec.arch = Arch::tileCnn;
    spec.channels = first->channels;
    spec.k = first->k;
    spec.conv_channels = cfg.conv_channels;
    spec.conv1_channels = cfg.conv1_channels;
    spec.latent_dim = cfg.latent_dim;
    spec.num_classes = static_cast<int>(sites.train_labels.species_ids().size());
    TrainConfig tc = cfg.train;
    tc.apply_geo_noise = false;
    TrainReport report = train_tile2vec(data, spec, tc);
    save_checkpoint(report.params, paths.t2v_model.string());
    write_train_report_csv(report, paths.t2v_report.string());
    write_stats_csv(paths.t2v_stats, report.feature_mean, report.feature_std);
}

std::vector<double> standardize_row(const std::vector<double>& mean,
                                    const std::vector<double>& stdev,
                                    std::span<const double> raw) {
    if (raw.size() != mean.size() || raw.size() != stdev.size()) {
        throw std::runtime_error("feature dimension mismatch against stored stats: " +
                                 std::to_string(raw.size()) + " vs " +
                                 std::to_string(mean.size()));
    }
    std::vector<double> out(raw.size());
    for (std::size_t i = 0; i < raw.size(); ++i) {
        out[i] = (raw[i] - mean[i]) / stdev[i];
    }
    return out;
}

void run_predict_task(const PipelineConfig& cfg, const Paths& paths) {
    SiteTable sites = load_sites(paths.projected);
    PredictionSet preds;

    if (cfg.predict_source == "knn") {
        preds = knn_predictions(sites, cfg);
        write_submission(preds, paths.submission.string());
        return;
    }

    fs::path model_path, stats_path;
    std::vector<int> species;
    std::unordered_map<int, std::vector<double>> features;  // test site -> raw features
    if (cfg.predict_source == "geo") {
        model_path = paths.geo_model;
        stats_path = paths.geo_stats;
        species = sites.train_labels.species_ids();
        for (int s : sites.test_sites) {
            const PlanePoint& p = sites.points.at(s);
            features.emplace(s, std::vector<double>{p.easting, p.northing});
        }
    } else {  // cnn
        model_path = paths.cnn_model;
        stats_path = paths.cnn_stats;
        auto store = read_coeff_store(paths.coeffs.string());
        CoeffTable train_coeffs = coeff_table(store, sites.train_sites);
        // the cnn was trained on the species universe of tiled training sites
        species = sites.train_labels.submatrix(train_coeffs.sites).species_ids();
        CoeffTable test_coeffs = coeff_table(store, sites.test_sites);
        for (int s : sites.test_sites) {
            auto it = test_coeffs.by_site.find(s);
            if (it == test_coeffs.by_site.end()) {
                throw std::runtime_error("test site " + std::to_string(s) +
                                         " has no coefficient tile");
            }
            features.emplace(s, it->second->coeffs);
        }
    }

    ModelParams params = load_checkpoint(model_path.string());
    if (params.spec.num_classes != static_cast<int>(species.size())) {
        throw std::runtime_error("checkpoint predicts " +
                                 std::to_string(params.spec.num_classes) +
                                 " classes but the dataset has " +
                                 std::to_string(species.size()) + " species");
    }
    auto [mean, stdev] = read_stats_csv(stats_path);
    for (int s : sites.test_sites) {
        std::vector<double> x = standardize_row(mean, stdev, features.at(s));
        std::vector<double> logits = forward(params, x);
        preds.sites[s] = decode_scores(logits, cfg.train.prediction, species);
    }
    write_submission(preds, paths.submission.string());
}

void run_evaluate_task(const Paths& paths) {
    PredictionSet preds = read_submission(paths.submission.string());
    PredictionSet truth_set = read_submission(paths.truth.string());
    std::vector<std::pair<int, std::vector<int>>> rows;
    rows.reserve(truth_set.sites.size());
    for (const auto& [site, labels] : truth_set.sites) {
        rows.push_back({site, labels});
    }
    LabelMatrix truth = LabelMatrix::from_rows(rows);
    double f1 = micro_f1(preds, truth);
    write_metrics_csv({{"microF1", f1}, {"numTestSites", static_cast<double>(rows.size())}},
                      paths.metrics.string());
}

// ---------------------------------------------------------------------------
// Task graph

struct TaskDef {
    std::string name;
    std::vector<std::string> deps;
    std::string slice;  // canonical rendering of the relevant config keys
    std::vector<fs::path> static_outputs;
    std::function<std::optional<std::vector<fs::path>>()> inputs;
    std::function<bool()> extra_outputs_ok;  // optional
    std::function<void()> run;
};

std::optional<std::vector<fs::path>> fixed_inputs(std::vector<fs::path> v) {
    return v;
}

class SliceBuilder {
public:
    SliceBuilder& add(const std::string& key, const std::string& value) {
        os_ << key << '=' << value << ';';
        return *this;
    }
    SliceBuilder& add(const std::string& key, double value) {
        return add(key, fmt_double(value));
    }
    SliceBuilder& add(const std::string& key, std::int64_t value) {
        return add(key, std::to_string(value));
    }
    SliceBuilder& add(const std::string& key, int value) {
        return add(key, static_cast<std::int64_t>(value));
    }
    SliceBuilder& add(const std::string& key, std::uint64_t value) {
        return add(key, std::to_string(value));
    }
    SliceBuilder& add(const std::string& key, bool value) {
        return add(key, std::string(value ? "true" : "false"));
    }
    std::string str() const { return os_.str(); }

private:
    std::ostringstream os_;
};

std::string train_slice(const PipelineConfig& cfg) {
    const TrainConfig& t = cfg.train;
    SliceBuilder b;
    b.add("loss", to_string(t.loss.kind))
        .add("gammaPos", t.loss.gamma_pos)
        .add("gammaNeg", t.loss.gamma_neg)
        .add("margin", t.loss.margin)
        .add("lambda", t.loss.lambda)
        .add("gamma", t.loss.gamma)
        .add("S", t.loss.s)
        .add("E", t.loss.e)
        .add("useClassWeights", t.loss.use_class_weights)
        .add("learningRate", t.learning_rate)
        .add("batchSize", t.batch_size)
        .add("epochs", t.epochs)
        .add("valFraction", t.val_fraction)
        .add("seed", t.seed)
        .add("predictionMode",
             t.prediction.kind == PredictionMode::Kind::topk
                 ? "topk:" + std::to_string(t.prediction.k)
                 : "threshold:" + fmt_double(t.prediction.threshold));
    return b.str();
}

std::string lsh_slice(const PipelineConfig& cfg) {
    SliceBuilder b;
    b.add("bucketLength", cfg.lsh.bucket_length)
        .add("numTables", static_cast<std::int64_t>(cfg.lsh.num_tables))
        .add("seed", cfg.lsh.seed);
    return b.str();
}

std::vector<TaskDef> build_graph(const PipelineConfig& cfg, const Paths& paths) {
    const bool synthetic = cfg.mode == DatasetMode::synthetic;
    std::vector<TaskDef> tasks;

    if (synthetic) {
        TaskDef t;
        t.name = "synth";
        t.slice = [&] {
            SliceBuilder b;
            b.add("seed", cfg.synth.seed)
                .add("numSites", cfg.synth.num_sites)
                .add("numSpecies", cfg.synth.num_species)
                .add("numClusters", cfg.synth.num_clusters)
                .add("clusterRadius", cfg.synth.cluster_radius)
                .add("tileSize", cfg.synth.tile_size)
                .add("channels", cfg.synth.channels);
            return b.str();
        }();
        t.static_outputs = {paths.metadata_raw, paths.truth, paths.tiles_list};
        t.inputs = [] { return fixed_inputs({}); };
        t.extra_outputs_ok = [&paths] {
            auto entries = try_read_tiles_list(paths.tiles_list, paths.work);
            if (!entries) return false;
            for (const auto& e : *entries) {
                if (!fs::exists(e.path)) return false;
            }
            return true;
        };
        t.run = [&cfg, &paths] { run_synth_task(cfg, paths); };
        tasks.push_back(std::move(t));
    }

    {
        TaskDef t;
        t.name = "ingest";
        t.slice = [&] {
            SliceBuilder b;
            b.add("mode", std::string(synthetic ? "synthetic" : "csv"));
            if (!synthetic) {
                b.add("metadataPath", cfg.metadata_path.string())
                    .add("tilesDir", cfg.tiles_dir.string())
                    .add("truthPath", cfg.truth_path.string());
            }
            return b.str();
        }();
        if (synthetic) {
            t.deps = {"synth"};
            t.static_outputs = {paths.metadata};
            t.inputs = [&paths] { return fixed_inputs({paths.metadata_raw}); };
        } else {
            t.static_outputs = {paths.metadata, paths.tiles_list};
            if (!cfg.truth_path.empty()) t.static_outputs.push_back(paths.truth);
            t.inputs = [&cfg] {
                std::vector<fs::path> in{cfg.metadata_path};
                if (!cfg.truth_path.empty()) in.push_back(cfg.truth_path);
                return fixed_inputs(std::move(in));
            };
        }
        t.run = [&cfg, &paths] { run_ingest_task(cfg, paths); };
        tasks.push_back(std::move(t));
    }

    {
        TaskDef t;
        t.name = "project";
        t.deps = {"ingest"};
        t.static_outputs = {paths.projected};
        t.inputs = [&paths] { return fixed_inputs({paths.metadata}); };
        t.run = [&paths] { run_project_task(paths); };
        tasks.push_back(std::move(t));
    }

    {
        TaskDef t;
        t.name = "compress";
        t.deps = synthetic ? std::vector<std::string>{"project", "synth"}
                           : std::vector<std::string>{"project", "ingest"};
        t.slice = [&] {
            SliceBuilder b;
            b.add("k", cfg.codec_k);
            std::string sel;
            for (std::size_t i = 0; i < cfg.channel_selection.size(); ++i) {
                sel += (i ? "," : "") + std::to_string(cfg.channel_selection[i]);
            }
            b.add("channelSelection", sel);
            return b.str();
        }();
        t.static_outputs = {paths.coeffs};
        t.inputs = [&paths]() -> std::optional<std::vector<fs::path>> {
            auto entries = try_read_tiles_list(paths.tiles_list, paths.work);
            if (!entries) return std::nullopt;
            std::vector<fs::path> in{paths.tiles_list};
            for (const auto& e : *entries) in.push_back(e.path);
            return in;
        };
        t.run = [&cfg, &paths] { run_compress_task(cfg, paths); };
        tasks.push_back(std::move(t));
    }

    {
        TaskDef t;
        t.name = "index";
        t.deps = {"project"};
        t.slice = [&] {
            SliceBuilder b;
            b.add("lsh", lsh_slice(cfg)).add("topk", cfg.lsh_topk);
            std::string radii;
            for (std::size_t i = 0; i < cfg.radii_km.size(); ++i) {
                radii += (i ? "," : "") + fmt_double(cfg.radii_km[i]);
            }
            b.add("radiiKm", radii);
            return b.str();
        }();
        t.static_outputs = {paths.index_meta};
        t.inputs = [&paths] { return fixed_inputs({paths.projected}); };
        t.run = [&cfg, &paths] { run_index_task(cfg, paths); };
        tasks.push_back(std::move(t));
    }

    {
        TaskDef t;
        t.name = "selfjoin";
        t.deps = {"index"};
        t.slice = SliceBuilder()
                      .add("lsh", lsh_slice(cfg))
                      .add("selfJoinCutoffKm", cfg.self_join_cutoff_km)
                      .str();
        t.static_outputs = {paths.selfjoin_csv};
        t.inputs = [&paths] { return fixed_inputs({paths.projected, paths.index_meta}); };
        t.run = [&cfg, &paths] { run_selfjoin_task(cfg, paths); };
        tasks.push_back(std::move(t));
    }

    {
        TaskDef t;
        t.name = "knn-predict";
        t.deps = {"index"};
        t.slice = [&] {
            SliceBuilder b;
            b.add("lsh", lsh_slice(cfg));
            b.add("knnMode", cfg.knn_mode.kind == KnnMode::Kind::topk
                                 ? "topk:" + std::to_string(cfg.knn_mode.k)
                                 : "radius:" + fmt_double(cfg.knn_mode.radius));
            b.add("predictionK", cfg.train.prediction.kind == PredictionMode::Kind::topk
                                     ? std::to_string(cfg.train.prediction.k)
                                     : std::string("all"));
            return b.str();
        }();
        t.static_outputs = {paths.knn_submission};
        t.inputs = [&paths] { return fixed_inputs({paths.projected, paths.index_meta}); };
        t.run = [&cfg, &paths] { run_knn_predict_task(cfg, paths); };
        tasks.push_back(std::move(t));
    }

    {
        TaskDef t;
        t.name = "train-geo";
        t.deps = {"project"};
        t.slice = SliceBuilder()
                      .add("train", train_slice(cfg))
                      .add("arch", to_string(cfg.arch_geo))
                      .add("latentDim", cfg.latent_dim)
                      .add("applyGeoNoise", cfg.train.apply_geo_noise)
                      .add("geoNoiseMeanMeters", cfg.train.geo_noise_mean_m)
                      .str();
        t.static_outputs = {paths.geo_model, paths.geo_report, paths.geo_stats};
        t.inputs = [&paths] { return fixed_inputs({paths.projected}); };
        t.run = [&cfg, &paths] { run_train_geo_task(cfg, paths); };
        tasks.push_back(std::move(t));
    }

    {
        TaskDef t;
        t.name = "train-cnn";
        t.deps = {"compress"};
        t.slice = SliceBuilder()
                      .add("train", train_slice(cfg))
                      .add("latentDim", cfg.latent_dim)
                      .add("convChannels", cfg.conv_channels)
                      .add("conv1Channels", cfg.conv1_channels)
                      .str();
        t.static_outputs = {paths.cnn_model, paths.cnn_report, paths.cnn_stats};
        t.inputs = [&paths] { return fixed_inputs({paths.projected, paths.coeffs}); };
        t.run = [&cfg, &paths] { run_train_cnn_task(cfg, paths); };
        tasks.push_back(std::move(t));
    }

    {
        TaskDef t;
        t.name = "train-tile2vec";
        t.deps = {"compress", "index"};
        t.slice = SliceBuilder()
                      .add("train", train_slice(cfg))
                      .add("lsh", lsh_slice(cfg))
                      .add("latentDim", cfg.latent_dim)
                      .add("convChannels", cfg.conv_channels)
                      .add("conv1Channels", cfg.conv1_channels)
                      .add("tripletMargin", cfg.train.loss.triplet_margin)
                      .add("tripletCount", cfg.triplet_count)
                      .add("tripletBatchSize", cfg.triplet_batch)
                      .add("tripletMaxDistKm", cfg.triplet_max_dist_km)
                      .add("multiobjective", cfg.multiobjective)
                      .add("aggRadiusKm", cfg.agg_radius_km)
                      .str();
        t.static_outputs = {paths.t2v_model, paths.t2v_report, paths.t2v_stats};
        t.inputs = [&paths] {
            return fixed_inputs({paths.projected, paths.coeffs, paths.index_meta});
        };
        t.run = [&cfg, &paths] { run_train_tile2vec_task(cfg, paths); };
        tasks.push_back(std::move(t));
    }

    {
        TaskDef t;
        t.name = "predict";
        t.slice = [&] {
            SliceBuilder b;
            b.add("source", cfg.predict_source);
            b.add("predictionMode",
                  cfg.train.prediction.kind == PredictionMode::Kind::topk
                      ? "topk:" + std::to_string(cfg.train.prediction.k)
                      : "threshold:" + fmt_double(cfg.train.prediction.threshold));
            if (cfg.predict_source == "knn") {
                b.add("lsh", lsh_slice(cfg));
                b.add("knnMode", cfg.knn_mode.kind == KnnMode::Kind::topk
                                     ? "topk:" + std::to_string(cfg.knn_mode.k)
                                     : "radius:" + fmt_double(cfg.knn_mode.radius));
            }
            return b.str();
        }();
        t.static_outputs = {paths.submission};
        if (cfg.predict_source == "geo") {
            t.deps = {"train-geo"};
            t.inputs = [&paths] {
                return fixed_inputs({paths.projected, paths.geo_model, paths.geo_stats});
            };
        } else if (cfg.predict_source == "cnn") {
            t.deps = {"train-cnn"};
            t.inputs = [&paths] {
                return fixed_inputs(
                    {paths.projected, paths.coeffs, paths.cnn_model, paths.cnn_stats});
            };
        } else {  // knn
            t.deps = {"index"};
            t.inputs = [&paths] { return fixed_inputs({paths.projected, paths.index_meta}); };
        }
        t.run = [&cfg, &paths] { run_predict_task(cfg, paths); };
        tasks.push_back(std::move(t));
    }

    {
        TaskDef t;
        t.name = "evaluate";
        t.deps = {"predict", synthetic ? "synth" : "ingest"};
        t.static_outputs = {paths.metrics};
        t.inputs = [&paths] { return fixed_inputs({paths.submission, paths.truth}); };
        t.run = [&paths] { run_evaluate_task(paths); };
        tasks.push_back(std::move(t));
    }

    return tasks;
}

// ---------------------------------------------------------------------------
// Status, markers, execution

fs::path marker_path(const Paths& paths, const std::string& task_name) {
    return paths.marker_dir / (task_name + ".done");
}

std::optional<std::uint64_t> current_hash(const TaskDef& task) {
    auto inputs = task.inputs();
    if (!inputs) return std::nullopt;
    Fnv1a h;
    h.update_sized(task.name);
    h.update_sized(task.slice);
    for (const fs::path& p : *inputs) {
        auto digest = file_digest(p);
        if (!digest) return std::nullopt;
        h.update_sized(p.filename().string());
        h.update(&*digest, sizeof(*digest));
    }
    return h.state;
}

bool task_done(const TaskDef& task, const Paths& paths) {
    try {
        for (const fs::path& out : task.static_outputs) {
            if (!fs::exists(out)) return false;
        }
        if (task.extra_outputs_ok && !task.extra_outputs_ok()) return false;
        std::ifstream marker(marker_path(paths, task.name));
        if (!marker) return false;
        std::string stored;
        if (!std::getline(marker, stored)) return false;
        stored = trim(stored);
        if (stored.size() != 16 ||
            !std::all_of(stored.begin(), stored.end(),
                         [](unsigned char c) { return std::isxdigit(c); })) {
            return false;
        }
        auto h = current_hash(task);
        return h && hash_hex(*h) == stored;
    } catch (const std::exception&) {
        return false;  // corrupt manifests or unreadable state mean "not done"
    }
}

class LockFile {
public:
    explicit LockFile(const fs::path& path) : path_(path) {
        FILE* f = std::fopen(path.c_str(), "wx");
        if (!f) {
            throw std::runtime_error(
                "workDir is locked by another pipeline instance (remove " + path.string() +
                " if the previous run crashed)");
        }
        std::fprintf(f, "%ld\n", static_cast<long>(::getpid()));
        std::fclose(f);
    }
    ~LockFile() {
        std::error_code ec;
        fs::remove(path_, ec);
    }
    LockFile(const LockFile&) = delete;
    LockFile& operator=(const LockFile&) = delete;

private:
    fs::path path_;
};

std::size_t find_task(const std::vector<TaskDef>& tasks, const std::string& name) {
    for (std::size_t i = 0; i < tasks.size(); ++i) {
        if (tasks[i].name == name) return i;
    }
    std::string known;
    for (const auto& t : tasks) {
        known += (known.empty() ? "" : ", ") + t.name;
    }
    throw ConfigError("unknown target '" + name + "' (expected one of: " + known + ")");
}

std::vector<char> needed_set(const std::vector<TaskDef>& tasks, std::size_t target) {
    std::vector<char> needed(tasks.size(), 0);
    std::vector<std::size_t> stack{target};
    while (!stack.empty()) {
        std::size_t i = stack.back();
        stack.pop_back();
        if (needed[i]) continue;
        needed[i] = 1;
        for (const std::string& dep : tasks[i].deps) {
            stack.push_back(find_task(tasks, dep));
        }
    }
    return needed;
}

}  // namespace

std::vector<std::string> pipeline_task_names(const PipelineConfig& config) {
    Paths paths(config.work_dir);
    auto tasks = build_graph(config, paths);
    std::vector<std::string> names;
    names.reserve(tasks.size());
    for (const auto& t : tasks) names.push_back(t.name);
    return names;
}

int run_pipeline(const PipelineConfig& config, const std::string& target) {
    Paths paths(config.work_dir);
    auto tasks = build_graph(config, paths);
    std::size_t target_idx = find_task(tasks, target);

    fs::create_directories(paths.marker_dir);
    LockFile lock(paths.lock);

    std::vector<char> needed = needed_set(tasks, target_idx);
    int executed = 0;
    for (std::size_t i = 0; i < tasks.size(); ++i) {
        if (!needed[i]) continue;
        const TaskDef& task = tasks[i];
        if (task_done(task, paths)) {
            std::printf("[ok]  %s (up to date)\n", task.name.c_str());
            std::fflush(stdout);
            continue;
        }
        std::printf("[run] %s\n", task.name.c_str());
        std::fflush(stdout);
        try {
            task.run();
        } catch (const std::exception& e) {
            throw std::runtime_error("task '" + task.name + "' failed: " + e.what());
        }
        for (const fs::path& out : task.static_outputs) {
            if (!fs::exists(out)) {
                throw std::runtime_error("task '" + task.name +
                                         "' did not produce expected output " + out.string());
            }
        }
        auto h = current_hash(task);
        if (!h) {
            throw std::runtime_error("task '" + task.name +
                                     "' finished but its inputs are no longer readable");
        }
        std::ofstream marker(marker_path(paths, task.name), std::ios::trunc);
        if (!marker) {
            throw std::runtime_error("cannot write marker for task '" + task.name + "'");
        }
        marker << hash_hex(*h) << '\n' << task.slice << '\n';
        ++executed;
    }
    std::printf("pipeline: %d task(s) executed, target '%s' up to date\n", executed,
                target.c_str());
    std::fflush(stdout);
    return executed;
}

std::string describe_pipeline(const PipelineConfig& config) {
    Paths paths(config.work_dir);
    auto tasks = build_graph(config, paths);
    std::ostringstream os;
    os << "pipeline plan (workDir: " << paths.work.string() << ")\n";
    for (const auto& task : tasks) {
        std::string deps;
        for (const auto& d : task.deps) {
            deps += (deps.empty() ? "" : ", ") + d;
        }
        char line[256];
        std::snprintf(line, sizeof(line), "  %-16s %-8s%s%s\n", task.name.c_str(),
                      task_done(task, paths) ? "done" : "pending",
                      deps.empty() ? "" : " <- ", deps.c_str());
        os << line;
    }
    return os.str();
}

PipelineConfig load_config(const fs::path& path) {
    ConfigReader ini(parse_ini(path));
    PipelineConfig cfg;

    cfg.seed = ini.get_u64("pipeline", "seed", 0);
    std::string work = ini.get_string("pipeline", "workDir", "");
    if (const char* env = std::getenv("TILEFREQ_WORKDIR"); env && *env) {
        work = env;
    }
    if (work.empty()) {
        throw ConfigError("[pipeline].workDir: required (or set TILEFREQ_WORKDIR)");
    }
    cfg.work_dir = work;

    std::string mode = ini.get_string("dataset", "mode", "synthetic");
    if (mode == "synthetic") {
        cfg.mode = DatasetMode::synthetic;
    } else if (mode == "csv") {
        cfg.mode = DatasetMode::csv;
    } else {
        throw ConfigError("[dataset].mode: expected 'synthetic' or 'csv', got '" + mode + "'");
    }
    cfg.synth.num_sites = static_cast<int>(ini.get_int("dataset", "numSites", 1000));
    cfg.synth.num_species = static_cast<int>(ini.get_int("dataset", "numSpecies", 50));
    cfg.synth.num_clusters = static_cast<int>(ini.get_int("dataset", "numClusters", 10));
    cfg.synth.cluster_radius = ini.get_double("dataset", "clusterRadius", 10000.0);
    cfg.synth.tile_size = static_cast<int>(ini.get_int("dataset", "tileSize", 32));
    cfg.synth.channels = static_cast<int>(ini.get_int("dataset", "channels", 3));
    cfg.synth.seed = cfg.seed;
    cfg.metadata_path = ini.get_string("dataset", "metadataPath", "");
    cfg.tiles_dir = ini.get_string("dataset", "tilesDir", "");
    cfg.truth_path = ini.get_string("dataset", "truthPath", "");
    if (cfg.mode == DatasetMode::synthetic) {
        check_positive_int(cfg.synth.num_sites, "[dataset].numSites");
        check_positive_int(cfg.synth.num_species, "[dataset].numSpecies");
        check_positive_int(cfg.synth.num_clusters, "[dataset].numClusters");
        check_positive(cfg.synth.cluster_radius, "[dataset].clusterRadius");
        check_positive_int(cfg.synth.channels, "[dataset].channels");
        int ts = cfg.synth.tile_size;
        if (ts < 1 || (ts & (ts - 1)) != 0) {
            throw ConfigError("[dataset].tileSize: must be a power of two, got " +
                              std::to_string(ts));
        }
    } else if (cfg.metadata_path.empty()) {
        throw ConfigError("[dataset].metadataPath: required when mode = csv");
    }

    cfg.codec_k = static_cast<int>(ini.get_int("codec", "k", 8));
    check_positive_int(cfg.codec_k, "[codec].k");
    cfg.channel_selection = ini.get_int_list("codec", "channelSelection", {});
    for (int c : cfg.channel_selection) {
        if (c < 0) throw ConfigError("[codec].channelSelection: negative channel index");
    }
    if (cfg.mode == DatasetMode::synthetic && cfg.codec_k > cfg.synth.tile_size) {
        throw ConfigError("[codec].k: exceeds [dataset].tileSize");
    }

    cfg.lsh.bucket_length = ini.get_double("lsh", "bucketLength", 20.0);
    cfg.lsh.num_tables = static_cast<int>(ini.get_int("lsh", "numTables", 5));
    cfg.lsh.seed = cfg.seed;
    cfg.radii_km = ini.get_double_list("lsh", "radiiKm", {5.0, 10.0, 50.0});
    cfg.lsh_topk = static_cast<int>(ini.get_int("lsh", "topk", 10));
    cfg.self_join_cutoff_km = ini.get_double("lsh", "selfJoinCutoffKm", 50.0);
    check_positive(cfg.lsh.bucket_length, "[lsh].bucketLength");
    check_positive_int(cfg.lsh.num_tables, "[lsh].numTables");
    check_positive_int(cfg.lsh_topk, "[lsh].topk");
    check_positive(cfg.self_join_cutoff_km, "[lsh].selfJoinCutoffKm");
    for (double r : cfg.radii_km) check_positive(r, "[lsh].radiiKm");

    TrainConfig& t = cfg.train;
    t.seed = cfg.seed;
    std::string loss = ini.get_string("train", "loss", "asl");
    try {
        t.loss.kind = loss_kind_from_string(loss);
    } catch (const std::exception&) {
        throw ConfigError("[train].loss: expected bce|asl|hill|sigmoidf1, got '" + loss + "'");
    }
    t.loss.gamma_pos = ini.get_double("train", "gammaPos", 1.0);
    t.loss.gamma_neg = ini.get_double("train", "gammaNeg", 4.0);
    t.loss.margin = ini.get_double("train", "margin", 0.05);
    t.loss.lambda = ini.get_double("train", "lambda", 1.5);
    t.loss.gamma = ini.get_double("train", "gamma", 2.0);
    t.loss.s = ini.get_double("train", "S", -1.0);
    t.loss.e = ini.get_double("train", "E", 0.0);
    t.loss.use_class_weights = ini.get_bool("train", "useClassWeights", false);
    t.loss.triplet_margin = ini.get_double("train", "tripletMargin", 0.1);
    t.learning_rate = ini.get_double("train", "learningRate", 0.05);
    t.batch_size = static_cast<int>(ini.get_int("train", "batchSize", 32));
    t.epochs = static_cast<int>(ini.get_int("train", "epochs", 10));
    t.val_fraction = ini.get_double("train", "valFraction", 0.1);
    t.geo_noise_mean_m = ini.get_double("train", "geoNoiseMeanMeters", 5000.0);
    t.apply_geo_noise = ini.get_bool("train", "applyGeoNoise", true);
    if (t.loss.gamma_pos < 0 || t.loss.gamma_neg < 0) {
        throw ConfigError("[train].gammaPos/gammaNeg: must be >= 0");
    }
    if (t.loss.margin < 0 || t.loss.margin >= 1) {
        throw ConfigError("[train].margin: must lie in [0, 1)");
    }
    if (!(t.loss.lambda > 1.0)) {
        throw ConfigError("[train].lambda: must be > 1");
    }
    if (t.loss.gamma < 0) {
        throw ConfigError("[train].gamma: must be >= 0");
    }
    if (t.learning_rate < 0) {
        throw ConfigError("[train].learningRate: must be >= 0");
    }
    check_positive_int(t.batch_size, "[train].batchSize");
    check_positive_int(t.epochs, "[train].epochs");
    if (!(t.val_fraction > 0.0 && t.val_fraction < 1.0)) {
        throw ConfigError("[train].valFraction: must lie in (0, 1)");
    }
    if (t.geo_noise_mean_m < 0) {
        throw ConfigError("[train].geoNoiseMeanMeters: must be >= 0");
    }
    if (!(t.loss.triplet_margin >= 0)) {
        throw ConfigError("[train].tripletMargin: must be >= 0");
    }

    std::string arch = ini.get_string("train", "arch", "mlp256");
    if (arch == "linear") {
        cfg.arch_geo = Arch::linear;
    } else if (arch == "mlp256") {
        cfg.arch_geo = Arch::mlp256;
    } else {
        throw ConfigError("[train].arch: expected linear|mlp256, got '" + arch + "'");
    }
    cfg.latent_dim = static_cast<int>(ini.get_int("train", "latentDim", 256));
    cfg.conv_channels = static_cast<int>(ini.get_int("train", "convChannels", 16));
    cfg.conv1_channels = static_cast<int>(ini.get_int("train", "conv1Channels", 16));
    check_positive_int(cfg.latent_dim, "[train].latentDim");
    check_positive_int(cfg.conv_channels, "[train].convChannels");
    check_positive_int(cfg.conv1_channels, "[train].conv1Channels");

    std::string pmode = ini.get_string("train", "predictionMode", "topk");
    int topk = static_cast<int>(ini.get_int("train", "topK", 20));
    double threshold = ini.get_double("train", "threshold", 0.5);
    check_positive_int(topk, "[train].topK");
    if (threshold < 0.0 || threshold > 1.0) {
        throw ConfigError("[train].threshold: must lie in [0, 1]");
    }
    if (pmode == "topk") {
        t.prediction = PredictionMode::by_topk(topk);
    } else if (pmode == "threshold") {
        t.prediction = PredictionMode::by_threshold(threshold);
    } else {
        throw ConfigError("[train].predictionMode: expected topk|threshold, got '" + pmode +
                          "'");
    }

    cfg.triplet_count = static_cast<int>(ini.get_int("train", "tripletCount", 2000));
    cfg.triplet_batch = static_cast<int>(ini.get_int("train", "tripletBatchSize", 32));
    cfg.triplet_max_dist_km = ini.get_double("train", "tripletMaxDistKm", 100.0);
    cfg.multiobjective = ini.get_bool("train", "multiobjective", false);
    cfg.agg_radius_km = ini.get_double("train", "aggRadiusKm", 5.0);
    check_positive_int(cfg.triplet_count, "[train].tripletCount");
    check_positive_int(cfg.triplet_batch, "[train].tripletBatchSize");
    check_positive(cfg.triplet_max_dist_km, "[train].tripletMaxDistKm");
    if (cfg.agg_radius_km < 0) {
        throw ConfigError("[train].aggRadiusKm: must be >= 0");
    }

    cfg.predict_source = ini.get_string("predict", "source", "geo");
    if (cfg.predict_source != "geo" && cfg.predict_source != "cnn" &&
        cfg.predict_source != "knn") {
        throw ConfigError("[predict].source: expected geo|cnn|knn, got '" + cfg.predict_source +
                          "'");
    }
    std::string knn_mode = ini.get_string("predict", "knnMode", "topk");
    int knn_topk = static_cast<int>(ini.get_int("predict", "knnTopk", cfg.lsh_topk));
    double knn_radius_km = ini.get_double("predict", "knnRadiusKm", 10.0);
    check_positive_int(knn_topk, "[predict].knnTopk");
    check_positive(knn_radius_km, "[predict].knnRadiusKm");
    if (knn_mode == "topk") {
        cfg.knn_mode = KnnMode::by_topk(knn_topk);
    } else if (knn_mode == "radius") {
        cfg.knn_mode = KnnMode::by_radius(knn_radius_km * 1000.0);
    } else {
        throw ConfigError("[predict].knnMode: expected topk|radius, got '" + knn_mode + "'");
    }

    ini.finish({"pipeline", "dataset", "codec", "lsh", "train", "predict"});
    return cfg;
}

}  // namespace tilefreq
