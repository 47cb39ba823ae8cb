#include "tilefreq/train.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <stdexcept>

#include "tilefreq/rng.hpp"

namespace tilefreq {

namespace {

constexpr std::uint64_t kGeoNoiseStream = 0x67656f6eULL;  // "geon"
constexpr std::uint64_t kSplitStream = 0x73706c74ULL;     // "splt"
// per-epoch streams are namespaced so they never collide with the above
std::uint64_t order_stream(int epoch) { return (2ULL << 40) + static_cast<std::uint64_t>(epoch); }
std::uint64_t noise_stream(int epoch) { return (3ULL << 40) + static_cast<std::uint64_t>(epoch); }

struct Standardizer {
    std::vector<double> mean, stdev;

    void fit(const std::vector<std::vector<double>>& features, std::span<const int> rows) {
        const std::size_t dim = features[rows[0]].size();
        mean.assign(dim, 0.0);
        stdev.assign(dim, 0.0);
        for (int r : rows) {
            for (std::size_t j = 0; j < dim; ++j) mean[j] += features[r][j];
        }
        for (double& m : mean) m /= static_cast<double>(rows.size());
        for (int r : rows) {
            for (std::size_t j = 0; j < dim; ++j) {
                double d = features[r][j] - mean[j];
                stdev[j] += d * d;
            }
        }
        for (double& s : stdev) {
            s = std::sqrt(s / static_cast<double>(rows.size()));
            if (s < 1e-12) s = 1.0;  // constant feature
        }
    }

    void apply(std::vector<double>& x) const {
        for (std::size_t j = 0; j < x.size(); ++j) x[j] = (x[j] - mean[j]) / stdev[j];
    }
};

std::vector<int> shuffled_indices(int n, std::uint64_t seed, std::uint64_t stream) {
    std::vector<int> idx(n);
    std::iota(idx.begin(), idx.end(), 0);
    Rng rng(seed, stream);
    for (int i = n - 1; i > 0; --i) {
        int j = static_cast<int>(rng.next_below(static_cast<std::uint64_t>(i) + 1));
        std::swap(idx[i], idx[j]);
    }
    return idx;
}

std::vector<int> decode_prediction(const PredictionMode& mode, std::span<const double> logits) {
    if (mode.kind == PredictionMode::Kind::topk) return decode_topk(logits, mode.k);
    std::vector<double> probs(logits.size());
    for (std::size_t i = 0; i < logits.size(); ++i) probs[i] = 1.0 / (1.0 + std::exp(-logits[i]));
    return decode_threshold(probs, mode.threshold);
}

double validation_f1(const ModelParams& params, const ClassifierData& data,
                     const Standardizer& stats, const std::vector<int>& val_rows,
                     const PredictionMode& mode, const LabelMatrix& val_truth) {
    PredictionSet preds;
    const std::vector<int>& species = data.labels->species_ids();
    for (int r : val_rows) {
        std::vector<double> x = data.features[r];
        stats.apply(x);
        std::vector<double> logits = forward(params, x);
        std::vector<int> picked;
        for (int idx : decode_prediction(mode, logits)) picked.push_back(species[idx]);
        preds.sites[data.site_ids[r]] = std::move(picked);
    }
    return micro_f1(preds, val_truth);
}

}  // namespace

std::vector<PlanePoint> geo_noise(std::span<const PlanePoint> coords, double mean_meters,
                                  std::uint64_t seed) {
    if (mean_meters < 0.0) throw std::invalid_argument("geo_noise: meanMeters must be >= 0");
    std::vector<PlanePoint> out(coords.begin(), coords.end());
    if (mean_meters == 0.0) return out;
    const double sigma = mean_meters / std::sqrt(M_PI / 2.0);
    Rng rng(seed, kGeoNoiseStream);
    for (PlanePoint& p : out) {
        p.easting += sigma * rng.next_gaussian();
        p.northing += sigma * rng.next_gaussian();
    }
    return out;
}

TrainReport train_classifier(const ClassifierData& data, const ArchSpec& arch,
                             const TrainConfig& config) {
    auto t0 = std::chrono::steady_clock::now();
    const int n = static_cast<int>(data.features.size());
    if (n < 2) throw std::invalid_argument("train_classifier: need at least 2 sites");
    if (data.site_ids.size() != data.features.size()) {
        throw std::invalid_argument("train_classifier: site/feature count mismatch");
    }
    if (!data.labels) throw std::invalid_argument("train_classifier: labels missing");
    if (config.val_fraction <= 0.0 || config.val_fraction >= 1.0) {
        throw std::invalid_argument("train_classifier: valFraction must be in (0, 1)");
    }
    if (config.learning_rate < 0.0) throw std::invalid_argument("train_classifier: negative learning rate");
    if (config.batch_size < 1 || config.epochs < 1) {
        throw std::invalid_argument("train_classifier: batchSize and epochs must be >= 1");
    }
    if (arch.num_classes != static_cast<int>(data.labels->species_ids().size())) {
        throw std::invalid_argument("train_classifier: numClasses does not match label matrix");
    }
    for (const auto& f : data.features) {
        if (static_cast<int>(f.size()) != arch.feature_dim()) {
            throw std::invalid_argument("train_classifier: feature size does not match architecture");
        }
    }

    // seeded site-level 90-10 split
    std::vector<int> perm = shuffled_indices(n, config.seed, kSplitStream);
    int val_count = std::max(1, static_cast<int>(std::lround(n * config.val_fraction)));
    if (val_count >= n) throw std::invalid_argument("train_classifier: split leaves no training sites");
    std::vector<int> val_rows(perm.begin(), perm.begin() + val_count);
    std::vector<int> train_rows(perm.begin() + val_count, perm.end());

    TrainReport report;
    report.seed = config.seed;
    for (int r : train_rows) report.train_sites.push_back(data.site_ids[r]);
    for (int r : val_rows) report.val_sites.push_back(data.site_ids[r]);
    std::sort(report.train_sites.begin(), report.train_sites.end());
    std::sort(report.val_sites.begin(), report.val_sites.end());

    Standardizer stats;
    stats.fit(data.features, train_rows);
    report.feature_mean = stats.mean;
    report.feature_std = stats.stdev;

    LabelMatrix val_truth = data.labels->submatrix(report.val_sites);
    const int classes = arch.num_classes;

    std::vector<double> class_weights;
    if (config.loss.use_class_weights) {
        std::vector<double> counts(classes, 0.0);
        for (int r : train_rows) {
            for (int sp : data.labels->labels_of(data.site_ids[r])) {
                int j = data.labels->species_index(sp);
                if (j >= 0) counts[j] += 1.0;
            }
        }
        class_weights = inverse_frequency_weights(counts);
    }

    ModelParams params = init_params(arch, config.seed);
    ModelParams best_params = params;
    double best_f1 = -1.0;

    std::vector<double> batch_logits, batch_targets;
    std::vector<ForwardTrace> traces;
    for (int epoch = 0; epoch < config.epochs; ++epoch) {
        std::vector<int> order = shuffled_indices(static_cast<int>(train_rows.size()),
                                                  config.seed, order_stream(epoch));
        Rng noise_rng(config.seed, noise_stream(epoch));
        const double sigma = config.geo_noise_mean_m / std::sqrt(M_PI / 2.0);
        double epoch_loss = 0.0;
        int batches = 0;
        for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
            const int bsize = static_cast<int>(std::min<std::size_t>(config.batch_size,
                                                                     order.size() - start));
            batch_logits.assign(static_cast<std::size_t>(bsize) * classes, 0.0);
            batch_targets.assign(static_cast<std::size_t>(bsize) * classes, 0.0);
            traces.assign(bsize, ForwardTrace{});
            for (int b = 0; b < bsize; ++b) {
                int row = train_rows[order[start + b]];
                std::vector<double> x = data.features[row];
                if (config.apply_geo_noise && config.geo_noise_mean_m > 0.0 && x.size() >= 2) {
                    x[0] += sigma * noise_rng.next_gaussian();
                    x[1] += sigma * noise_rng.next_gaussian();
                }
                stats.apply(x);
                std::vector<double> logits = forward(params, x, &traces[b]);
                std::copy(logits.begin(), logits.end(),
                          batch_logits.begin() + static_cast<std::size_t>(b) * classes);
                std::vector<double> row_targets = data.labels->dense_row(data.site_ids[row]);
                std::copy(row_targets.begin(), row_targets.end(),
                          batch_targets.begin() + static_cast<std::size_t>(b) * classes);
            }
            LossResult lr = batch_loss(config.loss, batch_logits, batch_targets, bsize, classes,
                                       class_weights);
            ModelParams grads = zeros_like(params);
            for (int b = 0; b < bsize; ++b) {
                std::span<const double> dl(lr.grad.data() + static_cast<std::size_t>(b) * classes,
                                           classes);
                backward(params, traces[b], dl, grads);
            }
            sgd_step(params, grads, config.learning_rate);
            epoch_loss += lr.loss;
            ++batches;
        }
        report.train_loss.push_back(batches ? epoch_loss / batches : 0.0);

        double f1 = validation_f1(params, data, stats, val_rows, config.prediction, val_truth);
        report.val_micro_f1.push_back(f1);
        if (f1 > best_f1) {
            best_f1 = f1;
            best_params = params;
            report.best_epoch = epoch;
        }
    }

    report.params = std::move(best_params);
    report.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return report;
}

TrainReport train_tile2vec(const Tile2VecData& data, const ArchSpec& arch,
                           const TrainConfig& config) {
    auto t0 = std::chrono::steady_clock::now();
    if (arch.arch != Arch::tileCnn) {
        throw std::invalid_argument("train_tile2vec: tileCnn architecture required");
    }
    if (data.triplets.empty()) throw std::invalid_argument("train_tile2vec: no triplets");
    if (data.tiles.empty()) throw std::invalid_argument("train_tile2vec: no tiles");
    if (config.batch_size < 1 || config.epochs < 1) {
        throw std::invalid_argument("train_tile2vec: batchSize and epochs must be >= 1");
    }

    // flatten tiles and standardize over the full tile store
    std::unordered_map<int, std::vector<double>> feat;
    std::vector<std::vector<double>> all;
    std::vector<int> all_rows;
    for (const CoeffRecord& rec : data.tiles) {
        if (static_cast<int>(rec.block.coeffs.size()) != arch.feature_dim()) {
            throw std::invalid_argument("train_tile2vec: tile shape does not match architecture");
        }
        all.push_back(rec.block.coeffs);
        all_rows.push_back(static_cast<int>(all.size()) - 1);
        feat[static_cast<int>(rec.survey_id)] = rec.block.coeffs;
    }
    Standardizer stats;
    stats.fit(all, all_rows);
    for (auto& [site, x] : feat) stats.apply(x);

    for (const Triplet& t : data.triplets) {
        if (!feat.count(t.anchor) || !feat.count(t.neighbor) || !feat.count(t.distant)) {
            throw std::invalid_argument("train_tile2vec: triplet references a missing tile");
        }
    }

    TrainReport report;
    report.seed = config.seed;
    report.feature_mean = stats.mean;
    report.feature_std = stats.stdev;

    ModelParams params = init_params(arch, config.seed);
    const double margin = config.loss.triplet_margin;
    const int ntrip = static_cast<int>(data.triplets.size());

    for (int epoch = 0; epoch < config.epochs; ++epoch) {
        std::vector<int> order = shuffled_indices(ntrip, config.seed, order_stream(epoch));
        double epoch_loss = 0.0;
        int batches = 0;
        for (int start = 0; start < ntrip; start += config.batch_size) {
            const int bsize = std::min(config.batch_size, ntrip - start);
            const double inv_b = 1.0 / bsize;
            ModelParams grads = zeros_like(params);
            double loss_acc = 0.0;
            for (int b = 0; b < bsize; ++b) {
                const Triplet& t = data.triplets[order[start + b]];
                ForwardTrace ta, tn, td;
                std::vector<double> za = encoder_forward(params, feat.at(t.anchor), &ta);
                std::vector<double> zn = encoder_forward(params, feat.at(t.neighbor), &tn);
                std::vector<double> zd = encoder_forward(params, feat.at(t.distant), &td);
                TripletResult tr = triplet(za, zn, zd, margin);
                loss_acc += tr.loss;
                std::vector<double> da = std::move(tr.grad_anchor);

                if (data.aggregated_labels) {
                    auto it = data.aggregated_labels->find(t.anchor);
                    if (it == data.aggregated_labels->end()) {
                        throw std::invalid_argument("train_tile2vec: no aggregated labels for site "
                                                    + std::to_string(t.anchor));
                    }
                    // linear probe: ReLU on the latent, then the fc2 head
                    std::vector<double> act(za.size());
                    for (std::size_t i = 0; i < za.size(); ++i) act[i] = za[i] > 0.0 ? za[i] : 0.0;
                    std::vector<double> logits(params.fc2.out);
                    for (int o = 0; o < params.fc2.out; ++o) {
                        double acc = params.fc2.b[o];
                        const double* wo = params.fc2.w.data() + static_cast<std::size_t>(o) * params.fc2.in;
                        for (int i = 0; i < params.fc2.in; ++i) acc += wo[i] * act[i];
                        logits[o] = acc;
                    }
                    LossResult al = asl(logits, it->second, config.loss.gamma_pos,
                                        config.loss.gamma_neg, config.loss.margin);
                    loss_acc += al.loss;
                    // head gradients carry the 1/B batch factor directly; the
                    // latent gradient stays unscaled and is folded into da,
                    // which is scaled once below together with the triplet part
                    std::vector<double> dact(params.fc2.in, 0.0);
                    for (int o = 0; o < params.fc2.out; ++o) {
                        double g = al.grad[o];
                        grads.fc2.b[o] += g * inv_b;
                        double* gw = grads.fc2.w.data() + static_cast<std::size_t>(o) * params.fc2.in;
                        const double* wo = params.fc2.w.data() + static_cast<std::size_t>(o) * params.fc2.in;
                        for (int i = 0; i < params.fc2.in; ++i) {
                            gw[i] += g * act[i] * inv_b;
                            dact[i] += wo[i] * g;
                        }
                    }
                    for (std::size_t i = 0; i < da.size(); ++i) {
                        if (za[i] > 0.0) da[i] += dact[i];
                    }
                }

                auto scale = [inv_b](std::vector<double>& v) {
                    for (double& x : v) x *= inv_b;
                };
                scale(da);
                scale(tr.grad_neighbor);
                scale(tr.grad_distant);
                encoder_backward(params, ta, da, grads);
                encoder_backward(params, tn, tr.grad_neighbor, grads);
                encoder_backward(params, td, tr.grad_distant, grads);
            }
            sgd_step(params, grads, config.learning_rate);
            epoch_loss += loss_acc * inv_b;
            ++batches;
        }
        report.train_loss.push_back(batches ? epoch_loss / batches : 0.0);
    }

    report.params = std::move(params);
    report.best_epoch = config.epochs - 1;
    report.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return report;
}

void write_train_report_csv(const TrainReport& report, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open for writing: " + path);
    out << "epoch,trainLoss,valMicroF1\n";
    char buf[64];
    for (std::size_t e = 0; e < report.train_loss.size(); ++e) {
        std::snprintf(buf, sizeof(buf), "%.17g", report.train_loss[e]);
        out << e << ',' << buf << ',';
        if (e < report.val_micro_f1.size()) {
            std::snprintf(buf, sizeof(buf), "%.17g", report.val_micro_f1[e]);
            out << buf;
        }
        out << '\n';
    }
    if (!out) throw std::runtime_error("write failed: " + path);
}

std::vector<double> standardize(const TrainReport& report, std::span<const double> raw) {
    if (raw.size() != report.feature_mean.size()) {
        throw std::invalid_argument("standardize: feature size mismatch");
    }
    std::vector<double> out(raw.size());
    for (std::size_t j = 0; j < raw.size(); ++j) {
        out[j] = (raw[j] - report.feature_mean[j]) / report.feature_std[j];
    }
    return out;
}

}  // namespace tilefreq
