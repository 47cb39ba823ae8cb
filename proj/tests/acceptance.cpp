// Acceptance suite: ten self-contained criteria, one PASS/FAIL line each.
// Exit code is the number of failed criteria.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdarg>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "tilefreq/dct.hpp"
#include "tilefreq/eval.hpp"
#include "tilefreq/geo.hpp"
#include "tilefreq/grid_io.hpp"
#include "tilefreq/losses.hpp"
#include "tilefreq/lsh.hpp"
#include "tilefreq/metadata.hpp"
#include "tilefreq/model.hpp"
#include "tilefreq/pipeline.hpp"
#include "tilefreq/rng.hpp"
#include "tilefreq/synth.hpp"
#include "tilefreq/train.hpp"

namespace fs = std::filesystem;
using namespace tilefreq;

namespace {

int g_failures = 0;

struct Outcome {
    bool pass = false;
    std::string note;
};

std::string strprintf(const char* format, ...) {
    char buf[768];
    va_list args;
    va_start(args, format);
    std::vsnprintf(buf, sizeof(buf), format, args);
    va_end(args);
    return buf;
}

void run_criterion(int id, double budget_s, const std::function<Outcome()>& body) {
    auto t0 = std::chrono::steady_clock::now();
    Outcome out;
    try {
        out = body();
    } catch (const std::exception& e) {
        out = {false, std::string("exception: ") + e.what()};
    }
    double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (out.pass && secs >= budget_s) {
        out.pass = false;
        out.note += strprintf("; exceeded %.0fs budget", budget_s);
    }
    std::printf("ACCEPTANCE %d: %s (%s; %.1fs)\n", id, out.pass ? "PASS" : "FAIL",
                out.note.c_str(), secs);
    std::fflush(stdout);
    if (!out.pass) ++g_failures;
}

Tile random_tile(int channels, int h, int w, Rng& rng) {
    Tile t(channels, h, w);
    for (double& v : t.values) v = rng.next_in(-1.0, 1.0);
    return t;
}

Tile flip_rows_pixels(const Tile& t) {
    Tile out(t.channels, t.height, t.width);
    for (int c = 0; c < t.channels; ++c)
        for (int y = 0; y < t.height; ++y)
            for (int x = 0; x < t.width; ++x) out.at(c, y, x) = t.at(c, t.height - 1 - y, x);
    return out;
}

Tile transpose_pixels(const Tile& t) {
    Tile out(t.channels, t.width, t.height);
    for (int c = 0; c < t.channels; ++c)
        for (int y = 0; y < t.height; ++y)
            for (int x = 0; x < t.width; ++x) out.at(c, x, y) = t.at(c, y, x);
    return out;
}

Tile rot90_pixels(const Tile& t) {  // counterclockwise
    Tile out(t.channels, t.width, t.height);
    for (int c = 0; c < t.channels; ++c)
        for (int y = 0; y < t.width; ++y)
            for (int x = 0; x < t.height; ++x) out.at(c, y, x) = t.at(c, x, t.width - 1 - y);
    return out;
}

double max_abs_diff(const std::vector<double>& a, const std::vector<double>& b) {
    double worst = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) worst = std::max(worst, std::fabs(a[i] - b[i]));
    return worst;
}

double mse(const std::vector<double>& a, const std::vector<double>& b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        double d = a[i] - b[i];
        s += d * d;
    }
    return s / static_cast<double>(a.size());
}

double l2(const std::vector<double>& a, const std::vector<double>& b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        double d = a[i] - b[i];
        s += d * d;
    }
    return std::sqrt(s);
}

// 1. idct2d(dct2d(x)) identity and Parseval on 200 random 128x128 tiles.
Outcome criterion_codec_roundtrip() {
    Rng rng(1001, 1);
    std::vector<Tile> tiles;
    tiles.reserve(200);
    for (int i = 0; i < 200; ++i) tiles.push_back(random_tile(1, 128, 128, rng));

    std::vector<CoeffBlock> blocks = compress_tiles(tiles, 128);  // k = size: full transform
    std::vector<Tile> recon = reconstruct_tiles(blocks);

    double worst_id = 0.0, worst_parseval = 0.0;
    for (std::size_t i = 0; i < tiles.size(); ++i) {
        worst_id = std::max(worst_id, max_abs_diff(recon[i].values, tiles[i].values));
        double e_pix = 0.0, e_coef = 0.0;
        for (double v : tiles[i].values) e_pix += v * v;
        for (double c : blocks[i].coeffs) e_coef += c * c;
        worst_parseval =
            std::max(worst_parseval, std::fabs(e_pix - e_coef) / std::max(1.0, e_pix));
    }
    bool ok = worst_id < 1e-9 && worst_parseval < 1e-9;
    return {ok, strprintf("200 128x128 tiles: max roundtrip err %.2e, max Parseval rel err %.2e",
                          worst_id, worst_parseval)};
}

// 2. Coefficient-space augmentations match pixel-space transforms; rot90^4 = id.
Outcome criterion_augmentations() {
    Rng rng(1002, 1);
    double worst = 0.0;
    int rot4_exact = 0;
    for (int rep = 0; rep < 100; ++rep) {
        Tile t = random_tile(2, 32, 32, rng);
        CoeffBlock base = lowpass2d(t, 8);
        worst = std::max(worst, max_abs_diff(aug_flip_rows(base).coeffs,
                                             lowpass2d(flip_rows_pixels(t), 8).coeffs));
        worst = std::max(worst, max_abs_diff(aug_transpose(base).coeffs,
                                             lowpass2d(transpose_pixels(t), 8).coeffs));
        worst = std::max(worst, max_abs_diff(aug_rot90(base).coeffs,
                                             lowpass2d(rot90_pixels(t), 8).coeffs));
        CoeffBlock r4 = aug_rot90(aug_rot90(aug_rot90(aug_rot90(base))));
        rot4_exact += r4.coeffs == base.coeffs ? 1 : 0;
    }
    bool ok = worst < 1e-9 && rot4_exact == 100;
    return {ok, strprintf("100 tiles: max augmentation err %.2e, rot90^4 bitwise on %d/100",
                          worst, rot4_exact)};
}

// 3. 2D 8x8 low-pass beats row-major 1D 64-coefficient reconstruction on
// smooth rasters.
Outcome criterion_lowpass_2d_vs_1d() {
    Rng rng(1003, 1);
    int wins = 0;
    double ratio_sum = 0.0;
    for (int rep = 0; rep < 20; ++rep) {
        Tile t(1, 64, 64);
        double amp[3], fy[3], fx[3], py[3], px[3];
        for (int m = 0; m < 3; ++m) {
            amp[m] = rng.next_in(0.4, 1.2);
            fy[m] = rng.next_in(0.5, 3.5);
            fx[m] = rng.next_in(0.5, 3.5);
            py[m] = rng.next_in(0.0, 2.0 * M_PI);
            px[m] = rng.next_in(0.0, 2.0 * M_PI);
        }
        for (int y = 0; y < 64; ++y)
            for (int x = 0; x < 64; ++x) {
                double v = 0.0;
                for (int m = 0; m < 3; ++m)
                    v += amp[m] * std::cos(M_PI * fy[m] * (y + 0.5) / 64.0 + py[m]) *
                         std::cos(M_PI * fx[m] * (x + 0.5) / 64.0 + px[m]);
                t.at(0, y, x) = v;
            }

        Tile rec2 = reconstruct(lowpass2d(t, 8));
        Tile rec1 = reconstruct1d_rowmajor(lowpass1d_rowmajor(t, 64), 1, 64, 64);
        double m2 = mse(rec2.values, t.values);
        double m1 = mse(rec1.values, t.values);
        if (m2 < m1) ++wins;
        ratio_sum += m1 > 0 ? m2 / m1 : 0.0;
    }
    return {wins >= 19, strprintf("2d better on %d/20 smooth rasters, mean mse ratio 2d/1d %.3g",
                                  wins, ratio_sum / 20.0)};
}

// 4. LSH radius queries and self-join vs brute force on 10k uniform points.
Outcome criterion_lsh_quality() {
    double radius_recall_sum = 0.0, join_recall_sum = 0.0;
    int violations = 0;
    for (int seed = 0; seed < 5; ++seed) {
        Rng rng(seed, 1004);
        std::vector<std::pair<int, PlanePoint>> pts(10000);
        for (int i = 0; i < 10000; ++i)
            pts[i] = {i + 1, PlanePoint{rng.next_in(0.0, 1000.0), rng.next_in(0.0, 1000.0)}};
        LshIndex index = LshIndex::build(
            pts, LshParams{50.0, 5, static_cast<std::uint64_t>(seed)});

        long found = 0, total = 0;
        for (int q = 0; q < 200; ++q) {
            int site = q * 50 + 1;
            const PlanePoint& p = pts[q * 50].second;
            NeighborSet got = index.query_radius(site, 50.0);
            std::set<int> brute;
            for (const auto& [id, pp] : pts)
                if (id != site && planar_distance(p, pp) <= 50.0) brute.insert(id);
            for (const Neighbor& nb : got.neighbors) {
                if (brute.count(nb.site_id)) ++found;
                else ++violations;
            }
            total += static_cast<long>(brute.size());
        }
        radius_recall_sum += total > 0 ? static_cast<double>(found) / total : 1.0;

        // exact windowed brute-force self-join
        std::vector<int> order(pts.size());
        for (std::size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i);
        std::sort(order.begin(), order.end(), [&](int a, int b) {
            return pts[a].second.easting < pts[b].second.easting;
        });
        std::vector<std::pair<int, int>> brute_pairs;
        for (std::size_t i = 0; i < order.size(); ++i) {
            for (std::size_t j = i + 1; j < order.size(); ++j) {
                if (pts[order[j]].second.easting - pts[order[i]].second.easting > 50.0) break;
                if (planar_distance(pts[order[i]].second, pts[order[j]].second) <= 50.0) {
                    int a = pts[order[i]].first, b = pts[order[j]].first;
                    brute_pairs.emplace_back(std::min(a, b), std::max(a, b));
                }
            }
        }
        std::sort(brute_pairs.begin(), brute_pairs.end());

        std::vector<JoinPair> pairs = index.self_join(50.0);
        long matched = 0;
        for (const JoinPair& p : pairs) {
            if (std::binary_search(brute_pairs.begin(), brute_pairs.end(),
                                   std::make_pair(p.site_a, p.site_b))) {
                ++matched;
            } else {
                ++violations;
            }
        }
        join_recall_sum +=
            brute_pairs.empty() ? 1.0 : static_cast<double>(matched) / brute_pairs.size();
    }
    double rr = radius_recall_sum / 5.0, jr = join_recall_sum / 5.0;
    bool ok = rr >= 0.95 && jr >= 0.95 && violations == 0;
    return {ok, strprintf("seeds 0..4: mean radius recall %.4f, mean join recall %.4f, "
                          "precision violations %d", rr, jr, violations)};
}

// 5. Finite-difference gradient checks for every loss family.
Outcome criterion_loss_gradients() {
    Rng rng(1005, 1);
    const double kink = std::log(0.05 / 0.95);  // logit where p crosses the 0.05 margin
    auto draw_instance = [&](int classes, bool avoid_margin_kink, std::vector<double>& x,
                             std::vector<double>& y) {
        x.resize(classes);
        y.resize(classes);
        bool any = false;
        for (int i = 0; i < classes; ++i) {
            x[i] = 2.0 * rng.next_gaussian();
            if (avoid_margin_kink && std::fabs(x[i] - kink) < 0.02) {
                x[i] = kink + (x[i] >= kink ? 0.02 : -0.02);
            }
            y[i] = rng.next_unit() < 0.5 ? 1.0 : 0.0;
            any = any || y[i] > 0.0;
        }
        if (!any) y[rng.next_below(classes)] = 1.0;
    };

    double worst_bce = 0.0, worst_asl = 0.0, worst_hill = 0.0, worst_sf1 = 0.0, worst_tri = 0.0;
    std::vector<double> x, y;

    for (int i = 0; i < 100; ++i) {
        draw_instance(10, false, x, y);
        LossFn fn = [&y](std::span<const double> v) {
            LossResult r = bce_with_logits(v, y);
            return std::make_pair(r.loss, std::move(r.grad));
        };
        worst_bce = std::max(worst_bce, finite_diff_check(fn, x));
    }

    for (double gp : {0.0, 1.0}) {
        for (double gn : {0.0, 2.0, 4.0}) {
            for (int i = 0; i < 100; ++i) {
                draw_instance(10, true, x, y);
                LossFn fn = [&y, gp, gn](std::span<const double> v) {
                    LossResult r = asl(v, y, gp, gn, 0.05);
                    return std::make_pair(r.loss, std::move(r.grad));
                };
                worst_asl = std::max(worst_asl, finite_diff_check(fn, x));
            }
        }
    }

    for (int i = 0; i < 100; ++i) {
        draw_instance(10, true, x, y);
        LossFn fn = [&y](std::span<const double> v) {
            LossResult r = hill(v, y, 1.5, 2.0, 0.05);
            return std::make_pair(r.loss, std::move(r.grad));
        };
        worst_hill = std::max(worst_hill, finite_diff_check(fn, x));
    }

    // sweep S in {-1,-15,-30}, E in {0,1}; logits centered on -eta so the
    // sharp beta = 30 sigmoid keeps finite-difference-resolvable gradients
    for (double beta : {1.0, 15.0, 30.0}) {
        for (double eta : {0.0, 1.0}) {
            for (int i = 0; i < 100; ++i) {
                const int batch = 3, classes = 6;
                x.resize(batch * classes);
                y.resize(batch * classes);
                bool any = false;
                for (std::size_t j = 0; j < x.size(); ++j) {
                    x[j] = -eta + 0.5 * rng.next_gaussian();
                    y[j] = rng.next_unit() < 0.5 ? 1.0 : 0.0;
                    any = any || y[j] > 0.0;
                }
                if (!any) y[rng.next_below(x.size())] = 1.0;
                LossFn fn = [&y, beta, eta](std::span<const double> v) {
                    LossResult r = sigmoid_f1(v, y, 3, 6, beta, eta);
                    return std::make_pair(r.loss, std::move(r.grad));
                };
                worst_sf1 = std::max(worst_sf1, finite_diff_check(fn, x));
            }
        }
    }

    for (int i = 0; i < 100; ++i) {
        std::vector<double> v(15);
        for (int tries = 0; tries < 1000; ++tries) {
            for (double& e : v) e = rng.next_gaussian();
            double dn = 0.0, dd = 0.0;
            for (int j = 0; j < 5; ++j) {
                dn += (v[j] - v[j + 5]) * (v[j] - v[j + 5]);
                dd += (v[j] - v[j + 10]) * (v[j] - v[j + 10]);
            }
            dn = std::sqrt(dn);
            dd = std::sqrt(dd);
            if (dn > 1e-3 && dd > 1e-3 && std::fabs(dn - dd + 0.1) > 1e-3) break;
        }
        LossFn fn = [](std::span<const double> w) {
            TripletResult r = triplet(w.subspan(0, 5), w.subspan(5, 5), w.subspan(10, 5), 0.1);
            std::vector<double> grad;
            grad.reserve(15);
            grad.insert(grad.end(), r.grad_anchor.begin(), r.grad_anchor.end());
            grad.insert(grad.end(), r.grad_neighbor.begin(), r.grad_neighbor.end());
            grad.insert(grad.end(), r.grad_distant.begin(), r.grad_distant.end());
            return std::make_pair(r.loss, std::move(grad));
        };
        worst_tri = std::max(worst_tri, finite_diff_check(fn, v));
    }

    bool ok = worst_bce < 1e-5 && worst_asl < 1e-5 && worst_hill < 1e-5 && worst_sf1 < 1e-5 &&
              worst_tri < 1e-5;
    return {ok, strprintf("worst rel err: bce %.1e, asl %.1e, hill %.1e, sigmoidF1 %.1e, "
                          "triplet %.1e", worst_bce, worst_asl, worst_hill, worst_sf1,
                          worst_tri)};
}

// 6. asl(0, 0, 0) reduces to bce_with_logits.
Outcome criterion_asl_bce_reduction() {
    Rng rng(1006, 1);
    double worst_loss = 0.0, worst_grad = 0.0;
    std::vector<double> x(10), y(10);
    for (int i = 0; i < 1000; ++i) {
        for (int j = 0; j < 10; ++j) {
            x[j] = 2.0 * rng.next_gaussian();
            y[j] = rng.next_unit() < 0.5 ? 1.0 : 0.0;
        }
        LossResult a = asl(x, y, 0.0, 0.0, 0.0);
        LossResult b = bce_with_logits(x, y);
        worst_loss = std::max(worst_loss, std::fabs(a.loss - b.loss));
        worst_grad = std::max(worst_grad, max_abs_diff(a.grad, b.grad));
    }
    bool ok = worst_loss <= 1e-12 && worst_grad <= 1e-12;
    return {ok, strprintf("1000 inputs: max loss diff %.1e, max grad diff %.1e", worst_loss,
                          worst_grad)};
}

// 7. mlp256+ASL beats linear+ASL; both beat the global top-10 frequency
// baseline, on the clustered synthetic dataset.
Outcome criterion_nonlinear_trend() {
    int mlp_wins = 0, beat_baseline = 0;
    std::string sample;
    for (int seed = 0; seed < 5; ++seed) {
        SynthConfig sc;
        sc.num_sites = 5000;
        sc.num_species = 50;
        sc.num_clusters = 10;
        sc.cluster_radius = 8000.0;
        sc.tile_size = 8;
        sc.channels = 1;
        sc.seed = static_cast<std::uint64_t>(seed);
        SynthDataset data = synth_generate(sc);
        int classes = static_cast<int>(data.labels.species_ids().size());

        ClassifierData cd;
        cd.labels = &data.labels;
        for (int sid : data.train_site_ids) {
            const PlanePoint& p = data.position_of.at(sid);
            cd.site_ids.push_back(sid);
            cd.features.push_back({p.easting, p.northing});
        }

        TrainConfig tc;
        tc.loss.kind = LossKind::asl;
        tc.learning_rate = 0.3;
        tc.batch_size = 32;
        tc.epochs = 12;
        tc.val_fraction = 0.1;
        tc.seed = static_cast<std::uint64_t>(seed);
        tc.apply_geo_noise = false;
        tc.prediction = PredictionMode::by_topk(10);

        ArchSpec lin;
        lin.arch = Arch::linear;
        lin.input_dim = 2;
        lin.num_classes = classes;
        ArchSpec mlp;
        mlp.arch = Arch::mlp256;
        mlp.input_dim = 2;
        mlp.latent_dim = 256;
        mlp.num_classes = classes;

        TrainReport rl = train_classifier(cd, lin, tc);
        TrainReport rm = train_classifier(cd, mlp, tc);
        double f1_lin = *std::max_element(rl.val_micro_f1.begin(), rl.val_micro_f1.end());
        double f1_mlp = *std::max_element(rm.val_micro_f1.begin(), rm.val_micro_f1.end());

        // always-predict the 10 globally most frequent training species
        std::map<int, long> counts;
        for (int sid : rm.train_sites)
            for (int sp : data.labels.labels_of(sid)) ++counts[sp];
        std::vector<std::pair<long, int>> ranked;
        for (const auto& [sp, n] : counts) ranked.emplace_back(-n, sp);
        std::sort(ranked.begin(), ranked.end());
        std::vector<int> top10;
        for (std::size_t i = 0; i < ranked.size() && i < 10; ++i) top10.push_back(ranked[i].second);
        std::sort(top10.begin(), top10.end());
        PredictionSet baseline;
        for (int sid : rm.val_sites) baseline.sites[sid] = top10;
        double f1_base = micro_f1(baseline, data.labels.submatrix(rm.val_sites));

        if (f1_mlp > f1_lin) ++mlp_wins;
        if (f1_mlp > f1_base && f1_lin > f1_base) ++beat_baseline;
        if (seed == 0) {
            sample = strprintf("; seed0 f1 mlp %.3f lin %.3f base %.3f", f1_mlp, f1_lin, f1_base);
        }
    }
    bool ok = mlp_wins >= 4 && beat_baseline >= 4;
    return {ok, strprintf("mlp>linear on %d/5 seeds, both>baseline on %d/5%s", mlp_wins,
                          beat_baseline, sample.c_str())};
}

// 8. k-NN top-10 micro-F1 >= 50km-radius neighborhood voting.
Outcome criterion_knn_trend() {
    int wins = 0;
    std::string sample;
    for (int seed = 0; seed < 5; ++seed) {
        SynthConfig sc;
        sc.num_sites = 2000;
        sc.num_species = 30;
        sc.num_clusters = 8;
        sc.cluster_radius = 2000.0;
        sc.tile_size = 8;
        sc.channels = 1;
        sc.seed = static_cast<std::uint64_t>(seed);
        SynthDataset data = synth_generate(sc);

        std::vector<std::pair<int, PlanePoint>> pts;
        for (int sid : data.train_site_ids) pts.emplace_back(sid, data.position_of.at(sid));
        LshIndex index = LshIndex::build(
            pts, LshParams{50000.0, 5, static_cast<std::uint64_t>(seed)});

        auto predict = [&](const KnnMode& mode) {
            PredictionSet out;
            for (int sid : data.test_site_ids) {
                std::vector<int> species =
                    knn_predict(index, data.labels, data.position_of.at(sid), mode);
                if (species.size() > 10) species.resize(10);
                std::sort(species.begin(), species.end());
                out.sites[sid] = std::move(species);
            }
            return out;
        };
        double f1_topk = micro_f1(predict(KnnMode::by_topk(10)), data.truth);
        double f1_radius = micro_f1(predict(KnnMode::by_radius(50000.0)), data.truth);
        if (f1_topk >= f1_radius) ++wins;
        if (seed == 0) sample = strprintf("; seed0 f1 topk %.3f radius %.3f", f1_topk, f1_radius);
    }
    return {wins >= 4, strprintf("knn top-10 >= radius voting on %d/5 seeds%s", wins,
                                 sample.c_str())};
}

// 9. Triplet training separates held-out neighbors from distant tiles and a
// frozen-encoder linear probe improves over its first epochs.
Outcome criterion_tile2vec() {
    int ok_seeds = 0;
    std::string sample;
    for (int seed = 0; seed < 5; ++seed) {
        SynthConfig sc;
        sc.num_sites = 800;
        sc.num_species = 20;
        sc.num_clusters = 6;
        sc.cluster_radius = 2000.0;
        sc.tile_size = 16;
        sc.channels = 1;
        sc.seed = static_cast<std::uint64_t>(seed);
        SynthDataset data = synth_generate(sc);

        std::vector<int> ids;
        std::vector<Tile> tiles;
        for (const auto& [sid, tile] : data.tiles) {
            ids.push_back(sid);
            tiles.push_back(tile);
        }
        std::vector<CoeffBlock> blocks = compress_tiles(tiles, 8);
        std::vector<CoeffRecord> records(ids.size());
        for (std::size_t i = 0; i < ids.size(); ++i)
            records[i] = {static_cast<std::uint32_t>(ids[i]), blocks[i]};

        std::vector<std::pair<int, PlanePoint>> pts;
        for (int sid : ids) pts.emplace_back(sid, data.position_of.at(sid));
        LshIndex index = LshIndex::build(
            pts, LshParams{6000.0, 5, static_cast<std::uint64_t>(seed)});
        std::vector<Triplet> train_triplets =
            sample_triplets(index, ids, 600, 6000.0, 16, static_cast<std::uint64_t>(seed));
        std::vector<Triplet> held =
            sample_triplets(index, ids, 300, 6000.0, 16, static_cast<std::uint64_t>(seed) + 1000);

        ArchSpec enc;
        enc.arch = Arch::tileCnn;
        enc.channels = 1;
        enc.k = 8;
        enc.conv_channels = 8;
        enc.conv1_channels = 8;
        enc.latent_dim = 16;
        enc.num_classes = static_cast<int>(data.labels.species_ids().size());

        TrainConfig t2v;
        t2v.loss.triplet_margin = 0.2;
        t2v.learning_rate = 0.05;
        t2v.batch_size = 16;
        t2v.epochs = 6;
        t2v.seed = static_cast<std::uint64_t>(seed);

        Tile2VecData td;
        td.tiles = records;
        td.triplets = train_triplets;
        TrainReport rep = train_tile2vec(td, enc, t2v);

        std::unordered_map<int, std::vector<double>> emb;
        for (const CoeffRecord& r : records) {
            emb[static_cast<int>(r.survey_id)] =
                encoder_forward(rep.params, standardize(rep, r.block.coeffs));
        }
        double mean_an = 0.0, mean_ad = 0.0;
        for (const Triplet& t : held) {
            mean_an += l2(emb.at(t.anchor), emb.at(t.neighbor));
            mean_ad += l2(emb.at(t.anchor), emb.at(t.distant));
        }
        mean_an /= static_cast<double>(held.size());
        mean_ad /= static_cast<double>(held.size());
        bool margin_ok = mean_ad > 0.0 && mean_an <= 0.9 * mean_ad;

        ClassifierData pd;
        pd.labels = &data.labels;
        for (int sid : data.train_site_ids) {
            pd.site_ids.push_back(sid);
            pd.features.push_back(emb.at(sid));
        }
        ArchSpec probe;
        probe.arch = Arch::linear;
        probe.input_dim = enc.latent_dim;
        probe.num_classes = enc.num_classes;
        TrainConfig ptc;
        ptc.loss.kind = LossKind::asl;
        ptc.learning_rate = 0.05;
        ptc.batch_size = 16;
        ptc.epochs = 5;
        ptc.val_fraction = 0.2;
        ptc.seed = static_cast<std::uint64_t>(seed);
        ptc.prediction = PredictionMode::by_topk(5);
        TrainReport pr = train_classifier(pd, probe, ptc);

        bool probe_ok = pr.val_micro_f1.size() >= 4;
        for (int e = 0; e + 1 < 4 && probe_ok; ++e)
            probe_ok = pr.val_micro_f1[e + 1] >= pr.val_micro_f1[e] - 1e-12;

        ok_seeds += (margin_ok && probe_ok) ? 1 : 0;
        if (seed == 0) {
            sample = strprintf("; seed0 held dist a-n %.3f a-d %.3f, probe f1 %.3f->%.3f",
                               mean_an, mean_ad, pr.val_micro_f1.front(), pr.val_micro_f1[3]);
        }
    }
    return {ok_seeds >= 4, strprintf("margin+probe ok on %d/5 seeds%s", ok_seeds,
                                     sample.c_str())};
}

// 10. Two scratch pipeline runs are bit-identical and idempotent.
Outcome criterion_pipeline_determinism() {
    ::unsetenv("TILEFREQ_WORKDIR");
    fs::path base = fs::temp_directory_path() / "tilefreq_acceptance";
    std::error_code ec;
    fs::remove_all(base, ec);
    fs::create_directories(base / "a");
    fs::create_directories(base / "b");

    auto config_text = [](const fs::path& work) {
        std::ostringstream os;
        os << "[pipeline]\nseed = 3\nworkDir = " << work.string() << "\n\n"
           << "[dataset]\nmode = synthetic\nnumSites = 400\nnumSpecies = 20\nnumClusters = 6\n"
           << "clusterRadius = 5000\ntileSize = 8\nchannels = 2\n\n"
           << "[codec]\nk = 4\n\n"
           << "[lsh]\nbucketLength = 20000\nnumTables = 4\ntopk = 5\nselfJoinCutoffKm = 30\n\n"
           << "[train]\nloss = asl\nlearningRate = 0.2\nbatchSize = 16\nepochs = 3\n"
           << "valFraction = 0.2\narch = linear\nlatentDim = 8\ntopK = 5\n"
           << "applyGeoNoise = false\n\n"
           << "[predict]\nsource = geo\n";
        return os.str();
    };
    for (const char* name : {"a", "b"}) {
        std::ofstream out(base / (std::string(name) + ".ini"));
        out << config_text(base / name);
    }

    PipelineConfig cfg_a = load_config(base / "a.ini");
    PipelineConfig cfg_b = load_config(base / "b.ini");

    const std::vector<std::string> targets = {"compress", "selfjoin", "evaluate"};
    int first = 0, second = 0;
    for (const PipelineConfig* cfg : {&cfg_a, &cfg_b}) {
        for (const std::string& t : targets) first += run_pipeline(*cfg, t);
    }
    for (const PipelineConfig* cfg : {&cfg_a, &cfg_b}) {
        for (const std::string& t : targets) second += run_pipeline(*cfg, t);
    }

    auto slurp = [](const fs::path& p) {
        std::ifstream in(p, std::ios::binary);
        std::ostringstream ss;
        ss << in.rdbuf();
        return ss.str();
    };
    int identical = 0;
    const std::vector<std::string> artifacts = {"coeffs.tfc1", "selfjoin.csv", "geo_model.tfm1",
                                                "submission.csv", "metrics.csv"};
    for (const std::string& f : artifacts) {
        std::string va = slurp(base / "a" / f);
        if (!va.empty() && va == slurp(base / "b" / f)) ++identical;
    }

    bool ok = first > 0 && second == 0 && identical == static_cast<int>(artifacts.size());
    fs::remove_all(base, ec);
    return {ok, strprintf("first runs executed %d tasks, reruns %d; %d/5 artifacts "
                          "bit-identical across workdirs", first, second, identical)};
}

}  // namespace

int main() {
    std::printf("tilefreq acceptance criteria\n");
    run_criterion(1, 30.0, criterion_codec_roundtrip);
    run_criterion(2, 10.0, criterion_augmentations);
    run_criterion(3, 20.0, criterion_lowpass_2d_vs_1d);
    run_criterion(4, 60.0, criterion_lsh_quality);
    run_criterion(5, 60.0, criterion_loss_gradients);
    run_criterion(6, 60.0, criterion_asl_bce_reduction);
    run_criterion(7, 300.0, criterion_nonlinear_trend);
    run_criterion(8, 120.0, criterion_knn_trend);
    run_criterion(9, 300.0, criterion_tile2vec);
    run_criterion(10, 360.0, criterion_pipeline_determinism);
    std::printf("%d/10 criteria passed\n", 10 - g_failures);
    return g_failures;
}
