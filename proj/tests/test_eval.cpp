#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <stdexcept>
#include <vector>

#include <doctest.h>

#include "tilefreq/eval.hpp"
#include "tilefreq/rng.hpp"

using namespace tilefreq;

namespace {

std::filesystem::path temp_file(const std::string& name) {
    auto dir = std::filesystem::temp_directory_path() / "tilefreq_eval_tests";
    std::filesystem::create_directories(dir);
    return dir / name;
}

std::string slurp(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    REQUIRE(in.good());
    return std::string(std::istreambuf_iterator<char>(in), {});
}

}  // namespace

TEST_CASE("decode_topk picks the largest scores with ascending-index ties") {
    CHECK(decode_topk(std::vector<double>{0.9, 0.1, 0.5}, 2) == std::vector<int>{0, 2});
    CHECK(decode_topk(std::vector<double>{0.5, 0.5, 0.5}, 2) == std::vector<int>{0, 1});
    CHECK(decode_topk(std::vector<double>{0.1, 0.9}, 5) == std::vector<int>{0, 1});
    CHECK(decode_topk(std::vector<double>{3.0, 1.0, 2.0}, 1) == std::vector<int>{0});

    // against a sort oracle on random scores
    Rng rng(21, 0);
    for (int rep = 0; rep < 30; ++rep) {
        std::vector<double> scores(17);
        for (double& s : scores) s = rng.next_unit();
        int k = 1 + static_cast<int>(rng.next_below(17));
        std::vector<int> order(scores.size());
        for (std::size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i);
        std::stable_sort(order.begin(), order.end(),
                         [&](int a, int b) { return scores[a] > scores[b]; });
        std::vector<int> expect(order.begin(), order.begin() + k);
        std::sort(expect.begin(), expect.end());
        CHECK(decode_topk(scores, k) == expect);
    }
}

TEST_CASE("decode_topk is invariant under monotone transforms of the scores") {
    std::vector<double> logits{-2.0, 3.0, 0.5, -0.1, 1.0};
    std::vector<double> probs(logits.size());
    for (std::size_t i = 0; i < logits.size(); ++i) probs[i] = 1.0 / (1.0 + std::exp(-logits[i]));
    for (int k = 1; k <= 5; ++k) {
        CHECK(decode_topk(logits, k) == decode_topk(probs, k));
    }
}

TEST_CASE("decode_topk validates k and tolerates empty score vectors") {
    CHECK_THROWS_AS(decode_topk(std::vector<double>{0.5}, 0), std::invalid_argument);
    CHECK(decode_topk({}, 3).empty());
}

TEST_CASE("decode_threshold keeps strictly-greater scores only") {
    std::vector<double> scores{0.9, 0.5, 0.2, 0.8};
    CHECK(decode_threshold(scores, 0.5) == std::vector<int>{0, 3});
    CHECK(decode_threshold(std::vector<double>{0.5, 0.5}, 0.5).empty());
    CHECK(decode_threshold(scores, 0.0) == std::vector<int>{0, 1, 2, 3});
    CHECK_THROWS_AS(decode_threshold(std::vector<double>{1.5}, 0.5), std::invalid_argument);
    CHECK_THROWS_AS(decode_threshold(std::vector<double>{-0.1}, 0.5), std::invalid_argument);
}

TEST_CASE("micro_f1 hand values") {
    LabelMatrix truth = LabelMatrix::from_rows({{10, {1, 2}}, {20, {3}}});

    PredictionSet perfect;
    perfect.sites[10] = {1, 2};
    perfect.sites[20] = {3};
    CHECK(micro_f1(perfect, truth) == doctest::Approx(1.0));

    // preds {1} and {3, 4}: tp = 2, fp = 1, fn = 1 -> f1 = 2*2/(2*2+1+1) = 2/3
    PredictionSet partial;
    partial.sites[10] = {1};
    partial.sites[20] = {3, 4};
    CHECK(micro_f1(partial, truth) == doctest::Approx(2.0 / 3.0));

    PredictionSet nothing;
    nothing.sites[10] = {};
    nothing.sites[20] = {};
    CHECK(micro_f1(nothing, truth) == doctest::Approx(0.0));

    // empty truth rows and empty predictions: degenerate 1.0
    LabelMatrix empty_truth = LabelMatrix::from_rows({{10, {}}, {20, {}}});
    CHECK(micro_f1(nothing, empty_truth) == doctest::Approx(1.0));
}

TEST_CASE("micro_f1 pools counts across sites rather than averaging") {
    // site 10: perfect on 3 species; site 20: all wrong on 1 species
    // pooled: tp = 3, fp = 1, fn = 1 -> 6/8; per-site mean would be 0.5
    LabelMatrix truth = LabelMatrix::from_rows({{10, {1, 2, 3}}, {20, {9}}});
    PredictionSet preds;
    preds.sites[10] = {1, 2, 3};
    preds.sites[20] = {4};
    CHECK(micro_f1(preds, truth) == doctest::Approx(6.0 / 8.0));
}

TEST_CASE("micro_f1 never rewards extra or missing predictions") {
    LabelMatrix truth = LabelMatrix::from_rows({{1, {5, 6}}});
    PredictionSet exact, more, fewer;
    exact.sites[1] = {5, 6};
    more.sites[1] = {5, 6, 7};
    fewer.sites[1] = {5};
    double f_exact = micro_f1(exact, truth);
    CHECK(micro_f1(more, truth) < f_exact);
    CHECK(micro_f1(fewer, truth) < f_exact);
}

TEST_CASE("micro_f1 requires identical site populations") {
    LabelMatrix truth = LabelMatrix::from_rows({{1, {5}}, {2, {6}}});
    PredictionSet missing;
    missing.sites[1] = {5};
    CHECK_THROWS_AS(micro_f1(missing, truth), std::invalid_argument);
    PredictionSet extra;
    extra.sites[1] = {5};
    extra.sites[2] = {6};
    extra.sites[3] = {7};
    CHECK_THROWS_AS(micro_f1(extra, truth), std::invalid_argument);
}

TEST_CASE("submission files round-trip, including empty prediction rows") {
    PredictionSet preds;
    preds.sites[7] = {};
    preds.sites[3] = {101, 5, 33};  // stored sorted regardless of insert order
    std::sort(preds.sites[3].begin(), preds.sites[3].end());
    preds.sites[12] = {44};

    auto path = temp_file("submission.csv");
    write_submission(preds, path.string());

    std::string text = slurp(path);
    CHECK(text == "surveyId,predictions\n3,5 33 101\n7,\n12,44\n");

    PredictionSet back = read_submission(path.string());
    REQUIRE(back.sites.size() == 3);
    CHECK(back.sites.at(3) == std::vector<int>{5, 33, 101});
    CHECK(back.sites.at(7).empty());
    CHECK(back.sites.at(12) == std::vector<int>{44});
}

TEST_CASE("read_submission rejects malformed files") {
    auto path = temp_file("bad_submission.csv");
    {
        std::ofstream out(path);
        out << "wrong,header\n1,2\n";
    }
    CHECK_THROWS_AS(read_submission(path.string()), std::runtime_error);
    CHECK_THROWS_AS(read_submission("/nonexistent/sub.csv"), std::runtime_error);
}

TEST_CASE("write_metrics_csv emits the fixed two-column format") {
    auto path = temp_file("metrics.csv");
    write_metrics_csv({{"microF1", 0.5}, {"numTestSites", 42.0}}, path.string());
    std::string text = slurp(path);
    CHECK(text == "metric,value\nmicroF1,0.5\nnumTestSites,42\n");
}
