#pragma once

#include <map>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "tilefreq/metadata.hpp"

namespace tilefreq {

// Per-site predicted species sets; species lists are kept sorted ascending.
struct PredictionSet {
    std::map<int, std::vector<int>> sites;  // surveyId -> sorted species ids
};

// Indices of the k largest scores, ties broken by ascending index; all
// indices when there are fewer than k classes. Returned sorted ascending.
std::vector<int> decode_topk(std::span<const double> scores, int k);

// Indices with score strictly greater than t; scores must lie in [0, 1].
std::vector<int> decode_threshold(std::span<const double> scores, double t = 0.5);

struct PredictionMode {
    enum class Kind { topk, threshold };
    Kind kind = Kind::topk;
    int k = 20;
    double threshold = 0.5;

    static PredictionMode by_topk(int k) { return {Kind::topk, k, 0.0}; }
    static PredictionMode by_threshold(double t) { return {Kind::threshold, 0, t}; }
};

// tp/fp/fn pooled over all sites and species; the site populations of preds
// and truth must match exactly. Empty-everywhere returns 1.0 (documented
// degenerate convention).
double micro_f1(const PredictionSet& preds, const LabelMatrix& truth);

// CSV with header `surveyId,predictions`; predictions are space-separated
// ascending species ids; rows sorted by surveyId.
void write_submission(const PredictionSet& preds, const std::string& path);
PredictionSet read_submission(const std::string& path);

void write_metrics_csv(const std::vector<std::pair<std::string, double>>& metrics,
                       const std::string& path);

}  // namespace tilefreq
