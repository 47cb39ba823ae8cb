#include "tilefreq/eval.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <stdexcept>

namespace tilefreq {

std::vector<int> decode_topk(std::span<const double> scores, int k) {
    if (k < 1) throw std::invalid_argument("decode_topk: k must be >= 1");
    const int c = static_cast<int>(scores.size());
    std::vector<int> order(c);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&scores](int a, int b) {
        if (scores[a] != scores[b]) return scores[a] > scores[b];
        return a < b;
    });
    order.resize(std::min(k, c));
    std::sort(order.begin(), order.end());
    return order;
}

std::vector<int> decode_threshold(std::span<const double> scores, double t) {
    std::vector<int> out;
    for (std::size_t i = 0; i < scores.size(); ++i) {
        if (scores[i] < 0.0 || scores[i] > 1.0) {
            throw std::invalid_argument("decode_threshold: scores must lie in [0, 1]");
        }
        if (scores[i] > t) out.push_back(static_cast<int>(i));
    }
    return out;
}

double micro_f1(const PredictionSet& preds, const LabelMatrix& truth) {
    if (preds.sites.size() != truth.site_ids().size()) {
        throw std::invalid_argument("micro_f1: site populations differ");
    }
    long long tp = 0, fp = 0, fn = 0;
    for (const auto& [site, pred] : preds.sites) {
        if (!truth.has_site(site)) {
            throw std::invalid_argument("micro_f1: site " + std::to_string(site) + " missing from truth");
        }
        const std::vector<int>& actual = truth.labels_of(site);
        // both lists sorted ascending
        std::size_t i = 0, j = 0;
        while (i < pred.size() && j < actual.size()) {
            if (pred[i] == actual[j]) {
                ++tp;
                ++i;
                ++j;
            } else if (pred[i] < actual[j]) {
                ++fp;
                ++i;
            } else {
                ++fn;
                ++j;
            }
        }
        fp += static_cast<long long>(pred.size() - i);
        fn += static_cast<long long>(actual.size() - j);
    }
    if (tp == 0 && fp == 0 && fn == 0) return 1.0;  // nothing predicted, nothing true
    return 2.0 * tp / static_cast<double>(2 * tp + fp + fn);
}

void write_submission(const PredictionSet& preds, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open for writing: " + path);
    out << "surveyId,predictions\n";
    for (const auto& [site, species] : preds.sites) {
        out << site << ',';
        for (std::size_t i = 0; i < species.size(); ++i) {
            if (i) out << ' ';
            out << species[i];
        }
        out << '\n';
    }
    if (!out) throw std::runtime_error("write failed: " + path);
}

PredictionSet read_submission(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open: " + path);
    std::string line;
    if (!std::getline(in, line) || line != "surveyId,predictions") {
        throw std::runtime_error("bad submission header: " + path);
    }
    PredictionSet preds;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::size_t comma = line.find(',');
        if (comma == std::string::npos) throw std::runtime_error("bad submission row: " + line);
        int site = std::stoi(line.substr(0, comma));
        std::vector<int> species;
        std::size_t pos = comma + 1;
        while (pos < line.size()) {
            std::size_t space = line.find(' ', pos);
            std::string tok = line.substr(pos, space == std::string::npos ? std::string::npos : space - pos);
            if (!tok.empty()) species.push_back(std::stoi(tok));
            if (space == std::string::npos) break;
            pos = space + 1;
        }
        std::sort(species.begin(), species.end());
        species.erase(std::unique(species.begin(), species.end()), species.end());
        if (!preds.sites.emplace(site, std::move(species)).second) {
            throw std::runtime_error("duplicate surveyId in submission: " + std::to_string(site));
        }
    }
    return preds;
}

void write_metrics_csv(const std::vector<std::pair<std::string, double>>& metrics,
                       const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open for writing: " + path);
    out << "metric,value\n";
    char buf[64];
    for (const auto& [name, value] : metrics) {
        std::snprintf(buf, sizeof(buf), "%.17g", value);
        out << name << ',' << buf << '\n';
    }
    if (!out) throw std::runtime_error("write failed: " + path);
}

}  // namespace tilefreq
