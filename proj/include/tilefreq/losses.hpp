#pragma once

#include <functional>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace tilefreq {

// Every loss here is minimized; sign conventions are fixed so that
// d(loss)/d(logit_c) < 0 when y_c = 1 and > 0 when y_c = 0 (above the ASL
// margin), regardless of hyperparameters.

struct LossResult {
    double loss = 0.0;
    std::vector<double> grad;  // d loss / d logits, same shape as the logits
};

enum class LossKind { bce, asl, hill, sigmoidf1 };

std::string to_string(LossKind kind);
LossKind loss_kind_from_string(const std::string& s);

struct LossHyper {
    LossKind kind = LossKind::asl;
    // asl (margin shared with hill)
    double gamma_pos = 1.0;
    double gamma_neg = 4.0;
    double margin = 0.05;
    // hill
    double lambda = 1.5;
    double gamma = 2.0;
    // sigmoidf1, parameterized as in the sweep: beta = -S, eta = E
    double s = -1.0;
    double e = 0.0;
    // triplet
    double triplet_margin = 0.1;
    bool use_class_weights = false;
};

// Single-example losses; loss is the mean over classes.
LossResult bce_with_logits(std::span<const double> logits, std::span<const double> targets,
                           std::span<const double> class_weights = {});
LossResult asl(std::span<const double> logits, std::span<const double> targets,
               double gamma_pos = 1.0, double gamma_neg = 4.0, double margin = 0.05);
LossResult hill(std::span<const double> logits, std::span<const double> targets,
                double lambda = 1.5, double gamma = 2.0, double margin = 0.05);

// Batch-pooled sigmoidF1 over B x C row-major logits/targets: counts are
// summed over the whole batch, loss = 1 - 2*tp / (2*tp + fn + fp) in [0, 1].
LossResult sigmoid_f1(std::span<const double> batch_logits, std::span<const double> batch_targets,
                      int batch, int classes, double beta = 1.0, double eta = 0.0);

struct TripletResult {
    double loss = 0.0;
    std::vector<double> grad_anchor, grad_neighbor, grad_distant;
};

TripletResult triplet(std::span<const double> za, std::span<const double> zn,
                      std::span<const double> zd, double margin);

// Batch dispatcher used by the trainer: logits/targets are B x C row-major.
// bce/asl/hill average the per-example class means over the batch; sigmoidf1
// pools counts over the batch as defined above.
LossResult batch_loss(const LossHyper& hyper, std::span<const double> logits,
                      std::span<const double> targets, int batch, int classes,
                      std::span<const double> class_weights = {});

// Inverse-frequency class weights scaled to mean one; counts of zero are
// treated as one so the weights stay finite.
std::vector<double> inverse_frequency_weights(std::span<const double> class_counts);

// Central-difference audit of an analytic gradient. Returns the max over
// coordinates of |fd - an| / max(|fd|, |an|, 0.01 * scale) with
// scale = max_i |an_i|; zero/zero coordinates contribute zero error.
using LossFn = std::function<std::pair<double, std::vector<double>>(std::span<const double>)>;
double finite_diff_check(const LossFn& fn, std::span<const double> x, double h = 1e-6);

}  // namespace tilefreq
