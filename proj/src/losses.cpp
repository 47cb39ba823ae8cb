#include "tilefreq/losses.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace tilefreq {

namespace {

double softplus(double x) { return std::max(x, 0.0) + std::log1p(std::exp(-std::fabs(x))); }

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

// pow with exact handling of the 0 and 1 exponents so hyperparameter choices
// that reduce a loss to a simpler one reduce it exactly.
double powg(double x, double g) {
    if (g == 0.0) return 1.0;
    if (g == 1.0) return x;
    return std::pow(x, g);
}

void check_pair(std::span<const double> logits, std::span<const double> targets) {
    if (logits.empty()) throw std::invalid_argument("loss: empty input");
    if (logits.size() != targets.size()) throw std::invalid_argument("loss: logits/targets length mismatch");
    for (double y : targets) {
        if (y != 0.0 && y != 1.0) throw std::invalid_argument("loss: targets must be 0 or 1");
    }
}

}  // namespace

std::string to_string(LossKind kind) {
    switch (kind) {
        case LossKind::bce: return "bce";
        case LossKind::asl: return "asl";
        case LossKind::hill: return "hill";
        case LossKind::sigmoidf1: return "sigmoidf1";
    }
    return "?";
}

LossKind loss_kind_from_string(const std::string& s) {
    if (s == "bce") return LossKind::bce;
    if (s == "asl") return LossKind::asl;
    if (s == "hill") return LossKind::hill;
    if (s == "sigmoidf1") return LossKind::sigmoidf1;
    throw std::invalid_argument("unknown loss kind: " + s);
}

LossResult bce_with_logits(std::span<const double> logits, std::span<const double> targets,
                           std::span<const double> class_weights) {
    check_pair(logits, targets);
    if (!class_weights.empty() && class_weights.size() != logits.size()) {
        throw std::invalid_argument("loss: class weight length mismatch");
    }
    const std::size_t c = logits.size();
    const double inv_c = 1.0 / static_cast<double>(c);
    LossResult res;
    res.grad.resize(c);
    for (std::size_t i = 0; i < c; ++i) {
        double yh = logits[i], y = targets[i];
        double w = class_weights.empty() ? 1.0 : class_weights[i];
        double p = sigmoid(yh), q = sigmoid(-yh);
        res.loss += (w * y * softplus(-yh) + (1.0 - y) * softplus(yh)) * inv_c;
        res.grad[i] = ((1.0 - y) * p - w * y * q) * inv_c;
    }
    return res;
}

LossResult asl(std::span<const double> logits, std::span<const double> targets,
               double gamma_pos, double gamma_neg, double margin) {
    check_pair(logits, targets);
    if (gamma_pos < 0.0 || gamma_neg < 0.0 || margin < 0.0 || margin >= 1.0) {
        throw std::invalid_argument("asl: need gamma+ >= 0, gamma- >= 0, m in [0, 1)");
    }
    const std::size_t c = logits.size();
    const double inv_c = 1.0 / static_cast<double>(c);
    LossResult res;
    res.grad.resize(c);
    for (std::size_t i = 0; i < c; ++i) {
        double yh = logits[i], y = targets[i];
        double p = sigmoid(yh), q = sigmoid(-yh);
        double log_p = -softplus(-yh);
        double pm = std::max(p - margin, 0.0);
        double one_m = std::min(q + margin, 1.0);  // = 1 - pm
        double log_one_m = (margin == 0.0) ? -softplus(yh) : std::log(one_m);

        double loss_pos = -y * powg(q, gamma_pos) * log_p;
        double loss_neg = (pm > 0.0) ? -(1.0 - y) * powg(pm, gamma_neg) * log_one_m : 0.0;
        res.loss += (loss_pos + loss_neg) * inv_c;

        double grad_pos;
        if (gamma_pos == 0.0) {
            grad_pos = -y * q;
        } else {
            grad_pos = y * (gamma_pos * p * powg(q, gamma_pos) * log_p - powg(q, gamma_pos + 1.0));
        }
        double grad_neg = 0.0;
        if (y != 1.0 && pm > 0.0) {
            if (gamma_neg == 0.0 && margin == 0.0) {
                grad_neg = (1.0 - y) * p;
            } else {
                double t1 = (gamma_neg == 0.0)
                                ? 0.0
                                : -gamma_neg * powg(pm, gamma_neg - 1.0) * log_one_m;
                double t2 = powg(pm, gamma_neg) / one_m;
                grad_neg = (1.0 - y) * (t1 + t2) * p * q;
            }
        }
        res.grad[i] = (grad_pos + grad_neg) * inv_c;
    }
    return res;
}

LossResult hill(std::span<const double> logits, std::span<const double> targets,
                double lambda, double gamma, double margin) {
    check_pair(logits, targets);
    if (lambda <= 1.0) throw std::invalid_argument("hill: lambda must be > 1");
    if (gamma < 0.0 || margin < 0.0 || margin >= 1.0) {
        throw std::invalid_argument("hill: need gamma >= 0, m in [0, 1)");
    }
    constexpr double kEps = 1e-12;  // keeps log(pm) finite below the margin
    const std::size_t c = logits.size();
    const double inv_c = 1.0 / static_cast<double>(c);
    LossResult res;
    res.grad.resize(c);
    for (std::size_t i = 0; i < c; ++i) {
        double yh = logits[i], y = targets[i];
        double p = sigmoid(yh), q = sigmoid(-yh);
        double pm = std::max(p - margin, kEps);
        double loss_pos = -y * powg(1.0 - pm, gamma) * std::log(pm);
        double loss_neg = (1.0 - y) * (lambda - p) * p * p;
        res.loss += (loss_pos + loss_neg) * inv_c;

        double grad_pos = 0.0;
        if (y != 0.0 && p - margin > kEps) {
            grad_pos = y * p * q *
                       (gamma * powg(1.0 - pm, gamma - 1.0) * std::log(pm) - powg(1.0 - pm, gamma) / pm);
        }
        double grad_neg = (1.0 - y) * (2.0 * lambda * p - 3.0 * p * p) * p * q;
        res.grad[i] = (grad_pos + grad_neg) * inv_c;
    }
    return res;
}

LossResult sigmoid_f1(std::span<const double> batch_logits, std::span<const double> batch_targets,
                      int batch, int classes, double beta, double eta) {
    if (batch < 1 || classes < 1) throw std::invalid_argument("sigmoid_f1: empty batch");
    if (batch_logits.size() != static_cast<std::size_t>(batch) * classes ||
        batch_targets.size() != batch_logits.size()) {
        throw std::invalid_argument("sigmoid_f1: shape mismatch");
    }
    if (beta <= 0.0) throw std::invalid_argument("sigmoid_f1: beta must be > 0");
    const std::size_t n = batch_logits.size();
    std::vector<double> s(n), s_comp(n);
    double tp = 0.0, fp = 0.0, fn = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        double u = beta * (batch_logits[i] + eta);
        s[i] = sigmoid(u);
        s_comp[i] = sigmoid(-u);
        double y = batch_targets[i];
        if (y != 0.0 && y != 1.0) throw std::invalid_argument("sigmoid_f1: targets must be 0 or 1");
        tp += s[i] * y;
        fp += s[i] * (1.0 - y);
        fn += (1.0 - s[i]) * y;
    }
    double d = 2.0 * tp + fn + fp;
    LossResult res;
    res.grad.assign(n, 0.0);
    if (d == 0.0) {
        res.loss = 1.0;  // documented degenerate case: nothing predicted, nothing to predict
        return res;
    }
    res.loss = 1.0 - 2.0 * tp / d;
    for (std::size_t i = 0; i < n; ++i) {
        double y = batch_targets[i];
        double dloss_ds = (2.0 * tp - 2.0 * y * d) / (d * d);
        res.grad[i] = dloss_ds * beta * s[i] * s_comp[i];
    }
    return res;
}

TripletResult triplet(std::span<const double> za, std::span<const double> zn,
                      std::span<const double> zd, double margin) {
    if (za.empty()) throw std::invalid_argument("triplet: zero-length vectors");
    if (za.size() != zn.size() || za.size() != zd.size()) {
        throw std::invalid_argument("triplet: dimension mismatch");
    }
    constexpr double kEps = 1e-12;
    const std::size_t dim = za.size();
    double dn2 = 0.0, dd2 = 0.0;
    for (std::size_t i = 0; i < dim; ++i) {
        double a = za[i] - zn[i], b = za[i] - zd[i];
        dn2 += a * a;
        dd2 += b * b;
    }
    double dn = std::sqrt(dn2), dd = std::sqrt(dd2);
    TripletResult res;
    res.grad_anchor.assign(dim, 0.0);
    res.grad_neighbor.assign(dim, 0.0);
    res.grad_distant.assign(dim, 0.0);
    double v = dn - dd + margin;
    if (v <= 0.0) return res;  // inactive hinge, subgradient 0 at the kink
    res.loss = v;
    double inv_dn = 1.0 / std::max(dn, kEps);
    double inv_dd = 1.0 / std::max(dd, kEps);
    for (std::size_t i = 0; i < dim; ++i) {
        double un = (za[i] - zn[i]) * inv_dn;
        double ud = (za[i] - zd[i]) * inv_dd;
        res.grad_anchor[i] = un - ud;
        res.grad_neighbor[i] = -un;
        res.grad_distant[i] = ud;
    }
    return res;
}

LossResult batch_loss(const LossHyper& hyper, std::span<const double> logits,
                      std::span<const double> targets, int batch, int classes,
                      std::span<const double> class_weights) {
    if (batch < 1 || classes < 1) throw std::invalid_argument("batch_loss: empty batch");
    if (logits.size() != static_cast<std::size_t>(batch) * classes ||
        targets.size() != logits.size()) {
        throw std::invalid_argument("batch_loss: shape mismatch");
    }
    if (hyper.kind == LossKind::sigmoidf1) {
        return sigmoid_f1(logits, targets, batch, classes, -hyper.s, hyper.e);
    }
    LossResult res;
    res.grad.assign(logits.size(), 0.0);
    const double inv_b = 1.0 / batch;
    for (int b = 0; b < batch; ++b) {
        auto lrow = logits.subspan(static_cast<std::size_t>(b) * classes, classes);
        auto trow = targets.subspan(static_cast<std::size_t>(b) * classes, classes);
        LossResult one;
        switch (hyper.kind) {
            case LossKind::bce:
                one = bce_with_logits(lrow, trow, class_weights);
                break;
            case LossKind::asl:
                one = asl(lrow, trow, hyper.gamma_pos, hyper.gamma_neg, hyper.margin);
                break;
            case LossKind::hill:
                one = hill(lrow, trow, hyper.lambda, hyper.gamma, hyper.margin);
                break;
            case LossKind::sigmoidf1:
                break;  // handled above
        }
        res.loss += one.loss * inv_b;
        for (int j = 0; j < classes; ++j) {
            res.grad[static_cast<std::size_t>(b) * classes + j] = one.grad[j] * inv_b;
        }
    }
    return res;
}

std::vector<double> inverse_frequency_weights(std::span<const double> class_counts) {
    if (class_counts.empty()) throw std::invalid_argument("inverse_frequency_weights: empty counts");
    std::vector<double> w(class_counts.size());
    double sum = 0.0;
    for (std::size_t i = 0; i < w.size(); ++i) {
        w[i] = 1.0 / std::max(class_counts[i], 1.0);
        sum += w[i];
    }
    double scale = static_cast<double>(w.size()) / sum;  // mean-one
    for (double& v : w) v *= scale;
    return w;
}

double finite_diff_check(const LossFn& fn, std::span<const double> x, double h) {
    std::vector<double> an = fn(x).second;
    if (an.size() != x.size()) throw std::invalid_argument("finite_diff_check: gradient size mismatch");
    double scale = 0.0;
    for (double g : an) scale = std::max(scale, std::fabs(g));
    std::vector<double> pert(x.begin(), x.end());
    double worst = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        pert[i] = x[i] + h;
        double up = fn(pert).first;
        pert[i] = x[i] - h;
        double down = fn(pert).first;
        pert[i] = x[i];
        double fd = (up - down) / (2.0 * h);
        double denom = std::max({std::fabs(fd), std::fabs(an[i]), 0.01 * scale});
        if (denom == 0.0) continue;
        worst = std::max(worst, std::fabs(fd - an[i]) / denom);
    }
    return worst;
}

}  // namespace tilefreq
