// SPDX-License-Identifier: Apache-2.0
#include "tubesal/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>
#include <limits>
#include <numeric>

namespace tubesal::metrics {

namespace {

void check_same_shape(const Map& a, const Map& b, const char* op) {
    if (a.h != b.h || a.w != b.w)
        throw DimensionError(std::string(op) + ": map shapes differ: " + std::to_string(a.h) +
                             "x" + std::to_string(a.w) + " vs " + std::to_string(b.h) + "x" +
                             std::to_string(b.w));
}

void check_binary(const Map& gt, const char* op) {
    for (auto v : gt.v)
        if (v != 0.0 && v != 1.0)
            throw DomainError(std::string(op) + ": ground truth is not binary (found " +
                              std::to_string(v) + ")");
}

double kahan_sum(const std::vector<double>& xs) {
    double acc = 0.0, comp = 0.0;
    for (double x : xs) {
        const double y = x - comp;
        const double s = acc + y;
        comp = (s - acc) - y;
        acc = s;
    }
    return acc;
}

}  // namespace

template <typename T>
Map to_map(const Tensor<T>& t) {
    Shape s = t.shape();
    if (s.size() == 3 && s[0] == 1) s = {s[1], s[2]};
    if (s.size() != 2)
        throw DimensionError("to_map: expected (h,w) or (1,h,w), got " + shape_str(t.shape()));
    Map m;
    m.h = s[0];
    m.w = s[1];
    m.v.reserve(t.numel());
    for (auto v : t.values()) m.v.push_back(double(v));
    return m;
}

Map binarize(const Map& m, double threshold) {
    Map out = m;
    for (auto& v : out.v) v = v >= threshold ? 1.0 : 0.0;
    return out;
}

bool is_binary(const Map& m) {
    for (auto v : m.v)
        if (v != 0.0 && v != 1.0) return false;
    return true;
}

double mae(const Map& pred, const Map& gt) {
    check_same_shape(pred, gt, "mae");
    double acc = 0.0, comp = 0.0;
    for (std::size_t i = 0; i < pred.size(); ++i) {
        const double y = std::abs(pred.v[i] - gt.v[i]) - comp;
        const double s = acc + y;
        comp = (s - acc) - y;
        acc = s;
    }
    return acc / double(pred.size());
}

std::pair<double, double> precision_recall(const Map& pred, const Map& gt, double threshold) {
    check_same_shape(pred, gt, "precision_recall");
    check_binary(gt, "precision_recall");
    std::size_t tp = 0, fp = 0, fn = 0;
    for (std::size_t i = 0; i < pred.size(); ++i) {
        const bool p = pred.v[i] >= threshold;
        const bool t = gt.v[i] != 0.0;
        tp += std::size_t(p && t);
        fp += std::size_t(p && !t);
        fn += std::size_t(!p && t);
    }
    const double precision = (tp + fp) == 0 ? 0.0 : double(tp) / double(tp + fp);
    const double recall = (tp + fn) == 0 ? 0.0 : double(tp) / double(tp + fn);
    return {precision, recall};
}

double f_score(double precision, double recall, double beta_sq) {
    if (precision == 0.0 && recall == 0.0) return 0.0;
    return (1.0 + beta_sq) * precision * recall / (beta_sq * precision + recall);
}

double roc_auc(const Map& pred, const Map& gt) {
    check_same_shape(pred, gt, "roc_auc");
    check_binary(gt, "roc_auc");
    std::size_t npos = 0;
    for (auto v : gt.v) npos += std::size_t(v != 0.0);
    const std::size_t nneg = gt.size() - npos;
    if (npos == 0 || nneg == 0)
        throw MetricError("roc_auc: ground truth contains a single class");

    std::vector<std::size_t> order(pred.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return pred.v[a] < pred.v[b]; });

    // tie-averaged ranks, 1-based
    double rank_sum_pos = 0.0;
    std::size_t i = 0;
    while (i < order.size()) {
        std::size_t j = i;
        while (j + 1 < order.size() && pred.v[order[j + 1]] == pred.v[order[i]]) ++j;
        const double avg_rank = 0.5 * double(i + 1 + j + 1);
        for (std::size_t k = i; k <= j; ++k)
            if (gt.v[order[k]] != 0.0) rank_sum_pos += avg_rank;
        i = j + 1;
    }
    return (rank_sum_pos - double(npos) * double(npos + 1) / 2.0) /
           (double(npos) * double(nneg));
}

double pearson_cc(const Map& pred, const Map& gt) {
    check_same_shape(pred, gt, "pearson_cc");
    const std::size_t n = pred.size();
    double mx = 0.0, my = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        mx += pred.v[i];
        my += gt.v[i];
    }
    mx /= double(n);
    my /= double(n);
    double sxx = 0.0, syy = 0.0, sxy = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double dx = pred.v[i] - mx;
        const double dy = gt.v[i] - my;
        sxx += dx * dx;
        syy += dy * dy;
        sxy += dx * dy;
    }
    if (sxx == 0.0 || syy == 0.0)
        throw MetricError("pearson_cc: zero variance input");
    return sxy / std::sqrt(sxx * syy);
}

namespace {

// S-measure internals follow the reference structure-measure formulation
// (object term over fg/bg means, region term over the 4-way centroid split
// with the SSIM-style block comparison).
constexpr double kEps = 2.220446049250313e-16;

double object_score(const std::vector<double>& vals) {
    if (vals.empty()) return 0.0;
    double mean = 0.0;
    for (double v : vals) mean += v;
    mean /= double(vals.size());
    double var = 0.0;
    for (double v : vals) var += (v - mean) * (v - mean);
    // sample std as in the reference
    const double sd = vals.size() > 1 ? std::sqrt(var / double(vals.size() - 1)) : 0.0;
    return 2.0 * mean / (mean * mean + 1.0 + sd + kEps);
}

double s_object(const Map& pred, const Map& gt) {
    std::vector<double> fg, bg;
    for (std::size_t i = 0; i < pred.size(); ++i) {
        if (gt.v[i] != 0.0)
            fg.push_back(pred.v[i]);
        else
            bg.push_back(1.0 - pred.v[i]);
    }
    double u = 0.0;
    for (auto v : gt.v) u += v;
    u /= double(gt.size());
    return u * object_score(fg) + (1.0 - u) * object_score(bg);
}

double block_ssim(const Map& pred, const Map& gt, std::size_t y0, std::size_t y1, std::size_t x0,
                  std::size_t x1) {
    const double n = double((y1 - y0) * (x1 - x0));
    if (n == 0.0) return 1.0;
    double mx = 0.0, my = 0.0;
    for (std::size_t y = y0; y < y1; ++y)
        for (std::size_t x = x0; x < x1; ++x) {
            mx += pred.v[y * pred.w + x];
            my += gt.v[y * gt.w + x];
        }
    mx /= n;
    my /= n;
    double sxx = 0.0, syy = 0.0, sxy = 0.0;
    for (std::size_t y = y0; y < y1; ++y)
        for (std::size_t x = x0; x < x1; ++x) {
            const double dx = pred.v[y * pred.w + x] - mx;
            const double dy = gt.v[y * gt.w + x] - my;
            sxx += dx * dx;
            syy += dy * dy;
            sxy += dx * dy;
        }
    sxx /= n - 1.0 + kEps;
    syy /= n - 1.0 + kEps;
    sxy /= n - 1.0 + kEps;
    const double alpha = 4.0 * mx * my * sxy;
    const double beta = (mx * mx + my * my) * (sxx + syy);
    if (alpha != 0.0) return alpha / (beta + kEps);
    return beta == 0.0 ? 1.0 : 0.0;
}

double s_region(const Map& pred, const Map& gt) {
    // centroid of the foreground (image center if gt is empty), 1-based as
    // in the reference, then 4 blocks weighted by pixel share
    double area = 0.0, cx = 0.0, cy = 0.0;
    for (std::size_t y = 0; y < gt.h; ++y)
        for (std::size_t x = 0; x < gt.w; ++x)
            if (gt.v[y * gt.w + x] != 0.0) {
                area += 1.0;
                cx += double(x + 1);
                cy += double(y + 1);
            }
    std::size_t X, Y;
    if (area == 0.0) {
        X = std::size_t(std::llround(double(gt.w) / 2.0));
        Y = std::size_t(std::llround(double(gt.h) / 2.0));
    } else {
        X = std::size_t(std::llround(cx / area));
        Y = std::size_t(std::llround(cy / area));
    }
    X = std::clamp<std::size_t>(X, 1, gt.w);
    Y = std::clamp<std::size_t>(Y, 1, gt.h);

    const double total = double(gt.h * gt.w);
    const double w1 = double(X * Y) / total;
    const double w2 = double((gt.w - X) * Y) / total;
    const double w3 = double(X * (gt.h - Y)) / total;
    const double w4 = 1.0 - w1 - w2 - w3;

    const double q1 = block_ssim(pred, gt, 0, Y, 0, X);
    const double q2 = block_ssim(pred, gt, 0, Y, X, gt.w);
    const double q3 = block_ssim(pred, gt, Y, gt.h, 0, X);
    const double q4 = block_ssim(pred, gt, Y, gt.h, X, gt.w);
    return w1 * q1 + w2 * q2 + w3 * q3 + w4 * q4;
}

}  // namespace

double s_measure(const Map& pred, const Map& gt, double alpha) {
    check_same_shape(pred, gt, "s_measure");
    check_binary(gt, "s_measure");
    double y = 0.0;
    for (auto v : gt.v) y += v;
    y /= double(gt.size());
    double x = 0.0;
    for (auto v : pred.v) x += v;
    x /= double(pred.size());
    if (y == 0.0) return 1.0 - x;  // all-background gt
    if (y == 1.0) return x;        // all-foreground gt
    const double q = alpha * s_object(pred, gt) + (1.0 - alpha) * s_region(pred, gt);
    return std::max(q, 0.0);
}

double metric_by_name(const SubsetMetrics& m, const std::string& name) {
    if (name == "precision") return m.precision;
    if (name == "recall") return m.recall;
    if (name == "auc") return m.auc;
    if (name == "f_score") return m.f_score;
    if (name == "mae") return m.mae;
    if (name == "cc") return m.cc;
    if (name == "s_measure") return m.s_measure;
    throw ConfigError("unknown metric \"" + name + "\"");
}

MetricReport evaluate_report(const std::vector<LabeledPair>& pairs) {
    struct Acc {
        std::vector<double> precision, recall, auc, mae_v, cc, s;
    };
    std::map<std::string, Acc> by_subset;
    for (const auto& pair : pairs) {
        auto& acc = by_subset[pair.subset];
        const auto [p, r] = precision_recall(pair.pred, pair.gt);
        acc.precision.push_back(p);
        acc.recall.push_back(r);
        acc.mae_v.push_back(mae(pair.pred, pair.gt));
        acc.s.push_back(s_measure(pair.pred, pair.gt));
        try {
            acc.auc.push_back(roc_auc(pair.pred, pair.gt));
        } catch (const MetricError&) {
            // single-class frame: AUC undefined, excluded from the mean
        }
        try {
            acc.cc.push_back(pearson_cc(pair.pred, pair.gt));
        } catch (const MetricError&) {
        }
    }

    MetricReport report;
    report.note = "per-frame means; f_score from subset-mean precision/recall";
    for (auto& [subset, acc] : by_subset) {
        if (acc.precision.empty()) {
            std::cerr << "evaluate_report: subset \"" << subset << "\" is empty, omitted\n";
            continue;
        }
        SubsetMetrics m;
        m.frames = acc.precision.size();
        const auto mean_of = [](const std::vector<double>& xs) {
            return xs.empty() ? std::numeric_limits<double>::quiet_NaN()
                              : kahan_sum(xs) / double(xs.size());
        };
        m.precision = mean_of(acc.precision);
        m.recall = mean_of(acc.recall);
        m.auc = mean_of(acc.auc);
        m.mae = mean_of(acc.mae_v);
        m.cc = mean_of(acc.cc);
        m.s_measure = mean_of(acc.s);
        m.f_score = f_score(m.precision, m.recall);
        report.subsets[subset] = m;
    }
    return report;
}

template Map to_map<float>(const Tensor<float>&);
template Map to_map<double>(const Tensor<double>&);

}  // namespace tubesal::metrics
