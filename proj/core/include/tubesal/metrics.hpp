// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <map>
#include <string>
#include <vector>

#include "tubesal/tensor.hpp"

namespace tubesal::metrics {

/// A saliency map as a plain double grid; metrics are pure pixel statistics
/// independent of the tensor engine.
struct Map {
    std::size_t h = 0, w = 0;
    std::vector<double> v;

    std::size_t size() const { return v.size(); }
};

/// Converts a (h,w) or (1,h,w) tensor.
template <typename T>
Map to_map(const Tensor<T>& t);

/// Binarizes at 0.5 (used for ground truth that went through resampling).
Map binarize(const Map& m, double threshold = 0.5);
bool is_binary(const Map& m);

double mae(const Map& pred, const Map& gt);

/// Precision/recall of pred binarized at `threshold` against binary gt.
/// Empty-prediction precision and empty-gt recall are 0 by convention.
std::pair<double, double> precision_recall(const Map& pred, const Map& gt,
                                           double threshold = 0.5);

/// (1 + b2) P R / (b2 P + R); 0 when both P and R are 0.
double f_score(double precision, double recall, double beta_sq = 0.3);

/// Pixel-wise ROC-AUC via the tie-averaged rank statistic (Mann-Whitney).
/// gt must contain both classes.
double roc_auc(const Map& pred, const Map& gt);

/// Pearson correlation over pixels; both maps must be non-constant.
double pearson_cc(const Map& pred, const Map& gt);

/// Structure measure: alpha * S_object + (1 - alpha) * S_region, with the
/// reference degenerate rules for all-foreground / all-background gt.
double s_measure(const Map& pred, const Map& gt, double alpha = 0.5);

struct SubsetMetrics {
    double precision = 0, recall = 0, auc = 0, f_score = 0, mae = 0, cc = 0, s_measure = 0;
    std::size_t frames = 0;
};

struct MetricReport {
    // keyed by subset name (Easy/Normal/Difficult/Synthetic)
    std::map<std::string, SubsetMetrics> subsets;
    std::string note;  // aggregation remarks (e.g. per-frame averaging)
};

struct LabeledPair {
    Map pred;
    Map gt;  // binary
    std::string subset;
};

/// Per-subset arithmetic means of the per-frame metrics (compensated
/// summation, fixed order). F-score is computed from the subset-mean
/// precision and recall. Frames where AUC or CC is undefined are excluded
/// from that metric's mean only.
MetricReport evaluate_report(const std::vector<LabeledPair>& pairs);

inline const std::vector<std::string> kMetricNames = {
    "precision", "recall", "auc", "f_score", "mae", "cc", "s_measure"};

double metric_by_name(const SubsetMetrics& m, const std::string& name);

extern template Map to_map<float>(const Tensor<float>&);
extern template Map to_map<double>(const Tensor<double>&);

}  // namespace tubesal::metrics
