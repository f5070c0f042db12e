// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "tubesal/metrics.hpp"

namespace tubesal::report {

/// Long-format metric CSV: subset,metric,value (one row per pair).
void write_metrics_csv(const std::filesystem::path& path, const metrics::MetricReport& report);

/// Aligned plain-text table: one metric per row, one subset per column.
std::string format_metrics_table(const metrics::MetricReport& report);

/// One sweep cell x subset row of the Table-IV-style grid.
struct SweepRow {
    std::size_t d_f = 0;
    std::size_t d_t = 0;
    std::string subset;
    metrics::SubsetMetrics m;
};

/// Wide CSV: d_f,d_t,subset,precision,recall,auc,f_score,mae,cc,s_measure.
void write_sweep_csv(const std::filesystem::path& path, const std::vector<SweepRow>& rows);
std::vector<SweepRow> read_sweep_csv(const std::filesystem::path& path);
std::string format_sweep_table(const std::vector<SweepRow>& rows);

/// Merge (concatenate, sort, de-duplicate) rows from several sweep CSVs.
std::vector<SweepRow> merge_sweep_rows(const std::vector<std::vector<SweepRow>>& inputs);

/// Line chart of one metric vs d_t, one polyline per d_f, averaged over
/// subsets. Deterministic text output.
void write_metric_chart_svg(const std::filesystem::path& path, const std::string& metric,
                            const std::vector<SweepRow>& rows);

}  // namespace tubesal::report
