// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "tubesal/report.hpp"
#include "tubesal/trainer.hpp"

namespace tubesal::train {

/// Grid of (d_f, d_t) pairs trained from identical seeds and evaluated with
/// a shared TrainConfig.
struct SweepSpec {
    std::vector<std::pair<std::size_t, std::size_t>> grid;  // (d_f, d_t), d_t | d_f
    std::size_t stride = 5;
    model::ModelConfig base;  // d_f/d_t/stride replaced per cell
    TrainConfig train;
    EvalOptions eval_window;

    void validate() const;
};

struct SweepCell {
    std::size_t d_f = 0;
    std::size_t d_t = 0;
    bool ok = false;
    std::string error;  // set when the cell failed; row is missing from the table
    metrics::MetricReport report;
};

struct SweepResult {
    std::vector<SweepCell> cells;
    std::vector<report::SweepRow> rows;
    std::string observation;  // qualitative d_t-peak note, not asserted anywhere
};

/// Trains/evaluates every cell. Cells are independent; TUBESAL_THREADS (>=1)
/// caps how many run concurrently. Output order is fixed by the grid, so
/// results are deterministic regardless of the worker count.
SweepResult sweep(const SweepSpec& spec, const data::Dataset& dataset);

/// sweep.csv, one chart_<metric>.svg per metric, observation.txt.
void write_sweep_outputs(const SweepResult& result, const std::filesystem::path& out_dir);

}  // namespace tubesal::train
