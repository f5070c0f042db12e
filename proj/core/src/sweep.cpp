// SPDX-License-Identifier: Apache-2.0
#include "tubesal/sweep.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <thread>

namespace tubesal::train {

void SweepSpec::validate() const {
    if (grid.empty()) throw ConfigError("sweep: empty grid");
    for (const auto& [d_f, d_t] : grid)
        if (d_t == 0 || d_f % d_t != 0)
            throw ConfigError("sweep: invalid pair d_f=" + std::to_string(d_f) +
                              ", d_t=" + std::to_string(d_t) + " (d_t must divide d_f)");
}

namespace {

std::size_t worker_cap() {
    const char* env = std::getenv("TUBESAL_THREADS");
    if (!env) return 1;
    const long v = std::strtol(env, nullptr, 10);
    return v < 1 ? 1 : std::size_t(v);
}

SweepCell run_cell(const SweepSpec& spec, const data::Dataset& dataset, std::size_t d_f,
                   std::size_t d_t) {
    SweepCell cell;
    cell.d_f = d_f;
    cell.d_t = d_t;
    try {
        model::ModelConfig mc = spec.base;
        mc.d_f = d_f;
        mc.d_t = d_t;
        mc.stride = spec.stride;
        model::Model<float> m(mc, spec.train.seed);
        TrainConfig tc = spec.train;
        tc.checkpoint_dir.clear();  // cells keep no checkpoints
        tc.log_path.clear();
        train(m, dataset, tc);
        cell.report = evaluate_dataset(m, dataset, tc.eval_mode, spec.eval_window);
        cell.ok = true;
    } catch (const std::exception& e) {
        cell.ok = false;
        cell.error = e.what();
    }
    return cell;
}

}  // namespace

SweepResult sweep(const SweepSpec& spec, const data::Dataset& dataset) {
    spec.validate();
    SweepResult result;
    result.cells.resize(spec.grid.size());

    const std::size_t workers = std::min(worker_cap(), spec.grid.size());
    if (workers <= 1) {
        for (std::size_t i = 0; i < spec.grid.size(); ++i)
            result.cells[i] = run_cell(spec, dataset, spec.grid[i].first, spec.grid[i].second);
    } else {
        // one cell per worker thread; each cell is internally single-threaded
        std::vector<std::thread> pool;
        std::atomic<std::size_t> next{0};
        for (std::size_t w = 0; w < workers; ++w)
            pool.emplace_back([&] {
                for (;;) {
                    const std::size_t i = next.fetch_add(1);
                    if (i >= spec.grid.size()) return;
                    result.cells[i] =
                        run_cell(spec, dataset, spec.grid[i].first, spec.grid[i].second);
                }
            });
        for (auto& t : pool) t.join();
    }

    for (const auto& cell : result.cells) {
        if (!cell.ok) {
            std::cerr << "sweep: cell d_f=" << cell.d_f << ", d_t=" << cell.d_t
                      << " failed: " << cell.error << "\n";
            continue;
        }
        for (const auto& [subset, m] : cell.report.subsets)
            result.rows.push_back({cell.d_f, cell.d_t, subset, m});
    }

    // qualitative observation: where does F-score peak over d_t per d_f
    std::map<std::size_t, std::pair<std::size_t, double>> best;  // d_f -> (d_t, f)
    std::map<std::pair<std::size_t, std::size_t>, std::pair<double, std::size_t>> f_by_cell;
    for (const auto& r : result.rows) {
        auto& [sum, n] = f_by_cell[{r.d_f, r.d_t}];
        sum += r.m.f_score;
        ++n;
    }
    std::ostringstream obs;
    for (const auto& [key, sv] : f_by_cell) {
        const double f = sv.first / double(sv.second);
        auto it = best.find(key.first);
        if (it == best.end() || f > it->second.second) best[key.first] = {key.second, f};
    }
    for (const auto& [d_f, peak] : best) {
        char line[160];
        std::snprintf(line, sizeof(line),
                      "d_f=%zu: F-score peaks at d_t=%zu (%.3f); d_f/2 = %.1f\n", d_f,
                      peak.first, peak.second, double(d_f) / 2.0);
        obs << line;
    }
    obs << "(observation only; the peak location is dataset-dependent)\n";
    result.observation = obs.str();
    return result;
}

void write_sweep_outputs(const SweepResult& result, const std::filesystem::path& out_dir) {
    std::filesystem::create_directories(out_dir);
    report::write_sweep_csv(out_dir / "sweep.csv", result.rows);
    for (const auto& name : metrics::kMetricNames)
        report::write_metric_chart_svg(out_dir / ("chart_" + name + ".svg"), name, result.rows);
    std::ofstream obs(out_dir / "observation.txt", std::ios::trunc);
    if (!obs) throw IoError("sweep: cannot write observation.txt");
    obs << result.observation;
}

}  // namespace tubesal::train
