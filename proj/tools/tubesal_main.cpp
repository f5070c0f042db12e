// SPDX-License-Identifier: Apache-2.0
//
// Command-line entry point: dataset generation, training, evaluation,
// (d_f, d_t) sweeps, recursive inference and report merging.

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>

#include "tubesal/checkpoint.hpp"
#include "tubesal/config.hpp"
#include "tubesal/image.hpp"
#include "tubesal/report.hpp"
#include "tubesal/sweep.hpp"
#include "tubesal/synthetic.hpp"
#include "tubesal/trainer.hpp"

namespace fs = std::filesystem;
using namespace tubesal;

namespace {

// Removes everything a failed command created so no partial outputs remain.
class OutputGuard {
public:
    void track(const fs::path& p) { created_.push_back(p); }
    void commit() { created_.clear(); }
    ~OutputGuard() {
        for (auto it = created_.rbegin(); it != created_.rend(); ++it) {
            std::error_code ec;
            fs::remove_all(*it, ec);
        }
    }

private:
    std::vector<fs::path> created_;
};

config::Config load_config(const std::string& path, const std::vector<std::string>& overrides) {
    config::Config cfg = path.empty() ? config::Config{} : config::Config::load(path);
    for (const auto& kv : overrides) cfg.apply_override(kv);
    return cfg;
}

std::string frame_name(std::size_t index) {
    char buf[16];
    std::snprintf(buf, sizeof(buf), "%05zu", index);
    return buf;
}

data::Dataset load_from_config(const config::Config& cfg, const char* subsets_key,
                               const model::ModelConfig& mc) {
    const std::string root = cfg.get_str("data.root", "");
    if (root.empty()) throw ConfigError("data.root is required for this command");
    auto subsets = cfg.get_list(subsets_key);
    if (subsets.empty()) subsets = {"Synthetic"};
    return data::load_dataset(root, subsets, mc.input_height, mc.input_width);
}

model::Model<float> load_model(const config::Config& cfg, const std::string& ckpt_key) {
    auto mc = config::model_config_from(cfg);
    model::Model<float> m(mc, cfg.get_u64("model.seed", cfg.get_u64("train.seed", 1)));
    const std::string ckpt = cfg.get_str(ckpt_key, cfg.get_str("eval.checkpoint", ""));
    if (!ckpt.empty()) {
        auto params = m.parameters();
        auto state = AdamState<float>::init_like(params);
        ckpt::load_checkpoint(ckpt, params, &state);
    }
    return m;
}

int cmd_gen_data(const config::Config& cfg, const fs::path& out) {
    auto sc = config::synthetic_config_from(cfg);
    const std::size_t num_videos = cfg.get_size("synth.num_videos", 3);
    OutputGuard guard;
    if (!fs::exists(out)) guard.track(out);
    const fs::path subset_dir = out / "Synthetic";
    fs::create_directories(subset_dir);
    for (std::size_t i = 0; i < num_videos; ++i) {
        auto vc = sc;
        vc.seed = mix_seed(sc.seed, i);
        auto sv = data::generate_synthetic(vc);
        char name[32];
        std::snprintf(name, sizeof(name), "synth_%02zu", i);
        sv.video.id = name;
        const fs::path dir = subset_dir / name;
        guard.track(dir);
        data::write_video_tree(dir, sv.video);
        std::cout << "wrote " << dir.string() << " (" << sv.video.num_frames() << " frames)\n";
    }
    guard.commit();
    return 0;
}

int cmd_train(const config::Config& cfg, const fs::path& out) {
    auto mc = config::model_config_from(cfg);
    auto tc = config::train_config_from(cfg);
    auto dataset = load_from_config(cfg, "data.train_subsets", mc);
    model::Model<float> m(mc, cfg.get_u64("model.seed", tc.seed));

    OutputGuard guard;
    if (!fs::exists(out)) guard.track(out);
    fs::create_directories(out);
    tc.checkpoint_dir = cfg.get_str("train.checkpoint_dir", out.string());
    tc.log_path = out / "train_log.txt";
    guard.track(tc.log_path);
    guard.track(fs::path(tc.checkpoint_dir) / "checkpoint.tsal");

    auto result = train::train(m, dataset, tc);
    std::cout << "trained " << result.iterations << " iterations; final loss "
              << (result.loss_trace.empty() ? 0.0 : result.loss_trace.back()) << "\n"
              << "checkpoint: " << result.checkpoint.string() << "\n";
    guard.commit();
    return 0;
}

// Evaluation of precomputed prediction maps laid out like the dataset:
// <pred_root>/<subset>/<video>/NNNNN.pgm
metrics::MetricReport evaluate_predictions(const model::ModelConfig& mc,
                                           const data::Dataset& dataset,
                                           const fs::path& pred_root) {
    std::vector<metrics::LabeledPair> pairs;
    for (const auto& video : dataset.videos) {
        const std::string subset = data::to_string(video.difficulty);
        const fs::path dir = pred_root / subset / video.id;
        if (!fs::is_directory(dir))
            throw IoError("eval: missing prediction directory " + dir.string());
        for (std::size_t t = 0; t < video.num_frames(); ++t) {
            const fs::path p = dir / (frame_name(t) + ".pgm");
            if (!fs::exists(p)) continue;
            auto img = image::read_image(p);
            if (img.shape()[1] != mc.input_height || img.shape()[2] != mc.input_width)
                img = image::resize_bilinear(img, mc.input_height, mc.input_width);
            auto gt = metrics::to_map(video.gt[t]);
            if (!metrics::is_binary(gt)) gt = metrics::binarize(gt);
            pairs.push_back({metrics::to_map(img), gt, subset});
        }
    }
    if (pairs.empty())
        throw IoError("eval: no prediction maps found under " + pred_root.string());
    return metrics::evaluate_report(pairs);
}

int cmd_eval(const config::Config& cfg, const fs::path& out) {
    auto mc = config::model_config_from(cfg);
    auto dataset = load_from_config(cfg, "data.eval_subsets", mc);

    metrics::MetricReport report;
    const std::string pred_dir = cfg.get_str("eval.predictions", "");
    if (!pred_dir.empty()) {
        report = evaluate_predictions(mc, dataset, pred_dir);
    } else {
        auto m = load_model(cfg, "eval.checkpoint");
        auto tc = config::train_config_from(cfg);
        train::EvalOptions opts;
        opts.t_last_min = cfg.get_size("eval.t_last_min", 0);
        opts.t_last_max = cfg.get_size("eval.t_last_max", SIZE_MAX);
        report = train::evaluate_dataset(m, dataset, tc.eval_mode, opts);
    }

    OutputGuard guard;
    if (!fs::exists(out)) guard.track(out);
    fs::create_directories(out);
    guard.track(out / "metrics.csv");
    guard.track(out / "metrics.txt");
    report::write_metrics_csv(out / "metrics.csv", report);
    std::ofstream txt(out / "metrics.txt", std::ios::trunc);
    txt << report::format_metrics_table(report);
    std::cout << report::format_metrics_table(report);
    guard.commit();
    return 0;
}

int cmd_sweep(const config::Config& cfg, const fs::path& out) {
    auto mc = config::model_config_from(cfg);
    auto dataset = load_from_config(cfg, "data.train_subsets", mc);

    train::SweepSpec spec;
    spec.grid = config::sweep_grid_from(cfg);
    spec.stride = cfg.get_size("sweep.stride", 5);
    spec.base = mc;
    spec.train = config::train_config_from(cfg);
    spec.eval_window.t_last_min = cfg.get_size("eval.t_last_min", 0);
    spec.eval_window.t_last_max = cfg.get_size("eval.t_last_max", SIZE_MAX);

    OutputGuard guard;
    if (!fs::exists(out)) guard.track(out);
    auto result = train::sweep(spec, dataset);
    guard.track(out / "sweep.csv");
    for (const auto& name : metrics::kMetricNames)
        guard.track(out / ("chart_" + name + ".svg"));
    guard.track(out / "observation.txt");
    train::write_sweep_outputs(result, out);
    std::cout << report::format_sweep_table(result.rows) << result.observation;
    guard.commit();
    return 0;
}

int cmd_infer(const config::Config& cfg, const fs::path& out) {
    auto mc = config::model_config_from(cfg);
    auto dataset = load_from_config(cfg, "data.eval_subsets", mc);
    const std::string video_id = cfg.get_str("infer.video", "");
    if (video_id.empty()) throw ConfigError("infer.video is required");
    const data::Video* video = nullptr;
    for (const auto& v : dataset.videos)
        if (v.id == video_id) video = &v;
    if (!video) throw ConfigError("infer: video \"" + video_id + "\" not found in dataset");

    auto m = load_model(cfg, "infer.checkpoint");
    auto preds = train::recursive_infer(m, *video);
    if (preds.empty()) throw RangeError("infer: video shorter than one clip");

    OutputGuard guard;
    if (!fs::exists(out)) guard.track(out);
    const fs::path dir = out / video_id;
    guard.track(dir);
    fs::create_directories(dir);
    for (const auto& [t_last, map] : preds)
        image::write_image(dir / (frame_name(t_last) + ".pgm"), map, "round(255*p)");
    std::cout << "wrote " << preds.size() << " predicted maps to " << dir.string() << "\n";
    guard.commit();
    return 0;
}

int cmd_report(const std::vector<std::string>& csvs, const fs::path& out) {
    if (csvs.empty()) throw ConfigError("report: at least one sweep CSV is required");
    std::vector<std::vector<report::SweepRow>> inputs;
    for (const auto& p : csvs) inputs.push_back(report::read_sweep_csv(p));
    auto merged = report::merge_sweep_rows(inputs);

    OutputGuard guard;
    if (!fs::exists(out)) guard.track(out);
    fs::create_directories(out);
    guard.track(out / "merged.csv");
    guard.track(out / "merged.txt");
    report::write_sweep_csv(out / "merged.csv", merged);
    std::ofstream txt(out / "merged.txt", std::ios::trunc);
    txt << report::format_sweep_table(merged);
    std::cout << report::format_sweep_table(merged);
    guard.commit();
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"tubelet-based video salient object detection workbench"};
    app.require_subcommand(1);

    struct VerbArgs {
        std::string config;
        std::string out;
        std::vector<std::string> overrides;
    };
    std::map<std::string, VerbArgs> args;
    for (const char* verb : {"gen-data", "train", "eval", "sweep", "infer"}) {
        auto* sub = app.add_subcommand(verb);
        auto& a = args[verb];
        sub->add_option("-c,--config", a.config, "key=value config file");
        sub->add_option("-o,--out", a.out, "output directory")->required();
        sub->add_option("--set", a.overrides, "config override key=value (repeatable)");
    }
    auto* report_cmd = app.add_subcommand("report", "merge sweep CSVs into one table");
    std::string report_out;
    std::vector<std::string> report_csvs;
    report_cmd->add_option("-o,--out", report_out, "output directory")->required();
    report_cmd->add_option("csvs", report_csvs, "sweep CSV files to merge");

    CLI11_PARSE(app, argc, argv);

    try {
        for (const auto& [verb, a] : args) {
            if (!app.get_subcommand(verb)->parsed()) continue;
            auto cfg = load_config(a.config, a.overrides);
            const fs::path out = a.out;
            if (verb == "gen-data") return cmd_gen_data(cfg, out);
            if (verb == "train") return cmd_train(cfg, out);
            if (verb == "eval") return cmd_eval(cfg, out);
            if (verb == "sweep") return cmd_sweep(cfg, out);
            if (verb == "infer") return cmd_infer(cfg, out);
        }
        if (report_cmd->parsed()) return cmd_report(report_csvs, report_out);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
