// SPDX-License-Identifier: Apache-2.0
#include "tubesal/config.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

namespace tubesal::config {

namespace {

std::string trim(const std::string& s) {
    std::size_t a = 0, b = s.size();
    while (a < b && std::isspace(std::uint8_t(s[a]))) ++a;
    while (b > a && std::isspace(std::uint8_t(s[b - 1]))) --b;
    return s.substr(a, b - a);
}

}  // namespace

const std::vector<std::string>& Config::known_keys() {
    static const std::vector<std::string> keys = {
        "model.d_f", "model.d_t", "model.stride", "model.patch", "model.dim", "model.heads",
        "model.stream_layers", "model.multimodal_layers", "model.mlp_ratio", "model.p_drop",
        "model.mask_offset", "model.mask_strength", "model.num_tasks", "model.task_id",
        "model.decoder_channels", "model.height", "model.width", "model.seed",
        "train.epochs", "train.batch_size", "train.lr_max", "train.lr_min", "train.horizon",
        "train.p_drop", "train.variable_depth", "train.seed", "train.eval_mode",
        "train.max_iterations", "train.t_last_min", "train.t_last_max", "train.checkpoint_dir",
        "eval.t_last_min", "eval.t_last_max", "eval.checkpoint", "eval.predictions",
        "data.root", "data.train_subsets", "data.eval_subsets",
        "synth.height", "synth.width", "synth.num_frames", "synth.num_videos",
        "synth.num_objects", "synth.shapes", "synth.object_size", "synth.velocity",
        "synth.shift_times", "synth.camera_drift", "synth.noise_level", "synth.seed",
        "sweep.grid", "sweep.stride",
        "infer.video", "infer.checkpoint",
    };
    return keys;
}

Config Config::load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("config: cannot open " + path.string());
    std::stringstream ss;
    ss << in.rdbuf();
    return parse(ss.str());
}

Config Config::parse(const std::string& text) {
    Config cfg;
    std::istringstream in(text);
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw ConfigError("config line " + std::to_string(lineno) +
                              ": expected key=value, got \"" + line + "\"");
        cfg.set(trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
    }
    return cfg;
}

void Config::set(const std::string& key, const std::string& value) {
    const auto& keys = known_keys();
    if (std::find(keys.begin(), keys.end(), key) == keys.end()) {
        std::string msg = "config: unknown key \"" + key + "\"; valid keys:";
        for (const auto& k : keys) msg += " " + k;
        throw ConfigError(msg);
    }
    values_[key] = value;
}

void Config::apply_override(const std::string& key_equals_value) {
    const auto eq = key_equals_value.find('=');
    if (eq == std::string::npos)
        throw ConfigError("config override must be key=value, got \"" + key_equals_value + "\"");
    set(trim(key_equals_value.substr(0, eq)), trim(key_equals_value.substr(eq + 1)));
}

bool Config::has(const std::string& key) const { return values_.count(key) != 0; }

std::string Config::get_str(const std::string& key, const std::string& def) const {
    auto it = values_.find(key);
    return it == values_.end() ? def : it->second;
}

double Config::get_double(const std::string& key, double def) const {
    auto it = values_.find(key);
    if (it == values_.end()) return def;
    try {
        std::size_t used = 0;
        const double v = std::stod(it->second, &used);
        if (used != it->second.size()) throw std::invalid_argument("trailing");
        return v;
    } catch (const std::exception&) {
        throw ConfigError("config: " + key + "=\"" + it->second + "\" is not a number");
    }
}

std::size_t Config::get_size(const std::string& key, std::size_t def) const {
    auto it = values_.find(key);
    if (it == values_.end()) return def;
    try {
        std::size_t used = 0;
        const unsigned long long v = std::stoull(it->second, &used);
        if (used != it->second.size()) throw std::invalid_argument("trailing");
        return std::size_t(v);
    } catch (const std::exception&) {
        throw ConfigError("config: " + key + "=\"" + it->second +
                          "\" is not a non-negative integer");
    }
}

std::uint64_t Config::get_u64(const std::string& key, std::uint64_t def) const {
    return get_size(key, std::size_t(def));
}

bool Config::get_bool(const std::string& key, bool def) const {
    auto it = values_.find(key);
    if (it == values_.end()) return def;
    if (it->second == "true" || it->second == "1") return true;
    if (it->second == "false" || it->second == "0") return false;
    throw ConfigError("config: " + key + "=\"" + it->second + "\" is not a boolean");
}

std::vector<std::string> Config::get_list(const std::string& key) const {
    std::vector<std::string> out;
    auto it = values_.find(key);
    if (it == values_.end()) return out;
    std::string cur;
    for (char c : it->second) {
        if (c == ',') {
            if (const auto t = trim(cur); !t.empty()) out.push_back(t);
            cur.clear();
        } else {
            cur.push_back(c);
        }
    }
    if (const auto t = trim(cur); !t.empty()) out.push_back(t);
    return out;
}

std::string Config::serialize() const {
    std::ostringstream os;
    for (const auto& [k, v] : values_) os << k << "=" << v << "\n";
    return os.str();
}

model::ModelConfig model_config_from(const Config& cfg) {
    model::ModelConfig mc;
    mc.d_f = cfg.get_size("model.d_f", mc.d_f);
    mc.d_t = cfg.get_size("model.d_t", mc.d_t);
    mc.stride = cfg.get_size("model.stride", mc.stride);
    mc.patch = cfg.get_size("model.patch", mc.patch);
    mc.dim = cfg.get_size("model.dim", mc.dim);
    mc.heads = cfg.get_size("model.heads", mc.heads);
    mc.stream_layers = cfg.get_size("model.stream_layers", mc.stream_layers);
    mc.multimodal_layers = cfg.get_size("model.multimodal_layers", mc.multimodal_layers);
    mc.mlp_ratio = cfg.get_size("model.mlp_ratio", mc.mlp_ratio);
    mc.p_drop = cfg.get_double("model.p_drop", mc.p_drop);
    mc.mask.offset = cfg.get_size("model.mask_offset", mc.mask.offset);
    mc.mask.strength = cfg.get_double("model.mask_strength", mc.mask.strength);
    mc.num_tasks = cfg.get_size("model.num_tasks", mc.num_tasks);
    mc.task_id = cfg.get_size("model.task_id", mc.task_id);
    mc.decoder_channels = cfg.get_size("model.decoder_channels", mc.decoder_channels);
    mc.input_height = cfg.get_size("model.height", mc.input_height);
    mc.input_width = cfg.get_size("model.width", mc.input_width);
    mc.validate();
    return mc;
}

train::TrainConfig train_config_from(const Config& cfg) {
    train::TrainConfig tc;
    tc.epochs = cfg.get_size("train.epochs", tc.epochs);
    tc.batch_size = cfg.get_size("train.batch_size", tc.batch_size);
    tc.lr_max = cfg.get_double("train.lr_max", tc.lr_max);
    tc.lr_min = cfg.get_double("train.lr_min", tc.lr_min);
    tc.horizon = cfg.get_size("train.horizon", tc.horizon);
    tc.p_drop = cfg.get_double("train.p_drop", cfg.get_double("model.p_drop", tc.p_drop));
    tc.variable_depth = cfg.get_bool("train.variable_depth", tc.variable_depth);
    tc.seed = cfg.get_u64("train.seed", tc.seed);
    tc.eval_mode =
        train::eval_mode_from_string(cfg.get_str("train.eval_mode", to_string(tc.eval_mode)));
    tc.max_iterations = cfg.get_size("train.max_iterations", tc.max_iterations);
    tc.t_last_min = cfg.get_size("train.t_last_min", tc.t_last_min);
    tc.t_last_max = cfg.get_size("train.t_last_max", tc.t_last_max);
    tc.validate();
    return tc;
}

data::SyntheticConfig synthetic_config_from(const Config& cfg) {
    data::SyntheticConfig sc;
    sc.height = cfg.get_size("synth.height", sc.height);
    sc.width = cfg.get_size("synth.width", sc.width);
    sc.num_frames = cfg.get_size("synth.num_frames", sc.num_frames);
    sc.num_objects = cfg.get_size("synth.num_objects", sc.num_objects);
    if (cfg.has("synth.shapes")) {
        sc.shapes.clear();
        for (const auto& s : cfg.get_list("synth.shapes")) {
            if (s == "disk")
                sc.shapes.push_back(data::ObjectShape::Disk);
            else if (s == "square")
                sc.shapes.push_back(data::ObjectShape::Square);
            else
                throw ConfigError("config: synth.shapes entry \"" + s +
                                  "\" (expected disk or square)");
        }
    }
    sc.object_size = cfg.get_double("synth.object_size", sc.object_size);
    sc.velocity = cfg.get_double("synth.velocity", sc.velocity);
    if (cfg.has("synth.shift_times")) {
        sc.shift_times.clear();
        for (const auto& s : cfg.get_list("synth.shift_times"))
            sc.shift_times.push_back(std::stoul(s));
    }
    sc.camera_drift = cfg.get_double("synth.camera_drift", sc.camera_drift);
    sc.noise_level = cfg.get_double("synth.noise_level", sc.noise_level);
    sc.seed = cfg.get_u64("synth.seed", sc.seed);
    sc.validate();
    return sc;
}

std::vector<std::pair<std::size_t, std::size_t>> sweep_grid_from(const Config& cfg) {
    std::vector<std::pair<std::size_t, std::size_t>> grid;
    for (const auto& cell : cfg.get_list("sweep.grid")) {
        const auto colon = cell.find(':');
        if (colon == std::string::npos)
            throw ConfigError("config: sweep.grid entry \"" + cell + "\" must be d_f:d_t");
        grid.push_back({std::stoul(cell.substr(0, colon)), std::stoul(cell.substr(colon + 1))});
    }
    return grid;
}

}  // namespace tubesal::config
