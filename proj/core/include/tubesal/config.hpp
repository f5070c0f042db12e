// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "tubesal/model.hpp"
#include "tubesal/sweep.hpp"
#include "tubesal/synthetic.hpp"

namespace tubesal::config {

/// Flat key=value configuration with dotted section names
/// (e.g. train.lr_max=1e-5). '#' starts a comment; keys must come from the
/// known-key registry, and command-line overrides win over file values.
class Config {
public:
    Config() = default;

    static Config load(const std::filesystem::path& path);
    static Config parse(const std::string& text);

    /// Applies "key=value"; unknown keys raise ConfigError listing the
    /// valid keys.
    void set(const std::string& key, const std::string& value);
    void apply_override(const std::string& key_equals_value);

    bool has(const std::string& key) const;
    std::string get_str(const std::string& key, const std::string& def) const;
    double get_double(const std::string& key, double def) const;
    std::size_t get_size(const std::string& key, std::size_t def) const;
    std::uint64_t get_u64(const std::string& key, std::uint64_t def) const;
    bool get_bool(const std::string& key, bool def) const;
    std::vector<std::string> get_list(const std::string& key) const;  // comma-separated

    const std::map<std::string, std::string>& entries() const { return values_; }
    static const std::vector<std::string>& known_keys();

    std::string serialize() const;

private:
    std::map<std::string, std::string> values_;
};

model::ModelConfig model_config_from(const Config& cfg);
train::TrainConfig train_config_from(const Config& cfg);
data::SyntheticConfig synthetic_config_from(const Config& cfg);
/// Parses sweep.grid entries of the form "d_f:d_t" (comma-separated).
std::vector<std::pair<std::size_t, std::size_t>> sweep_grid_from(const Config& cfg);

}  // namespace tubesal::config
