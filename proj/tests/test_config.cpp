#include <doctest.h>

#include "tubesal/config.hpp"

using namespace tubesal;
using tubesal::config::Config;

TEST_CASE("config parses key=value lines with comments and sections") {
    auto cfg = Config::parse(
        "# a comment\n"
        "model.dim=32\n"
        "train.lr_max=1e-4   # inline comment\n"
        "\n"
        "data.train_subsets=Easy, Normal\n"
        "train.variable_depth=true\n");
    CHECK(cfg.get_size("model.dim", 0) == 32);
    CHECK(cfg.get_double("train.lr_max", 0) == doctest::Approx(1e-4));
    CHECK(cfg.get_bool("train.variable_depth", false));
    CHECK(cfg.get_list("data.train_subsets") == std::vector<std::string>{"Easy", "Normal"});
    CHECK(cfg.get_str("data.root", "fallback") == "fallback");
}

TEST_CASE("unknown keys are rejected with the valid-key list") {
    try {
        Config::parse("model.dimension=64\n");
        FAIL("expected ConfigError");
    } catch (const ConfigError& e) {
        const std::string msg = e.what();
        CHECK(msg.find("model.dimension") != std::string::npos);
        CHECK(msg.find("model.dim") != std::string::npos);
        CHECK(msg.find("train.lr_max") != std::string::npos);
    }
    CHECK_THROWS_AS(Config::parse("just a line without equals\n"), ConfigError);
}

TEST_CASE("overrides win over file values") {
    auto cfg = Config::parse("model.dim=32\n");
    cfg.apply_override("model.dim=64");
    CHECK(cfg.get_size("model.dim", 0) == 64);
    CHECK_THROWS_AS(cfg.apply_override("nonsense"), ConfigError);
    CHECK_THROWS_AS(cfg.apply_override("bogus.key=1"), ConfigError);
}

TEST_CASE("typed getter validation") {
    auto cfg = Config::parse("model.dim=abc\ntrain.variable_depth=maybe\n");
    CHECK_THROWS_AS(cfg.get_size("model.dim", 0), ConfigError);
    CHECK_THROWS_AS(cfg.get_bool("train.variable_depth", false), ConfigError);
}

TEST_CASE("config builders materialize the typed structs") {
    auto cfg = Config::parse(
        "model.d_f=8\nmodel.d_t=4\nmodel.dim=32\nmodel.heads=4\nmodel.mask_strength=0.5\n"
        "train.seed=17\ntrain.eval_mode=recursive\ntrain.batch_size=3\n"
        "synth.num_objects=3\nsynth.shapes=square\nsynth.shift_times=10,20\n"
        "sweep.grid=8:2,8:4\n");
    auto mc = config::model_config_from(cfg);
    CHECK(mc.d_f == 8);
    CHECK(mc.d_t == 4);
    CHECK(mc.mask.strength == 0.5);

    auto tc = config::train_config_from(cfg);
    CHECK(tc.seed == 17);
    CHECK(tc.batch_size == 3);
    CHECK(tc.eval_mode == train::EvalMode::Recursive);

    auto sc = config::synthetic_config_from(cfg);
    CHECK(sc.num_objects == 3);
    REQUIRE(sc.shapes.size() == 1);
    CHECK(sc.shapes[0] == data::ObjectShape::Square);
    CHECK(sc.shift_times == std::vector<std::size_t>{10, 20});

    auto grid = config::sweep_grid_from(cfg);
    REQUIRE(grid.size() == 2);
    CHECK(grid[1] == std::pair<std::size_t, std::size_t>{8, 4});

    // invalid combinations surface through validate()
    auto bad = Config::parse("model.d_f=8\nmodel.d_t=3\n");
    CHECK_THROWS_AS(config::model_config_from(bad), ConfigError);
    auto bad2 = Config::parse("train.eval_mode=sometimes\n");
    CHECK_THROWS_AS(config::train_config_from(bad2), ConfigError);
}
