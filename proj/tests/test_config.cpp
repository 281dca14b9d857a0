#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "mvsweep/commands.hpp"
#include "mvsweep/config.hpp"

using namespace mvsweep;

namespace {

std::string write_tmp(const char* name, const std::string& text) {
    auto dir = std::filesystem::temp_directory_path() / "mvsweep_cfg_tests";
    std::filesystem::create_directories(dir);
    auto path = (dir / name).string();
    std::ofstream out(path);
    out << text;
    return path;
}

} // namespace

TEST_CASE("defaults follow the stage and training settings") {
    RunConfig cfg;
    StageConfig s = cfg.stage_config();
    CHECK(s.planes[0] == 48);
    CHECK(s.planes[1] == 32);
    CHECK(s.planes[2] == 8);
    CHECK(s.lambda[0] == 1.5);
    CHECK(s.lambda[1] == 0.75);
    TrainConfig t = cfg.train_config();
    CHECK(t.adam.lr == 1e-3);
    CHECK(t.loss_weights.alpha[0] == 0.5);
    CHECK(t.loss_weights.alpha[2] == 2.0);
    CHECK(t.loss_weights.beta[0] == 3.0);
    CHECK(t.loss_weights.beta[1] == 0.0);
    REQUIRE(t.lr_schedule.size() == 3);
    CHECK(t.lr_schedule[0] == std::pair<int, double>{10, 0.5});
}

TEST_CASE("config file parsing with sections") {
    std::string path = write_tmp("ok.ini", R"(# comment
[run]
seed = 99
threads = 2

[stage]
planes1 = 24
lambda12 = 2.5

[train]
epochs = 4
lr_schedule = 2:0.5,3:0.25
)");
    RunConfig cfg;
    ConfigBinder binder(cfg);
    binder.load_file(path);
    CHECK(cfg.seed == 99);
    CHECK(cfg.threads == 2);
    CHECK(cfg.planes1 == 24);
    CHECK(cfg.lambda12 == 2.5);
    CHECK(cfg.epochs == 4);
    auto sched = parse_lr_schedule(cfg.lr_schedule);
    REQUIRE(sched.size() == 2);
    CHECK(sched[1] == std::pair<int, double>{3, 0.25});
}

TEST_CASE("unknown keys are rejected") {
    std::string path = write_tmp("bad_key.ini", "[stage]\nplanez1 = 3\n");
    RunConfig cfg;
    ConfigBinder binder(cfg);
    CHECK_THROWS_WITH_AS(binder.load_file(path), doctest::Contains("ConfigError"),
                         Error);

    std::string path2 = write_tmp("bad_section.ini", "[nosuch]\nseed = 3\n");
    RunConfig cfg2;
    ConfigBinder binder2(cfg2);
    CHECK_THROWS_AS(binder2.load_file(path2), Error);
}

TEST_CASE("malformed values and lines are rejected") {
    RunConfig cfg;
    ConfigBinder binder(cfg);
    CHECK_THROWS_AS(binder.set("run.threads", "two"), Error);
    CHECK_THROWS_AS(binder.set("stage.lambda12", "1.5x"), Error);
    CHECK_THROWS_AS(binder.set("train.train_rem", "maybe"), Error);

    std::string path = write_tmp("no_section.ini", "seed = 3\n");
    CHECK_THROWS_AS(binder.load_file(path), Error);
    std::string path2 = write_tmp("no_eq.ini", "[run]\nseed 3\n");
    CHECK_THROWS_AS(binder.load_file(path2), Error);
}

TEST_CASE("overrides win over the config file") {
    std::string path = write_tmp("layered.ini", "[train]\nepochs = 4\n");
    RunConfig cfg;
    ConfigBinder binder(cfg);
    binder.load_file(path);
    CHECK(cfg.epochs == 4);
    binder.set("train.epochs", "9");
    CHECK(cfg.epochs == 9);
}

TEST_CASE("boolean spellings") {
    RunConfig cfg;
    ConfigBinder binder(cfg);
    for (const char* v : {"true", "1", "on", "yes"}) {
        binder.set("train.train_features", v);
        CHECK(cfg.train_features);
        binder.set("train.train_features", "false");
    }
}

TEST_CASE("every registered key has a working getter") {
    RunConfig cfg;
    ConfigBinder binder(cfg);
    CHECK(binder.entries().size() > 30);
    for (const auto& e : binder.entries()) CHECK(!e.get().empty());
}
