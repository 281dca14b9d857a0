#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "mvsweep/trainer.hpp"

using namespace mvsweep;

namespace {

std::vector<Scene> toy_dataset(int n, int w, int h, uint64_t seed) {
    std::vector<Scene> scenes;
    SceneSpec base;
    base.width = w;
    base.height = h;
    base.focal = 100.0;
    base.baseline = 60.0;
    for (int i = 0; i < n; ++i) {
        SceneSpec spec = SceneSpec::randomized(base, seed + static_cast<uint64_t>(i));
        scenes.push_back(generate_scene(spec, seed + static_cast<uint64_t>(i)));
    }
    return scenes;
}

StageConfig small_stage() {
    StageConfig cfg;
    cfg.planes = {16, 8, 4};
    return cfg;
}

} // namespace

TEST_CASE("adam leaves parameters unchanged under zero gradients") {
    std::vector<double> p{1.0, -2.0, 3.5};
    std::vector<double> g{0.0, 0.0, 0.0};
    AdamState st;
    AdamConfig cfg;
    adam_step(p, g, st, cfg);
    CHECK(p == std::vector<double>{1.0, -2.0, 3.5});
    CHECK(st.step == 1);
}

TEST_CASE("first adam step approximates a signed step of size lr") {
    std::vector<double> p{0.0};
    std::vector<double> g{0.3};
    AdamState st;
    AdamConfig cfg; // lr = 1e-3
    adam_step(p, g, st, cfg);
    CHECK(std::abs(p[0] + cfg.lr) <= 1e-6 * cfg.lr);

    std::vector<double> pn{0.0};
    std::vector<double> gn{-0.7};
    AdamState st2;
    adam_step(pn, gn, st2, cfg);
    CHECK(std::abs(pn[0] - cfg.lr) <= 1e-6 * cfg.lr);
}

TEST_CASE("identical parameters and gradients update identically") {
    std::vector<double> p{0.5, 0.5};
    std::vector<double> g{0.2, 0.2};
    AdamState st;
    AdamConfig cfg;
    for (int i = 0; i < 10; ++i) adam_step(p, g, st, cfg);
    CHECK(p[0] == p[1]);
}

TEST_CASE("adam rejects mismatched shapes") {
    std::vector<double> p{1.0};
    std::vector<double> g{1.0, 2.0};
    AdamState st;
    AdamConfig cfg;
    CHECK_THROWS_WITH_AS(adam_step(p, g, st, cfg), doctest::Contains("ShapeMismatch"),
                         Error);
}

TEST_CASE("gradient checks stay within tolerance") {
    CHECK(grad_check_rem(5, 1e-4) <= 1e-4);
    CHECK(grad_check_features(5, 1e-4) <= 1e-4);
    CHECK(grad_check_refined_wrt_uncertainty(5, 1e-4) <= 1e-4);
    CHECK(grad_check_hypo_path(5, 1e-4) <= 1e-4);
}

TEST_CASE("linear layer gradients are exact to fp precision") {
    // Conv3x3 against central differences on a tiny field: the map is
    // linear in its parameters, so differences are exact up to rounding
    Rng rng(9);
    Conv3x3 conv(2, 3);
    conv.init_he(rng);
    FeatureMap in(3, 3, 2);
    for (double& v : in.data) v = rng.uniform(-1, 1);
    FeatureMap gout(3, 3, 3);
    for (double& v : gout.data) v = rng.uniform(-1, 1);

    std::vector<double> gk, gb;
    conv.backward(in, gout, gk, gb, nullptr);

    auto objective = [&](const Conv3x3& c) {
        FeatureMap out = c.forward(in);
        double acc = 0;
        for (size_t i = 0; i < out.data.size(); ++i) acc += gout.data[i] * out.data[i];
        return acc;
    };
    double eps = 1e-6, worst = 0.0;
    for (size_t i = 0; i < conv.kernel.size(); ++i) {
        Conv3x3 c = conv;
        c.kernel[i] += eps;
        double fp = objective(c);
        c.kernel[i] -= 2 * eps;
        double fm = objective(c);
        double numeric = (fp - fm) / (2 * eps);
        worst = std::max(worst, std::abs(numeric - gk[i]) /
                                     std::max({std::abs(gk[i]), std::abs(numeric), 1e-6}));
    }
    CHECK(worst <= 1e-7);
}

TEST_CASE("empty dataset is rejected") {
    std::vector<Scene> none;
    TrainConfig tcfg;
    StageConfig cfg = small_stage();
    NetWeights w = NetWeights::init(cfg, 1);
    CHECK_THROWS_WITH_AS(train(none, cfg, tcfg, w), doctest::Contains("EmptyDataset"),
                         Error);
}

TEST_CASE("zero learning rate leaves learned parameters bit-identical") {
    auto data = toy_dataset(2, 32, 32, 11);
    StageConfig cfg = small_stage();
    TrainConfig tcfg;
    tcfg.epochs = 2;
    tcfg.adam.lr = 0.0;
    NetWeights init = NetWeights::init(cfg, 3);
    TrainResult res = train(data, cfg, tcfg, init);
    std::vector<double> a, b;
    init.rem1.pack_params(a);
    res.weights.rem1.pack_params(b);
    CHECK(a == b);
    init.rem2.pack_params(a);
    res.weights.rem2.pack_params(b);
    CHECK(a == b);
}

TEST_CASE("same seed reproduces the loss curve bit-for-bit") {
    auto data = toy_dataset(3, 32, 32, 13);
    StageConfig cfg = small_stage();
    TrainConfig tcfg;
    tcfg.epochs = 3;
    tcfg.seed = 42;
    NetWeights init = NetWeights::init(cfg, 5);
    TrainResult a = train(data, cfg, tcfg, init);
    TrainResult b = train(data, cfg, tcfg, init);
    REQUIRE(a.log.size() == b.log.size());
    for (size_t i = 0; i < a.log.size(); ++i) {
        CHECK(a.log[i].total == b.log[i].total);
        CHECK(a.log[i].loss1 == b.log[i].loss1);
    }
    std::vector<double> wa, wb;
    a.weights.rem1.pack_params(wa);
    b.weights.rem1.pack_params(wb);
    CHECK(wa == wb);
}

TEST_CASE("learning-rate schedule halves at the configured epochs") {
    auto data = toy_dataset(1, 32, 32, 17);
    StageConfig cfg = small_stage();
    TrainConfig tcfg;
    tcfg.epochs = 4;
    tcfg.lr_schedule = {{2, 0.5}, {4, 0.5}};
    NetWeights init = NetWeights::init(cfg, 7);
    TrainResult res = train(data, cfg, tcfg, init);
    REQUIRE(res.log.size() == 4);
    CHECK(res.log[0].lr == doctest::Approx(1e-3));
    CHECK(res.log[1].lr == doctest::Approx(0.5e-3));
    CHECK(res.log[2].lr == doctest::Approx(0.5e-3));
    CHECK(res.log[3].lr == doctest::Approx(0.25e-3));
}

TEST_CASE("200 steps on a toy set reduce the total loss") {
    auto data = toy_dataset(4, 64, 48, 19);
    StageConfig cfg = small_stage();
    TrainConfig tcfg;
    tcfg.epochs = 50; // 4 scenes x 50 epochs = 200 steps
    tcfg.seed = 23;
    NetWeights init = NetWeights::init(cfg, 9);
    TrainResult res = train(data, cfg, tcfg, init);
    REQUIRE(res.log.size() == 200);
    // compare epoch-mean losses: first epoch vs last epoch
    auto epoch_mean = [&](int epoch) {
        double acc = 0;
        int n = 0;
        for (const auto& row : res.log)
            if (row.epoch == epoch) {
                acc += row.total;
                ++n;
            }
        return acc / n;
    };
    double first = epoch_mean(1), last = epoch_mean(50);
    CHECK(last < first);
    CHECK(res.log.back().total < res.log.front().total);
}
