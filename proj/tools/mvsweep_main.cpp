#include <cstdio>
#include <exception>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "mvsweep/commands.hpp"
#include "mvsweep/error.hpp"

using mvsweep::ConfigBinder;
using mvsweep::RunConfig;

int main(int argc, char** argv) {
    RunConfig cfg;
    ConfigBinder binder(cfg);

    CLI::App app{"cascaded multi-view plane-sweep stereo with learned dynamic "
                 "depth ranges"};
    app.require_subcommand(1);
    app.fallthrough();

    std::string config_path;
    std::vector<std::string> overrides;
    long long seed_flag = -1;
    int threads_flag = -1;
    app.add_option("--config", config_path, "sectioned key=value config file");
    app.add_option("--set", overrides,
                   "override a config key, e.g. --set train.epochs=4");
    app.add_option("--seed", seed_flag, "override run.seed");
    app.add_option("--threads", threads_flag, "override run.threads");

    // every config key doubles as a flag: --section.key value
    std::vector<std::pair<std::string, std::string>> key_flags;
    key_flags.reserve(binder.entries().size());
    for (const auto& e : binder.entries()) {
        key_flags.emplace_back(e.name, "");
        auto& slot = key_flags.back().second;
        app.add_option("--" + e.name, slot, "config key (" + e.type + ")");
    }

    auto* synth = app.add_subcommand("synth", "generate synthetic scenes");
    std::string synth_out;
    synth->add_option("--out", synth_out, "output directory")->required();

    auto* train = app.add_subcommand("train", "train the range estimation networks");
    std::string train_scenes, train_out;
    train->add_option("--scenes", train_scenes, "scene dataset directory")->required();
    train->add_option("--out", train_out, "checkpoint prefix")->required();

    auto* infer = app.add_subcommand("infer", "run the cascade on one scene");
    std::string infer_scene, infer_ckpt, infer_out, infer_method;
    bool infer_baseline = false;
    infer->add_option("--scene", infer_scene, "scene directory")->required();
    infer->add_option("--checkpoint", infer_ckpt, "checkpoint prefix (optional)");
    infer->add_option("--out", infer_out, "output directory")->required();
    infer->add_option("--method-name", infer_method, "label used by eval");
    infer->add_flag("--baseline", infer_baseline, "fixed-shrink baseline cascade");

    auto* fuse = app.add_subcommand("fuse", "fuse per-view depth maps into a cloud");
    std::string fuse_depths, fuse_out;
    fuse->add_option("--depths", fuse_depths, "infer output directory")->required();
    fuse->add_option("--out", fuse_out, "output PLY path")->required();

    auto* eval = app.add_subcommand("eval", "evaluate predictions against ground truth");
    std::string eval_pred, eval_gt, eval_report;
    eval->add_option("--pred", eval_pred, "prediction directory")->required();
    eval->add_option("--gt", eval_gt, "ground-truth scene directory")->required();
    eval->add_option("--report", eval_report, "output CSV path")->required();

    auto* gradcheck =
        app.add_subcommand("gradcheck", "finite-difference gradient verification");

    CLI11_PARSE(app, argc, argv);

    try {
        if (!config_path.empty()) binder.load_file(config_path);
        for (const auto& [name, value] : key_flags)
            if (!value.empty()) binder.set(name, value);
        for (const auto& item : overrides) {
            size_t eq = item.find('=');
            if (eq == std::string::npos)
                mvsweep::fail("ConfigError", "--set expects key=value, got '" + item + "'");
            binder.set(item.substr(0, eq), item.substr(eq + 1));
        }
        if (seed_flag >= 0) cfg.seed = static_cast<uint64_t>(seed_flag);
        if (threads_flag > 0) cfg.threads = threads_flag;

        if (synth->parsed()) {
            mvsweep::cmd_synth(cfg, synth_out);
        } else if (train->parsed()) {
            mvsweep::cmd_train(cfg, train_scenes, train_out);
        } else if (infer->parsed()) {
            mvsweep::cmd_infer(cfg, infer_scene, infer_ckpt, infer_out, infer_baseline,
                               infer_method);
        } else if (fuse->parsed()) {
            mvsweep::cmd_fuse(cfg, fuse_depths, fuse_out);
        } else if (eval->parsed()) {
            mvsweep::cmd_eval(cfg, eval_pred, eval_gt, eval_report);
        } else if (gradcheck->parsed()) {
            if (!mvsweep::cmd_gradcheck(cfg)) return 1;
        }
    } catch (const mvsweep::Error& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: Internal: %s\n", e.what());
        return 2;
    }
    return 0;
}
