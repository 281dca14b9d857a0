#pragma once

#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "mvsweep/fusion.hpp"
#include "mvsweep/pipeline.hpp"
#include "mvsweep/synth.hpp"
#include "mvsweep/trainer.hpp"

namespace mvsweep {

// Flat run configuration behind the sectioned key=value config file.
// Defaults < config file < command-line overrides.
struct RunConfig {
    // [run]
    uint64_t seed = 1;
    int threads = 1;

    // [stage]
    int planes1 = 48, planes2 = 32, planes3 = 8;
    double lambda12 = 1.5, lambda23 = 0.75;
    int spatial_radius = 1, depth_radius = 1;
    double temp_scale = 0.05;
    double fixed_temperature = 0.0;
    int feature_channels = 8;
    bool trainable_features = false;
    double tau_factor = 0.5;

    // [train]
    int epochs = 15;
    int batch_size = 1;
    double lr = 1e-3;
    std::string lr_schedule = "10:0.5,12:0.5,14:0.5";
    double alpha1 = 0.5, alpha2 = 1.0, alpha3 = 2.0;
    double beta1 = 3.0, beta2 = 0.0;
    bool train_rem = true;
    bool train_features = false;
    bool path_refined = true;
    bool path_hypo = true;

    // [synth]
    int synth_scenes = 16;
    int width = 128, height = 96;
    int views = 3;
    double focal = 200.0;
    double baseline = 50.0;
    double depth_min = 425.0;
    double depth_range_len = 508.8;

    // [baseline]
    double shrink12 = 0.5, shrink23 = 0.25;

    // [fusion]
    double reproj_tol_px = 0.75;
    double rel_depth_tol = 0.01;
    int min_consistent_views = 2;
    bool ply_ascii = false;

    // [eval]
    double dist_cap_factor = 20.0; // x stage-3 mean plane spacing

    StageConfig stage_config() const;
    TrainConfig train_config() const;
    SceneSpec scene_spec() const;
    FusionParams fusion_params() const;
};

std::vector<std::pair<int, double>> parse_lr_schedule(const std::string& text);

// Binds "section.key" names to RunConfig fields for the file parser and the
// CLI override mechanism. Unknown keys are rejected (ConfigError).
class ConfigBinder {
public:
    struct Entry {
        std::string name; // "section.key"
        std::string type; // int | uint | float | bool | string
        std::function<void(const std::string&)> set;
        std::function<std::string()> get;
    };

    explicit ConfigBinder(RunConfig& cfg);

    const std::vector<Entry>& entries() const { return entries_; }
    void set(const std::string& name, const std::string& value);
    void load_file(const std::string& path);

private:
    std::vector<Entry> entries_;
};

} // namespace mvsweep
