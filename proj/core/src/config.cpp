#include "mvsweep/config.hpp"

#include <algorithm>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "mvsweep/error.hpp"

namespace mvsweep {

namespace {

std::string trim(const std::string& s) {
    size_t a = s.find_first_not_of(" \t\r\n");
    if (a == std::string::npos) return "";
    size_t b = s.find_last_not_of(" \t\r\n");
    return s.substr(a, b - a + 1);
}

long long parse_ll(const std::string& name, const std::string& v) {
    char* end = nullptr;
    long long x = std::strtoll(v.c_str(), &end, 10);
    if (end == v.c_str() || *end != '\0')
        fail("ConfigError", "invalid integer for " + name + ": '" + v + "'");
    return x;
}

double parse_double(const std::string& name, const std::string& v) {
    char* end = nullptr;
    double x = std::strtod(v.c_str(), &end);
    if (end == v.c_str() || *end != '\0')
        fail("ConfigError", "invalid number for " + name + ": '" + v + "'");
    return x;
}

bool parse_bool(const std::string& name, const std::string& v) {
    if (v == "true" || v == "1" || v == "on" || v == "yes") return true;
    if (v == "false" || v == "0" || v == "off" || v == "no") return false;
    fail("ConfigError", "invalid boolean for " + name + ": '" + v + "'");
}

} // namespace

StageConfig RunConfig::stage_config() const {
    StageConfig s;
    s.planes = {planes1, planes2, planes3};
    s.lambda = {lambda12, lambda23};
    for (auto& r : s.reg) {
        r.spatial_radius = spatial_radius;
        r.depth_radius = depth_radius;
        r.temp_scale = temp_scale;
        r.fixed_temperature = fixed_temperature;
    }
    s.feature_channels = feature_channels;
    s.trainable_features = trainable_features || train_features;
    s.tau_factor = tau_factor;
    return s;
}

TrainConfig RunConfig::train_config() const {
    TrainConfig t;
    t.epochs = epochs;
    t.batch_size = batch_size;
    t.seed = seed;
    t.lr_schedule = parse_lr_schedule(lr_schedule);
    t.loss_weights.alpha = {alpha1, alpha2, alpha3};
    t.loss_weights.beta = {beta1, beta2};
    t.tau_factor = tau_factor;
    t.train_rem = train_rem;
    t.train_features = train_features;
    t.path_refined = path_refined;
    t.path_hypo = path_hypo;
    t.adam.lr = lr;
    t.threads = threads;
    return t;
}

SceneSpec RunConfig::scene_spec() const {
    SceneSpec s;
    s.width = width;
    s.height = height;
    s.num_views = views;
    s.focal = focal;
    s.baseline = baseline;
    s.depth_min = depth_min;
    s.depth_range_len = depth_range_len;
    return s;
}

FusionParams RunConfig::fusion_params() const {
    FusionParams f;
    f.reproj_tol_px = reproj_tol_px;
    f.rel_depth_tol = rel_depth_tol;
    f.min_consistent_views = min_consistent_views;
    return f;
}

std::vector<std::pair<int, double>> parse_lr_schedule(const std::string& text) {
    std::vector<std::pair<int, double>> sched;
    std::string t = trim(text);
    if (t.empty() || t == "none") return sched;
    std::istringstream in(t);
    std::string item;
    while (std::getline(in, item, ',')) {
        size_t colon = item.find(':');
        if (colon == std::string::npos)
            fail("ConfigError", "lr_schedule entries must be epoch:multiplier");
        int epoch = static_cast<int>(parse_ll("lr_schedule", trim(item.substr(0, colon))));
        double mult = parse_double("lr_schedule", trim(item.substr(colon + 1)));
        require(mult > 0.0, "ConfigError", "lr_schedule multipliers must be positive");
        sched.emplace_back(epoch, mult);
    }
    return sched;
}

ConfigBinder::ConfigBinder(RunConfig& cfg) {
    auto add_int = [&](const char* name, int& field) {
        entries_.push_back({name, "int",
                            [name, &field](const std::string& v) {
                                field = static_cast<int>(parse_ll(name, v));
                            },
                            [&field] { return std::to_string(field); }});
    };
    auto add_uint = [&](const char* name, uint64_t& field) {
        entries_.push_back({name, "uint",
                            [name, &field](const std::string& v) {
                                long long x = parse_ll(name, v);
                                require(x >= 0, "ConfigError", "value must be >= 0");
                                field = static_cast<uint64_t>(x);
                            },
                            [&field] { return std::to_string(field); }});
    };
    auto add_double = [&](const char* name, double& field) {
        entries_.push_back({name, "float",
                            [name, &field](const std::string& v) {
                                field = parse_double(name, v);
                            },
                            [&field] {
                                std::ostringstream os;
                                os << field;
                                return os.str();
                            }});
    };
    auto add_bool = [&](const char* name, bool& field) {
        entries_.push_back({name, "bool",
                            [name, &field](const std::string& v) {
                                field = parse_bool(name, v);
                            },
                            [&field] { return field ? std::string("true")
                                                    : std::string("false"); }});
    };
    auto add_string = [&](const char* name, std::string& field) {
        entries_.push_back({name, "string",
                            [&field](const std::string& v) { field = v; },
                            [&field] { return field; }});
    };

    add_uint("run.seed", cfg.seed);
    add_int("run.threads", cfg.threads);

    add_int("stage.planes1", cfg.planes1);
    add_int("stage.planes2", cfg.planes2);
    add_int("stage.planes3", cfg.planes3);
    add_double("stage.lambda12", cfg.lambda12);
    add_double("stage.lambda23", cfg.lambda23);
    add_int("stage.spatial_radius", cfg.spatial_radius);
    add_int("stage.depth_radius", cfg.depth_radius);
    add_double("stage.temp_scale", cfg.temp_scale);
    add_double("stage.fixed_temperature", cfg.fixed_temperature);
    add_int("stage.feature_channels", cfg.feature_channels);
    add_bool("stage.trainable_features", cfg.trainable_features);
    add_double("stage.tau_factor", cfg.tau_factor);

    add_int("train.epochs", cfg.epochs);
    add_int("train.batch_size", cfg.batch_size);
    add_double("train.lr", cfg.lr);
    add_string("train.lr_schedule", cfg.lr_schedule);
    add_double("train.alpha1", cfg.alpha1);
    add_double("train.alpha2", cfg.alpha2);
    add_double("train.alpha3", cfg.alpha3);
    add_double("train.beta1", cfg.beta1);
    add_double("train.beta2", cfg.beta2);
    add_bool("train.train_rem", cfg.train_rem);
    add_bool("train.train_features", cfg.train_features);
    add_bool("train.path_refined", cfg.path_refined);
    add_bool("train.path_hypo", cfg.path_hypo);

    add_int("synth.scenes", cfg.synth_scenes);
    add_int("synth.width", cfg.width);
    add_int("synth.height", cfg.height);
    add_int("synth.views", cfg.views);
    add_double("synth.focal", cfg.focal);
    add_double("synth.baseline", cfg.baseline);
    add_double("synth.depth_min", cfg.depth_min);
    add_double("synth.depth_range_len", cfg.depth_range_len);

    add_double("baseline.shrink12", cfg.shrink12);
    add_double("baseline.shrink23", cfg.shrink23);

    add_double("fusion.reproj_tol_px", cfg.reproj_tol_px);
    add_double("fusion.rel_depth_tol", cfg.rel_depth_tol);
    add_int("fusion.min_consistent_views", cfg.min_consistent_views);
    add_bool("fusion.ply_ascii", cfg.ply_ascii);

    add_double("eval.dist_cap_factor", cfg.dist_cap_factor);
}

void ConfigBinder::set(const std::string& name, const std::string& value) {
    for (auto& e : entries_) {
        if (e.name == name) {
            e.set(trim(value));
            return;
        }
    }
    fail("ConfigError", "unknown configuration key: " + name);
}

void ConfigBinder::load_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) fail("ConfigError", "cannot open config file: " + path);
    std::string line, section;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        std::string s = trim(line);
        if (s.empty() || s[0] == '#' || s[0] == ';') continue;
        if (s.front() == '[') {
            if (s.back() != ']')
                fail("ConfigError", "malformed section header at line " +
                                        std::to_string(lineno));
            section = trim(s.substr(1, s.size() - 2));
            continue;
        }
        size_t eq = s.find('=');
        if (eq == std::string::npos)
            fail("ConfigError", "expected key = value at line " + std::to_string(lineno));
        std::string key = trim(s.substr(0, eq));
        std::string value = trim(s.substr(eq + 1));
        if (section.empty())
            fail("ConfigError", "key outside of any section at line " +
                                    std::to_string(lineno));
        set(section + "." + key, value);
    }
}

} // namespace mvsweep
