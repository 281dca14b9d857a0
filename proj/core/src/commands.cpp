#include "mvsweep/commands.hpp"

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include <json.hpp>

#include "mvsweep/eval.hpp"
#include "mvsweep/io.hpp"

namespace mvsweep {

namespace fs = std::filesystem;

namespace {

std::vector<std::string> list_scene_dirs(const std::string& root) {
    std::vector<std::string> dirs;
    if (!fs::is_directory(root)) fail("IoError", "not a directory: " + root);
    for (const auto& entry : fs::directory_iterator(root)) {
        if (entry.is_directory() && fs::exists(entry.path() / "scene.json"))
            dirs.push_back(entry.path().string());
    }
    std::sort(dirs.begin(), dirs.end());
    return dirs;
}

NetWeights weights_for(const RunConfig& cfg, const StageConfig& stage,
                       const std::string& checkpoint_prefix) {
    NetWeights w = NetWeights::init(stage, cfg.seed);
    if (!checkpoint_prefix.empty()) {
        w.rem1 = load_rem_checkpoint(checkpoint_prefix + ".rem1.remw");
        w.rem2 = load_rem_checkpoint(checkpoint_prefix + ".rem2.remw");
        require(w.rem1.d_in == stage.planes[0] && w.rem2.d_in == stage.planes[1],
                "ChannelMismatch", "checkpoint plane counts do not match config");
    }
    return w;
}

// the scene with view v rotated to act as the reference
Scene rotate_reference(const Scene& scene, int v) {
    Scene out = scene;
    std::swap(out.images[0], out.images[static_cast<size_t>(v)]);
    std::swap(out.cams[0], out.cams[static_cast<size_t>(v)]);
    return out;
}

struct EvalRow {
    double range2 = 0.0, ratio2 = 0.0;
    double range3 = 0.0, ratio3 = 0.0;
    long pixels2 = 0, pixels3 = 0;
    DepthErrorStats stage3;
    double spacing3 = 0.0;
};

} // namespace

void cmd_synth(const RunConfig& cfg, const std::string& out_dir) {
    fs::create_directories(out_dir);
    SceneSpec base = cfg.scene_spec();
    for (int i = 0; i < cfg.synth_scenes; ++i) {
        uint64_t scene_seed = splitmix64(cfg.seed) + static_cast<uint64_t>(i);
        SceneSpec spec = SceneSpec::randomized(base, scene_seed);
        Scene scene = generate_scene(spec, scene_seed);
        char name[32];
        std::snprintf(name, sizeof name, "scene_%03d", i);
        save_scene(scene, out_dir + "/" + name);
    }
}

void cmd_train(const RunConfig& cfg, const std::string& scenes_dir,
               const std::string& out_prefix) {
    std::vector<std::string> dirs = list_scene_dirs(scenes_dir);
    if (dirs.empty()) fail("EmptyDataset", "no scene directories under " + scenes_dir);
    std::vector<Scene> dataset;
    dataset.reserve(dirs.size());
    for (const auto& d : dirs) dataset.push_back(load_scene(d));

    StageConfig stage = cfg.stage_config();
    TrainConfig tcfg = cfg.train_config();
    NetWeights init = NetWeights::init(stage, cfg.seed);

    TrainResult res = train(dataset, stage, tcfg, init);

    save_rem_checkpoint(out_prefix + ".rem1.remw", res.weights.rem1);
    save_rem_checkpoint(out_prefix + ".rem2.remw", res.weights.rem2);

    std::ofstream log(out_prefix + ".log.csv");
    if (!log) fail("IoError", "cannot write training log");
    log << "step,epoch,loss1,loss2,loss3,refined1,refined2,total,lr\n";
    char buf[256];
    for (const auto& row : res.log) {
        std::snprintf(buf, sizeof buf, "%d,%d,%.10g,%.10g,%.10g,%.10g,%.10g,%.10g,%.10g\n",
                      row.step, row.epoch, row.loss1, row.loss2, row.loss3, row.refined1,
                      row.refined2, row.total, row.lr);
        log << buf;
    }
}

void cmd_infer(const RunConfig& cfg, const std::string& scene_dir,
               const std::string& checkpoint_prefix, const std::string& out_dir,
               bool baseline, const std::string& method_name) {
    Scene scene = load_scene(scene_dir);
    StageConfig stage = cfg.stage_config();
    NetWeights weights = weights_for(cfg, stage, checkpoint_prefix);

    fs::create_directories(out_dir);
    int V = static_cast<int>(scene.images.size());
    for (int v = 0; v < V; ++v) {
        Scene rotated = rotate_reference(scene, v);
        CascadeOutput out;
        if (baseline) {
            out = fixed_range_baseline(rotated.images, rotated.cams,
                                       scene.spec.depth_min, scene.spec.depth_max(),
                                       weights, stage, {cfg.shrink12, cfg.shrink23},
                                       cfg.threads);
        } else {
            out = infer(rotated.images, rotated.cams, scene.spec.depth_min,
                        scene.spec.depth_max(), weights, stage, cfg.threads);
        }
        char sub[32];
        std::snprintf(sub, sizeof sub, "view_%02d", v);
        std::string vd = out_dir + "/" + sub;
        fs::create_directories(vd);
        for (int k = 0; k < 3; ++k) {
            char name[32];
            std::snprintf(name, sizeof name, "depth_stage%d.pfm", k + 1);
            write_pfm(vd + "/" + name, out.depth[static_cast<size_t>(k)]);
        }
        for (int k = 0; k < 2; ++k) {
            char tag[32];
            std::snprintf(tag, sizeof tag, "range%d%d", k + 1, k + 2);
            write_pfm(vd + "/" + tag + ".min.pfm", out.range[static_cast<size_t>(k)].dmin);
            write_pfm(vd + "/" + tag + ".max.pfm", out.range[static_cast<size_t>(k)].dmax);
            write_pfm(vd + "/" + tag + "_used.min.pfm",
                      out.range_used[static_cast<size_t>(k)].dmin);
            write_pfm(vd + "/" + tag + "_used.max.pfm",
                      out.range_used[static_cast<size_t>(k)].dmax);
            if (!baseline) {
                char uname[32];
                std::snprintf(uname, sizeof uname, "unc_stage%d.pfm", k + 1);
                write_pfm(vd + "/" + uname, out.uncertainty[static_cast<size_t>(k)]);
            }
        }
        if (v == 0) {
            nlohmann::json manifest;
            manifest["scene_dir"] = fs::absolute(scene_dir).string();
            manifest["views"] = V;
            manifest["baseline"] = baseline;
            manifest["method"] =
                method_name.empty() ? (baseline ? "baseline" : "rem") : method_name;
            manifest["planes"] = {stage.planes[0], stage.planes[1], stage.planes[2]};
            manifest["mean_plane_spacing"] = {out.mean_plane_spacing[0],
                                              out.mean_plane_spacing[1],
                                              out.mean_plane_spacing[2]};
            std::ofstream mf(out_dir + "/infer.json");
            if (!mf) fail("IoError", "cannot write infer manifest");
            mf << manifest.dump(2) << "\n";
        }
    }
}

void cmd_fuse(const RunConfig& cfg, const std::string& depth_dir,
              const std::string& out_ply) {
    std::ifstream mf(depth_dir + "/infer.json");
    if (!mf) fail("IoError", "missing infer.json in " + depth_dir);
    nlohmann::json manifest;
    mf >> manifest;
    Scene scene = load_scene(manifest.at("scene_dir").get<std::string>());
    int V = manifest.at("views").get<int>();
    require(V == static_cast<int>(scene.images.size()), "ShapeMismatch",
            "view count changed between infer and fuse");

    std::vector<Grid> depths;
    for (int v = 0; v < V; ++v) {
        char sub[32];
        std::snprintf(sub, sizeof sub, "view_%02d", v);
        depths.push_back(read_pfm(depth_dir + "/" + sub + "/depth_stage3.pfm"));
    }
    // depth maps are indexed by original view id; view v was the reference
    // of its own run, so cams/images align directly
    PointCloud cloud = fuse(depths, scene.cams, scene.images, cfg.fusion_params(),
                            cfg.threads);
    write_ply(cloud, out_ply, cfg.ply_ascii ? PlyFormat::ascii : PlyFormat::binary_le);
}

void cmd_eval(const RunConfig& cfg, const std::string& pred_dir,
              const std::string& gt_dir, const std::string& report_csv) {
    // pred_dir either holds scene outputs directly or one subdirectory per
    // method variant
    std::vector<std::pair<std::string, std::string>> methods; // (name, dir)
    bool direct = false;
    for (const auto& entry : fs::directory_iterator(pred_dir)) {
        if (entry.is_directory() && fs::exists(entry.path() / "infer.json")) {
            direct = true;
            break;
        }
    }
    if (direct) {
        methods.emplace_back("pred", pred_dir);
    } else {
        for (const auto& entry : fs::directory_iterator(pred_dir))
            if (entry.is_directory())
                methods.emplace_back(entry.path().filename().string(),
                                     entry.path().string());
        std::sort(methods.begin(), methods.end());
    }
    if (methods.empty()) fail("IoError", "no prediction outputs under " + pred_dir);

    std::ofstream csv(report_csv);
    if (!csv) fail("IoError", "cannot write report: " + report_csv);
    csv << "method,scene,metric,value\n";

    std::printf("%-16s %10s %10s %10s %10s %10s  %s\n", "method", "1st_range",
                "2nd_range", "2nd_ratio", "3rd_range", "3rd_ratio", "planes");

    for (const auto& [name, mdir] : methods) {
        std::vector<std::string> scene_outs;
        for (const auto& entry : fs::directory_iterator(mdir))
            if (entry.is_directory() && fs::exists(entry.path() / "infer.json"))
                scene_outs.push_back(entry.path().string());
        if (fs::exists(fs::path(mdir) / "infer.json")) scene_outs.push_back(mdir);
        std::sort(scene_outs.begin(), scene_outs.end());
        if (scene_outs.empty()) continue;

        double len2 = 0, len3 = 0, spacing3 = 0;
        long cov2 = 0, cov3 = 0, n2 = 0, n3 = 0;
        double mae3 = 0, rmse3_sq = 0;
        long n_depth = 0;
        double first_range = 0;
        std::string planes_str;

        for (const auto& sdir : scene_outs) {
            std::ifstream mf(sdir + "/infer.json");
            nlohmann::json manifest;
            mf >> manifest;
            Scene scene = load_scene(manifest.at("scene_dir").get<std::string>());
            first_range = scene.spec.depth_range_len;
            auto planes = manifest.at("planes");
            planes_str = std::to_string(planes[0].get<int>()) + "," +
                         std::to_string(planes[1].get<int>()) + "," +
                         std::to_string(planes[2].get<int>());
            spacing3 = manifest.at("mean_plane_spacing")[2].get<double>();

            Grid gt3 = scene.gt_depth;
            Grid gt2 = downsample_gt(gt3, 2);
            std::string vd = sdir + "/view_00";

            DepthRangeMap used2, used3;
            used2.dmin = read_pfm(vd + "/range12_used.min.pfm");
            used2.dmax = read_pfm(vd + "/range12_used.max.pfm");
            used3.dmin = read_pfm(vd + "/range23_used.min.pfm");
            used3.dmax = read_pfm(vd + "/range23_used.max.pfm");

            Grid mask2(gt2.width, gt2.height, 0.0);
            for (size_t i = 0; i < mask2.data.size(); ++i)
                if (gt2.data[i] > 0.0) mask2.data[i] = 1.0;
            Grid mask3(gt3.width, gt3.height, 0.0);
            for (size_t i = 0; i < mask3.data.size(); ++i)
                if (gt3.data[i] > 0.0) mask3.data[i] = 1.0;

            RangeDiagnostics d2 = range_diagnostics(used2, gt2, mask2);
            RangeDiagnostics d3 = range_diagnostics(used3, gt3, mask3);
            len2 += d2.mean_length * static_cast<double>(d2.pixels);
            len3 += d3.mean_length * static_cast<double>(d3.pixels);
            cov2 += static_cast<long>(d2.coverage * static_cast<double>(d2.pixels) + 0.5);
            cov3 += static_cast<long>(d3.coverage * static_cast<double>(d3.pixels) + 0.5);
            n2 += d2.pixels;
            n3 += d3.pixels;

            Grid depth3 = read_pfm(vd + "/depth_stage3.pfm");
            DepthErrorStats st = depth_error_stats(depth3, gt3, mask3, spacing3);
            mae3 += st.mae * static_cast<double>(d3.pixels);
            rmse3_sq += st.rmse * st.rmse * static_cast<double>(d3.pixels);
            n_depth += d3.pixels;

            std::string scene_name = fs::path(sdir).filename().string();
            csv << name << "," << scene_name << ",range2_mean," << d2.mean_length << "\n";
            csv << name << "," << scene_name << ",range2_coverage," << d2.coverage << "\n";
            csv << name << "," << scene_name << ",range3_mean," << d3.mean_length << "\n";
            csv << name << "," << scene_name << ",range3_coverage," << d3.coverage << "\n";
            csv << name << "," << scene_name << ",depth3_mae," << st.mae << "\n";
            csv << name << "," << scene_name << ",depth3_rmse," << st.rmse << "\n";
            csv << name << "," << scene_name << ",depth3_frac_within," << st.frac_within
                << "\n";
        }

        double mean2 = n2 ? len2 / static_cast<double>(n2) : 0.0;
        double mean3 = n3 ? len3 / static_cast<double>(n3) : 0.0;
        double ratio2 = n2 ? static_cast<double>(cov2) / static_cast<double>(n2) : 0.0;
        double ratio3 = n3 ? static_cast<double>(cov3) / static_cast<double>(n3) : 0.0;

        csv << name << ",all,range2_mean," << mean2 << "\n";
        csv << name << ",all,range2_coverage," << ratio2 << "\n";
        csv << name << ",all,range3_mean," << mean3 << "\n";
        csv << name << ",all,range3_coverage," << ratio3 << "\n";
        if (n_depth) {
            csv << name << ",all,depth3_mae," << mae3 / static_cast<double>(n_depth)
                << "\n";
            csv << name << ",all,depth3_rmse,"
                << std::sqrt(rmse3_sq / static_cast<double>(n_depth)) << "\n";
        }

        std::printf("%-16s %10.2f %10.2f %10.4f %10.2f %10.4f  %s\n", name.c_str(),
                    first_range, mean2, ratio2, mean3, ratio3, planes_str.c_str());
    }
}

bool cmd_gradcheck(const RunConfig& cfg) {
    double eps = 1e-4, tol = 1e-4;
    struct Check {
        const char* name;
        double err;
    };
    Check checks[] = {
        {"rem", grad_check_rem(cfg.seed, eps)},
        {"features", grad_check_features(cfg.seed, eps)},
        {"refined_loss_wrt_uncertainty", grad_check_refined_wrt_uncertainty(cfg.seed, eps)},
        {"hypothesis_path", grad_check_hypo_path(cfg.seed, eps)},
    };
    bool ok = true;
    for (const auto& c : checks) {
        bool pass = c.err <= tol;
        ok = ok && pass;
        std::printf("gradcheck %-30s max_rel_err=%.3e (tol %.0e) %s\n", c.name, c.err,
                    tol, pass ? "PASS" : "FAIL");
    }
    return ok;
}

} // namespace mvsweep
