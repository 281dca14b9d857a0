#pragma once

#include <utility>
#include <vector>

#include "mvsweep/loss.hpp"
#include "mvsweep/optimizer.hpp"
#include "mvsweep/pipeline.hpp"
#include "mvsweep/synth.hpp"

namespace mvsweep {

struct TrainConfig {
    int epochs = 15;
    int batch_size = 1;
    uint64_t seed = 1;
    // (1-based epoch, multiplier): lr_mult *= multiplier at that epoch's start
    std::vector<std::pair<int, double>> lr_schedule{{10, 0.5}, {12, 0.5}, {14, 0.5}};
    LossWeights loss_weights;
    double tau_factor = 0.5;
    bool train_rem = true;
    bool train_features = false;
    bool path_refined = true; // gradient path through the soft-clamp refined loss
    bool path_hypo = true;    // semi-gradient path through hypothesis positions
    AdamConfig adam;
    int threads = 1;
};

struct TrainLogRow {
    int step = 0;
    int epoch = 0;
    double loss1 = 0, loss2 = 0, loss3 = 0;
    double refined1 = 0, refined2 = 0;
    double total = 0;
    double lr = 0;
};

struct TrainResult {
    NetWeights weights;
    std::vector<TrainLogRow> log;
};

// Forward cascade plus every per-stage loss term, with the caches the
// backward passes need.
struct SceneForward {
    CascadeTrace trace;
    std::array<Grid, 3> gt;
    std::array<Grid, 3> loss_mask; // valid pixels entering the stage losses
    std::array<MaskedLoss, 3> stage;
    std::array<RefinedDistribution, 2> rd;
    std::array<Grid, 2> refined_mask;
    std::array<MaskedLoss, 2> refined;
    double total = 0.0;
};

SceneForward forward_losses(const Scene& scene, NetWeights& weights,
                            const StageConfig& cfg, const LossWeights& lw,
                            double tau_factor, RemMode mode, int threads,
                            bool need_feature_grads);

// lambda * r_prev * ([!clip_hi] g_dmax - [!clip_lo] g_dmin): shared tail of
// both gradient paths into the uncertainty map.
Grid range_grad_to_uncertainty(const RangeGrad& rg, const DepthRangeMap& rm,
                               const Grid& r_prev, double lambda);

// Semi-gradient of a next-stage depth loss with respect to the generating
// stage's interval bounds: probabilities are constants, hypothesis
// positions move with the bounds; includes the upsampling adjoint.
RangeGrad hypo_path_range_grad(const Grid& grad_depth_next, const Volume& p_next,
                               int coarse_w, int coarse_h);

// Eq.-8 objective over shuffled seeded batches. Throws EmptyDataset.
TrainResult train(const std::vector<Scene>& dataset, const StageConfig& cfg,
                  const TrainConfig& tcfg, const NetWeights& init);

// Finite-difference checks; each returns the max relative error
// |a - n| / max(|a|, |n|, 1e-6).
double grad_check_rem(uint64_t seed, double eps, int width = 4, int height = 4,
                      int d_in = 6, bool all_params = false);
double grad_check_features(uint64_t seed, double eps);
double grad_check_refined_wrt_uncertainty(uint64_t seed, double eps);
double grad_check_hypo_path(uint64_t seed, double eps);

} // namespace mvsweep
