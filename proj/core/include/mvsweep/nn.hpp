#pragma once

#include <cstddef>
#include <vector>

#include "mvsweep/grid.hpp"
#include "mvsweep/rng.hpp"

namespace mvsweep {

// 3x3 convolution, stride 1, replicate padding. Kernel layout
// [out][in][ky][kx], ky/kx in {0,1,2} for offsets {-1,0,+1}.
struct Conv3x3 {
    int in_ch = 0;
    int out_ch = 0;
    std::vector<double> kernel;
    std::vector<double> bias;

    Conv3x3() = default;
    Conv3x3(int in_c, int out_c)
        : in_ch(in_c), out_ch(out_c),
          kernel(static_cast<size_t>(in_c) * out_c * 9, 0.0),
          bias(static_cast<size_t>(out_c), 0.0) {}

    double& k(int o, int i, int ky, int kx) {
        return kernel[((static_cast<size_t>(o) * in_ch + i) * 3 + ky) * 3 + kx];
    }
    double k(int o, int i, int ky, int kx) const {
        return kernel[((static_cast<size_t>(o) * in_ch + i) * 3 + ky) * 3 + kx];
    }

    void init_he(Rng& rng);

    FeatureMap forward(const FeatureMap& in, int threads = 1) const;

    // Accumulates parameter gradients and (optionally) the input gradient.
    // Replicate padding scatters border contributions back into the clamped
    // source pixels.
    void backward(const FeatureMap& in, const FeatureMap& grad_out,
                  std::vector<double>& grad_kernel, std::vector<double>& grad_bias,
                  FeatureMap* grad_in) const;
};

// Per-channel batch normalization over the spatial extent of one sample.
struct BatchNorm {
    int ch = 0;
    std::vector<double> gamma;
    std::vector<double> beta;
    std::vector<double> running_mean;
    std::vector<double> running_var;
    double eps = 1e-5;
    double momentum = 0.9; // running = momentum*running + (1-momentum)*batch

    BatchNorm() = default;
    explicit BatchNorm(int c)
        : ch(c), gamma(static_cast<size_t>(c), 1.0), beta(static_cast<size_t>(c), 0.0),
          running_mean(static_cast<size_t>(c), 0.0),
          running_var(static_cast<size_t>(c), 1.0) {}

    struct Cache {
        std::vector<double> mean;
        std::vector<double> var; // biased (1/M)
        FeatureMap xhat;
    };

    // Train mode: normalizes with batch statistics and updates the running
    // estimates. Eval mode: uses the stored running statistics.
    FeatureMap forward_train(const FeatureMap& in, Cache& cache);
    FeatureMap forward_eval(const FeatureMap& in) const;

    void backward_train(const Cache& cache, const FeatureMap& grad_out,
                        std::vector<double>& grad_gamma, std::vector<double>& grad_beta,
                        FeatureMap& grad_in) const;
    void backward_eval(const FeatureMap& grad_out, const FeatureMap& xhat_unused,
                       const FeatureMap& in, std::vector<double>& grad_gamma,
                       std::vector<double>& grad_beta, FeatureMap& grad_in) const;
};

inline double relu(double x) { return x > 0.0 ? x : 0.0; }
inline double relu_grad(double x) { return x > 0.0 ? 1.0 : 0.0; }

inline double leaky_relu(double x, double slope) { return x > 0.0 ? x : slope * x; }
inline double leaky_relu_grad(double x, double slope) { return x > 0.0 ? 1.0 : slope; }

inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

} // namespace mvsweep
