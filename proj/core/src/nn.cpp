#include "mvsweep/nn.hpp"

#include <algorithm>
#include <cmath>

#include "mvsweep/error.hpp"
#include "mvsweep/parallel.hpp"

namespace mvsweep {

namespace {
inline int clampi(int v, int lo, int hi) { return v < lo ? lo : (v > hi ? hi : v); }
} // namespace

void Conv3x3::init_he(Rng& rng) {
    double scale = std::sqrt(2.0 / (static_cast<double>(in_ch) * 9.0));
    for (double& w : kernel) w = scale * rng.normal();
    std::fill(bias.begin(), bias.end(), 0.0);
}

FeatureMap Conv3x3::forward(const FeatureMap& in, int threads) const {
    require(in.channels == in_ch, "ChannelMismatch", "conv input channel count");
    FeatureMap out(in.width, in.height, out_ch);
    int W = in.width, H = in.height;
    parallel_for(0, H, threads, [&](int y) {
        for (int o = 0; o < out_ch; ++o) {
            double* orow = out.plane(o) + static_cast<size_t>(y) * W;
            for (int x = 0; x < W; ++x) {
                double acc = bias[static_cast<size_t>(o)];
                for (int i = 0; i < in_ch; ++i) {
                    const double* ip = in.plane(i);
                    for (int ky = 0; ky < 3; ++ky) {
                        int sy = clampi(y + ky - 1, 0, H - 1);
                        const double* irow = ip + static_cast<size_t>(sy) * W;
                        for (int kx = 0; kx < 3; ++kx) {
                            int sx = clampi(x + kx - 1, 0, W - 1);
                            acc += k(o, i, ky, kx) * irow[sx];
                        }
                    }
                }
                orow[x] = acc;
            }
        }
    });
    return out;
}

void Conv3x3::backward(const FeatureMap& in, const FeatureMap& grad_out,
                       std::vector<double>& grad_kernel, std::vector<double>& grad_bias,
                       FeatureMap* grad_in) const {
    require(in.channels == in_ch && grad_out.channels == out_ch &&
                in.width == grad_out.width && in.height == grad_out.height,
            "ShapeMismatch", "conv backward shapes");
    grad_kernel.assign(kernel.size(), 0.0);
    grad_bias.assign(bias.size(), 0.0);
    if (grad_in) *grad_in = FeatureMap(in.width, in.height, in_ch, 0.0);
    int W = in.width, H = in.height;
    for (int o = 0; o < out_ch; ++o) {
        const double* gp = grad_out.plane(o);
        for (int y = 0; y < H; ++y) {
            const double* grow = gp + static_cast<size_t>(y) * W;
            for (int x = 0; x < W; ++x) {
                double g = grow[x];
                if (g == 0.0) continue;
                grad_bias[static_cast<size_t>(o)] += g;
                for (int i = 0; i < in_ch; ++i) {
                    const double* ip = in.plane(i);
                    double* gin = grad_in ? grad_in->plane(i) : nullptr;
                    for (int ky = 0; ky < 3; ++ky) {
                        int sy = clampi(y + ky - 1, 0, H - 1);
                        for (int kx = 0; kx < 3; ++kx) {
                            int sx = clampi(x + kx - 1, 0, W - 1);
                            size_t kidx = ((static_cast<size_t>(o) * in_ch + i) * 3 + ky) * 3 + kx;
                            grad_kernel[kidx] += g * ip[static_cast<size_t>(sy) * W + sx];
                            if (gin) gin[static_cast<size_t>(sy) * W + sx] += g * kernel[kidx];
                        }
                    }
                }
            }
        }
    }
}

FeatureMap BatchNorm::forward_train(const FeatureMap& in, Cache& cache) {
    require(in.channels == ch, "ChannelMismatch", "batch-norm channel count");
    int W = in.width, H = in.height;
    double M = static_cast<double>(W) * H;
    cache.mean.assign(static_cast<size_t>(ch), 0.0);
    cache.var.assign(static_cast<size_t>(ch), 0.0);
    cache.xhat = FeatureMap(W, H, ch);
    FeatureMap out(W, H, ch);
    for (int c = 0; c < ch; ++c) {
        const double* ip = in.plane(c);
        double mean = 0.0;
        for (size_t i = 0; i < static_cast<size_t>(W) * H; ++i) mean += ip[i];
        mean /= M;
        double var = 0.0;
        for (size_t i = 0; i < static_cast<size_t>(W) * H; ++i) {
            double d = ip[i] - mean;
            var += d * d;
        }
        var /= M;
        cache.mean[static_cast<size_t>(c)] = mean;
        cache.var[static_cast<size_t>(c)] = var;
        running_mean[static_cast<size_t>(c)] =
            momentum * running_mean[static_cast<size_t>(c)] + (1.0 - momentum) * mean;
        running_var[static_cast<size_t>(c)] =
            momentum * running_var[static_cast<size_t>(c)] + (1.0 - momentum) * var;
        double inv = 1.0 / std::sqrt(var + eps);
        double g = gamma[static_cast<size_t>(c)], b = beta[static_cast<size_t>(c)];
        double* xh = cache.xhat.plane(c);
        double* op = out.plane(c);
        for (size_t i = 0; i < static_cast<size_t>(W) * H; ++i) {
            xh[i] = (ip[i] - mean) * inv;
            op[i] = g * xh[i] + b;
        }
    }
    return out;
}

FeatureMap BatchNorm::forward_eval(const FeatureMap& in) const {
    require(in.channels == ch, "ChannelMismatch", "batch-norm channel count");
    int W = in.width, H = in.height;
    FeatureMap out(W, H, ch);
    for (int c = 0; c < ch; ++c) {
        double inv = 1.0 / std::sqrt(running_var[static_cast<size_t>(c)] + eps);
        double mean = running_mean[static_cast<size_t>(c)];
        double g = gamma[static_cast<size_t>(c)], b = beta[static_cast<size_t>(c)];
        const double* ip = in.plane(c);
        double* op = out.plane(c);
        for (size_t i = 0; i < static_cast<size_t>(W) * H; ++i)
            op[i] = g * (ip[i] - mean) * inv + b;
    }
    return out;
}

void BatchNorm::backward_train(const Cache& cache, const FeatureMap& grad_out,
                               std::vector<double>& grad_gamma,
                               std::vector<double>& grad_beta,
                               FeatureMap& grad_in) const {
    int W = grad_out.width, H = grad_out.height;
    double M = static_cast<double>(W) * H;
    grad_gamma.assign(static_cast<size_t>(ch), 0.0);
    grad_beta.assign(static_cast<size_t>(ch), 0.0);
    grad_in = FeatureMap(W, H, ch);
    for (int c = 0; c < ch; ++c) {
        const double* go = grad_out.plane(c);
        const double* xh = cache.xhat.plane(c);
        double sum_g = 0.0, sum_gx = 0.0;
        for (size_t i = 0; i < static_cast<size_t>(W) * H; ++i) {
            sum_g += go[i];
            sum_gx += go[i] * xh[i];
        }
        grad_beta[static_cast<size_t>(c)] = sum_g;
        grad_gamma[static_cast<size_t>(c)] = sum_gx;
        double inv = 1.0 / std::sqrt(cache.var[static_cast<size_t>(c)] + eps);
        double g = gamma[static_cast<size_t>(c)];
        double* gi = grad_in.plane(c);
        // dx = g*inv * (dy - mean(dy) - xhat * mean(dy*xhat))
        for (size_t i = 0; i < static_cast<size_t>(W) * H; ++i)
            gi[i] = g * inv * (go[i] - sum_g / M - xh[i] * sum_gx / M);
    }
}

void BatchNorm::backward_eval(const FeatureMap& grad_out, const FeatureMap&,
                              const FeatureMap& in, std::vector<double>& grad_gamma,
                              std::vector<double>& grad_beta, FeatureMap& grad_in) const {
    int W = grad_out.width, H = grad_out.height;
    grad_gamma.assign(static_cast<size_t>(ch), 0.0);
    grad_beta.assign(static_cast<size_t>(ch), 0.0);
    grad_in = FeatureMap(W, H, ch);
    for (int c = 0; c < ch; ++c) {
        double inv = 1.0 / std::sqrt(running_var[static_cast<size_t>(c)] + eps);
        double mean = running_mean[static_cast<size_t>(c)];
        double g = gamma[static_cast<size_t>(c)];
        const double* go = grad_out.plane(c);
        const double* ip = in.plane(c);
        double* gi = grad_in.plane(c);
        for (size_t i = 0; i < static_cast<size_t>(W) * H; ++i) {
            grad_beta[static_cast<size_t>(c)] += go[i];
            grad_gamma[static_cast<size_t>(c)] += go[i] * (ip[i] - mean) * inv;
            gi[i] = go[i] * g * inv;
        }
    }
}

} // namespace mvsweep
