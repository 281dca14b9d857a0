#include "mvsweep/rem.hpp"

#include <cmath>
#include <cstring>
#include <fstream>

#include "mvsweep/error.hpp"

namespace mvsweep {

namespace {

constexpr uint32_t kRemwVersion = 1;

void append(std::vector<double>& out, const std::vector<double>& v) {
    out.insert(out.end(), v.begin(), v.end());
}

void take(const std::vector<double>& in, size_t& pos, std::vector<double>& v) {
    require(pos + v.size() <= in.size(), "ShapeMismatch", "parameter vector too short");
    std::copy(in.begin() + static_cast<long>(pos),
              in.begin() + static_cast<long>(pos + v.size()), v.begin());
    pos += v.size();
}

void write_f32_vec(std::ofstream& out, const std::vector<double>& v) {
    for (double d : v) {
        float f = static_cast<float>(d);
        out.write(reinterpret_cast<const char*>(&f), 4);
    }
}

void read_f32_vec(std::ifstream& in, std::vector<double>& v) {
    for (double& d : v) {
        float f = 0.0f;
        in.read(reinterpret_cast<char*>(&f), 4);
        d = f;
    }
}

} // namespace

RemWeights RemWeights::init(int d_in, Rng& rng) {
    require(d_in >= 1, "ChannelMismatch", "d_in must be >= 1");
    RemWeights w;
    w.d_in = d_in;
    for (int l = 0; l < 5; ++l) {
        int cin = l == 0 ? d_in : kChannels[static_cast<size_t>(l)];
        int cout = kChannels[static_cast<size_t>(l) + 1];
        w.conv[static_cast<size_t>(l)] = Conv3x3(cin, cout);
        w.conv[static_cast<size_t>(l)].init_he(rng);
    }
    for (int l = 0; l < 4; ++l)
        w.bn[static_cast<size_t>(l)] = BatchNorm(kChannels[static_cast<size_t>(l) + 1]);
    // negative head bias keeps freshly initialized uncertainties moderate,
    // so an untrained cascade still narrows its intervals
    w.conv[4].bias[0] = -2.0;
    return w;
}

size_t RemWeights::param_count() const {
    size_t n = 0;
    for (const auto& c : conv) n += c.kernel.size() + c.bias.size();
    for (const auto& b : bn) n += b.gamma.size() + b.beta.size();
    return n;
}

void RemWeights::pack_params(std::vector<double>& out) const {
    out.clear();
    out.reserve(param_count());
    for (const auto& c : conv) {
        append(out, c.kernel);
        append(out, c.bias);
    }
    for (const auto& b : bn) {
        append(out, b.gamma);
        append(out, b.beta);
    }
}

void RemWeights::unpack_params(const std::vector<double>& in) {
    size_t pos = 0;
    for (auto& c : conv) {
        take(in, pos, c.kernel);
        take(in, pos, c.bias);
    }
    for (auto& b : bn) {
        take(in, pos, b.gamma);
        take(in, pos, b.beta);
    }
    require(pos == in.size(), "ShapeMismatch", "parameter vector too long");
}

void RemGrads::pack(std::vector<double>& out) const {
    out.clear();
    for (int l = 0; l < 5; ++l) {
        append(out, kernel[static_cast<size_t>(l)]);
        append(out, bias[static_cast<size_t>(l)]);
    }
    for (int l = 0; l < 4; ++l) {
        append(out, gamma[static_cast<size_t>(l)]);
        append(out, beta[static_cast<size_t>(l)]);
    }
}

Grid rem_forward(const ProbabilityVolume& pv, RemWeights& w, RemMode mode,
                 RemForwardCache* cache, int threads) {
    require(pv.p.planes == w.d_in, "ChannelMismatch",
            "probability volume plane count does not match d_in");
    int W = pv.p.width, H = pv.p.height;

    // planes become input channels; the layouts coincide
    FeatureMap x(W, H, w.d_in);
    x.data = pv.p.data;

    RemForwardCache local;
    RemForwardCache& c = cache ? *cache : local;
    c.mode = mode;
    c.width = W;
    c.height = H;

    for (int l = 0; l < 4; ++l) {
        c.inputs[static_cast<size_t>(l)] = x;
        FeatureMap z = w.conv[static_cast<size_t>(l)].forward(x, threads);
        FeatureMap b;
        if (mode == RemMode::train) {
            b = w.bn[static_cast<size_t>(l)].forward_train(z, c.bn[static_cast<size_t>(l)]);
        } else {
            b = w.bn[static_cast<size_t>(l)].forward_eval(z);
            c.conv_out[static_cast<size_t>(l)] = std::move(z);
        }
        c.pre_act[static_cast<size_t>(l)] = b;
        if (mode == RemMode::linear_debug) {
            x = std::move(b);
        } else {
            x = b;
            for (double& v : x.data) v = relu(v);
        }
    }
    c.inputs[4] = x;
    c.logits = w.conv[4].forward(x, threads);

    Grid out(W, H);
    for (int y = 0; y < H; ++y) {
        for (int xx = 0; xx < W; ++xx) {
            double v = c.logits.at(xx, y, 0);
            if (mode == RemMode::linear_debug) {
                out.at(xx, y) = v;
            } else {
                double s = sigmoid(v);
                out.at(xx, y) = std::clamp(s, 1e-12, 1.0 - 1e-12);
            }
        }
    }
    c.output = out;
    return out;
}

void rem_backward(const Grid& grad_out, const RemWeights& w,
                  const RemForwardCache& cache, RemGrads& grads, Volume* grad_input,
                  int threads) {
    require(grad_out.width == cache.width && grad_out.height == cache.height,
            "StaleCache", "gradient shape does not match cache");
    int W = cache.width, H = cache.height;

    // through the sigmoid (or identity in linear mode)
    FeatureMap g(W, H, 1);
    for (int y = 0; y < H; ++y) {
        for (int x = 0; x < W; ++x) {
            double go = grad_out.at(x, y);
            if (cache.mode == RemMode::linear_debug) {
                g.at(x, y, 0) = go;
            } else {
                double s = sigmoid(cache.logits.at(x, y, 0));
                g.at(x, y, 0) = go * s * (1.0 - s);
            }
        }
    }

    FeatureMap grad_in;
    w.conv[4].backward(cache.inputs[4], g, grads.kernel[4], grads.bias[4], &grad_in);

    for (int l = 3; l >= 0; --l) {
        if (cache.mode != RemMode::linear_debug) {
            const FeatureMap& pre = cache.pre_act[static_cast<size_t>(l)];
            for (size_t i = 0; i < grad_in.data.size(); ++i)
                grad_in.data[i] *= relu_grad(pre.data[i]);
        }
        FeatureMap grad_conv_out;
        if (cache.mode == RemMode::train) {
            w.bn[static_cast<size_t>(l)].backward_train(
                cache.bn[static_cast<size_t>(l)], grad_in,
                grads.gamma[static_cast<size_t>(l)], grads.beta[static_cast<size_t>(l)],
                grad_conv_out);
        } else {
            w.bn[static_cast<size_t>(l)].backward_eval(
                grad_in, grad_in, cache.conv_out[static_cast<size_t>(l)],
                grads.gamma[static_cast<size_t>(l)], grads.beta[static_cast<size_t>(l)],
                grad_conv_out);
        }
        FeatureMap next;
        w.conv[static_cast<size_t>(l)].backward(cache.inputs[static_cast<size_t>(l)],
                                                grad_conv_out,
                                                grads.kernel[static_cast<size_t>(l)],
                                                grads.bias[static_cast<size_t>(l)],
                                                (l > 0 || grad_input) ? &next : nullptr);
        grad_in = std::move(next);
    }

    if (grad_input) {
        grad_input->width = W;
        grad_input->height = H;
        grad_input->planes = w.d_in;
        grad_input->data = grad_in.data;
    }

    (void)threads;
}

void save_rem_checkpoint(const std::string& path, const RemWeights& w) {
    std::ofstream out(path, std::ios::binary);
    if (!out) fail("IoError", "cannot open for writing: " + path);
    out.write("REMW", 4);
    uint32_t ver = kRemwVersion, din = static_cast<uint32_t>(w.d_in);
    out.write(reinterpret_cast<const char*>(&ver), 4);
    out.write(reinterpret_cast<const char*>(&din), 4);
    for (const auto& c : w.conv) {
        write_f32_vec(out, c.kernel);
        write_f32_vec(out, c.bias);
    }
    for (const auto& b : w.bn) {
        write_f32_vec(out, b.gamma);
        write_f32_vec(out, b.beta);
        write_f32_vec(out, b.running_mean);
        write_f32_vec(out, b.running_var);
    }
    if (!out) fail("IoError", "short write: " + path);
}

RemWeights load_rem_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail("IoError", "cannot open: " + path);
    char magic[4];
    in.read(magic, 4);
    if (!in || std::memcmp(magic, "REMW", 4) != 0)
        fail("IoError", "bad checkpoint magic in " + path);
    uint32_t ver = 0, din = 0;
    in.read(reinterpret_cast<char*>(&ver), 4);
    in.read(reinterpret_cast<char*>(&din), 4);
    if (ver != kRemwVersion) fail("IoError", "unsupported checkpoint version");
    Rng rng(0);
    RemWeights w = RemWeights::init(static_cast<int>(din), rng);
    for (auto& c : w.conv) {
        read_f32_vec(in, c.kernel);
        read_f32_vec(in, c.bias);
    }
    for (auto& b : w.bn) {
        read_f32_vec(in, b.gamma);
        read_f32_vec(in, b.beta);
        read_f32_vec(in, b.running_mean);
        read_f32_vec(in, b.running_var);
        for (double v : b.running_var)
            require(v > 0.0, "IoError", "running variance must be positive");
    }
    if (!in) fail("IoError", "truncated checkpoint: " + path);
    return w;
}

DepthRangeMap dynamic_range(const Grid& depth, const Grid& uncertainty, double lambda,
                            const Grid& prev_range_len, double scene_lo, double scene_hi,
                            double snap_width) {
    require(lambda > 0.0, "NonPositiveLambda", "lambda must be positive");
    require(depth.same_shape(uncertainty) && depth.same_shape(prev_range_len),
            "ShapeMismatch", "dynamic_range input shapes differ");
    require(scene_hi > scene_lo, "EmptyRange", "scene range must have positive length");
    require(snap_width > 0.0 && snap_width <= scene_hi - scene_lo, "EmptyRange",
            "snap width must fit the scene range");

    DepthRangeMap rm;
    rm.dmin = Grid(depth.width, depth.height);
    rm.dmax = Grid(depth.width, depth.height);
    rm.raw_len = Grid(depth.width, depth.height);
    rm.clip_lo = Grid(depth.width, depth.height);
    rm.clip_hi = Grid(depth.width, depth.height);

    for (int y = 0; y < depth.height; ++y) {
        for (int x = 0; x < depth.width; ++x) {
            double r_prev = prev_range_len.at(x, y);
            require(r_prev > 0.0, "EmptyRange", "previous range length must be positive");
            double half = lambda * uncertainty.at(x, y) * r_prev;
            double center = depth.at(x, y);
            rm.raw_len.at(x, y) = 2.0 * half;
            double lo = center - half, hi = center + half;
            if (hi < scene_lo || lo > scene_hi) {
                // emptied by clipping: snap to a minimal in-range interval
                double c = std::clamp(center, scene_lo, scene_hi);
                double a = c - 0.5 * snap_width, b = c + 0.5 * snap_width;
                if (a < scene_lo) { a = scene_lo; b = scene_lo + snap_width; }
                if (b > scene_hi) { b = scene_hi; a = scene_hi - snap_width; }
                rm.dmin.at(x, y) = a;
                rm.dmax.at(x, y) = b;
                rm.clip_lo.at(x, y) = 1.0;
                rm.clip_hi.at(x, y) = 1.0;
                continue;
            }
            if (lo < scene_lo) { lo = scene_lo; rm.clip_lo.at(x, y) = 1.0; }
            if (hi > scene_hi) { hi = scene_hi; rm.clip_hi.at(x, y) = 1.0; }
            rm.dmin.at(x, y) = lo;
            rm.dmax.at(x, y) = hi;
        }
    }
    return rm;
}

} // namespace mvsweep
