#include "corrfabr/features/extractor.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>

#include "corrfabr/core/error.hpp"
#include "corrfabr/io/tensor_file.hpp"

namespace corrfabr::features {

namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MatMap = Eigen::Map<RowMat>;
using ConstMatMap = Eigen::Map<const RowMat>;

// Tap weights reshaped to [cin, cout]: wt(ci, co) = weights[co, ci, ky, kx].
RowMat tap_matrix(const core::Tensor& weights, int ky, int kx) {
    const std::size_t cout = weights.extent(0), cin = weights.extent(1);
    RowMat tap(static_cast<Eigen::Index>(cin), static_cast<Eigen::Index>(cout));
    for (std::size_t ci = 0; ci < cin; ++ci) {
        for (std::size_t co = 0; co < cout; ++co) {
            tap(static_cast<Eigen::Index>(ci), static_cast<Eigen::Index>(co)) =
                weights.data()[((co * cin + ci) * 3 + static_cast<std::size_t>(ky)) * 3 +
                               static_cast<std::size_t>(kx)];
        }
    }
    return tap;
}

// Few input channels: one im2col GEMM beats nine rank-deficient updates.
void conv_small_cin(const double* in, std::size_t h, std::size_t w, std::size_t cin,
                    const core::Tensor& weights, std::size_t cout, double* out) {
    RowMat kernel(static_cast<Eigen::Index>(9 * cin), static_cast<Eigen::Index>(cout));
    for (int ky = 0; ky < 3; ++ky) {
        for (int kx = 0; kx < 3; ++kx) {
            kernel.middleRows(static_cast<Eigen::Index>((ky * 3 + kx) * cin),
                              static_cast<Eigen::Index>(cin)) = tap_matrix(weights, ky, kx);
        }
    }
    std::vector<double> cols(h * w * 9 * cin, 0.0);
    for (std::size_t y = 0; y < h; ++y) {
        for (std::size_t x = 0; x < w; ++x) {
            double* dst = cols.data() + (y * w + x) * 9 * cin;
            for (int ky = 0; ky < 3; ++ky) {
                const long sy = static_cast<long>(y) + ky - 1;
                if (sy < 0 || sy >= static_cast<long>(h)) continue;
                for (int kx = 0; kx < 3; ++kx) {
                    const long sx = static_cast<long>(x) + kx - 1;
                    if (sx < 0 || sx >= static_cast<long>(w)) continue;
                    const double* src = in + (static_cast<std::size_t>(sy) * w +
                                              static_cast<std::size_t>(sx)) *
                                                 cin;
                    std::copy(src, src + cin, dst + (ky * 3 + kx) * cin);
                }
            }
        }
    }
    MatMap(out, static_cast<Eigen::Index>(h * w), static_cast<Eigen::Index>(cout)).noalias() =
        ConstMatMap(cols.data(), static_cast<Eigen::Index>(h * w),
                    static_cast<Eigen::Index>(9 * cin)) *
        kernel;
}

// One 3x3 same-padding convolution stage + bias + ReLU. Wide inputs run as
// nine per-row GEMM accumulations: for tap (dy,dx), out[y, x0:x1] +=
// in[y+dy, x0+dx : x1+dx] * W_tap. Row-wide blocks stay inside L2 and run
// near GEMM peak. `out` must be zero-initialized (borders keep the zero
// padding contribution).
void conv_stage(const double* in, std::size_t h, std::size_t w, std::size_t cin,
                const core::Tensor& weights, const core::Tensor& bias, double* out) {
    const std::size_t cout = weights.extent(0);
    if (cin <= 8) {
        conv_small_cin(in, h, w, cin, weights, cout, out);
    } else {
        for (int ky = 0; ky < 3; ++ky) {
            for (int kx = 0; kx < 3; ++kx) {
                const RowMat tap = tap_matrix(weights, ky, kx);
                const long dy = ky - 1, dx = kx - 1;
                const std::size_t y0 = dy < 0 ? 1 : 0;
                const std::size_t y1 = dy > 0 ? h - 1 : h;
                const std::size_t x0 = dx < 0 ? 1 : 0;
                const std::size_t x1 = dx > 0 ? w - 1 : w;
                const std::size_t nx = x1 - x0;
                if (nx == 0 || y1 <= y0) continue;
                for (std::size_t y = y0; y < y1; ++y) {
                    const std::size_t src_off =
                        (static_cast<std::size_t>(static_cast<long>(y) + dy) * w +
                         static_cast<std::size_t>(static_cast<long>(x0) + dx)) *
                        cin;
                    ConstMatMap src(in + src_off, static_cast<Eigen::Index>(nx),
                                    static_cast<Eigen::Index>(cin));
                    MatMap dst(out + (y * w + x0) * cout, static_cast<Eigen::Index>(nx),
                               static_cast<Eigen::Index>(cout));
                    dst.noalias() += src * tap;
                }
            }
        }
    }

    for (std::size_t p = 0; p < h * w; ++p) {
        double* row = out + p * cout;
        for (std::size_t co = 0; co < cout; ++co) {
            row[co] = std::max(0.0, row[co] + bias.at(co));
        }
    }
}

core::Tensor seeded_conv_weights(core::SeededRng& rng, std::size_t cout, std::size_t cin) {
    core::Tensor w({cout, cin, 3, 3});
    const double scale = 1.0 / std::sqrt(static_cast<double>(cin * 9));
    for (double& v : w.vec()) v = rng.uniform(-scale, scale);
    return w;
}

}  // namespace

FeatureExtractor make_builtin_extractor(std::uint64_t seed, std::size_t in_channels) {
    if (in_channels == 0) throw InputError("extractor needs at least one input channel");
    core::SeededRng rng(seed);
    FeatureExtractor fx;
    fx.in_channels = in_channels;
    fx.w1 = seeded_conv_weights(rng, kFeatureChannels, in_channels);
    fx.b1 = core::Tensor({kFeatureChannels});
    fx.w2 = seeded_conv_weights(rng, kFeatureChannels, kFeatureChannels);
    fx.b2 = core::Tensor({kFeatureChannels});
    return fx;
}

FeatureExtractor load_extractor(const std::filesystem::path& dir) {
    FeatureExtractor fx;
    fx.w1 = io::load_tensor(dir / "weights1.cftn");
    fx.b1 = io::load_tensor(dir / "bias1.cftn");
    fx.w2 = io::load_tensor(dir / "weights2.cftn");
    fx.b2 = io::load_tensor(dir / "bias2.cftn");
    if (fx.w1.ndim() != 4 || fx.w2.ndim() != 4 || fx.w1.extent(2) != 3 || fx.w1.extent(3) != 3) {
        throw InputError("extractor weights must be [out,in,3,3]");
    }
    if (fx.w1.extent(0) != kFeatureChannels || fx.w2.extent(0) != kFeatureChannels ||
        fx.w2.extent(1) != kFeatureChannels) {
        throw InputError("extractor stages must produce 64 channels");
    }
    fx.in_channels = fx.w1.extent(1);
    return fx;
}

void save_extractor(const FeatureExtractor& fx, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    io::save_tensor(fx.w1, dir / "weights1.cftn");
    io::save_tensor(fx.b1, dir / "bias1.cftn");
    io::save_tensor(fx.w2, dir / "weights2.cftn");
    io::save_tensor(fx.b2, dir / "bias2.cftn");
}

core::Tensor extract_lowres(const core::Tensor& image, const FeatureExtractor& fx) {
    std::size_t h = 0, w = 0, c = 0;
    if (image.ndim() == 2) {
        h = image.extent(0);
        w = image.extent(1);
        c = 1;
    } else if (image.ndim() == 3) {
        h = image.extent(0);
        w = image.extent(1);
        c = image.extent(2);
    } else {
        throw InputError("extract_lowres expects [H,W] or [H,W,C]");
    }
    if (c != fx.in_channels) {
        throw InputError("image has " + std::to_string(c) + " channels, extractor expects " +
                         std::to_string(fx.in_channels));
    }

    core::Tensor mid({h, w, kFeatureChannels});
    conv_stage(image.data(), h, w, c, fx.w1, fx.b1, mid.data());
    core::Tensor out({h, w, kFeatureChannels});
    conv_stage(mid.data(), h, w, kFeatureChannels, fx.w2, fx.b2, out.data());
    return out;
}

PatchGridFeatures extract_highres_patches(const core::Tensor& wsi, const FeatureExtractor& fx) {
    if (wsi.ndim() != 2 && wsi.ndim() != 3) throw InputError("expects [H,W] or [H,W,C]");
    const std::size_t h = wsi.extent(0), w = wsi.extent(1);
    const std::size_t c = wsi.ndim() == 3 ? wsi.extent(2) : 1;
    if (h < kPatchSize || w < kPatchSize) {
        throw InputError("image smaller than one " + std::to_string(kPatchSize) + "px patch");
    }

    PatchGridFeatures grid;
    grid.grid_h = h / kPatchSize;
    grid.grid_w = w / kPatchSize;
    grid.vectors = core::Tensor({grid.grid_h, grid.grid_w, kFeatureChannels});

    core::Tensor patch(c == 1 ? std::vector<std::size_t>{kPatchSize, kPatchSize}
                              : std::vector<std::size_t>{kPatchSize, kPatchSize, c});
    for (std::size_t gy = 0; gy < grid.grid_h; ++gy) {
        for (std::size_t gx = 0; gx < grid.grid_w; ++gx) {
            for (std::size_t y = 0; y < kPatchSize; ++y) {
                const double* src = wsi.data() + ((gy * kPatchSize + y) * w + gx * kPatchSize) * c;
                std::copy(src, src + kPatchSize * c, patch.data() + y * kPatchSize * c);
            }
            const core::Tensor feat = extract_lowres(patch, fx);
            double* vec = grid.vectors.data() + (gy * grid.grid_w + gx) * kFeatureChannels;
            std::fill(vec, vec + kFeatureChannels, 0.0);
            const double inv = 1.0 / static_cast<double>(kPatchSize * kPatchSize);
            for (std::size_t p = 0; p < kPatchSize * kPatchSize; ++p) {
                const double* row = feat.data() + p * kFeatureChannels;
                for (std::size_t ch = 0; ch < kFeatureChannels; ++ch) vec[ch] += row[ch];
            }
            for (std::size_t ch = 0; ch < kFeatureChannels; ++ch) vec[ch] *= inv;
        }
    }
    return grid;
}

}  // namespace corrfabr::features
