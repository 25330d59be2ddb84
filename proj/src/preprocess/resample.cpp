#include "corrfabr/preprocess/resample.hpp"

#include <algorithm>
#include <cmath>

#include "corrfabr/core/error.hpp"

namespace corrfabr::preprocess {

namespace {

struct SampleTap {
    std::size_t lo, hi;
    double frac;
};

SampleTap make_tap(std::size_t dst, std::size_t dst_extent, std::size_t src_extent) {
    const double s = (static_cast<double>(dst) + 0.5) * static_cast<double>(src_extent) /
                         static_cast<double>(dst_extent) -
                     0.5;
    const double floor_s = std::floor(s);
    double frac = s - floor_s;
    long lo = static_cast<long>(floor_s);
    long hi = lo + 1;
    const long max_idx = static_cast<long>(src_extent) - 1;
    if (lo < 0) {
        lo = 0;
        frac = 0.0;
    }
    if (hi > max_idx) hi = max_idx;
    if (lo > max_idx) lo = max_idx;
    return {static_cast<std::size_t>(lo), static_cast<std::size_t>(hi), frac};
}

// Resizes one plane; src is row-major [h,w] with an element stride (stride 1
// for planes, C for interleaved channels).
void resize_plane(const double* src, std::size_t src_h, std::size_t src_w, std::size_t src_stride,
                  double* dst, std::size_t dst_h, std::size_t dst_w, std::size_t dst_stride,
                  std::size_t row_pitch_src, std::size_t row_pitch_dst) {
    std::vector<SampleTap> col_taps(dst_w);
    for (std::size_t x = 0; x < dst_w; ++x) col_taps[x] = make_tap(x, dst_w, src_w);
    for (std::size_t y = 0; y < dst_h; ++y) {
        const SampleTap ty = make_tap(y, dst_h, src_h);
        const double* row0 = src + ty.lo * row_pitch_src;
        const double* row1 = src + ty.hi * row_pitch_src;
        double* out = dst + y * row_pitch_dst;
        for (std::size_t x = 0; x < dst_w; ++x) {
            const SampleTap& tx = col_taps[x];
            const double a = row0[tx.lo * src_stride], b = row0[tx.hi * src_stride];
            const double c = row1[tx.lo * src_stride], d = row1[tx.hi * src_stride];
            const double top = a + (b - a) * tx.frac;
            const double bot = c + (d - c) * tx.frac;
            out[x * dst_stride] = top + (bot - top) * ty.frac;
        }
    }
}

}  // namespace

BoundingBox mask_bounding_box(const core::RegionMask& mask) {
    const auto& t = mask.tensor();
    std::size_t h = 0, w = 0, depth = 1;
    if (t.ndim() == 2) {
        h = t.extent(0);
        w = t.extent(1);
    } else if (t.ndim() == 3) {
        depth = t.extent(0);
        h = t.extent(1);
        w = t.extent(2);
    } else {
        throw InputError("mask must be [H,W] or [D,H,W]");
    }

    BoundingBox box{h, 0, w, 0};
    bool any = false;
    const double* p = t.data();
    for (std::size_t d = 0; d < depth; ++d) {
        for (std::size_t y = 0; y < h; ++y) {
            for (std::size_t x = 0; x < w; ++x, ++p) {
                if (*p == 0.0) continue;
                any = true;
                box.row0 = std::min(box.row0, y);
                box.row1 = std::max(box.row1, y);
                box.col0 = std::min(box.col0, x);
                box.col1 = std::max(box.col1, x);
            }
        }
    }
    if (!any) throw InputError("empty mask has no bounding box");
    return box;
}

core::Tensor bilinear_resize(const core::Tensor& image, std::size_t out_h, std::size_t out_w) {
    if (out_h == 0 || out_w == 0) throw InputError("resize target must be positive");
    if (image.ndim() == 2) {
        const std::size_t h = image.extent(0), w = image.extent(1);
        core::Tensor out({out_h, out_w});
        resize_plane(image.data(), h, w, 1, out.data(), out_h, out_w, 1, w, out_w);
        return out;
    }
    if (image.ndim() == 3) {
        // [H,W,C] interleaved channels.
        const std::size_t h = image.extent(0), w = image.extent(1), c = image.extent(2);
        core::Tensor out({out_h, out_w, c});
        for (std::size_t ch = 0; ch < c; ++ch) {
            resize_plane(image.data() + ch, h, w, c, out.data() + ch, out_h, out_w, c, w * c,
                         out_w * c);
        }
        return out;
    }
    throw InputError("bilinear_resize expects [H,W] or [H,W,C]");
}

core::Tensor crop_resize_lesion(const core::Tensor& volume, const core::RegionMask& mask,
                                std::size_t out_size) {
    if (volume.ndim() != 3) throw InputError("crop_resize_lesion expects a [D,H,W] volume");
    if (!volume.same_shape(mask.tensor())) {
        throw InputError("volume and mask shapes differ");
    }
    const BoundingBox box = mask_bounding_box(mask);
    const std::size_t depth = volume.extent(0);
    const std::size_t h = volume.extent(1), w = volume.extent(2);
    core::Tensor out({depth, out_size, out_size});
    std::vector<double> crop(box.height() * box.width());
    for (std::size_t d = 0; d < depth; ++d) {
        const double* slice = volume.data() + d * h * w;
        for (std::size_t y = 0; y < box.height(); ++y) {
            const double* src_row = slice + (box.row0 + y) * w + box.col0;
            std::copy(src_row, src_row + box.width(), crop.data() + y * box.width());
        }
        resize_plane(crop.data(), box.height(), box.width(), 1, out.data() + d * out_size * out_size,
                     out_size, out_size, 1, box.width(), out_size);
    }
    return out;
}

core::RegionMask resize_mask(const core::RegionMask& mask, std::size_t out_h, std::size_t out_w) {
    if (mask.ndim() != 2) throw InputError("resize_mask expects a [H,W] mask");
    const std::size_t h = mask.shape()[0], w = mask.shape()[1];
    core::Tensor out({out_h, out_w});
    for (std::size_t y = 0; y < out_h; ++y) {
        const std::size_t sy = std::min(h - 1, static_cast<std::size_t>((static_cast<double>(y) + 0.5) *
                                                                        static_cast<double>(h) /
                                                                        static_cast<double>(out_h)));
        for (std::size_t x = 0; x < out_w; ++x) {
            const std::size_t sx = std::min(
                w - 1, static_cast<std::size_t>((static_cast<double>(x) + 0.5) * static_cast<double>(w) /
                                                static_cast<double>(out_w)));
            out.at(y, x) = mask.on(sy, sx) ? 1.0 : 0.0;
        }
    }
    return core::RegionMask(std::move(out));
}

core::RegionMask crop_resize_mask(const core::RegionMask& mask, const BoundingBox& box,
                                  std::size_t out_size) {
    if (mask.ndim() == 2) {
        const std::size_t w = mask.shape()[1];
        core::Tensor crop({box.height(), box.width()});
        for (std::size_t y = 0; y < box.height(); ++y) {
            for (std::size_t x = 0; x < box.width(); ++x) {
                crop.at(y, x) = mask.tensor().at((box.row0 + y) * w + (box.col0 + x));
            }
        }
        return resize_mask(core::RegionMask(std::move(crop)), out_size, out_size);
    }
    if (mask.ndim() == 3) {
        const std::size_t depth = mask.shape()[0];
        core::Tensor out({depth, out_size, out_size});
        for (std::size_t d = 0; d < depth; ++d) {
            const core::RegionMask plane = crop_resize_mask(mask.slice(d), box, out_size);
            std::copy(plane.tensor().data(), plane.tensor().data() + out_size * out_size,
                      out.data() + d * out_size * out_size);
        }
        return core::RegionMask(std::move(out));
    }
    throw InputError("crop_resize_mask expects [H,W] or [D,H,W]");
}

}  // namespace corrfabr::preprocess
