#include "corrfabr/aggregate/aggregation.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "corrfabr/core/error.hpp"

namespace corrfabr::aggregate {

namespace {

constexpr std::size_t kWindowAttempts = 10000;

// Seeded choice of k indices out of n without replacement, returned sorted.
std::vector<std::size_t> sample_indices(std::size_t n, std::size_t k, core::SeededRng& rng) {
    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), 0);
    rng.shuffle(idx);
    idx.resize(k);
    std::sort(idx.begin(), idx.end());
    return idx;
}

void copy_row(const core::Tensor& src, std::size_t row, core::Tensor& dst, std::size_t dst_row,
              std::size_t width) {
    std::copy(src.data() + row * width, src.data() + (row + 1) * width,
              dst.data() + dst_row * width);
}

struct MaskIntegral {
    std::size_t h = 0, w = 0;
    std::vector<double> sums;  // (h+1) x (w+1)

    explicit MaskIntegral(const core::RegionMask& mask) {
        h = mask.shape()[0];
        w = mask.shape()[1];
        sums.assign((h + 1) * (w + 1), 0.0);
        for (std::size_t y = 0; y < h; ++y) {
            double row_sum = 0.0;
            for (std::size_t x = 0; x < w; ++x) {
                row_sum += mask.on(y, x) ? 1.0 : 0.0;
                sums[(y + 1) * (w + 1) + (x + 1)] = sums[y * (w + 1) + (x + 1)] + row_sum;
            }
        }
    }

    double window(std::size_t y, std::size_t x, std::size_t size) const {
        return sums[(y + size) * (w + 1) + (x + size)] - sums[y * (w + 1) + (x + size)] -
               sums[(y + size) * (w + 1) + x] + sums[y * (w + 1) + x];
    }
};

}  // namespace

PairedFeatureSet aggregate_pixel_pixel(const std::vector<core::Tensor>& rad,
                                       const core::Tensor& pat,
                                       const core::RegionMask& cancer_mask, core::SeededRng& rng,
                                       std::size_t cap) {
    if (rad.empty()) throw InputError("pixel-pixel pairing needs at least one radiology map");
    if (pat.ndim() != 3) throw InputError("pathology map must be [H,W,C]");
    const std::size_t h = pat.extent(0), w = pat.extent(1), pat_c = pat.extent(2);
    std::size_t rad_width = 0;
    for (const auto& r : rad) {
        if (r.ndim() != 3 || r.extent(0) != h || r.extent(1) != w) {
            throw InputError("radiology map shape mismatch in pixel-pixel pairing");
        }
        rad_width += r.extent(2);
    }
    if (cancer_mask.ndim() != 2 || cancer_mask.shape()[0] != h || cancer_mask.shape()[1] != w) {
        throw InputError("cancer mask shape mismatch in pixel-pixel pairing");
    }

    const std::size_t n_px = h * w;
    std::vector<std::size_t> cancer_px, normal_px;
    cancer_px.reserve(n_px);
    normal_px.reserve(n_px);
    for (std::size_t p = 0; p < n_px; ++p) {
        (cancer_mask.on(p) ? cancer_px : normal_px).push_back(p);
    }

    PairedFeatureSet out;
    std::vector<std::size_t> chosen;
    std::vector<RowTag> tags;
    if (cancer_px.empty() || normal_px.empty()) {
        // Single-class slice: balancing is impossible, keep everything (still
        // capped) and flag it.
        out.balance_warning = true;
        auto& all = cancer_px.empty() ? normal_px : cancer_px;
        const RowTag tag = cancer_px.empty() ? RowTag::normal : RowTag::lesion;
        if (all.size() > cap) {
            const auto keep = sample_indices(all.size(), cap, rng);
            for (std::size_t i : keep) chosen.push_back(all[i]);
        } else {
            chosen = all;
        }
        tags.assign(chosen.size(), tag);
    } else {
        std::size_t per_class = std::min(cancer_px.size(), normal_px.size());
        per_class = std::min(per_class, cap / 2);
        const auto cancer_keep = sample_indices(cancer_px.size(), per_class, rng);
        const auto normal_keep = sample_indices(normal_px.size(), per_class, rng);
        for (std::size_t i : cancer_keep) chosen.push_back(cancer_px[i]);
        for (std::size_t i : normal_keep) chosen.push_back(normal_px[i]);
        tags.assign(per_class, RowTag::lesion);
        tags.insert(tags.end(), per_class, RowTag::normal);
    }

    const std::size_t n = chosen.size();
    if (n == 0) throw InputError("pixel-pixel pairing produced no rows");
    out.rad = core::Tensor({n, rad_width});
    out.pat = core::Tensor({n, pat_c});
    out.tags = std::move(tags);
    for (std::size_t i = 0; i < n; ++i) {
        const std::size_t p = chosen[i];
        double* rrow = out.rad.data() + i * rad_width;
        for (const auto& r : rad) {
            const std::size_t c = r.extent(2);
            std::copy(r.data() + p * c, r.data() + (p + 1) * c, rrow);
            rrow += c;
        }
        std::copy(pat.data() + p * pat_c, pat.data() + (p + 1) * pat_c,
                  out.pat.data() + i * pat_c);
    }
    return out;
}

PairedFeatureSet merge_pixel_sets(const std::vector<PairedFeatureSet>& sets, core::SeededRng& rng,
                                  std::size_t cap) {
    if (sets.empty()) throw InputError("no pixel sets to merge");
    const std::size_t rad_width = sets.front().rad.extent(1);
    const std::size_t pat_width = sets.front().pat.extent(1);

    std::vector<std::pair<std::size_t, std::size_t>> lesion_rows, normal_rows;  // (set, row)
    for (std::size_t s = 0; s < sets.size(); ++s) {
        if (sets[s].rad.extent(1) != rad_width || sets[s].pat.extent(1) != pat_width) {
            throw InputError("pixel set widths differ");
        }
        for (std::size_t r = 0; r < sets[s].rows(); ++r) {
            (sets[s].tags[r] == RowTag::lesion ? lesion_rows : normal_rows).emplace_back(s, r);
        }
    }

    PairedFeatureSet out;
    std::vector<std::pair<std::size_t, std::size_t>> chosen;
    if (lesion_rows.empty() || normal_rows.empty()) {
        out.balance_warning = true;
        auto& all = lesion_rows.empty() ? normal_rows : lesion_rows;
        if (all.size() > cap) {
            const auto keep = sample_indices(all.size(), cap, rng);
            for (std::size_t i : keep) chosen.push_back(all[i]);
        } else {
            chosen = all;
        }
        out.tags.assign(chosen.size(), lesion_rows.empty() ? RowTag::normal : RowTag::lesion);
    } else {
        std::size_t per_class = std::min(lesion_rows.size(), normal_rows.size());
        per_class = std::min(per_class, cap / 2);
        const auto lesion_keep = sample_indices(lesion_rows.size(), per_class, rng);
        const auto normal_keep = sample_indices(normal_rows.size(), per_class, rng);
        for (std::size_t i : lesion_keep) chosen.push_back(lesion_rows[i]);
        for (std::size_t i : normal_keep) chosen.push_back(normal_rows[i]);
        out.tags.assign(per_class, RowTag::lesion);
        out.tags.insert(out.tags.end(), per_class, RowTag::normal);
    }

    const std::size_t n = chosen.size();
    if (n == 0) throw InputError("merged pixel set is empty");
    out.rad = core::Tensor({n, rad_width});
    out.pat = core::Tensor({n, pat_width});
    for (std::size_t i = 0; i < n; ++i) {
        const auto [s, r] = chosen[i];
        copy_row(sets[s].rad, r, out.rad, i, rad_width);
        copy_row(sets[s].pat, r, out.pat, i, pat_width);
    }
    return out;
}

core::Tensor aggregate_region_mean(const core::Tensor& feat, const core::RegionMask& mask) {
    if (feat.ndim() != 3) throw InputError("aggregate_region_mean expects [H,W,C]");
    const std::size_t h = feat.extent(0), w = feat.extent(1), c = feat.extent(2);
    if (mask.ndim() != 2 || mask.shape()[0] != h || mask.shape()[1] != w) {
        throw InputError("mask shape mismatch in aggregate_region_mean");
    }
    core::Tensor acc({c});
    std::size_t count = 0;
    for (std::size_t p = 0; p < h * w; ++p) {
        if (!mask.on(p)) continue;
        const double* row = feat.data() + p * c;
        for (std::size_t ch = 0; ch < c; ++ch) acc.at(ch) += row[ch];
        ++count;
    }
    if (count == 0) throw InputError("empty mask in aggregate_region_mean");
    for (std::size_t ch = 0; ch < c; ++ch) acc.at(ch) /= static_cast<double>(count);
    return acc;
}

core::Tensor aggregate_region_p95(const features::PatchGridFeatures& patches,
                                  const std::vector<std::pair<std::size_t, std::size_t>>& region) {
    if (region.empty()) throw InputError("empty region in aggregate_region_p95");
    const std::size_t c = features::kFeatureChannels;
    const std::size_t m = region.size();
    const std::size_t rank = static_cast<std::size_t>(std::ceil(0.95 * static_cast<double>(m)));

    core::Tensor out({c});
    std::vector<double> values(m);
    for (std::size_t ch = 0; ch < c; ++ch) {
        for (std::size_t i = 0; i < m; ++i) {
            const auto [gy, gx] = region[i];
            if (gy >= patches.grid_h || gx >= patches.grid_w) {
                throw InputError("region cell outside the patch grid");
            }
            values[i] = patches.vectors.at(gy, gx, ch);
        }
        std::nth_element(values.begin(), values.begin() + (rank - 1), values.end());
        out.at(ch) = values[rank - 1];
    }
    return out;
}

std::vector<core::Tensor> sample_normal_regions(const core::Tensor& feat,
                                                const core::RegionMask& organ_mask,
                                                const core::RegionMask& lesion_mask,
                                                std::size_t size, std::size_t count,
                                                core::SeededRng& rng) {
    if (feat.ndim() != 3) throw InputError("sample_normal_regions expects [H,W,C]");
    const std::size_t h = feat.extent(0), w = feat.extent(1), c = feat.extent(2);
    if (organ_mask.ndim() != 2 || lesion_mask.ndim() != 2 || organ_mask.shape()[0] != h ||
        organ_mask.shape()[1] != w || lesion_mask.shape()[0] != h || lesion_mask.shape()[1] != w) {
        throw InputError("mask shape mismatch in sample_normal_regions");
    }
    if (size == 0 || size > h || size > w) throw InputError("infeasible window size");

    const MaskIntegral organ(organ_mask);
    const MaskIntegral lesion(lesion_mask);
    const std::size_t y_range = h - size + 1;
    const std::size_t x_range = w - size + 1;
    const double full = static_cast<double>(size * size);

    std::vector<core::Tensor> out;
    out.reserve(count);
    for (std::size_t k = 0; k < count; ++k) {
        bool placed = false;
        for (std::size_t attempt = 0; attempt < kWindowAttempts && !placed; ++attempt) {
            const std::size_t y = static_cast<std::size_t>(rng.uniform_int(y_range));
            const std::size_t x = static_cast<std::size_t>(rng.uniform_int(x_range));
            if (organ.window(y, x, size) != full || lesion.window(y, x, size) != 0.0) continue;
            core::Tensor vec({c});
            for (std::size_t wy = 0; wy < size; ++wy) {
                const double* row = feat.data() + ((y + wy) * w + x) * c;
                for (std::size_t wx = 0; wx < size; ++wx) {
                    for (std::size_t ch = 0; ch < c; ++ch) vec.at(ch) += row[wx * c + ch];
                }
            }
            for (std::size_t ch = 0; ch < c; ++ch) vec.at(ch) /= full;
            out.push_back(std::move(vec));
            placed = true;
        }
        if (!placed) {
            throw InputError("no feasible window inside organ and outside lesion");
        }
    }
    return out;
}

PairedFeatureSet build_pairs_by_region(const RegionVectors& vecs, PairingMode mode,
                                       core::SeededRng& rng) {
    if (vecs.pat_lesion.empty()) throw InputError("no lesion pairs available");
    std::size_t rad_width = 0;
    for (const auto& per_lesion : vecs.rad_lesion) {
        for (const auto& v : per_lesion) rad_width = v.extent(0);
    }
    for (const auto& v : vecs.rad_normal) rad_width = v.extent(0);
    if (rad_width == 0) throw InputError("no radiology vectors available");
    const std::size_t pat_width = vecs.pat_lesion.front().second.extent(0);

    std::vector<const core::Tensor*> rad_rows, pat_rows;
    std::vector<RowTag> tags;

    for (const auto& [lesion_id, pvec] : vecs.pat_lesion) {
        if (lesion_id >= vecs.rad_lesion.size() || vecs.rad_lesion[lesion_id].empty()) {
            throw InputError("pathology lesion vector has no radiology slices to pair with");
        }
        const auto& slices = vecs.rad_lesion[lesion_id];
        if (mode == PairingMode::every_slice) {
            for (const auto& svec : slices) {
                rad_rows.push_back(&svec);
                pat_rows.push_back(&pvec);
                tags.push_back(RowTag::lesion);
            }
        } else {
            const std::size_t s = static_cast<std::size_t>(rng.uniform_int(slices.size()));
            rad_rows.push_back(&slices[s]);
            pat_rows.push_back(&pvec);
            tags.push_back(RowTag::lesion);
        }
    }
    for (const auto& pvec : vecs.pat_normal) {
        if (vecs.rad_normal.empty()) {
            throw InputError("pathology normal vectors need radiology normal vectors to pair with");
        }
        const std::size_t s = static_cast<std::size_t>(rng.uniform_int(vecs.rad_normal.size()));
        rad_rows.push_back(&vecs.rad_normal[s]);
        pat_rows.push_back(&pvec);
        tags.push_back(RowTag::normal);
    }

    const std::size_t n = rad_rows.size();
    PairedFeatureSet out;
    out.rad = core::Tensor({n, rad_width});
    out.pat = core::Tensor({n, pat_width});
    out.tags = std::move(tags);
    for (std::size_t i = 0; i < n; ++i) {
        if (rad_rows[i]->extent(0) != rad_width || pat_rows[i]->extent(0) != pat_width) {
            throw InputError("inconsistent vector widths in region pairing");
        }
        std::copy(rad_rows[i]->data(), rad_rows[i]->data() + rad_width,
                  out.rad.data() + i * rad_width);
        std::copy(pat_rows[i]->data(), pat_rows[i]->data() + pat_width,
                  out.pat.data() + i * pat_width);
    }
    if (!out.rad.all_finite() || !out.pat.all_finite()) {
        throw InputError("non-finite values in paired feature rows");
    }
    return out;
}

}  // namespace corrfabr::aggregate
