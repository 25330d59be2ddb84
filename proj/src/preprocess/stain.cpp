#include "corrfabr/preprocess/stain.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <vector>

#include "corrfabr/core/error.hpp"

namespace corrfabr::preprocess {

namespace {

constexpr std::size_t kMinTissuePixels = 100;

std::array<double, 3> to_od(const double* rgb) {
    std::array<double, 3> od;
    for (int c = 0; c < 3; ++c) {
        const double v = std::clamp(rgb[c], 0.0, 255.0);
        od[c] = -std::log10((v + 1.0) / 256.0);
    }
    return od;
}

double od_norm(const std::array<double, 3>& od) {
    return std::sqrt(od[0] * od[0] + od[1] * od[1] + od[2] * od[2]);
}

// Nearest-rank percentile of an unsorted copy, q in (0, 100].
double percentile(std::vector<double> values, double q) {
    const std::size_t m = values.size();
    std::size_t rank = static_cast<std::size_t>(std::ceil(q / 100.0 * static_cast<double>(m)));
    rank = std::clamp<std::size_t>(rank, 1, m);
    std::nth_element(values.begin(), values.begin() + (rank - 1), values.end());
    return values[rank - 1];
}

// 2-variable nonnegative least squares against unit stain vectors.
std::array<double, 2> nnls2(const std::array<double, 3>& v1, const std::array<double, 3>& v2,
                            const std::array<double, 3>& od) {
    const double g12 = v1[0] * v2[0] + v1[1] * v2[1] + v1[2] * v2[2];
    const double r1 = v1[0] * od[0] + v1[1] * od[1] + v1[2] * od[2];
    const double r2 = v2[0] * od[0] + v2[1] * od[1] + v2[2] * od[2];
    const double det = 1.0 - g12 * g12;
    if (det > 1e-12) {
        const double c1 = (r1 - g12 * r2) / det;
        const double c2 = (r2 - g12 * r1) / det;
        if (c1 >= 0.0 && c2 >= 0.0) return {c1, c2};
    }
    // Active-set boundary: best single-stain fits, keep the smaller residual.
    const double c1_only = std::max(0.0, r1);
    const double c2_only = std::max(0.0, r2);
    // residual^2 = |od|^2 - 2 c r + c^2 for unit vectors; |od|^2 is common.
    const double res1 = c1_only * c1_only - 2.0 * c1_only * r1;
    const double res2 = c2_only * c2_only - 2.0 * c2_only * r2;
    if (res1 <= res2) return {c1_only, 0.0};
    return {0.0, c2_only};
}

std::array<double, 3> clamp_unit_nonneg(std::array<double, 3> v) {
    for (double& x : v) x = std::max(0.0, x);
    const double n = od_norm(v);
    if (n < 1e-12) throw InputError("degenerate stain vector");
    for (double& x : v) x /= n;
    return v;
}

}  // namespace

StainBasis macenko_fit(const core::Tensor& rgb, double beta, double alpha) {
    if (rgb.ndim() != 3 || rgb.extent(2) != 3) throw InputError("macenko_fit expects [H,W,3]");
    const std::size_t n_px = rgb.extent(0) * rgb.extent(1);

    std::vector<std::array<double, 3>> tissue;
    tissue.reserve(n_px / 4);
    for (std::size_t i = 0; i < n_px; ++i) {
        const auto od = to_od(rgb.data() + 3 * i);
        if (od_norm(od) >= beta) tissue.push_back(od);
    }
    if (tissue.size() < kMinTissuePixels) {
        throw InputError("too few tissue pixels for stain estimation (" +
                         std::to_string(tissue.size()) + " above the OD cutoff)");
    }

    // Leading 2-D plane of the OD cloud through the origin (uncentered
    // second-moment matrix; concentrations are nonnegative mixtures).
    Eigen::Matrix3d moment = Eigen::Matrix3d::Zero();
    for (const auto& od : tissue) {
        const Eigen::Vector3d v(od[0], od[1], od[2]);
        moment += v * v.transpose();
    }
    Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> eig(moment);
    const Eigen::Vector3d evals = eig.eigenvalues();  // ascending
    if (!(evals(1) > 1e-10 * std::max(evals(2), 1e-300)) || evals(2) <= 0.0) {
        throw InputError("degenerate OD cloud (rank < 2), cannot separate two stains");
    }
    Eigen::Vector3d e1 = eig.eigenvectors().col(2);
    Eigen::Vector3d e2 = eig.eigenvectors().col(1);

    // Orient e1 toward the cloud so all angles live in (-pi/2, pi/2).
    Eigen::Vector3d mean = Eigen::Vector3d::Zero();
    for (const auto& od : tissue) mean += Eigen::Vector3d(od[0], od[1], od[2]);
    mean /= static_cast<double>(tissue.size());
    if (mean.dot(e1) < 0.0) e1 = -e1;

    std::vector<double> angles(tissue.size());
    for (std::size_t i = 0; i < tissue.size(); ++i) {
        const Eigen::Vector3d v(tissue[i][0], tissue[i][1], tissue[i][2]);
        angles[i] = std::atan2(v.dot(e2), v.dot(e1));
    }
    const double phi_lo = percentile(angles, alpha);
    const double phi_hi = percentile(angles, 100.0 - alpha);

    auto direction = [&](double phi) {
        const Eigen::Vector3d v = std::cos(phi) * e1 + std::sin(phi) * e2;
        return clamp_unit_nonneg({v(0), v(1), v(2)});
    };
    std::array<double, 3> va = direction(phi_lo);
    std::array<double, 3> vb = direction(phi_hi);

    StainBasis basis;
    if (va[0] >= vb[0]) {
        basis.stain1 = va;
        basis.stain2 = vb;
    } else {
        basis.stain1 = vb;
        basis.stain2 = va;
    }

    std::vector<double> c1(tissue.size()), c2(tissue.size());
    for (std::size_t i = 0; i < tissue.size(); ++i) {
        const auto c = nnls2(basis.stain1, basis.stain2, tissue[i]);
        c1[i] = c[0];
        c2[i] = c[1];
    }
    basis.c1_99 = percentile(std::move(c1), 99.0);
    basis.c2_99 = percentile(std::move(c2), 99.0);
    return basis;
}

core::Tensor macenko_normalize(const core::Tensor& rgb, const StainBasis& source,
                               const StainBasis& target) {
    if (rgb.ndim() != 3 || rgb.extent(2) != 3) throw InputError("macenko_normalize expects [H,W,3]");
    const std::size_t n_px = rgb.extent(0) * rgb.extent(1);

    const double s1 = source.c1_99 > 1e-8 ? target.c1_99 / source.c1_99 : 1.0;
    const double s2 = source.c2_99 > 1e-8 ? target.c2_99 / source.c2_99 : 1.0;

    core::Tensor out(rgb.shape());
    for (std::size_t i = 0; i < n_px; ++i) {
        const auto od = to_od(rgb.data() + 3 * i);
        const auto c = nnls2(source.stain1, source.stain2, od);
        const double c1 = c[0] * s1, c2 = c[1] * s2;
        for (int ch = 0; ch < 3; ++ch) {
            const double od_new = c1 * target.stain1[ch] + c2 * target.stain2[ch];
            const double value = 256.0 * std::pow(10.0, -od_new) - 1.0;
            out.data()[3 * i + ch] = std::clamp(value, 0.0, 255.0);
        }
    }
    return out;
}

}  // namespace corrfabr::preprocess
