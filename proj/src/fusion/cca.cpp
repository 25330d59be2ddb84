#include "corrfabr/fusion/cca.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>

#include "corrfabr/core/error.hpp"

namespace corrfabr::fusion {

namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

Eigen::MatrixXd centered(const core::Tensor& t) {
    Eigen::Map<const RowMat> m(t.data(), static_cast<Eigen::Index>(t.extent(0)),
                               static_cast<Eigen::Index>(t.extent(1)));
    Eigen::MatrixXd c = m;
    c.rowwise() -= c.colwise().mean();
    return c;
}

// Inverse matrix square root of a symmetric positive definite matrix.
Eigen::MatrixXd inv_sqrt(const Eigen::MatrixXd& s) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(s);
    const Eigen::VectorXd evals = eig.eigenvalues();
    if (evals.minCoeff() <= 0.0) {
        throw InputError("covariance is singular beyond the ridge");
    }
    return eig.eigenvectors() * evals.cwiseSqrt().cwiseInverse().asDiagonal() *
           eig.eigenvectors().transpose();
}

}  // namespace

CcaResult cca_oracle(const core::Tensor& x, const core::Tensor& y, std::size_t k, double ridge) {
    if (x.ndim() != 2 || y.ndim() != 2) throw InputError("cca_oracle expects [N, D] inputs");
    const std::size_t n = x.extent(0);
    if (y.extent(0) != n) throw InputError("row counts differ");
    const std::size_t dx = x.extent(1), dy = y.extent(1);
    if (n <= std::max(dx, dy)) throw InputError("cca needs more samples than dimensions");
    if (k == 0 || k > std::min(dx, dy)) throw InputError("invalid number of components");

    const Eigen::MatrixXd xc = centered(x);
    const Eigen::MatrixXd yc = centered(y);
    const double denom = static_cast<double>(n - 1);

    Eigen::MatrixXd sxx = xc.transpose() * xc / denom;
    Eigen::MatrixXd syy = yc.transpose() * yc / denom;
    const Eigen::MatrixXd sxy = xc.transpose() * yc / denom;
    sxx.diagonal().array() += ridge;
    syy.diagonal().array() += ridge;

    const Eigen::MatrixXd wx = inv_sqrt(sxx);
    const Eigen::MatrixXd wy = inv_sqrt(syy);
    const Eigen::MatrixXd m = wx * sxy * wy;

    Eigen::JacobiSVD<Eigen::MatrixXd> svd(m, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const Eigen::MatrixXd xdir = wx * svd.matrixU().leftCols(static_cast<Eigen::Index>(k));
    const Eigen::MatrixXd ydir = wy * svd.matrixV().leftCols(static_cast<Eigen::Index>(k));

    CcaResult out;
    out.correlations.resize(k);
    for (std::size_t i = 0; i < k; ++i) {
        out.correlations[i] = std::clamp(svd.singularValues()(static_cast<Eigen::Index>(i)), 0.0, 1.0);
    }
    out.x_directions = core::Tensor({dx, k});
    out.y_directions = core::Tensor({dy, k});
    for (std::size_t r = 0; r < dx; ++r)
        for (std::size_t c = 0; c < k; ++c)
            out.x_directions.at(r, c) = xdir(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c));
    for (std::size_t r = 0; r < dy; ++r)
        for (std::size_t c = 0; c < k; ++c)
            out.y_directions.at(r, c) = ydir(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c));
    return out;
}

}  // namespace corrfabr::fusion
