#include "corrfabr/fusion/corrnet.hpp"

#include <Eigen/Dense>
#include <cmath>
#include <numeric>

#include "corrfabr/core/error.hpp"

namespace corrfabr::fusion {

namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MatMap = Eigen::Map<RowMat>;
using ConstMatMap = Eigen::Map<const RowMat>;
using VecMap = Eigen::Map<Eigen::VectorXd>;
using ConstVecMap = Eigen::Map<const Eigen::VectorXd>;

constexpr double kCorrEps = 1e-8;

ConstMatMap as_matrix(const core::Tensor& t) {
    return ConstMatMap(t.data(), static_cast<Eigen::Index>(t.extent(0)),
                       static_cast<Eigen::Index>(t.extent(1)));
}

MatMap as_matrix(core::Tensor& t) {
    return MatMap(t.data(), static_cast<Eigen::Index>(t.extent(0)),
                  static_cast<Eigen::Index>(t.extent(1)));
}

core::Tensor seeded_uniform(std::vector<std::size_t> shape, double scale, core::SeededRng& rng) {
    core::Tensor t(std::move(shape));
    for (double& v : t.vec()) v = rng.uniform(-scale, scale);
    return t;
}

void check_batch(const CorrNetModel& m, const core::Tensor& rad, const core::Tensor& pat) {
    if (rad.ndim() != 2 || pat.ndim() != 2) throw InputError("batches must be [B, D]");
    if (rad.extent(0) != pat.extent(0)) throw InputError("batch sizes differ between views");
    if (rad.extent(1) != m.rad_dim() || pat.extent(1) != m.pat_dim()) {
        throw InputError("batch widths do not match the model");
    }
}

// Adam with the standard defaults; the paper fixes only learning rate,
// epochs, and batch size.
struct AdamState {
    double lr;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    std::size_t step = 0;
    std::vector<std::vector<double>> m, v;

    explicit AdamState(double learning_rate) : lr(learning_rate) {}

    void register_param(const core::Tensor& p) {
        m.emplace_back(p.numel(), 0.0);
        v.emplace_back(p.numel(), 0.0);
    }

    void update(std::size_t slot, core::Tensor& param, const core::Tensor& grad) {
        auto& mi = m[slot];
        auto& vi = v[slot];
        const double b1t = 1.0 - std::pow(beta1, static_cast<double>(step));
        const double b2t = 1.0 - std::pow(beta2, static_cast<double>(step));
        for (std::size_t i = 0; i < mi.size(); ++i) {
            const double g = grad.at(i);
            mi[i] = beta1 * mi[i] + (1.0 - beta1) * g;
            vi[i] = beta2 * vi[i] + (1.0 - beta2) * g * g;
            param.at(i) -= lr * (mi[i] / b1t) / (std::sqrt(vi[i] / b2t) + eps);
        }
    }
};

}  // namespace

CorrNetModel make_corrnet(std::size_t rad_dim, std::size_t pat_dim, std::size_t latent_dim,
                          double lambda, core::SeededRng& rng) {
    if (latent_dim == 0 || rad_dim == 0 || pat_dim == 0) {
        throw InputError("corrnet dimensions must be positive");
    }
    CorrNetModel m;
    m.latent_dim = latent_dim;
    m.lambda = lambda;
    m.enc_rad = seeded_uniform({latent_dim, rad_dim}, 1.0 / std::sqrt(double(rad_dim)), rng);
    m.enc_pat = seeded_uniform({latent_dim, pat_dim}, 1.0 / std::sqrt(double(pat_dim)), rng);
    m.enc_bias = core::Tensor({latent_dim});
    m.dec_rad = seeded_uniform({rad_dim, latent_dim}, 1.0 / std::sqrt(double(latent_dim)), rng);
    m.dec_rad_bias = core::Tensor({rad_dim});
    m.dec_pat = seeded_uniform({pat_dim, latent_dim}, 1.0 / std::sqrt(double(latent_dim)), rng);
    m.dec_pat_bias = core::Tensor({pat_dim});
    return m;
}

ForwardResult corrnet_forward(const CorrNetModel& m, const core::Tensor& rad,
                              const core::Tensor& pat) {
    check_batch(m, rad, pat);
    const std::size_t b = rad.extent(0);
    const std::size_t k = m.latent_dim;

    ForwardResult out;
    out.h_rad = core::Tensor({b, k});
    out.h_pat = core::Tensor({b, k});
    out.rad_recon = core::Tensor({b, m.rad_dim()});
    out.pat_recon = core::Tensor({b, m.pat_dim()});

    const ConstVecMap bias(m.enc_bias.data(), static_cast<Eigen::Index>(k));
    as_matrix(out.h_rad).noalias() = as_matrix(rad) * as_matrix(m.enc_rad).transpose();
    as_matrix(out.h_rad).rowwise() += bias.transpose();
    as_matrix(out.h_pat).noalias() = as_matrix(pat) * as_matrix(m.enc_pat).transpose();
    as_matrix(out.h_pat).rowwise() += bias.transpose();

    as_matrix(out.rad_recon).noalias() = as_matrix(out.h_rad) * as_matrix(m.dec_rad).transpose();
    as_matrix(out.rad_recon).rowwise() +=
        ConstVecMap(m.dec_rad_bias.data(), static_cast<Eigen::Index>(m.rad_dim())).transpose();
    as_matrix(out.pat_recon).noalias() = as_matrix(out.h_pat) * as_matrix(m.dec_pat).transpose();
    as_matrix(out.pat_recon).rowwise() +=
        ConstVecMap(m.dec_pat_bias.data(), static_cast<Eigen::Index>(m.pat_dim())).transpose();
    return out;
}

double corr_loss(const core::Tensor& h_rad, const core::Tensor& h_pat, double eps) {
    if (h_rad.ndim() != 2 || !h_rad.same_shape(h_pat)) {
        throw InputError("corr_loss expects equal [B, k] latents");
    }
    const std::size_t b = h_rad.extent(0), k = h_rad.extent(1);
    if (b < 2) throw InputError("corr_loss needs a batch of at least 2");

    double total = 0.0;
    for (std::size_t d = 0; d < k; ++d) {
        double mean_r = 0.0, mean_p = 0.0;
        for (std::size_t i = 0; i < b; ++i) {
            mean_r += h_rad.at(i, d);
            mean_p += h_pat.at(i, d);
        }
        mean_r /= static_cast<double>(b);
        mean_p /= static_cast<double>(b);
        double sxy = 0.0, sxx = 0.0, syy = 0.0;
        for (std::size_t i = 0; i < b; ++i) {
            const double x = h_rad.at(i, d) - mean_r;
            const double y = h_pat.at(i, d) - mean_p;
            sxy += x * y;
            sxx += x * x;
            syy += y * y;
        }
        total += sxy / std::sqrt(sxx * syy + eps);
    }
    return total;
}

namespace {

double recon_loss(const core::Tensor& input, const core::Tensor& recon) {
    const std::size_t b = input.extent(0), d = input.extent(1);
    double acc = 0.0;
    for (std::size_t i = 0; i < b * d; ++i) {
        const double e = recon.at(i) - input.at(i);
        acc += e * e;
    }
    return acc / static_cast<double>(b * d);  // batch mean of per-sample MSE
}

}  // namespace

LossBreakdown total_loss(const CorrNetModel& m, const core::Tensor& rad, const core::Tensor& pat) {
    const ForwardResult fwd = corrnet_forward(m, rad, pat);
    LossBreakdown loss;
    loss.recon = recon_loss(rad, fwd.rad_recon) + recon_loss(pat, fwd.pat_recon);
    loss.corr = corr_loss(fwd.h_rad, fwd.h_pat, kCorrEps);
    loss.objective = loss.recon - m.lambda * loss.corr;
    return loss;
}

CorrNetGradients corrnet_grad(const CorrNetModel& m, const core::Tensor& rad,
                              const core::Tensor& pat) {
    const ForwardResult fwd = corrnet_forward(m, rad, pat);
    const std::size_t b = rad.extent(0);
    if (b < 2) throw InputError("corrnet_grad needs a batch of at least 2");
    const std::size_t k = m.latent_dim, dr = m.rad_dim(), dp = m.pat_dim();

    // d objective / d reconstruction, from the per-sample-MSE batch mean.
    RowMat g_rrec = (2.0 / static_cast<double>(b * dr)) *
                    (as_matrix(fwd.rad_recon) - as_matrix(rad));
    RowMat g_prec = (2.0 / static_cast<double>(b * dp)) *
                    (as_matrix(fwd.pat_recon) - as_matrix(pat));

    CorrNetGradients g;
    g.dec_rad = core::Tensor({dr, k});
    g.dec_pat = core::Tensor({dp, k});
    g.dec_rad_bias = core::Tensor({dr});
    g.dec_pat_bias = core::Tensor({dp});
    as_matrix(g.dec_rad).noalias() = g_rrec.transpose() * as_matrix(fwd.h_rad);
    as_matrix(g.dec_pat).noalias() = g_prec.transpose() * as_matrix(fwd.h_pat);
    VecMap(g.dec_rad_bias.data(), static_cast<Eigen::Index>(dr)) = g_rrec.colwise().sum();
    VecMap(g.dec_pat_bias.data(), static_cast<Eigen::Index>(dp)) = g_prec.colwise().sum();

    // Latent gradients: reconstruction path plus the maximized correlation.
    RowMat g_hr = g_rrec * as_matrix(m.dec_rad);
    RowMat g_hp = g_prec * as_matrix(m.dec_pat);

    for (std::size_t d = 0; d < k; ++d) {
        double mean_r = 0.0, mean_p = 0.0;
        for (std::size_t i = 0; i < b; ++i) {
            mean_r += fwd.h_rad.at(i, d);
            mean_p += fwd.h_pat.at(i, d);
        }
        mean_r /= static_cast<double>(b);
        mean_p /= static_cast<double>(b);
        double sxy = 0.0, sxx = 0.0, syy = 0.0;
        for (std::size_t i = 0; i < b; ++i) {
            const double x = fwd.h_rad.at(i, d) - mean_r;
            const double y = fwd.h_pat.at(i, d) - mean_p;
            sxy += x * y;
            sxx += x * x;
            syy += y * y;
        }
        const double den = std::sqrt(sxx * syy + kCorrEps);
        const double den3 = den * den * den;
        for (std::size_t i = 0; i < b; ++i) {
            const double x = fwd.h_rad.at(i, d) - mean_r;
            const double y = fwd.h_pat.at(i, d) - mean_p;
            // d rho / d h, using that the centered sums are invariant to the
            // mean shift (sum of deviations is zero).
            const double drho_dhr = y / den - sxy * syy * x / den3;
            const double drho_dhp = x / den - sxy * sxx * y / den3;
            g_hr(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(d)) -=
                m.lambda * drho_dhr;
            g_hp(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(d)) -=
                m.lambda * drho_dhp;
        }
    }

    g.enc_rad = core::Tensor({k, dr});
    g.enc_pat = core::Tensor({k, dp});
    g.enc_bias = core::Tensor({k});
    as_matrix(g.enc_rad).noalias() = g_hr.transpose() * as_matrix(rad);
    as_matrix(g.enc_pat).noalias() = g_hp.transpose() * as_matrix(pat);
    // The shared bias collects both views' paths.
    VecMap(g.enc_bias.data(), static_cast<Eigen::Index>(k)) =
        g_hr.colwise().sum() + g_hp.colwise().sum();
    return g;
}

FusionTrainResult train_fusion(const aggregate::PairedFeatureSet& pairs,
                               const FusionTrainConfig& cfg) {
    const std::size_t n = pairs.rows();
    if (n == 0) throw InputError("empty paired set");
    if (n < cfg.batch_size) {
        throw InputError("training needs at least one full batch (" + std::to_string(n) + " rows, batch " +
                         std::to_string(cfg.batch_size) + ")");
    }
    const std::size_t dr = pairs.rad.extent(1), dp = pairs.pat.extent(1);

    core::SeededRng rng(cfg.seed);
    FusionTrainResult result;
    result.model = make_corrnet(dr, dp, cfg.latent_dim, cfg.lambda, rng);
    CorrNetModel& model = result.model;

    AdamState adam(cfg.learning_rate);
    core::Tensor* params[] = {&model.enc_rad, &model.enc_pat,      &model.enc_bias,
                              &model.dec_rad, &model.dec_rad_bias, &model.dec_pat,
                              &model.dec_pat_bias};
    for (const auto* p : params) adam.register_param(*p);

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);

    core::Tensor rad_batch, pat_batch;
    for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        rng.shuffle(order);
        EpochStats stats;
        std::size_t batches = 0;
        for (std::size_t start = 0; start < n; start += cfg.batch_size) {
            const std::size_t bsz = std::min(cfg.batch_size, n - start);
            if (bsz < 2) break;  // a single-row tail has no batch correlation
            rad_batch = core::Tensor({bsz, dr});
            pat_batch = core::Tensor({bsz, dp});
            for (std::size_t i = 0; i < bsz; ++i) {
                const std::size_t row = order[start + i];
                std::copy(pairs.rad.data() + row * dr, pairs.rad.data() + (row + 1) * dr,
                          rad_batch.data() + i * dr);
                std::copy(pairs.pat.data() + row * dp, pairs.pat.data() + (row + 1) * dp,
                          pat_batch.data() + i * dp);
            }
            const LossBreakdown loss = total_loss(model, rad_batch, pat_batch);
            const CorrNetGradients grad = corrnet_grad(model, rad_batch, pat_batch);

            ++adam.step;
            adam.update(0, model.enc_rad, grad.enc_rad);
            adam.update(1, model.enc_pat, grad.enc_pat);
            adam.update(2, model.enc_bias, grad.enc_bias);
            adam.update(3, model.dec_rad, grad.dec_rad);
            adam.update(4, model.dec_rad_bias, grad.dec_rad_bias);
            adam.update(5, model.dec_pat, grad.dec_pat);
            adam.update(6, model.dec_pat_bias, grad.dec_pat_bias);

            stats.objective += loss.objective;
            stats.recon += loss.recon;
            stats.corr += loss.corr;
            ++batches;
        }
        stats.objective /= static_cast<double>(batches);
        stats.recon /= static_cast<double>(batches);
        stats.corr /= static_cast<double>(batches);
        result.curve.push_back(stats);
    }
    return result;
}

core::Tensor encode_radiology(const CorrNetModel& m, const core::Tensor& feat) {
    if (feat.ndim() != 3) throw InputError("encode_radiology expects [H,W,C]");
    const std::size_t h = feat.extent(0), w = feat.extent(1), c = feat.extent(2);
    if (c != m.rad_dim()) {
        throw InputError("feature map has " + std::to_string(c) + " channels, encoder expects " +
                         std::to_string(m.rad_dim()));
    }
    const std::size_t k = m.latent_dim;
    core::Tensor out({h, w, k});
    ConstMatMap flat(feat.data(), static_cast<Eigen::Index>(h * w), static_cast<Eigen::Index>(c));
    MatMap enc(out.data(), static_cast<Eigen::Index>(h * w), static_cast<Eigen::Index>(k));
    enc.noalias() = flat * as_matrix(m.enc_rad).transpose();
    enc.rowwise() += ConstVecMap(m.enc_bias.data(), static_cast<Eigen::Index>(k)).transpose();
    return out;
}

core::Tensor encode_vector(const CorrNetModel& m, const core::Tensor& vec) {
    if (vec.ndim() != 1 || vec.extent(0) != m.rad_dim()) {
        throw InputError("encode_vector expects a [Dr] vector");
    }
    core::Tensor out({m.latent_dim});
    for (std::size_t d = 0; d < m.latent_dim; ++d) {
        double acc = m.enc_bias.at(d);
        const double* wrow = m.enc_rad.data() + d * m.rad_dim();
        for (std::size_t j = 0; j < m.rad_dim(); ++j) acc += wrow[j] * vec.at(j);
        out.at(d) = acc;
    }
    return out;
}

}  // namespace corrfabr::fusion
