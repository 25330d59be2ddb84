#pragma once

#include <cstdint>
#include <vector>

#include "corrfabr/aggregate/aggregation.hpp"
#include "corrfabr/core/rng.hpp"
#include "corrfabr/core/tensor.hpp"

namespace corrfabr::fusion {

// Two-view single-layer correlational autoencoder. Encoders share the bias:
// h_R = W R + b, h_P = V P + b; decoders have per-view biases (a shared
// decoder bias is dimensionally impossible when the views differ in width).
// Activations are the identity.
struct CorrNetModel {
    std::size_t latent_dim = 5;
    double lambda = 2.0;
    core::Tensor enc_rad;       // W  [k, Dr]
    core::Tensor enc_pat;       // V  [k, Dp]
    core::Tensor enc_bias;      // b  [k], shared across views
    core::Tensor dec_rad;       // W' [Dr, k]
    core::Tensor dec_rad_bias;  // [Dr]
    core::Tensor dec_pat;       // V' [Dp, k]
    core::Tensor dec_pat_bias;  // [Dp]

    std::size_t rad_dim() const { return enc_rad.extent(1); }
    std::size_t pat_dim() const { return enc_pat.extent(1); }
};

// Seeded uniform initialization in +-1/sqrt(fan-in).
CorrNetModel make_corrnet(std::size_t rad_dim, std::size_t pat_dim, std::size_t latent_dim,
                          double lambda, core::SeededRng& rng);

struct ForwardResult {
    core::Tensor h_rad;      // [B, k]
    core::Tensor h_pat;      // [B, k]
    core::Tensor rad_recon;  // [B, Dr]
    core::Tensor pat_recon;  // [B, Dp]
};

ForwardResult corrnet_forward(const CorrNetModel& m, const core::Tensor& rad,
                              const core::Tensor& pat);

// Sum over latent dimensions of the per-dimension Pearson correlation across
// the batch; eps sits inside the square-root denominator so constant batches
// yield 0 instead of dividing by zero. Bounded by [-k, k].
double corr_loss(const core::Tensor& h_rad, const core::Tensor& h_pat, double eps = 1e-8);

// recon is the batch mean of per-sample MSE(R, R') + MSE(P, P'); corr is
// corr_loss of the latents; objective = recon - lambda * corr is what
// training minimizes (the correlation term is maximized).
struct LossBreakdown {
    double objective = 0.0;
    double recon = 0.0;
    double corr = 0.0;
};

LossBreakdown total_loss(const CorrNetModel& m, const core::Tensor& rad, const core::Tensor& pat);

// Analytic gradients of the minimized objective for every parameter tensor.
struct CorrNetGradients {
    core::Tensor enc_rad, enc_pat, enc_bias;
    core::Tensor dec_rad, dec_rad_bias, dec_pat, dec_pat_bias;
};

CorrNetGradients corrnet_grad(const CorrNetModel& m, const core::Tensor& rad,
                              const core::Tensor& pat);

struct FusionTrainConfig {
    std::size_t epochs = 1000;
    double learning_rate = 0.5e-4;
    std::size_t batch_size = 50;
    std::size_t latent_dim = 5;
    double lambda = 2.0;
    std::uint64_t seed = 0;
};

struct EpochStats {
    double objective = 0.0;
    double recon = 0.0;
    double corr = 0.0;
};

struct FusionTrainResult {
    CorrNetModel model;
    std::vector<EpochStats> curve;  // per-epoch means over batches
};

// Adam on the objective with seeded per-epoch shuffling and a fixed batch
// order; bit-identical results for equal seeds. Trailing batches of a single
// row are skipped (batch correlation needs two samples).
FusionTrainResult train_fusion(const aggregate::PairedFeatureSet& pairs,
                               const FusionTrainConfig& cfg);

// Radiology-only encoding: per-pixel h = W f + b on a [H,W,C] feature map,
// giving the [H,W,k] CorrFeat map. No pathology input is consumed.
core::Tensor encode_radiology(const CorrNetModel& m, const core::Tensor& feat);

// Same affine map on a single aggregated feature vector. Because the encoder
// is linear, encoding a region-mean vector equals region-mean of the encoded
// map.
core::Tensor encode_vector(const CorrNetModel& m, const core::Tensor& vec);

}  // namespace corrfabr::fusion
