#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "corrfabr/core/tensor.hpp"
#include "corrfabr/preprocess/labeling.hpp"

namespace corrfabr::synth {

// Two-view linear-Gaussian data with a shared latent and known canonical
// correlations: x = A S z + noise, y = B S' z + noise with orthonormal
// mixing columns, so the correlation of latent dim i is
// s_i s'_i / sqrt((s_i^2 + sx^2)(s'_i^2 + sy^2)).
struct TwoViewSpec {
    std::size_t latent_dim = 5;
    std::size_t x_dim = 128;
    std::size_t y_dim = 64;
    double signal_std = 1.0;
    std::vector<double> signal_scales;  // optional per-dim override of signal_std
    double noise_x = 1.0;
    double noise_y = 1.0;
    std::size_t n_samples = 5000;
    std::uint64_t seed = 0;
};

struct TwoViewData {
    core::Tensor x;  // [N, x_dim]
    core::Tensor y;  // [N, y_dim]
    std::vector<double> true_correlations;  // descending
};

TwoViewData gen_two_view(const TwoViewSpec& spec);

// Ground-truth-controlled imaging cohort. Class signal is injected only into
// a shared 5-dim latent that modulates texture amplitudes in both the
// radiology lesion and the pathology tissue; radiology additionally carries
// strong per-slice view-private texture noise.
enum class CohortMode { kidney, prostate_sim };

struct CohortSpec {
    std::size_t n_cases = 200;
    double class_balance = 0.5;  // fraction labeled aggressive (exact counts)
    std::uint64_t seed = 0;
    CohortMode mode = CohortMode::kidney;
    std::size_t slices = 2;
    std::size_t image_size = 224;
    std::size_t pathology_size = 224;

    // Texture design. Separation and spread act on the shared latent;
    // rad_private_std drives the per-slice radiology-only patterns.
    double class_separation = 0.5;
    double latent_std = 0.25;
    double rad_private_std = 1.2;
    double pat_private_std = 0.15;
    double pixel_noise = 0.25;
};

struct SyntheticCase {
    std::string patient_id;
    std::vector<core::Tensor> radiology;  // per sequence, [D,H,W]
    core::Tensor lesion_mask;             // [D,H,W], binary values
    core::Tensor organ_mask;              // prostate_sim only, [D,H,W]; empty otherwise
    core::Tensor pathology;               // [Hp,Wp,3] RGB in [0,255]
    core::Tensor pathology_lesion_mask;   // prostate_sim only, [Hp,Wp]; empty otherwise
    int grade = 1;
    bool necrosis = false;
    preprocess::LesionLabel label = preprocess::LesionLabel::indolent;
    std::vector<double> latent;  // the planted shared component, for verification
};

struct SyntheticCohort {
    CohortSpec spec;
    std::vector<SyntheticCase> cases;
};

SyntheticCohort gen_cohort(const CohortSpec& spec);

// Writes CFTN tensors plus the manifest.json the pipeline consumes.
void save_cohort(const SyntheticCohort& cohort, const std::filesystem::path& dir);

}  // namespace corrfabr::synth
