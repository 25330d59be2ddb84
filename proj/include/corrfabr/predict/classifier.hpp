#pragma once

#include <cstdint>
#include <vector>

#include "corrfabr/core/mask.hpp"
#include "corrfabr/core/rng.hpp"
#include "corrfabr/core/tensor.hpp"

namespace corrfabr::predict {

// Region classifier standing in for the dense segmentation network: each
// input feature group (radiology sequence or CorrFeat) enters through its own
// linear branch, branch logits are concatenated and mixed by a final linear
// layer. Trained with softmax cross-entropy.
struct RegionClassifier {
    std::size_t n_classes = 2;
    std::vector<core::Tensor> branch_w;  // per branch [C, d_b]
    std::vector<core::Tensor> branch_b;  // per branch [C]
    core::Tensor head_w;                 // [C, C * n_branches]
    core::Tensor head_b;                 // [C]

    std::size_t n_branches() const { return branch_w.size(); }
};

RegionClassifier make_classifier(const std::vector<std::size_t>& branch_dims,
                                 std::size_t n_classes, core::SeededRng& rng);

// Labeled region-feature rows; branches[b] is [N, d_b], labels are class ids.
struct LabeledRows {
    std::vector<core::Tensor> branches;
    std::vector<int> labels;

    std::size_t rows() const { return labels.size(); }
};

struct PredictorTrainConfig {
    std::size_t max_epochs = 100;
    double learning_rate = 0.001;
    std::size_t batch_size = 8;
    double lr_decay = 0.1;               // applied after lr_patience stagnant epochs
    std::size_t lr_patience = 10;
    std::size_t early_stopping_patience = 20;
    std::uint64_t seed = 0;
};

struct PredictorTrainResult {
    RegionClassifier model;  // the final trained state, not the best-validation one
    std::vector<double> train_loss;
    std::vector<double> val_loss;
    std::size_t epochs_run = 0;
};

// Adam on cross-entropy with seeded shuffling. The learning rate decays by
// lr_decay after lr_patience epochs without validation improvement; training
// stops early after early_stopping_patience stagnant epochs.
PredictorTrainResult train_predictor(const LabeledRows& train, const LabeledRows& val,
                                     const PredictorTrainConfig& cfg);

// Softmax class probabilities for one row (one vector per branch).
std::vector<double> predict_slice(const RegionClassifier& c,
                                  const std::vector<core::Tensor>& branch_features);

// Most frequent class id among mask voxels; ties resolve toward the larger
// (more aggressive) class id.
int majority_vote(const core::Tensor& segmentation, const core::RegionMask& mask);

// Elementwise mean of probability tensors of equal shape.
core::Tensor ensemble_average(const std::vector<core::Tensor>& predictions);

}  // namespace corrfabr::predict
