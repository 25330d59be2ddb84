#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "corrfabr/core/mask.hpp"

namespace corrfabr::eval {

// Probability that a random positive outranks a random negative, ties
// counted half (the Mann-Whitney formulation). Aggressive is the positive
// class throughout.
double roc_auc(const std::vector<double>& scores, const std::vector<int>& labels);

struct ConfusionMetrics {
    double f1 = 0.0;
    double sensitivity = 0.0;
    double specificity = 0.0;
    // Zero-denominator metrics are reported as 0 with the flag cleared.
    bool f1_defined = true;
    bool sensitivity_defined = true;
    bool specificity_defined = true;
};

ConfusionMetrics confusion_metrics(const std::vector<int>& pred, const std::vector<int>& labels);

// 2|a n b| / (|a| + |b|); two empty masks count as 1.0.
double dice(const core::RegionMask& a, const core::RegionMask& b);

// Seeded shuffle then round-robin: fold sizes differ by at most one, and the
// assignment is a pure function of (ids, seed) so every pipeline step sees
// the same folds.
struct FoldAssignment {
    std::map<std::string, int> fold_of;
    int n_folds = 0;

    std::vector<std::string> cases_in(int fold) const;
    std::vector<std::string> cases_not_in(int fold) const;
};

FoldAssignment kfold_split(const std::vector<std::string>& case_ids, int folds,
                           std::uint64_t seed);

struct MetricSummary {
    std::vector<double> per_fold;
    double mean = 0.0;
    double stddev = 0.0;  // population std over folds

    static MetricSummary of(std::vector<double> values);
};

struct MetricsReport {
    MetricSummary roc_auc;
    MetricSummary f1;
    MetricSummary sensitivity;
    MetricSummary specificity;
    MetricSummary dice;
};

}  // namespace corrfabr::eval
