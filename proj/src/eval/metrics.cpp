#include "corrfabr/eval/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "corrfabr/core/error.hpp"
#include "corrfabr/core/rng.hpp"

namespace corrfabr::eval {

double roc_auc(const std::vector<double>& scores, const std::vector<int>& labels) {
    if (scores.size() != labels.size()) throw InputError("scores and labels differ in length");
    const std::size_t n = scores.size();
    std::size_t n_pos = 0;
    for (int l : labels) {
        if (l != 0 && l != 1) throw InputError("labels must be binary");
        n_pos += static_cast<std::size_t>(l);
    }
    const std::size_t n_neg = n - n_pos;
    if (n_pos == 0 || n_neg == 0) throw InputError("roc_auc needs both classes");

    // Rank-sum with midranks for ties.
    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), 0);
    std::sort(idx.begin(), idx.end(),
              [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });

    double pos_rank_sum = 0.0;
    std::size_t i = 0;
    while (i < n) {
        std::size_t j = i;
        while (j + 1 < n && scores[idx[j + 1]] == scores[idx[i]]) ++j;
        const double midrank = 0.5 * static_cast<double>(i + j) + 1.0;
        for (std::size_t t = i; t <= j; ++t) {
            if (labels[idx[t]] == 1) pos_rank_sum += midrank;
        }
        i = j + 1;
    }
    const double n_pos_d = static_cast<double>(n_pos);
    return (pos_rank_sum - n_pos_d * (n_pos_d + 1.0) / 2.0) /
           (n_pos_d * static_cast<double>(n_neg));
}

ConfusionMetrics confusion_metrics(const std::vector<int>& pred, const std::vector<int>& labels) {
    if (pred.size() != labels.size()) throw InputError("pred and labels differ in length");
    if (pred.empty()) throw InputError("confusion_metrics needs at least one sample");
    double tp = 0, fp = 0, fn = 0, tn = 0;
    for (std::size_t i = 0; i < pred.size(); ++i) {
        if (pred[i] == 1 && labels[i] == 1) ++tp;
        else if (pred[i] == 1 && labels[i] == 0) ++fp;
        else if (pred[i] == 0 && labels[i] == 1) ++fn;
        else ++tn;
    }
    ConfusionMetrics m;
    if (tp + fn > 0) m.sensitivity = tp / (tp + fn);
    else m.sensitivity_defined = false;
    if (tn + fp > 0) m.specificity = tn / (tn + fp);
    else m.specificity_defined = false;
    if (2 * tp + fp + fn > 0) m.f1 = 2 * tp / (2 * tp + fp + fn);
    else m.f1_defined = false;
    return m;
}

double dice(const core::RegionMask& a, const core::RegionMask& b) {
    if (a.shape() != b.shape()) throw InputError("dice masks must share a shape");
    std::size_t inter = 0, total = 0;
    for (std::size_t i = 0; i < a.tensor().numel(); ++i) {
        const bool av = a.on(i), bv = b.on(i);
        inter += av && bv;
        total += av;
        total += bv;
    }
    if (total == 0) return 1.0;
    return 2.0 * static_cast<double>(inter) / static_cast<double>(total);
}

std::vector<std::string> FoldAssignment::cases_in(int fold) const {
    std::vector<std::string> out;
    for (const auto& [id, f] : fold_of) {
        if (f == fold) out.push_back(id);
    }
    return out;
}

std::vector<std::string> FoldAssignment::cases_not_in(int fold) const {
    std::vector<std::string> out;
    for (const auto& [id, f] : fold_of) {
        if (f != fold) out.push_back(id);
    }
    return out;
}

FoldAssignment kfold_split(const std::vector<std::string>& case_ids, int folds,
                           std::uint64_t seed) {
    if (folds < 1) throw InputError("fold count must be positive");
    if (case_ids.size() < static_cast<std::size_t>(folds)) {
        throw InputError("fewer cases than folds");
    }
    std::vector<std::size_t> order(case_ids.size());
    std::iota(order.begin(), order.end(), 0);
    core::SeededRng rng(seed);
    rng.shuffle(order);

    FoldAssignment out;
    out.n_folds = folds;
    for (std::size_t i = 0; i < order.size(); ++i) {
        const auto& id = case_ids[order[i]];
        if (out.fold_of.count(id)) throw InputError("duplicate case id: " + id);
        out.fold_of[id] = static_cast<int>(i % static_cast<std::size_t>(folds));
    }
    return out;
}

MetricSummary MetricSummary::of(std::vector<double> values) {
    MetricSummary s;
    s.per_fold = std::move(values);
    if (s.per_fold.empty()) return s;
    const double n = static_cast<double>(s.per_fold.size());
    for (double v : s.per_fold) s.mean += v;
    s.mean /= n;
    double sq = 0.0;
    for (double v : s.per_fold) sq += (v - s.mean) * (v - s.mean);
    s.stddev = std::sqrt(sq / n);
    return s;
}

}  // namespace corrfabr::eval
