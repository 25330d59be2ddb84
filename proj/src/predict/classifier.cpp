#include "corrfabr/predict/classifier.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

#include "corrfabr/core/error.hpp"

namespace corrfabr::predict {

namespace {

struct ForwardCache {
    std::vector<std::vector<double>> branch_logits;  // per branch [C]
    std::vector<double> logits;                      // [C]
    std::vector<double> probs;                       // [C]
};

void softmax(std::vector<double>& v) {
    const double m = *std::max_element(v.begin(), v.end());
    double sum = 0.0;
    for (double& x : v) {
        x = std::exp(x - m);
        sum += x;
    }
    for (double& x : v) x /= sum;
}

ForwardCache forward_row(const RegionClassifier& c, const std::vector<const double*>& row) {
    const std::size_t n_cls = c.n_classes;
    ForwardCache cache;
    cache.branch_logits.resize(c.n_branches());
    for (std::size_t b = 0; b < c.n_branches(); ++b) {
        const std::size_t d = c.branch_w[b].extent(1);
        auto& z = cache.branch_logits[b];
        z.assign(n_cls, 0.0);
        for (std::size_t k = 0; k < n_cls; ++k) {
            const double* w = c.branch_w[b].data() + k * d;
            double acc = c.branch_b[b].at(k);
            for (std::size_t j = 0; j < d; ++j) acc += w[j] * row[b][j];
            z[k] = acc;
        }
    }
    cache.logits.assign(n_cls, 0.0);
    const std::size_t width = n_cls * c.n_branches();
    for (std::size_t k = 0; k < n_cls; ++k) {
        double acc = c.head_b.at(k);
        const double* w = c.head_w.data() + k * width;
        for (std::size_t b = 0; b < c.n_branches(); ++b) {
            for (std::size_t j = 0; j < n_cls; ++j) acc += w[b * n_cls + j] * cache.branch_logits[b][j];
        }
        cache.logits[k] = acc;
    }
    cache.probs = cache.logits;
    softmax(cache.probs);
    return cache;
}

std::vector<const double*> row_pointers(const LabeledRows& rows, std::size_t i) {
    std::vector<const double*> ptrs(rows.branches.size());
    for (std::size_t b = 0; b < rows.branches.size(); ++b) {
        ptrs[b] = rows.branches[b].data() + i * rows.branches[b].extent(1);
    }
    return ptrs;
}

double cross_entropy(const RegionClassifier& c, const LabeledRows& rows) {
    double loss = 0.0;
    for (std::size_t i = 0; i < rows.rows(); ++i) {
        const auto cache = forward_row(c, row_pointers(rows, i));
        loss -= std::log(std::max(cache.probs[static_cast<std::size_t>(rows.labels[i])], 1e-300));
    }
    return loss / static_cast<double>(rows.rows());
}

struct Adam {
    double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
    std::size_t step = 0;
    std::vector<std::vector<double>> m, v;

    void add(const core::Tensor& p) {
        m.emplace_back(p.numel(), 0.0);
        v.emplace_back(p.numel(), 0.0);
    }

    void update(std::size_t slot, core::Tensor& p, const std::vector<double>& g, double lr) {
        auto& mi = m[slot];
        auto& vi = v[slot];
        const double b1t = 1.0 - std::pow(beta1, static_cast<double>(step));
        const double b2t = 1.0 - std::pow(beta2, static_cast<double>(step));
        for (std::size_t i = 0; i < mi.size(); ++i) {
            mi[i] = beta1 * mi[i] + (1.0 - beta1) * g[i];
            vi[i] = beta2 * vi[i] + (1.0 - beta2) * g[i] * g[i];
            p.at(i) -= lr * (mi[i] / b1t) / (std::sqrt(vi[i] / b2t) + eps);
        }
    }
};

void validate_rows(const LabeledRows& rows, const RegionClassifier& c, const char* what) {
    if (rows.branches.size() != c.n_branches()) {
        throw InputError(std::string(what) + " branch count does not match the model");
    }
    for (std::size_t b = 0; b < rows.branches.size(); ++b) {
        if (rows.branches[b].ndim() != 2 || rows.branches[b].extent(0) != rows.rows() ||
            rows.branches[b].extent(1) != c.branch_w[b].extent(1)) {
            throw InputError(std::string(what) + " branch shapes are inconsistent");
        }
    }
    for (int label : rows.labels) {
        if (label < 0 || static_cast<std::size_t>(label) >= c.n_classes) {
            throw InputError("label out of range");
        }
    }
}

}  // namespace

RegionClassifier make_classifier(const std::vector<std::size_t>& branch_dims,
                                 std::size_t n_classes, core::SeededRng& rng) {
    if (branch_dims.empty()) throw InputError("classifier needs at least one branch");
    if (n_classes < 2) throw InputError("classifier needs at least two classes");
    RegionClassifier c;
    c.n_classes = n_classes;
    for (std::size_t d : branch_dims) {
        if (d == 0) throw InputError("branch width must be positive");
        core::Tensor w({n_classes, d});
        const double scale = 1.0 / std::sqrt(static_cast<double>(d));
        for (double& v : w.vec()) v = rng.uniform(-scale, scale);
        c.branch_w.push_back(std::move(w));
        c.branch_b.emplace_back(std::vector<std::size_t>{n_classes});
    }
    const std::size_t width = n_classes * branch_dims.size();
    c.head_w = core::Tensor({n_classes, width});
    const double scale = 1.0 / std::sqrt(static_cast<double>(width));
    for (double& v : c.head_w.vec()) v = rng.uniform(-scale, scale);
    c.head_b = core::Tensor({n_classes});
    return c;
}

PredictorTrainResult train_predictor(const LabeledRows& train, const LabeledRows& val,
                                     const PredictorTrainConfig& cfg) {
    if (train.rows() == 0) throw InputError("empty training set");
    const std::set<int> distinct(train.labels.begin(), train.labels.end());
    if (distinct.size() < 2) throw InputError("training set contains a single class");

    std::vector<std::size_t> dims;
    for (const auto& b : train.branches) dims.push_back(b.extent(1));
    const std::size_t n_classes = static_cast<std::size_t>(*distinct.rbegin()) + 1;

    core::SeededRng rng(cfg.seed);
    PredictorTrainResult result;
    result.model = make_classifier(dims, std::max<std::size_t>(n_classes, 2), rng);
    RegionClassifier& model = result.model;
    validate_rows(train, model, "train");
    if (val.rows() > 0) validate_rows(val, model, "val");

    Adam adam;
    for (std::size_t b = 0; b < model.n_branches(); ++b) {
        adam.add(model.branch_w[b]);
        adam.add(model.branch_b[b]);
    }
    adam.add(model.head_w);
    adam.add(model.head_b);

    const std::size_t n_cls = model.n_classes;
    const std::size_t head_width = n_cls * model.n_branches();
    double lr = cfg.learning_rate;
    double best_val = std::numeric_limits<double>::infinity();
    std::size_t stagnant = 0;

    std::vector<std::size_t> order(train.rows());
    std::iota(order.begin(), order.end(), 0);

    for (std::size_t epoch = 0; epoch < cfg.max_epochs; ++epoch) {
        rng.shuffle(order);
        double epoch_loss = 0.0;
        std::size_t n_batches = 0;
        for (std::size_t start = 0; start < train.rows(); start += cfg.batch_size) {
            const std::size_t bsz = std::min(cfg.batch_size, train.rows() - start);

            std::vector<std::vector<double>> g_bw(model.n_branches()), g_bb(model.n_branches());
            for (std::size_t b = 0; b < model.n_branches(); ++b) {
                g_bw[b].assign(model.branch_w[b].numel(), 0.0);
                g_bb[b].assign(n_cls, 0.0);
            }
            std::vector<double> g_hw(model.head_w.numel(), 0.0), g_hb(n_cls, 0.0);

            double batch_loss = 0.0;
            for (std::size_t i = 0; i < bsz; ++i) {
                const std::size_t row = order[start + i];
                const auto ptrs = row_pointers(train, row);
                const auto cache = forward_row(model, ptrs);
                const auto label = static_cast<std::size_t>(train.labels[row]);
                batch_loss -= std::log(std::max(cache.probs[label], 1e-300));

                // dL/dlogits = probs - onehot, scaled by 1/batch.
                std::vector<double> g_logits(cache.probs);
                g_logits[label] -= 1.0;
                for (double& g : g_logits) g /= static_cast<double>(bsz);

                for (std::size_t k = 0; k < n_cls; ++k) {
                    g_hb[k] += g_logits[k];
                    for (std::size_t b = 0; b < model.n_branches(); ++b) {
                        for (std::size_t j = 0; j < n_cls; ++j) {
                            g_hw[k * head_width + b * n_cls + j] +=
                                g_logits[k] * cache.branch_logits[b][j];
                        }
                    }
                }
                for (std::size_t b = 0; b < model.n_branches(); ++b) {
                    const std::size_t d = model.branch_w[b].extent(1);
                    for (std::size_t j = 0; j < n_cls; ++j) {
                        double g_z = 0.0;
                        for (std::size_t k = 0; k < n_cls; ++k) {
                            g_z += g_logits[k] * model.head_w.at(k, b * n_cls + j);
                        }
                        g_bb[b][j] += g_z;
                        double* gw = g_bw[b].data() + j * d;
                        for (std::size_t x = 0; x < d; ++x) gw[x] += g_z * ptrs[b][x];
                    }
                }
            }

            ++adam.step;
            std::size_t slot = 0;
            for (std::size_t b = 0; b < model.n_branches(); ++b) {
                adam.update(slot++, model.branch_w[b], g_bw[b], lr);
                adam.update(slot++, model.branch_b[b], g_bb[b], lr);
            }
            adam.update(slot++, model.head_w, g_hw, lr);
            adam.update(slot++, model.head_b, g_hb, lr);

            epoch_loss += batch_loss / static_cast<double>(bsz);
            ++n_batches;
        }
        result.train_loss.push_back(epoch_loss / static_cast<double>(n_batches));
        result.epochs_run = epoch + 1;

        if (val.rows() == 0) continue;
        const double val_loss = cross_entropy(model, val);
        result.val_loss.push_back(val_loss);
        if (val_loss < best_val - 1e-12) {
            best_val = val_loss;
            stagnant = 0;
        } else {
            ++stagnant;
            if (stagnant == cfg.lr_patience) lr *= cfg.lr_decay;
            if (stagnant >= cfg.early_stopping_patience) break;
        }
    }
    return result;
}

std::vector<double> predict_slice(const RegionClassifier& c,
                                  const std::vector<core::Tensor>& branch_features) {
    if (branch_features.size() != c.n_branches()) {
        throw InputError("branch count does not match the model");
    }
    std::vector<const double*> ptrs(branch_features.size());
    for (std::size_t b = 0; b < branch_features.size(); ++b) {
        if (branch_features[b].ndim() != 1 ||
            branch_features[b].extent(0) != c.branch_w[b].extent(1)) {
            throw InputError("branch feature width does not match the model");
        }
        ptrs[b] = branch_features[b].data();
    }
    return forward_row(c, ptrs).probs;
}

int majority_vote(const core::Tensor& segmentation, const core::RegionMask& mask) {
    if (!segmentation.same_shape(mask.tensor())) {
        throw InputError("segmentation and mask shapes differ");
    }
    std::vector<std::size_t> counts;
    std::size_t voters = 0;
    for (std::size_t i = 0; i < segmentation.numel(); ++i) {
        if (!mask.on(i)) continue;
        const double v = segmentation.at(i);
        const long cls = std::lround(v);
        if (cls < 0 || static_cast<double>(cls) != v) {
            throw InputError("segmentation values must be nonnegative class ids");
        }
        if (static_cast<std::size_t>(cls) >= counts.size()) counts.resize(cls + 1, 0);
        ++counts[static_cast<std::size_t>(cls)];
        ++voters;
    }
    if (voters == 0) throw InputError("empty lesion region in majority_vote");
    // Ties resolve toward the larger class id (more aggressive).
    std::size_t best = 0;
    for (std::size_t cls = 0; cls < counts.size(); ++cls) {
        if (counts[cls] >= counts[best]) best = cls;
    }
    return static_cast<int>(best);
}

core::Tensor ensemble_average(const std::vector<core::Tensor>& predictions) {
    if (predictions.empty()) throw InputError("nothing to ensemble");
    core::Tensor out(predictions.front().shape());
    for (const auto& p : predictions) {
        if (!p.same_shape(out)) throw InputError("prediction shapes differ");
        for (std::size_t i = 0; i < out.numel(); ++i) out.at(i) += p.at(i);
    }
    const double inv = 1.0 / static_cast<double>(predictions.size());
    for (std::size_t i = 0; i < out.numel(); ++i) out.at(i) *= inv;
    return out;
}

}  // namespace corrfabr::predict
