#include "corrfabr/pipeline/steps.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

#include <json.hpp>

#include "corrfabr/aggregate/aggregation.hpp"
#include "corrfabr/core/error.hpp"
#include "corrfabr/core/rng.hpp"
#include "corrfabr/features/extractor.hpp"
#include "corrfabr/fusion/corrnet.hpp"
#include "corrfabr/io/manifest.hpp"
#include "corrfabr/io/tensor_file.hpp"
#include "corrfabr/pipeline/workdir.hpp"
#include "corrfabr/predict/classifier.hpp"
#include "corrfabr/preprocess/labeling.hpp"
#include "corrfabr/preprocess/normalize.hpp"
#include "corrfabr/preprocess/otsu.hpp"
#include "corrfabr/preprocess/resample.hpp"
#include "corrfabr/preprocess/stain.hpp"

namespace corrfabr::pipeline {

using core::RegionMask;
using core::SeededRng;
using core::Tensor;
using nlohmann::json;

namespace {

constexpr std::size_t kImageSize = 224;
constexpr std::size_t kBiopsyWindow = 48;   // low-res pixels
constexpr std::size_t kSectionMargin = 24;  // bbox dilation for sections
constexpr long kRegionOffsetRange = 12;     // seeded offset of pathology regions

SeededRng step_rng(const PipelineConfig& cfg, const std::string& stream) {
    return SeededRng(cfg.seed ^ core::fnv1a_hash(stream));
}

// --- preproc index ---------------------------------------------------------

struct CaseInfo {
    std::string patient_id;
    std::size_t n_sequences = 1;
    std::size_t depth = 0;
    std::vector<std::size_t> slices;  // lesion-bearing slice indices
    std::size_t n_pathology = 1;
    int grade = 1;
    bool necrosis = false;
    int label = 0;  // 0 indolent, 1 aggressive
    bool has_organ = false;
    bool has_pat_lesion_mask = false;
};

void save_index(const Workdir& wd, const std::vector<CaseInfo>& cases) {
    json arr = json::array();
    for (const auto& c : cases) {
        json j;
        j["patient_id"] = c.patient_id;
        j["n_sequences"] = c.n_sequences;
        j["depth"] = c.depth;
        j["slices"] = c.slices;
        j["n_pathology"] = c.n_pathology;
        j["grade"] = c.grade;
        j["necrosis"] = c.necrosis;
        j["label"] = c.label;
        j["has_organ"] = c.has_organ;
        j["has_pat_lesion_mask"] = c.has_pat_lesion_mask;
        arr.push_back(std::move(j));
    }
    std::ofstream os(wd.preproc() / "index.json", std::ios::trunc);
    if (!os) throw IoError("cannot write preproc index");
    os << arr.dump(2) << "\n";
}

std::vector<CaseInfo> load_index(const Workdir& wd) {
    std::ifstream is(wd.preproc() / "index.json");
    if (!is) throw InputError("missing preproc index; run preprocess first");
    json arr;
    is >> arr;
    std::vector<CaseInfo> out;
    for (const auto& j : arr) {
        CaseInfo c;
        c.patient_id = j.at("patient_id").get<std::string>();
        c.n_sequences = j.at("n_sequences").get<std::size_t>();
        c.depth = j.at("depth").get<std::size_t>();
        c.slices = j.at("slices").get<std::vector<std::size_t>>();
        c.n_pathology = j.at("n_pathology").get<std::size_t>();
        c.grade = j.at("grade").get<int>();
        c.necrosis = j.at("necrosis").get<bool>();
        c.label = j.at("label").get<int>();
        c.has_organ = j.at("has_organ").get<bool>();
        c.has_pat_lesion_mask = j.at("has_pat_lesion_mask").get<bool>();
        out.push_back(std::move(c));
    }
    return out;
}

std::filesystem::path case_preproc(const Workdir& wd, const std::string& id) {
    return wd.preproc() / id;
}

std::filesystem::path case_features(const Workdir& wd, const std::string& id) {
    return wd.features() / id;
}

// --- preprocess ------------------------------------------------------------

Tensor rgb_to_gray(const Tensor& rgb) {
    const std::size_t h = rgb.extent(0), w = rgb.extent(1);
    Tensor gray({h, w});
    for (std::size_t p = 0; p < h * w; ++p) {
        const double* px = rgb.data() + 3 * p;
        gray.at(p) = (px[0] + px[1] + px[2]) / 3.0;
    }
    return gray;
}

preprocess::StainBasis reference_basis(const PipelineConfig& cfg, const io::Manifest& manifest) {
    const io::PatientEntry* ref = nullptr;
    if (cfg.stain_reference.empty()) {
        ref = &manifest.patients.front();
    } else {
        for (const auto& p : manifest.patients) {
            if (p.patient_id == cfg.stain_reference) ref = &p;
        }
        if (!ref) throw InputError("stain_reference patient not found: " + cfg.stain_reference);
    }
    if (ref->pathology.empty()) throw InputError("stain reference patient has no pathology image");
    const Tensor rgb = io::load_tensor(manifest.base_dir / ref->pathology.front());
    return preprocess::macenko_fit(rgb);
}

void save_stain_reference(const Workdir& wd, const preprocess::StainBasis& basis,
                          const std::string& patient_id) {
    json j;
    j["patient_id"] = patient_id;
    j["stain1"] = basis.stain1;
    j["stain2"] = basis.stain2;
    j["c1_99"] = basis.c1_99;
    j["c2_99"] = basis.c2_99;
    std::ofstream os(wd.preproc() / "stain_reference.json", std::ios::trunc);
    os << j.dump(2) << "\n";
}

// --- pathology region selection (prostate-sim biopsy/section cutouts) ------

struct WindowBox {
    long y0, x0, y1, x1;  // half-open
};

WindowBox clamp_box(long cy, long cx, long half_h, long half_w, std::size_t h, std::size_t w) {
    long y0 = cy - half_h, x0 = cx - half_w;
    long y1 = cy + half_h, x1 = cx + half_w;
    y0 = std::max(0L, y0);
    x0 = std::max(0L, x0);
    y1 = std::min(static_cast<long>(h), y1);
    x1 = std::min(static_cast<long>(w), x1);
    return {y0, x0, y1, x1};
}

// Cuts a biopsy- or section-sized region around the lesion with a seeded
// offset, so the pathology region mixes cancerous and adjacent normal tissue.
RegionMask cut_pathology_region(const RegionMask& lesion, const RegionMask& tissue,
                                Aggregation aggregation, SeededRng& rng) {
    const std::size_t h = lesion.shape()[0], w = lesion.shape()[1];
    const auto box = preprocess::mask_bounding_box(lesion);
    const double scale = static_cast<double>(h) / static_cast<double>(kImageSize);

    for (int attempt = 0; attempt < 100; ++attempt) {
        const long dy = static_cast<long>(std::llround(
            scale * static_cast<double>(static_cast<long>(rng.uniform_int(2 * kRegionOffsetRange + 1)) -
                                        kRegionOffsetRange)));
        const long dx = static_cast<long>(std::llround(
            scale * static_cast<double>(static_cast<long>(rng.uniform_int(2 * kRegionOffsetRange + 1)) -
                                        kRegionOffsetRange)));
        WindowBox wb{};
        if (aggregation == Aggregation::lesion_biopsy) {
            const long half = std::lround(scale * static_cast<double>(kBiopsyWindow) / 2.0);
            const long cy = static_cast<long>((box.row0 + box.row1) / 2) + dy;
            const long cx = static_cast<long>((box.col0 + box.col1) / 2) + dx;
            wb = clamp_box(cy, cx, half, half, h, w);
        } else {
            const long margin = std::lround(scale * static_cast<double>(kSectionMargin));
            wb = clamp_box((static_cast<long>(box.row0 + box.row1)) / 2 + dy,
                           (static_cast<long>(box.col0 + box.col1)) / 2 + dx,
                           static_cast<long>(box.height()) / 2 + margin,
                           static_cast<long>(box.width()) / 2 + margin, h, w);
        }
        Tensor values({h, w});
        bool any_tissue = false, any_lesion = false;
        for (long y = wb.y0; y < wb.y1; ++y) {
            for (long x = wb.x0; x < wb.x1; ++x) {
                const auto yy = static_cast<std::size_t>(y), xx = static_cast<std::size_t>(x);
                if (!tissue.on(yy, xx)) continue;
                values.at(yy, xx) = 1.0;
                any_tissue = true;
                if (lesion.on(yy, xx)) any_lesion = true;
            }
        }
        if (any_tissue && any_lesion) return RegionMask(std::move(values));
    }
    // Fall back to the annotated lesion region itself.
    Tensor values({h, w});
    for (std::size_t p = 0; p < h * w; ++p) {
        values.at(p) = (lesion.on(p) && tissue.on(p)) ? 1.0 : 0.0;
    }
    RegionMask m(std::move(values));
    if (m.empty()) throw InputError("pathology lesion region contains no tissue");
    return m;
}

std::vector<std::pair<std::size_t, std::size_t>> region_cells(
    const features::PatchGridFeatures& grid, const RegionMask& region) {
    const std::size_t h = region.shape()[0], w = region.shape()[1];
    std::vector<std::pair<std::size_t, std::size_t>> cells;
    for (std::size_t gy = 0; gy < grid.grid_h; ++gy) {
        for (std::size_t gx = 0; gx < grid.grid_w; ++gx) {
            std::size_t covered = 0, total = 0;
            for (std::size_t y = gy * features::kPatchSize;
                 y < std::min(h, (gy + 1) * features::kPatchSize); ++y) {
                for (std::size_t x = gx * features::kPatchSize;
                     x < std::min(w, (gx + 1) * features::kPatchSize); ++x) {
                    ++total;
                    covered += region.on(y, x);
                }
            }
            if (total > 0 && 2 * covered >= total) cells.emplace_back(gy, gx);
        }
    }
    if (cells.empty()) {
        // No half-covered cell; take any touched cell instead.
        for (std::size_t gy = 0; gy < grid.grid_h; ++gy) {
            for (std::size_t gx = 0; gx < grid.grid_w; ++gx) {
                bool touched = false;
                for (std::size_t y = gy * features::kPatchSize;
                     y < std::min(h, (gy + 1) * features::kPatchSize) && !touched; ++y) {
                    for (std::size_t x = gx * features::kPatchSize;
                         x < std::min(w, (gx + 1) * features::kPatchSize); ++x) {
                        if (region.on(y, x)) {
                            touched = true;
                            break;
                        }
                    }
                }
                if (touched) cells.emplace_back(gy, gx);
            }
        }
    }
    if (cells.empty()) throw InputError("pathology region touches no patch grid cell");
    return cells;
}

// --- extractors ------------------------------------------------------------

features::FeatureExtractor radiology_extractor(const PipelineConfig& cfg) {
    if (!cfg.extractor_weights.empty()) {
        return features::load_extractor(cfg.extractor_weights / "radiology");
    }
    return features::make_builtin_extractor(cfg.extractor_seed, 1);
}

features::FeatureExtractor pathology_extractor(const PipelineConfig& cfg) {
    if (!cfg.extractor_weights.empty()) {
        return features::load_extractor(cfg.extractor_weights / "pathology");
    }
    return features::make_builtin_extractor(cfg.extractor_seed ^ core::fnv1a_hash("pathology"), 3);
}

Tensor slice_of(const Tensor& volume, std::size_t d) {
    const std::size_t h = volume.extent(1), w = volume.extent(2);
    Tensor out({h, w});
    std::copy(volume.data() + d * h * w, volume.data() + (d + 1) * h * w, out.data());
    return out;
}

Tensor concat_channels(const std::vector<Tensor>& maps) {
    const std::size_t h = maps.front().extent(0), w = maps.front().extent(1);
    std::size_t total_c = 0;
    for (const auto& m : maps) total_c += m.extent(2);
    Tensor out({h, w, total_c});
    for (std::size_t p = 0; p < h * w; ++p) {
        double* dst = out.data() + p * total_c;
        for (const auto& m : maps) {
            const std::size_t c = m.extent(2);
            std::copy(m.data() + p * c, m.data() + (p + 1) * c, dst);
            dst += c;
        }
    }
    return out;
}

// Concatenated per-slice radiology feature map for one case.
Tensor rad_feature_map(const Workdir& wd, const CaseInfo& info, std::size_t d,
                       const features::FeatureExtractor& fx) {
    std::vector<Tensor> maps;
    for (std::size_t q = 0; q < info.n_sequences; ++q) {
        const Tensor volume =
            io::load_tensor(case_preproc(wd, info.patient_id) / ("rad" + std::to_string(q) + ".cftn"));
        maps.push_back(features::extract_lowres(slice_of(volume, d), fx));
    }
    return concat_channels(maps);
}

// --- fusion model persistence ----------------------------------------------

void save_fusion_model(const fusion::CorrNetModel& m, const std::filesystem::path& dir,
                       std::uint64_t seed, std::size_t epochs) {
    std::filesystem::create_directories(dir);
    io::save_tensor(m.enc_rad, dir / "enc_rad.cftn");
    io::save_tensor(m.enc_pat, dir / "enc_pat.cftn");
    io::save_tensor(m.enc_bias, dir / "enc_bias.cftn");
    io::save_tensor(m.dec_rad, dir / "dec_rad.cftn");
    io::save_tensor(m.dec_rad_bias, dir / "dec_rad_bias.cftn");
    io::save_tensor(m.dec_pat, dir / "dec_pat.cftn");
    io::save_tensor(m.dec_pat_bias, dir / "dec_pat_bias.cftn");
    json j;
    j["latent_dim"] = m.latent_dim;
    j["lambda"] = m.lambda;
    j["rad_dim"] = m.rad_dim();
    j["pat_dim"] = m.pat_dim();
    j["seed"] = seed;
    j["epochs"] = epochs;
    std::ofstream os(dir / "header.json", std::ios::trunc);
    os << j.dump(2) << "\n";
}

fusion::CorrNetModel load_fusion_model(const std::filesystem::path& dir) {
    std::ifstream is(dir / "header.json");
    if (!is) throw InputError("missing fusion model at " + dir.string());
    json j;
    is >> j;
    fusion::CorrNetModel m;
    m.latent_dim = j.at("latent_dim").get<std::size_t>();
    m.lambda = j.at("lambda").get<double>();
    m.enc_rad = io::load_tensor(dir / "enc_rad.cftn");
    m.enc_pat = io::load_tensor(dir / "enc_pat.cftn");
    m.enc_bias = io::load_tensor(dir / "enc_bias.cftn");
    m.dec_rad = io::load_tensor(dir / "dec_rad.cftn");
    m.dec_rad_bias = io::load_tensor(dir / "dec_rad_bias.cftn");
    m.dec_pat = io::load_tensor(dir / "dec_pat.cftn");
    m.dec_pat_bias = io::load_tensor(dir / "dec_pat_bias.cftn");
    return m;
}

// --- predictor persistence ---------------------------------------------------

void save_predictor(const predict::RegionClassifier& c, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    for (std::size_t b = 0; b < c.n_branches(); ++b) {
        io::save_tensor(c.branch_w[b], dir / ("branch" + std::to_string(b) + "_w.cftn"));
        io::save_tensor(c.branch_b[b], dir / ("branch" + std::to_string(b) + "_b.cftn"));
    }
    io::save_tensor(c.head_w, dir / "head_w.cftn");
    io::save_tensor(c.head_b, dir / "head_b.cftn");
    json j;
    j["n_classes"] = c.n_classes;
    j["n_branches"] = c.n_branches();
    std::ofstream os(dir / "header.json", std::ios::trunc);
    os << j.dump(2) << "\n";
}

predict::RegionClassifier load_predictor(const std::filesystem::path& dir) {
    std::ifstream is(dir / "header.json");
    if (!is) throw InputError("missing predictor model at " + dir.string());
    json j;
    is >> j;
    predict::RegionClassifier c;
    c.n_classes = j.at("n_classes").get<std::size_t>();
    const auto n_branches = j.at("n_branches").get<std::size_t>();
    for (std::size_t b = 0; b < n_branches; ++b) {
        c.branch_w.push_back(io::load_tensor(dir / ("branch" + std::to_string(b) + "_w.cftn")));
        c.branch_b.push_back(io::load_tensor(dir / ("branch" + std::to_string(b) + "_b.cftn")));
    }
    c.head_w = io::load_tensor(dir / "head_w.cftn");
    c.head_b = io::load_tensor(dir / "head_b.cftn");
    return c;
}

// --- fold assignment persistence ---------------------------------------------

eval::FoldAssignment compute_folds(const PipelineConfig& cfg, const std::vector<CaseInfo>& cases) {
    std::vector<std::string> ids;
    for (const auto& c : cases) ids.push_back(c.patient_id);
    return eval::kfold_split(ids, cfg.folds, cfg.seed);
}

void save_folds(const Workdir& wd, const eval::FoldAssignment& folds) {
    json j;
    j["n_folds"] = folds.n_folds;
    json assignment = json::object();
    for (const auto& [id, f] : folds.fold_of) assignment[id] = f;
    j["fold_of"] = std::move(assignment);
    std::ofstream os(wd.reports() / "folds.json", std::ios::trunc);
    os << j.dump(2) << "\n";
}

eval::FoldAssignment load_folds(const Workdir& wd) {
    std::ifstream is(wd.reports() / "folds.json");
    if (!is) throw InputError("missing folds.json; run aggregate first");
    json j;
    is >> j;
    eval::FoldAssignment folds;
    folds.n_folds = j.at("n_folds").get<int>();
    for (const auto& [id, f] : j.at("fold_of").items()) folds.fold_of[id] = f.get<int>();
    return folds;
}

// --- predictor row assembly ---------------------------------------------------

struct RowSpec {
    std::string patient_id;
    std::size_t slice = 0;
    bool normal = false;  // prostate-sim normal-region row
    int label = 0;
};

std::vector<std::size_t> branch_dims(const PipelineConfig& cfg, std::size_t n_seq) {
    std::vector<std::size_t> dims;
    if (cfg.inputs != PredictorInputs::corrfeat_only) {
        dims.assign(n_seq, features::kFeatureChannels);
    }
    if (cfg.inputs != PredictorInputs::rad_only) dims.push_back(cfg.fusion.latent_dim);
    return dims;
}

// Splits a stored [64n] radiology vector (+ its CorrFeat encoding) into the
// configured branch vectors.
std::vector<Tensor> branch_vectors(const PipelineConfig& cfg, const Tensor& rad_vec,
                                   const fusion::CorrNetModel* fusion_model) {
    std::vector<Tensor> out;
    if (cfg.inputs != PredictorInputs::corrfeat_only) {
        const std::size_t n_seq = rad_vec.extent(0) / features::kFeatureChannels;
        for (std::size_t q = 0; q < n_seq; ++q) {
            Tensor v({features::kFeatureChannels});
            std::copy(rad_vec.data() + q * features::kFeatureChannels,
                      rad_vec.data() + (q + 1) * features::kFeatureChannels, v.data());
            out.push_back(std::move(v));
        }
    }
    if (cfg.inputs != PredictorInputs::rad_only) {
        if (!fusion_model) throw InputError("CorrFeat inputs need a trained fusion model");
        out.push_back(fusion::encode_vector(*fusion_model, rad_vec));
    }
    return out;
}

Tensor load_rad_vector(const Workdir& wd, const RowSpec& row) {
    const char* kind = row.normal ? "rad_normal_s" : "rad_lesion_s";
    return io::load_tensor(case_features(wd, row.patient_id) /
                           (kind + std::to_string(row.slice) + ".cftn"));
}

predict::LabeledRows assemble_rows(const PipelineConfig& cfg, const Workdir& wd,
                                   const std::vector<RowSpec>& rows,
                                   const fusion::CorrNetModel* fusion_model) {
    predict::LabeledRows out;
    if (rows.empty()) return out;
    const auto first = branch_vectors(cfg, load_rad_vector(wd, rows.front()), fusion_model);
    for (const auto& v : first) out.branches.emplace_back(Tensor({rows.size(), v.extent(0)}));

    for (std::size_t i = 0; i < rows.size(); ++i) {
        const auto vecs = branch_vectors(cfg, load_rad_vector(wd, rows[i]), fusion_model);
        for (std::size_t b = 0; b < vecs.size(); ++b) {
            std::copy(vecs[b].data(), vecs[b].data() + vecs[b].numel(),
                      out.branches[b].data() + i * vecs[b].numel());
        }
        out.labels.push_back(rows[i].label);
    }
    return out;
}

// Per-case row specs. In prostate-sim mode classes are {0 normal, 1 indolent,
// 2 aggressive} and normal-region rows are included; kidney mode is binary
// {0 indolent, 1 aggressive} on lesion rows only.
std::vector<RowSpec> case_rows(const PipelineConfig& cfg, const CaseInfo& info) {
    std::vector<RowSpec> rows;
    const bool prostate = cfg.mode == Mode::prostate_sim;
    for (std::size_t d : info.slices) {
        RowSpec lesion_row;
        lesion_row.patient_id = info.patient_id;
        lesion_row.slice = d;
        lesion_row.label = prostate ? 1 + info.label : info.label;
        rows.push_back(lesion_row);
        if (prostate) {
            RowSpec normal_row = lesion_row;
            normal_row.normal = true;
            normal_row.label = 0;
            rows.push_back(normal_row);
        }
    }
    return rows;
}

int aggressive_class(const PipelineConfig& cfg) {
    return cfg.mode == Mode::prostate_sim ? 2 : 1;
}

// --- evaluation bookkeeping ---------------------------------------------------

struct CasePrediction {
    std::string patient_id;
    int truth = 0;      // 1 = aggressive
    int predicted = 0;  // majority vote, 1 = aggressive
    double score = 0.0;  // voxel-weighted aggressive probability
    double dice = 1.0;
    std::vector<std::vector<double>> per_slice_probs;
};

json prediction_to_json(const CasePrediction& p) {
    json j;
    j["patient_id"] = p.patient_id;
    j["truth"] = p.truth;
    j["predicted"] = p.predicted;
    j["score"] = p.score;
    j["dice"] = p.dice;
    j["per_slice"] = p.per_slice_probs;
    return j;
}

CasePrediction case_prediction_from_probs(const PipelineConfig& cfg, const Workdir& wd,
                                          const CaseInfo& info,
                                          const std::vector<std::vector<double>>& slice_probs) {
    const RegionMask lesion_volume(
        io::load_tensor(case_preproc(wd, info.patient_id) / "lesion_mask.cftn"));
    const std::size_t depth = lesion_volume.shape()[0];
    const std::size_t h = lesion_volume.shape()[1], w = lesion_volume.shape()[2];
    const int agg_cls = aggressive_class(cfg);

    // Dense per-pixel class map: each lesion pixel takes its slice's argmax
    // class, so lesion-level decisions go through the majority vote.
    Tensor seg({depth, h, w});
    Tensor pred_mask_values({depth, h, w});
    double weighted_prob = 0.0;
    double total_weight = 0.0;
    for (std::size_t si = 0; si < info.slices.size(); ++si) {
        const std::size_t d = info.slices[si];
        const auto& probs = slice_probs[si];
        const int cls = static_cast<int>(
            std::max_element(probs.begin(), probs.end()) - probs.begin());
        const RegionMask slice_mask = lesion_volume.slice(d);
        const auto count = static_cast<double>(slice_mask.count());
        weighted_prob += count * probs[static_cast<std::size_t>(agg_cls)];
        total_weight += count;
        for (std::size_t p = 0; p < h * w; ++p) {
            if (!slice_mask.on(p)) continue;
            seg.at(d * h * w + p) = static_cast<double>(cls);
            if (cls == agg_cls) pred_mask_values.at(d * h * w + p) = 1.0;
        }
    }

    CasePrediction out;
    out.patient_id = info.patient_id;
    out.truth = info.label;
    out.per_slice_probs = slice_probs;
    out.score = total_weight > 0.0 ? weighted_prob / total_weight : 0.0;
    const int voted = predict::majority_vote(seg, lesion_volume);
    out.predicted = voted == agg_cls ? 1 : 0;

    const RegionMask pred_mask(std::move(pred_mask_values));
    const RegionMask truth_mask = info.label == 1
                                      ? lesion_volume
                                      : RegionMask::zeros({depth, h, w});
    out.dice = eval::dice(pred_mask, truth_mask);
    return out;
}

}  // namespace

// --- preprocess ---------------------------------------------------------------

void run_preprocess(const PipelineConfig& cfg) {
    cfg.validate();
    const io::Manifest manifest = io::load_manifest(cfg.manifest);
    if (manifest.patients.empty()) throw InputError("manifest has no patients");
    if (manifest.mode != to_string(cfg.mode)) {
        throw InputError("manifest mode '" + manifest.mode + "' does not match config mode '" +
                         to_string(cfg.mode) + "'");
    }

    Workdir wd{cfg.workdir};
    WorkdirLock lock(wd.root);
    wd.ensure_layout();

    const preprocess::StainBasis ref = reference_basis(cfg, manifest);
    save_stain_reference(wd, ref,
                         cfg.stain_reference.empty() ? manifest.patients.front().patient_id
                                                     : cfg.stain_reference);
    const auto polarity = cfg.otsu_dark_foreground ? preprocess::OtsuForeground::dark
                                                   : preprocess::OtsuForeground::bright;

    std::vector<CaseInfo> index;
    for (const auto& patient : manifest.patients) {
        CaseInfo info;
        info.patient_id = patient.patient_id;
        info.n_sequences = patient.radiology.size();
        info.grade = patient.grade;
        info.necrosis = patient.necrosis;
        info.label =
            preprocess::label_aggressiveness(patient.grade, patient.necrosis) ==
                    preprocess::LesionLabel::aggressive
                ? 1
                : 0;
        info.has_organ = !patient.organ_mask.empty();
        info.has_pat_lesion_mask = !patient.pathology_lesion_mask.empty();
        info.n_pathology = patient.pathology.size();

        const auto out_dir = case_preproc(wd, patient.patient_id);
        std::filesystem::create_directories(out_dir);

        const RegionMask lesion(io::load_tensor(manifest.base_dir / patient.lesion_mask));
        if (lesion.ndim() != 3) throw InputError("lesion mask must be [D,H,W]");
        if (lesion.empty()) throw InputError("empty lesion mask for " + patient.patient_id);

        // The crop frame follows the lesion box in kidney mode; prostate-sim
        // crops the organ box so normal tissue stays in frame.
        RegionMask crop_source = lesion;
        if (cfg.mode == Mode::prostate_sim) {
            if (patient.organ_mask.empty()) {
                throw InputError("prostate-sim mode needs organ masks (" + patient.patient_id + ")");
            }
            crop_source = RegionMask(io::load_tensor(manifest.base_dir / patient.organ_mask));
        }
        const auto box = preprocess::mask_bounding_box(crop_source);

        const RegionMask lesion_cropped = preprocess::crop_resize_mask(lesion, box, kImageSize);
        io::save_tensor(lesion_cropped.tensor(), out_dir / "lesion_mask.cftn", io::DType::f32);
        if (info.has_organ) {
            const RegionMask organ(io::load_tensor(manifest.base_dir / patient.organ_mask));
            io::save_tensor(preprocess::crop_resize_mask(organ, box, kImageSize).tensor(),
                            out_dir / "organ_mask.cftn", io::DType::f32);
        }

        info.depth = lesion_cropped.shape()[0];
        for (std::size_t d = 0; d < info.depth; ++d) {
            if (!lesion_cropped.slice(d).empty()) info.slices.push_back(d);
        }
        if (info.slices.empty()) {
            throw InputError("no lesion-bearing slices after cropping for " + patient.patient_id);
        }

        for (std::size_t q = 0; q < patient.radiology.size(); ++q) {
            const Tensor volume = io::load_tensor(manifest.base_dir / patient.radiology[q]);
            if (!volume.same_shape(lesion.tensor())) {
                throw InputError("radiology/mask shape mismatch for " + patient.patient_id);
            }
            Tensor cropped = preprocess::crop_resize_lesion(volume, crop_source, kImageSize);
            cropped = preprocess::zscore_normalize_lesion(cropped, lesion_cropped);
            io::save_tensor(cropped, out_dir / ("rad" + std::to_string(q) + ".cftn"),
                            io::DType::f32);
        }

        for (std::size_t i = 0; i < patient.pathology.size(); ++i) {
            const Tensor rgb = io::load_tensor(manifest.base_dir / patient.pathology[i]);
            const preprocess::StainBasis own = preprocess::macenko_fit(rgb);
            const Tensor normalized = preprocess::macenko_normalize(rgb, own, ref);
            const std::string tag = std::to_string(i);

            Tensor low = normalized;
            if (low.extent(0) != kImageSize || low.extent(1) != kImageSize) {
                low = preprocess::bilinear_resize(normalized, kImageSize, kImageSize);
            }
            io::save_tensor(low, out_dir / ("pathology_low_" + tag + ".cftn"), io::DType::f32);
            const auto tissue_low = preprocess::otsu_threshold(rgb_to_gray(low), 256, polarity);
            io::save_tensor(tissue_low.mask.tensor(), out_dir / ("tissue_low_" + tag + ".cftn"),
                            io::DType::f32);

            if (cfg.pathology_resolution == PathologyResolution::high) {
                io::save_tensor(normalized, out_dir / ("pathology_high_" + tag + ".cftn"),
                                io::DType::f32);
                const auto tissue_high =
                    preprocess::otsu_threshold(rgb_to_gray(normalized), 256, polarity);
                io::save_tensor(tissue_high.mask.tensor(),
                                out_dir / ("tissue_high_" + tag + ".cftn"), io::DType::f32);
            }
        }

        if (info.has_pat_lesion_mask) {
            const RegionMask pat_lesion(
                io::load_tensor(manifest.base_dir / patient.pathology_lesion_mask));
            io::save_tensor(
                preprocess::resize_mask(pat_lesion, kImageSize, kImageSize).tensor(),
                out_dir / "pat_lesion_low.cftn", io::DType::f32);
            if (cfg.pathology_resolution == PathologyResolution::high) {
                io::save_tensor(pat_lesion.tensor(), out_dir / "pat_lesion_high.cftn",
                                io::DType::f32);
            }
        }
        index.push_back(std::move(info));
    }
    save_index(wd, index);
    write_stamp(wd, "preprocess", cfg.content_hash(), {});
}

// --- extract --------------------------------------------------------------------

void run_extract(const PipelineConfig& cfg) {
    cfg.validate();
    Workdir wd{cfg.workdir};
    WorkdirLock lock(wd.root);
    require_stamp(wd, "preprocess", cfg.content_hash());

    const auto index = load_index(wd);
    const auto rad_fx = radiology_extractor(cfg);
    const auto pat_fx = pathology_extractor(cfg);
    features::save_extractor(rad_fx, wd.models() / "extractor_radiology");
    features::save_extractor(pat_fx, wd.models() / "extractor_pathology");

    for (const auto& info : index) {
        SeededRng rng(cfg.seed ^ core::fnv1a_hash("extract:" + info.patient_id));
        const auto in_dir = case_preproc(wd, info.patient_id);
        const auto out_dir = case_features(wd, info.patient_id);
        std::filesystem::create_directories(out_dir);

        const RegionMask lesion_volume(io::load_tensor(in_dir / "lesion_mask.cftn"));
        RegionMask organ_volume;
        if (info.has_organ) organ_volume = RegionMask(io::load_tensor(in_dir / "organ_mask.cftn"));

        for (std::size_t d : info.slices) {
            const Tensor featcat = rad_feature_map(wd, info, d, rad_fx);
            const RegionMask lesion_slice = lesion_volume.slice(d);
            io::save_tensor(aggregate::aggregate_region_mean(featcat, lesion_slice),
                            out_dir / ("rad_lesion_s" + std::to_string(d) + ".cftn"));
            if (cfg.mode == Mode::prostate_sim) {
                const RegionMask organ_slice = organ_volume.slice(d);
                const auto normals = aggregate::sample_normal_regions(
                    featcat, organ_slice, lesion_slice, cfg.normal_region_size, 1, rng);
                io::save_tensor(normals.front(),
                                out_dir / ("rad_normal_s" + std::to_string(d) + ".cftn"));
            }
            if (cfg.aggregation == Aggregation::pixel_pixel && d == info.slices.front()) {
                io::save_tensor(featcat, out_dir / ("rad_map_s" + std::to_string(d) + ".cftn"),
                                io::DType::f32);
            }
        }

        // Pathology features (training-phase only).
        const std::size_t j_count =
            cfg.mode == Mode::prostate_sim ? info.slices.size() : std::size_t{0};
        for (std::size_t i = 0; i < info.n_pathology; ++i) {
            const std::string tag = std::to_string(i);
            const Tensor low = io::load_tensor(in_dir / ("pathology_low_" + tag + ".cftn"));
            const RegionMask tissue_low(io::load_tensor(in_dir / ("tissue_low_" + tag + ".cftn")));

            RegionMask region_low = tissue_low;
            if (cfg.mode == Mode::prostate_sim) {
                const RegionMask pat_lesion(io::load_tensor(in_dir / "pat_lesion_low.cftn"));
                region_low = cut_pathology_region(pat_lesion, tissue_low, cfg.aggregation, rng);
            }

            Tensor pat_vec;
            if (cfg.pathology_resolution == PathologyResolution::low) {
                const Tensor patfeat = features::extract_lowres(low, pat_fx);
                pat_vec = aggregate::aggregate_region_mean(patfeat, region_low);
                if (cfg.aggregation == Aggregation::pixel_pixel) {
                    io::save_tensor(patfeat, out_dir / ("pat_map_" + tag + ".cftn"), io::DType::f32);
                }
            } else {
                const Tensor high = io::load_tensor(in_dir / ("pathology_high_" + tag + ".cftn"));
                const RegionMask tissue_high(
                    io::load_tensor(in_dir / ("tissue_high_" + tag + ".cftn")));
                RegionMask region_high = tissue_high;
                if (cfg.mode == Mode::prostate_sim) {
                    const RegionMask pat_lesion_high(
                        io::load_tensor(in_dir / "pat_lesion_high.cftn"));
                    region_high =
                        cut_pathology_region(pat_lesion_high, tissue_high, cfg.aggregation, rng);
                }
                const auto grid = features::extract_highres_patches(high, pat_fx);
                pat_vec = aggregate::aggregate_region_p95(grid, region_cells(grid, region_high));
            }
            io::save_tensor(pat_vec, out_dir / ("pat_lesion_" + tag + ".cftn"));

            // Normal pathology regions are always cut from low-res features
            // (0.5x0.5 cm windows are sub-patch at high resolution).
            if (cfg.mode == Mode::prostate_sim && j_count > 0) {
                const Tensor patfeat = features::extract_lowres(low, pat_fx);
                const RegionMask pat_lesion(io::load_tensor(in_dir / "pat_lesion_low.cftn"));
                const auto normals = aggregate::sample_normal_regions(
                    patfeat, tissue_low, pat_lesion, cfg.normal_region_size, j_count, rng);
                for (std::size_t t = 0; t < normals.size(); ++t) {
                    io::save_tensor(normals[t],
                                    out_dir / ("pat_normal_" + std::to_string(t) + ".cftn"));
                }
            }
        }
    }
    write_stamp(wd, "extract", cfg.content_hash(), {"preprocess"});
}

// --- aggregate --------------------------------------------------------------------

void run_aggregate(const PipelineConfig& cfg) {
    cfg.validate();
    Workdir wd{cfg.workdir};
    WorkdirLock lock(wd.root);
    require_stamp(wd, "extract", cfg.content_hash());

    const auto index = load_index(wd);
    const auto folds = compute_folds(cfg, index);
    save_folds(wd, folds);

    for (int f = 0; f < cfg.folds; ++f) {
        SeededRng rng(cfg.seed ^ core::fnv1a_hash("aggregate:fold" + std::to_string(f)));
        aggregate::PairedFeatureSet set;
        std::size_t j_total = 0, k_total = 0;

        if (cfg.aggregation == Aggregation::pixel_pixel) {
            std::vector<aggregate::PairedFeatureSet> slices;
            for (const auto& info : index) {
                if (folds.fold_of.at(info.patient_id) == f) continue;
                const auto dir = case_features(wd, info.patient_id);
                const std::size_t d = info.slices.front();
                const Tensor rad_map =
                    io::load_tensor(dir / ("rad_map_s" + std::to_string(d) + ".cftn"));
                const Tensor pat_map = io::load_tensor(dir / "pat_map_0.cftn");
                const RegionMask cancer(io::load_tensor(case_preproc(wd, info.patient_id) /
                                                        "pat_lesion_low.cftn"));
                SeededRng case_rng = rng.fork(core::fnv1a_hash(info.patient_id));
                slices.push_back(aggregate::aggregate_pixel_pixel({rad_map}, pat_map, cancer,
                                                                  case_rng, cfg.pixel_cap));
            }
            if (slices.empty()) throw InputError("no training cases in fold " + std::to_string(f));
            set = aggregate::merge_pixel_sets(slices, rng, cfg.pixel_cap);
        } else {
            aggregate::RegionVectors vecs;
            for (const auto& info : index) {
                if (folds.fold_of.at(info.patient_id) == f) continue;
                const auto dir = case_features(wd, info.patient_id);
                std::vector<Tensor> per_slice;
                for (std::size_t d : info.slices) {
                    per_slice.push_back(
                        io::load_tensor(dir / ("rad_lesion_s" + std::to_string(d) + ".cftn")));
                }
                const std::size_t lesion_id = vecs.rad_lesion.size();
                vecs.rad_lesion.push_back(std::move(per_slice));
                for (std::size_t i = 0; i < info.n_pathology; ++i) {
                    vecs.pat_lesion.emplace_back(
                        lesion_id,
                        io::load_tensor(dir / ("pat_lesion_" + std::to_string(i) + ".cftn")));
                    ++j_total;
                }
                if (cfg.mode == Mode::prostate_sim) {
                    for (std::size_t d : info.slices) {
                        vecs.rad_normal.push_back(
                            io::load_tensor(dir / ("rad_normal_s" + std::to_string(d) + ".cftn")));
                    }
                    for (std::size_t t = 0;; ++t) {
                        const auto path = dir / ("pat_normal_" + std::to_string(t) + ".cftn");
                        if (!std::filesystem::exists(path)) break;
                        vecs.pat_normal.push_back(io::load_tensor(path));
                        ++k_total;
                    }
                }
            }
            const auto mode = cfg.mode == Mode::kidney ? aggregate::PairingMode::every_slice
                                                       : aggregate::PairingMode::random_slice;
            set = aggregate::build_pairs_by_region(vecs, mode, rng);
            if (mode == aggregate::PairingMode::random_slice && set.rows() != j_total + k_total) {
                throw Error("region pairing produced " + std::to_string(set.rows()) +
                            " rows, expected j+k = " + std::to_string(j_total + k_total));
            }
        }

        const std::string prefix = "fold" + std::to_string(f);
        io::save_tensor(set.rad, wd.pairs() / (prefix + "_rad.cftn"));
        io::save_tensor(set.pat, wd.pairs() / (prefix + "_pat.cftn"));
        json j;
        j["rows"] = set.rows();
        j["rad_width"] = set.rad.extent(1);
        j["pat_width"] = set.pat.extent(1);
        j["balance_warning"] = set.balance_warning;
        j["j"] = j_total;
        j["k"] = k_total;
        json tags = json::array();
        for (const auto t : set.tags) tags.push_back(t == aggregate::RowTag::lesion ? "lesion" : "normal");
        j["tags"] = std::move(tags);
        std::ofstream os(wd.pairs() / (prefix + "_tags.json"), std::ios::trunc);
        os << j.dump() << "\n";
    }
    write_stamp(wd, "aggregate", cfg.content_hash(), {"extract"});
}

// --- train-fusion --------------------------------------------------------------

void run_train_fusion(const PipelineConfig& cfg) {
    cfg.validate();
    Workdir wd{cfg.workdir};
    WorkdirLock lock(wd.root);
    require_stamp(wd, "aggregate", cfg.content_hash());

    for (int f = 0; f < cfg.folds; ++f) {
        const std::string prefix = "fold" + std::to_string(f);
        aggregate::PairedFeatureSet pairs;
        pairs.rad = io::load_tensor(wd.pairs() / (prefix + "_rad.cftn"));
        pairs.pat = io::load_tensor(wd.pairs() / (prefix + "_pat.cftn"));
        pairs.tags.assign(pairs.rad.extent(0), aggregate::RowTag::lesion);

        fusion::FusionTrainConfig tc = cfg.fusion;
        tc.seed = cfg.seed ^ core::fnv1a_hash("fusion:fold" + std::to_string(f));
        const auto result = fusion::train_fusion(pairs, tc);
        save_fusion_model(result.model, wd.models() / ("fusion_fold" + std::to_string(f)), tc.seed,
                          tc.epochs);

        std::ofstream curve(wd.reports() / ("fusion_fold" + std::to_string(f) + "_curve.jsonl"),
                            std::ios::trunc);
        for (std::size_t e = 0; e < result.curve.size(); ++e) {
            json line;
            line["epoch"] = e;
            line["L"] = result.curve[e].objective;
            line["L_recon"] = result.curve[e].recon;
            line["L_corr"] = result.curve[e].corr;
            curve << line.dump() << "\n";
        }
    }
    write_stamp(wd, "train-fusion", cfg.content_hash(), {"aggregate"});
}

// --- encode ----------------------------------------------------------------------

void run_encode(const PipelineConfig& cfg) {
    cfg.validate();
    Workdir wd{cfg.workdir};
    WorkdirLock lock(wd.root);
    require_stamp(wd, "train-fusion", cfg.content_hash());

    const auto index = load_index(wd);
    const auto rad_fx = radiology_extractor(cfg);

    for (int f = 0; f < cfg.folds; ++f) {
        const auto model = load_fusion_model(wd.models() / ("fusion_fold" + std::to_string(f)));
        const auto out_root = wd.features() / ("corrfeat_fold" + std::to_string(f));
        for (const auto& info : index) {
            const auto out_dir = out_root / info.patient_id;
            std::filesystem::create_directories(out_dir);
            for (std::size_t d : info.slices) {
                const Tensor featcat = rad_feature_map(wd, info, d, rad_fx);
                const Tensor corrfeat = fusion::encode_radiology(model, featcat);
                io::save_tensor(corrfeat, out_dir / ("corrfeat_s" + std::to_string(d) + ".cftn"),
                                io::DType::f32);
            }
        }
    }
    write_stamp(wd, "encode", cfg.content_hash(), {"train-fusion"});
}

// --- train-predict -----------------------------------------------------------------

void run_train_predict(const PipelineConfig& cfg) {
    cfg.validate();
    Workdir wd{cfg.workdir};
    WorkdirLock lock(wd.root);
    const bool needs_fusion = cfg.inputs != PredictorInputs::rad_only;
    require_stamp(wd, "aggregate", cfg.content_hash());
    if (needs_fusion) require_stamp(wd, "train-fusion", cfg.content_hash());

    const auto index = load_index(wd);
    const auto folds = load_folds(wd);

    // Per-fold models and per-fold validation predictions.
    std::vector<predict::RegionClassifier> models;
    std::vector<fusion::CorrNetModel> fusion_models;
    for (int f = 0; f < cfg.folds; ++f) {
        fusion::CorrNetModel* fm = nullptr;
        if (needs_fusion) {
            fusion_models.push_back(
                load_fusion_model(wd.models() / ("fusion_fold" + std::to_string(f))));
            fm = &fusion_models.back();
        } else {
            fusion_models.emplace_back();
        }

        std::vector<RowSpec> train_rows, val_rows;
        for (const auto& info : index) {
            auto rows = case_rows(cfg, info);
            auto& dst = folds.fold_of.at(info.patient_id) == f ? val_rows : train_rows;
            dst.insert(dst.end(), rows.begin(), rows.end());
        }
        const auto train = assemble_rows(cfg, wd, train_rows, fm);
        const auto val = assemble_rows(cfg, wd, val_rows, fm);

        predict::PredictorTrainConfig pc = cfg.predictor;
        pc.seed = cfg.seed ^ core::fnv1a_hash("predictor:fold" + std::to_string(f));
        auto result = predict::train_predictor(train, val, pc);
        save_predictor(result.model, wd.models() / ("predictor_fold" + std::to_string(f)));

        json curve;
        curve["train_loss"] = result.train_loss;
        curve["val_loss"] = result.val_loss;
        curve["epochs_run"] = result.epochs_run;
        std::ofstream cs(wd.reports() / ("predictor_fold" + std::to_string(f) + "_curve.json"),
                         std::ios::trunc);
        cs << curve.dump(2) << "\n";

        models.push_back(std::move(result.model));
    }

    // Validation predictions per fold, plus the 5-model ensemble over every
    // case (averaged probabilities, as the final prediction).
    for (int f = 0; f < cfg.folds; ++f) {
        json arr = json::array();
        for (const auto& info : index) {
            if (folds.fold_of.at(info.patient_id) != f) continue;
            std::vector<std::vector<double>> slice_probs;
            for (std::size_t d : info.slices) {
                RowSpec row;
                row.patient_id = info.patient_id;
                row.slice = d;
                const auto branches =
                    branch_vectors(cfg, load_rad_vector(wd, row),
                                   needs_fusion ? &fusion_models[static_cast<std::size_t>(f)] : nullptr);
                slice_probs.push_back(predict::predict_slice(models[static_cast<std::size_t>(f)], branches));
            }
            arr.push_back(prediction_to_json(case_prediction_from_probs(cfg, wd, info, slice_probs)));
        }
        std::ofstream os(wd.predictions() / ("fold" + std::to_string(f) + ".json"), std::ios::trunc);
        os << arr.dump(2) << "\n";
    }

    json ensemble = json::array();
    for (const auto& info : index) {
        std::vector<std::vector<double>> slice_probs;
        for (std::size_t si = 0; si < info.slices.size(); ++si) {
            const std::size_t d = info.slices[si];
            RowSpec row;
            row.patient_id = info.patient_id;
            row.slice = d;
            const Tensor rad_vec = load_rad_vector(wd, row);
            std::vector<Tensor> member_probs;
            for (int f = 0; f < cfg.folds; ++f) {
                const auto branches = branch_vectors(
                    cfg, rad_vec, needs_fusion ? &fusion_models[static_cast<std::size_t>(f)] : nullptr);
                const auto probs =
                    predict::predict_slice(models[static_cast<std::size_t>(f)], branches);
                member_probs.emplace_back(std::vector<std::size_t>{probs.size()},
                                          std::vector<double>(probs.begin(), probs.end()));
            }
            const Tensor avg = predict::ensemble_average(member_probs);
            slice_probs.emplace_back(avg.vec().begin(), avg.vec().end());
        }
        ensemble.push_back(prediction_to_json(case_prediction_from_probs(cfg, wd, info, slice_probs)));
    }
    std::ofstream os(wd.predictions() / "ensemble.json", std::ios::trunc);
    os << ensemble.dump(2) << "\n";

    write_stamp(wd, "train-predict", cfg.content_hash(),
                needs_fusion ? std::vector<std::string>{"aggregate", "train-fusion"}
                             : std::vector<std::string>{"aggregate"});
}

// --- evaluate ---------------------------------------------------------------------

EvaluateOutcome run_evaluate(const PipelineConfig& cfg) {
    cfg.validate();
    Workdir wd{cfg.workdir};
    WorkdirLock lock(wd.root);
    require_stamp(wd, "train-predict", cfg.content_hash());

    std::vector<double> aucs, f1s, senss, specs, dices;
    json per_fold = json::array();
    for (int f = 0; f < cfg.folds; ++f) {
        std::ifstream is(wd.predictions() / ("fold" + std::to_string(f) + ".json"));
        if (!is) throw InputError("missing fold predictions; run train-predict first");
        json arr;
        is >> arr;

        std::vector<double> scores, case_dices;
        std::vector<int> truths, preds;
        for (const auto& j : arr) {
            truths.push_back(j.at("truth").get<int>());
            preds.push_back(j.at("predicted").get<int>());
            scores.push_back(j.at("score").get<double>());
            case_dices.push_back(j.at("dice").get<double>());
        }

        json fold_json;
        fold_json["fold"] = f;
        bool auc_defined = true;
        double auc = 0.0;
        try {
            auc = eval::roc_auc(scores, truths);
        } catch (const InputError&) {
            auc_defined = false;  // single-class fold
        }
        if (auc_defined) {
            aucs.push_back(auc);
            fold_json["roc_auc"] = auc;
        } else {
            fold_json["roc_auc"] = nullptr;
        }

        const auto cm = eval::confusion_metrics(preds, truths);
        f1s.push_back(cm.f1);
        senss.push_back(cm.sensitivity);
        specs.push_back(cm.specificity);
        fold_json["f1"] = cm.f1;
        fold_json["sensitivity"] = cm.sensitivity;
        fold_json["specificity"] = cm.specificity;

        double dice_mean = 0.0;
        for (double d : case_dices) dice_mean += d;
        dice_mean /= std::max<std::size_t>(case_dices.size(), 1);
        dices.push_back(dice_mean);
        fold_json["dice"] = dice_mean;
        per_fold.push_back(std::move(fold_json));
    }

    EvaluateOutcome out;
    out.report.roc_auc = eval::MetricSummary::of(aucs);
    out.report.f1 = eval::MetricSummary::of(f1s);
    out.report.sensitivity = eval::MetricSummary::of(senss);
    out.report.specificity = eval::MetricSummary::of(specs);
    out.report.dice = eval::MetricSummary::of(dices);

    json j;
    j["mode"] = to_string(cfg.mode);
    j["aggregation"] = to_string(cfg.aggregation);
    j["pathology_resolution"] = to_string(cfg.pathology_resolution);
    j["inputs"] = to_string(cfg.inputs);
    j["folds"] = cfg.folds;
    j["per_fold"] = std::move(per_fold);
    auto summary = [](const eval::MetricSummary& s) {
        return json{{"mean", s.mean}, {"std", s.stddev}, {"per_fold", s.per_fold}};
    };
    j["summary"] = {{"roc_auc", summary(out.report.roc_auc)},
                    {"f1", summary(out.report.f1)},
                    {"sensitivity", summary(out.report.sensitivity)},
                    {"specificity", summary(out.report.specificity)},
                    {"dice", summary(out.report.dice)}};

    out.metrics_path = wd.reports() / "metrics.json";
    std::ofstream os(out.metrics_path, std::ios::trunc);
    os << j.dump(2) << "\n";

    std::ostringstream table;
    char line[128];
    std::snprintf(line, sizeof(line), "%-14s %8s %8s\n", "metric", "mean", "std");
    table << line;
    auto row = [&](const char* name, const eval::MetricSummary& s) {
        std::snprintf(line, sizeof(line), "%-14s %8.4f %8.4f\n", name, s.mean, s.stddev);
        table << line;
    };
    row("roc_auc", out.report.roc_auc);
    row("f1", out.report.f1);
    row("sensitivity", out.report.sensitivity);
    row("specificity", out.report.specificity);
    row("dice", out.report.dice);
    out.table = table.str();

    write_stamp(wd, "evaluate", cfg.content_hash(), {"train-predict"});
    return out;
}

// --- synth ------------------------------------------------------------------------

void run_synth(const synth::CohortSpec& spec, const std::filesystem::path& out_dir) {
    const auto cohort = synth::gen_cohort(spec);
    synth::save_cohort(cohort, out_dir);
}

EvaluateOutcome run_all(const PipelineConfig& cfg) {
    run_preprocess(cfg);
    run_extract(cfg);
    run_aggregate(cfg);
    run_train_fusion(cfg);
    run_encode(cfg);
    run_train_predict(cfg);
    return run_evaluate(cfg);
}

}  // namespace corrfabr::pipeline
