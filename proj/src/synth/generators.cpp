#include "corrfabr/synth/generators.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>

#include "corrfabr/core/error.hpp"
#include "corrfabr/core/rng.hpp"
#include "corrfabr/io/manifest.hpp"
#include "corrfabr/io/tensor_file.hpp"

namespace corrfabr::synth {

namespace {

using core::SeededRng;
using core::Tensor;

// Orthonormal [dim, latent] mixing columns from a seeded Gaussian draw.
Eigen::MatrixXd orthonormal_mixing(std::size_t dim, std::size_t latent, SeededRng& rng) {
    Eigen::MatrixXd g(static_cast<Eigen::Index>(dim), static_cast<Eigen::Index>(latent));
    for (Eigen::Index r = 0; r < g.rows(); ++r) {
        for (Eigen::Index c = 0; c < g.cols(); ++c) g(r, c) = rng.normal();
    }
    Eigen::HouseholderQR<Eigen::MatrixXd> qr(g);
    Eigen::MatrixXd q = qr.householderQ() * Eigen::MatrixXd::Identity(
                                                static_cast<Eigen::Index>(dim),
                                                static_cast<Eigen::Index>(latent));
    return q;
}

// --- cohort texture machinery ---------------------------------------------

// Fixed sinusoidal texture banks. Shared patterns carry the latent signal in
// both views; private patterns carry per-view noise.
struct Pattern {
    double freq;
    double angle;
    double phase;
};

constexpr std::size_t kLatentDim = 5;
constexpr std::size_t kRadPrivate = 6;
constexpr std::size_t kPatPrivate = 4;

const Pattern kSharedRad[kLatentDim] = {
    {3.1, 0.3, 0.0}, {4.7, 1.2, 0.7}, {6.3, 2.1, 1.9}, {8.2, 0.8, 2.6}, {10.1, 1.7, 0.4},
};
const Pattern kSharedPat[kLatentDim] = {
    {2.8, 0.9, 0.5}, {4.2, 2.0, 1.1}, {5.9, 0.2, 2.2}, {7.6, 1.5, 0.1}, {9.4, 2.5, 1.6},
};
const Pattern kPrivateRad[kRadPrivate] = {
    {3.7, 2.8, 0.2}, {5.3, 0.5, 1.3}, {7.1, 1.9, 2.4}, {8.9, 1.1, 0.8},
    {11.3, 2.3, 1.7}, {12.7, 0.1, 2.9},
};
const Pattern kPrivatePat[kPatPrivate] = {
    {3.4, 1.4, 0.9}, {6.6, 2.7, 0.3}, {8.5, 0.6, 2.0}, {10.8, 1.8, 1.2},
};

// Per-dimension sign pattern of the class mean in latent space.
const double kClassDirection[kLatentDim] = {1.0, -0.8, 0.6, -0.9, 0.7};

double eval_pattern(const Pattern& p, double x, double y) {
    return std::sin(p.freq * (x * std::cos(p.angle) + y * std::sin(p.angle)) + p.phase);
}

struct Ellipse {
    double cx, cy, rx, ry;

    bool contains(double x, double y) const {
        const double dx = (x - cx) / rx, dy = (y - cy) / ry;
        return dx * dx + dy * dy <= 1.0;
    }
};

// H&E-like reference stains (unit optical-density vectors).
std::array<double, 3> unit3(double a, double b, double c) {
    const double n = std::sqrt(a * a + b * b + c * c);
    return {a / n, b / n, c / n};
}

const std::array<double, 3> kHema = unit3(0.65, 0.70, 0.29);
const std::array<double, 3> kEosin = unit3(0.07, 0.99, 0.11);

void render_stains(double c1, double c2, double* rgb_out) {
    for (int ch = 0; ch < 3; ++ch) {
        const double od = c1 * kHema[ch] + c2 * kEosin[ch];
        rgb_out[ch] = std::clamp(256.0 * std::pow(10.0, -od) - 1.0, 0.0, 255.0);
    }
}

std::vector<preprocess::LesionLabel> balanced_labels(std::size_t n, double balance,
                                                     SeededRng& rng) {
    const auto n_aggressive = static_cast<std::size_t>(
        std::llround(balance * static_cast<double>(n)));
    std::vector<preprocess::LesionLabel> labels(n, preprocess::LesionLabel::indolent);
    std::fill(labels.begin(), labels.begin() + static_cast<long>(n_aggressive),
              preprocess::LesionLabel::aggressive);
    rng.shuffle(labels);
    return labels;
}

// Grade/necrosis combinations consistent with the label, mirroring the
// observed grade mix (no grade-1 necrosis).
std::pair<int, bool> grade_necrosis_for(preprocess::LesionLabel label, SeededRng& rng) {
    if (label == preprocess::LesionLabel::aggressive) {
        static const std::pair<int, bool> options[] = {
            {2, true}, {3, false}, {3, true}, {4, false}, {4, true}};
        return options[rng.uniform_int(5)];
    }
    static const std::pair<int, bool> options[] = {{1, false}, {2, false}};
    return options[rng.uniform_int(2)];
}

SyntheticCase make_case(const CohortSpec& spec, std::size_t index,
                        preprocess::LesionLabel label, SeededRng& rng) {
    const std::size_t hw = spec.image_size;
    const std::size_t depth = spec.slices;
    const std::size_t n_seq = spec.mode == CohortMode::prostate_sim ? 2 : 1;

    SyntheticCase sc;
    {
        char buf[16];
        std::snprintf(buf, sizeof(buf), "case%04zu", index);
        sc.patient_id = buf;
    }
    sc.label = label;
    std::tie(sc.grade, sc.necrosis) = grade_necrosis_for(label, rng);

    // Shared latent: class mean plus within-class spread.
    const double side = label == preprocess::LesionLabel::aggressive ? 1.0 : -1.0;
    sc.latent.resize(kLatentDim);
    for (std::size_t j = 0; j < kLatentDim; ++j) {
        sc.latent[j] = side * spec.class_separation * kClassDirection[j] +
                       spec.latent_std * rng.normal();
    }

    const Ellipse lesion{rng.uniform(0.35, 0.65) * double(hw), rng.uniform(0.35, 0.65) * double(hw),
                         rng.uniform(0.16, 0.28) * double(hw), rng.uniform(0.16, 0.28) * double(hw)};
    const Ellipse organ{double(hw) * 0.5, double(hw) * 0.5, double(hw) * 0.42, double(hw) * 0.42};

    // Radiology volumes: lesion texture = shared patterns scaled by the
    // latent + per-slice private patterns + pixel noise.
    sc.lesion_mask = Tensor({depth, hw, hw});
    if (spec.mode == CohortMode::prostate_sim) sc.organ_mask = Tensor({depth, hw, hw});
    for (std::size_t s = 0; s < n_seq; ++s) sc.radiology.emplace_back(Tensor({depth, hw, hw}));

    for (std::size_t d = 0; d < depth; ++d) {
        std::vector<std::vector<double>> private_amp(n_seq, std::vector<double>(kRadPrivate));
        for (auto& seq_amp : private_amp) {
            for (double& a : seq_amp) a = spec.rad_private_std * rng.normal();
        }
        for (std::size_t y = 0; y < hw; ++y) {
            for (std::size_t x = 0; x < hw; ++x) {
                const bool in_lesion = lesion.contains(double(x), double(y));
                sc.lesion_mask.at(d, y, x) = in_lesion ? 1.0 : 0.0;
                if (spec.mode == CohortMode::prostate_sim) {
                    sc.organ_mask.at(d, y, x) = organ.contains(double(x), double(y)) ? 1.0 : 0.0;
                }
                // Lesion-local coordinates, so the texture scale survives the
                // bounding-box crop and resize.
                const double lx = (double(x) - lesion.cx) / lesion.rx;
                const double ly = (double(y) - lesion.cy) / lesion.ry;
                for (std::size_t s = 0; s < n_seq; ++s) {
                    double v = spec.pixel_noise * rng.normal();
                    if (in_lesion) {
                        v += 2.0;  // lesions are bright against background
                        const double seq_flip = s == 0 ? 1.0 : -1.0;
                        for (std::size_t j = 0; j < kLatentDim; ++j) {
                            v += (1.0 + seq_flip * sc.latent[j]) * eval_pattern(kSharedRad[j], lx, ly);
                        }
                        for (std::size_t m = 0; m < kRadPrivate; ++m) {
                            v += private_amp[s][m] * eval_pattern(kPrivateRad[m], lx, ly);
                        }
                    }
                    sc.radiology[s].at(d, y, x) = v;
                }
            }
        }
    }

    // Pathology: stained tissue whose concentration textures carry the same
    // latent. In prostate_sim the image is spatially aligned with slice 0.
    const std::size_t ps = spec.pathology_size;
    sc.pathology = Tensor({ps, ps, 3});
    const bool aligned = spec.mode == CohortMode::prostate_sim;
    const Ellipse tissue = aligned
                               ? Ellipse{organ.cx, organ.cy, organ.rx, organ.ry}
                               : Ellipse{rng.uniform(0.4, 0.6) * double(ps),
                                         rng.uniform(0.4, 0.6) * double(ps),
                                         rng.uniform(0.3, 0.42) * double(ps),
                                         rng.uniform(0.3, 0.42) * double(ps)};
    const double scale = aligned ? double(hw) : double(ps);
    const Ellipse pat_lesion = aligned ? lesion
                                       : Ellipse{tissue.cx, tissue.cy, tissue.rx, tissue.ry};
    if (aligned) sc.pathology_lesion_mask = Tensor({ps, ps});

    std::vector<double> pat_private(kPatPrivate);
    for (double& a : pat_private) a = spec.pat_private_std * rng.normal();

    for (std::size_t y = 0; y < ps; ++y) {
        for (std::size_t x = 0; x < ps; ++x) {
            double* px = sc.pathology.data() + (y * ps + x) * 3;
            const double fx = double(x) * scale / double(ps);
            const double fy = double(y) * scale / double(ps);
            const bool in_tissue = tissue.contains(fx, fy);
            const bool in_lesion_region = pat_lesion.contains(fx, fy);
            if (aligned) sc.pathology_lesion_mask.at(y, x) = in_lesion_region ? 1.0 : 0.0;
            if (!in_tissue) {
                for (int ch = 0; ch < 3; ++ch) {
                    px[ch] = std::clamp(250.0 + 4.0 * rng.normal(), 0.0, 255.0);
                }
                continue;
            }
            const double lx = (fx - pat_lesion.cx) / pat_lesion.rx;
            const double ly = (fy - pat_lesion.cy) / pat_lesion.ry;
            double c1 = 0.9, c2 = 0.7;
            if (in_lesion_region) {
                for (std::size_t j = 0; j < kLatentDim; ++j) {
                    const double g = eval_pattern(kSharedPat[j], lx, ly);
                    c1 += 0.35 * (1.0 + sc.latent[j]) * g * 0.5;
                    c2 -= 0.28 * (1.0 + sc.latent[j]) * g * 0.5;
                }
            }
            for (std::size_t m = 0; m < kPatPrivate; ++m) {
                const double g = eval_pattern(kPrivatePat[m], lx, ly);
                c1 += pat_private[m] * g * 0.5;
                c2 += pat_private[m] * g * 0.3;
            }
            c1 = std::clamp(c1 + 0.04 * rng.normal(), 0.05, 3.0);
            c2 = std::clamp(c2 + 0.04 * rng.normal(), 0.05, 3.0);
            render_stains(c1, c2, px);
        }
    }
    return sc;
}

}  // namespace

TwoViewData gen_two_view(const TwoViewSpec& spec) {
    const std::size_t latent = spec.latent_dim;
    if (latent == 0 || spec.x_dim < latent || spec.y_dim < latent) {
        throw InputError("view dimensions must be at least the latent dimension");
    }
    if (!spec.signal_scales.empty() && spec.signal_scales.size() != latent) {
        throw InputError("signal_scales must have latent_dim entries");
    }

    SeededRng rng(spec.seed);
    const Eigen::MatrixXd a = orthonormal_mixing(spec.x_dim, latent, rng);
    const Eigen::MatrixXd b = orthonormal_mixing(spec.y_dim, latent, rng);

    std::vector<double> scales(latent, spec.signal_std);
    if (!spec.signal_scales.empty()) scales = spec.signal_scales;

    TwoViewData out;
    out.x = Tensor({spec.n_samples, spec.x_dim});
    out.y = Tensor({spec.n_samples, spec.y_dim});
    std::vector<double> z(latent);
    for (std::size_t i = 0; i < spec.n_samples; ++i) {
        for (std::size_t j = 0; j < latent; ++j) z[j] = scales[j] * rng.normal();
        double* xr = out.x.data() + i * spec.x_dim;
        double* yr = out.y.data() + i * spec.y_dim;
        for (std::size_t dd = 0; dd < spec.x_dim; ++dd) {
            double acc = spec.noise_x * rng.normal();
            for (std::size_t j = 0; j < latent; ++j) {
                acc += a(static_cast<Eigen::Index>(dd), static_cast<Eigen::Index>(j)) * z[j];
            }
            xr[dd] = acc;
        }
        for (std::size_t dd = 0; dd < spec.y_dim; ++dd) {
            double acc = spec.noise_y * rng.normal();
            for (std::size_t j = 0; j < latent; ++j) {
                acc += b(static_cast<Eigen::Index>(dd), static_cast<Eigen::Index>(j)) * z[j];
            }
            yr[dd] = acc;
        }
    }

    out.true_correlations.resize(latent);
    for (std::size_t j = 0; j < latent; ++j) {
        const double s2 = scales[j] * scales[j];
        out.true_correlations[j] =
            s2 / std::sqrt((s2 + spec.noise_x * spec.noise_x) * (s2 + spec.noise_y * spec.noise_y));
    }
    std::sort(out.true_correlations.rbegin(), out.true_correlations.rend());
    return out;
}

SyntheticCohort gen_cohort(const CohortSpec& spec) {
    if (spec.n_cases < 10) throw InputError("cohort needs at least 10 cases");
    if (spec.class_balance < 0.0 || spec.class_balance > 1.0) {
        throw InputError("class_balance must be in [0, 1]");
    }

    SeededRng cohort_rng(spec.seed);
    const auto labels = balanced_labels(spec.n_cases, spec.class_balance, cohort_rng);

    SyntheticCohort cohort;
    cohort.spec = spec;
    cohort.cases.reserve(spec.n_cases);
    for (std::size_t i = 0; i < spec.n_cases; ++i) {
        char buf[16];
        std::snprintf(buf, sizeof(buf), "case%04zu", i);
        SeededRng case_rng = cohort_rng.fork(core::fnv1a_hash(buf));
        cohort.cases.push_back(make_case(spec, i, labels[i], case_rng));
    }
    return cohort;
}

void save_cohort(const SyntheticCohort& cohort, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    io::Manifest manifest;
    manifest.mode = cohort.spec.mode == CohortMode::kidney ? "kidney" : "prostate-sim";
    for (const auto& sc : cohort.cases) {
        const std::filesystem::path case_dir = dir / sc.patient_id;
        std::filesystem::create_directories(case_dir);
        io::PatientEntry entry;
        entry.patient_id = sc.patient_id;
        for (std::size_t s = 0; s < sc.radiology.size(); ++s) {
            const std::string rel = sc.patient_id + "/rad" + std::to_string(s) + ".cftn";
            io::save_tensor(sc.radiology[s], dir / rel, io::DType::f32);
            entry.radiology.push_back(rel);
        }
        entry.lesion_mask = sc.patient_id + "/lesion_mask.cftn";
        io::save_tensor(sc.lesion_mask, dir / entry.lesion_mask, io::DType::f32);
        if (sc.organ_mask.numel() > 0) {
            entry.organ_mask = sc.patient_id + "/organ_mask.cftn";
            io::save_tensor(sc.organ_mask, dir / entry.organ_mask, io::DType::f32);
        }
        entry.pathology.push_back(sc.patient_id + "/pathology.cftn");
        io::save_tensor(sc.pathology, dir / entry.pathology.back(), io::DType::f32);
        if (sc.pathology_lesion_mask.numel() > 0) {
            entry.pathology_lesion_mask = sc.patient_id + "/pathology_lesion_mask.cftn";
            io::save_tensor(sc.pathology_lesion_mask, dir / entry.pathology_lesion_mask,
                            io::DType::f32);
        }
        entry.grade = sc.grade;
        entry.necrosis = sc.necrosis;
        manifest.patients.push_back(std::move(entry));
    }
    save_manifest(manifest, dir / "manifest.json");
}

}  // namespace corrfabr::synth
