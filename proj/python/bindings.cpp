#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "corrfabr/aggregate/aggregation.hpp"
#include "corrfabr/core/error.hpp"
#include "corrfabr/core/mask.hpp"
#include "corrfabr/core/rng.hpp"
#include "corrfabr/eval/metrics.hpp"
#include "corrfabr/features/extractor.hpp"
#include "corrfabr/fusion/cca.hpp"
#include "corrfabr/fusion/corrnet.hpp"
#include "corrfabr/io/image_file.hpp"
#include "corrfabr/io/tensor_file.hpp"
#include "corrfabr/pipeline/config.hpp"
#include "corrfabr/pipeline/steps.hpp"
#include "corrfabr/predict/classifier.hpp"
#include "corrfabr/preprocess/labeling.hpp"
#include "corrfabr/preprocess/normalize.hpp"
#include "corrfabr/preprocess/otsu.hpp"
#include "corrfabr/preprocess/resample.hpp"
#include "corrfabr/preprocess/stain.hpp"
#include "corrfabr/synth/generators.hpp"

namespace py = pybind11;
using namespace corrfabr;

namespace {

core::Tensor tensor_from(const py::array_t<double, py::array::c_style | py::array::forcecast>& a) {
    std::vector<std::size_t> shape(a.ndim());
    for (py::ssize_t i = 0; i < a.ndim(); ++i) shape[static_cast<std::size_t>(i)] = a.shape(i);
    std::vector<double> data(a.data(), a.data() + a.size());
    return core::Tensor(std::move(shape), std::move(data));
}

py::array_t<double> array_from(const core::Tensor& t) {
    std::vector<py::ssize_t> shape(t.shape().begin(), t.shape().end());
    py::array_t<double> a(shape);
    std::copy(t.data(), t.data() + t.numel(), a.mutable_data());
    return a;
}

core::RegionMask mask_from(const py::array_t<double, py::array::c_style | py::array::forcecast>& a) {
    return core::RegionMask(tensor_from(a));
}

using DoubleArray = py::array_t<double, py::array::c_style | py::array::forcecast>;

pipeline::PipelineConfig config_from(const std::string& config_path,
                                     const std::map<std::string, std::string>& overrides) {
    pipeline::PipelineConfig cfg;
    if (!config_path.empty()) cfg = pipeline::PipelineConfig::from_json_file(config_path);
    for (const auto& [k, v] : overrides) cfg.apply_override(k, v);
    cfg.validate();
    return cfg;
}

}  // namespace

PYBIND11_MODULE(_corrfabr, m) {
    m.doc() = "CorrFABR core: region-level radiology/pathology feature fusion";

    py::register_exception<InputError>(m, "InputError", PyExc_ValueError);
    py::register_exception<IoError>(m, "IoError", PyExc_IOError);

    // tensor file format
    m.def(
        "save_tensor",
        [](const DoubleArray& a, const std::filesystem::path& path, const std::string& dtype) {
            io::save_tensor(tensor_from(a), path, dtype == "f32" ? io::DType::f32 : io::DType::f64);
        },
        py::arg("array"), py::arg("path"), py::arg("dtype") = "f64");
    m.def("load_tensor",
          [](const std::filesystem::path& path) { return array_from(io::load_tensor(path)); });
    m.def("read_image",
          [](const std::filesystem::path& path) { return array_from(io::read_image(path)); });

    // preprocessing
    m.def("label_aggressiveness", [](int grade, bool necrosis) {
        return preprocess::to_string(preprocess::label_aggressiveness(grade, necrosis));
    });
    m.def("crop_resize_lesion",
          [](const DoubleArray& volume, const DoubleArray& mask, std::size_t out_size) {
              return array_from(
                  preprocess::crop_resize_lesion(tensor_from(volume), mask_from(mask), out_size));
          },
          py::arg("volume"), py::arg("mask"), py::arg("out_size") = 224);
    m.def("zscore_normalize_lesion", [](const DoubleArray& volume, const DoubleArray& mask) {
        return array_from(preprocess::zscore_normalize_lesion(tensor_from(volume), mask_from(mask)));
    });
    m.def(
        "otsu_threshold",
        [](const DoubleArray& gray, std::size_t levels, bool dark_foreground) {
            const auto r = preprocess::otsu_threshold(tensor_from(gray), levels,
                                                      dark_foreground
                                                          ? preprocess::OtsuForeground::dark
                                                          : preprocess::OtsuForeground::bright);
            return py::make_tuple(r.threshold, array_from(r.mask.tensor()));
        },
        py::arg("gray"), py::arg("levels") = 256, py::arg("dark_foreground") = true);

    py::class_<preprocess::StainBasis>(m, "StainBasis")
        .def_readonly("stain1", &preprocess::StainBasis::stain1)
        .def_readonly("stain2", &preprocess::StainBasis::stain2)
        .def_readonly("c1_99", &preprocess::StainBasis::c1_99)
        .def_readonly("c2_99", &preprocess::StainBasis::c2_99);
    m.def(
        "macenko_fit",
        [](const DoubleArray& rgb, double beta, double alpha) {
            return preprocess::macenko_fit(tensor_from(rgb), beta, alpha);
        },
        py::arg("rgb"), py::arg("beta") = 0.15, py::arg("alpha") = 1.0);
    m.def("macenko_normalize", [](const DoubleArray& rgb, const preprocess::StainBasis& source,
                                  const preprocess::StainBasis& target) {
        return array_from(preprocess::macenko_normalize(tensor_from(rgb), source, target));
    });

    // feature extraction
    py::class_<features::FeatureExtractor>(m, "FeatureExtractor")
        .def_readonly("in_channels", &features::FeatureExtractor::in_channels);
    m.def("make_builtin_extractor", &features::make_builtin_extractor, py::arg("seed"),
          py::arg("in_channels"));
    m.def("extract_lowres", [](const DoubleArray& image, const features::FeatureExtractor& fx) {
        return array_from(features::extract_lowres(tensor_from(image), fx));
    });
    m.def("extract_highres_patches",
          [](const DoubleArray& wsi, const features::FeatureExtractor& fx) {
              return array_from(features::extract_highres_patches(tensor_from(wsi), fx).vectors);
          });

    // aggregation
    m.def("aggregate_region_mean", [](const DoubleArray& feat, const DoubleArray& mask) {
        return array_from(aggregate::aggregate_region_mean(tensor_from(feat), mask_from(mask)));
    });
    m.def("aggregate_region_p95",
          [](const DoubleArray& patch_vectors,
             const std::vector<std::pair<std::size_t, std::size_t>>& region) {
              features::PatchGridFeatures grid;
              core::Tensor t = tensor_from(patch_vectors);
              grid.grid_h = t.extent(0);
              grid.grid_w = t.extent(1);
              grid.vectors = std::move(t);
              return array_from(aggregate::aggregate_region_p95(grid, region));
          });
    m.def(
        "aggregate_pixel_pixel",
        [](const std::vector<DoubleArray>& rad, const DoubleArray& pat, const DoubleArray& mask,
           std::uint64_t seed, std::size_t cap) {
            std::vector<core::Tensor> rad_t;
            for (const auto& r : rad) rad_t.push_back(tensor_from(r));
            core::SeededRng rng(seed);
            const auto set =
                aggregate::aggregate_pixel_pixel(rad_t, tensor_from(pat), mask_from(mask), rng, cap);
            std::vector<int> tags;
            for (auto t : set.tags) tags.push_back(t == aggregate::RowTag::lesion ? 1 : 0);
            return py::make_tuple(array_from(set.rad), array_from(set.pat), tags,
                                  set.balance_warning);
        },
        py::arg("rad"), py::arg("pat"), py::arg("cancer_mask"), py::arg("seed"),
        py::arg("cap") = 1000000);

    // fusion
    py::class_<fusion::CorrNetModel>(m, "CorrNetModel")
        .def_property_readonly("latent_dim", [](const fusion::CorrNetModel& c) { return c.latent_dim; })
        .def_property_readonly("enc_rad", [](const fusion::CorrNetModel& c) { return array_from(c.enc_rad); })
        .def_property_readonly("enc_pat", [](const fusion::CorrNetModel& c) { return array_from(c.enc_pat); })
        .def_property_readonly("enc_bias", [](const fusion::CorrNetModel& c) { return array_from(c.enc_bias); })
        .def("encode_radiology", [](const fusion::CorrNetModel& c, const DoubleArray& feat) {
            return array_from(fusion::encode_radiology(c, tensor_from(feat)));
        })
        .def("encode_vector", [](const fusion::CorrNetModel& c, const DoubleArray& vec) {
            return array_from(fusion::encode_vector(c, tensor_from(vec)));
        });
    m.def(
        "train_fusion",
        [](const DoubleArray& rad, const DoubleArray& pat, std::size_t epochs, double lr,
           std::size_t batch_size, std::size_t latent_dim, double lambda, std::uint64_t seed) {
            aggregate::PairedFeatureSet pairs;
            pairs.rad = tensor_from(rad);
            pairs.pat = tensor_from(pat);
            pairs.tags.assign(pairs.rad.extent(0), aggregate::RowTag::lesion);
            fusion::FusionTrainConfig cfg;
            cfg.epochs = epochs;
            cfg.learning_rate = lr;
            cfg.batch_size = batch_size;
            cfg.latent_dim = latent_dim;
            cfg.lambda = lambda;
            cfg.seed = seed;
            auto result = fusion::train_fusion(pairs, cfg);
            std::vector<std::vector<double>> curve;
            for (const auto& e : result.curve) curve.push_back({e.objective, e.recon, e.corr});
            return py::make_tuple(std::move(result.model), std::move(curve));
        },
        py::arg("rad"), py::arg("pat"), py::arg("epochs") = 1000, py::arg("learning_rate") = 0.5e-4,
        py::arg("batch_size") = 50, py::arg("latent_dim") = 5, py::arg("lambda_") = 2.0,
        py::arg("seed") = 0);
    m.def("corr_loss", [](const DoubleArray& h_rad, const DoubleArray& h_pat) {
        return fusion::corr_loss(tensor_from(h_rad), tensor_from(h_pat));
    });
    m.def("cca_oracle", [](const DoubleArray& x, const DoubleArray& y, std::size_t k) {
        const auto r = fusion::cca_oracle(tensor_from(x), tensor_from(y), k);
        return py::make_tuple(r.correlations, array_from(r.x_directions), array_from(r.y_directions));
    });

    // prediction
    m.def("majority_vote", [](const DoubleArray& segmentation, const DoubleArray& mask) {
        return predict::majority_vote(tensor_from(segmentation), mask_from(mask));
    });
    m.def("ensemble_average", [](const std::vector<DoubleArray>& predictions) {
        std::vector<core::Tensor> t;
        for (const auto& p : predictions) t.push_back(tensor_from(p));
        return array_from(predict::ensemble_average(t));
    });

    // evaluation
    m.def("roc_auc", &eval::roc_auc);
    m.def("confusion_metrics", [](const std::vector<int>& pred, const std::vector<int>& labels) {
        const auto c = eval::confusion_metrics(pred, labels);
        return py::make_tuple(c.f1, c.sensitivity, c.specificity);
    });
    m.def("dice", [](const DoubleArray& a, const DoubleArray& b) {
        return eval::dice(mask_from(a), mask_from(b));
    });
    m.def("kfold_split", [](const std::vector<std::string>& ids, int folds, std::uint64_t seed) {
        return eval::kfold_split(ids, folds, seed).fold_of;
    });

    // synthetic data
    m.def(
        "gen_two_view",
        [](std::size_t latent_dim, std::size_t x_dim, std::size_t y_dim, double signal_std,
           double noise_x, double noise_y, std::size_t n_samples, std::uint64_t seed) {
            synth::TwoViewSpec spec;
            spec.latent_dim = latent_dim;
            spec.x_dim = x_dim;
            spec.y_dim = y_dim;
            spec.signal_std = signal_std;
            spec.noise_x = noise_x;
            spec.noise_y = noise_y;
            spec.n_samples = n_samples;
            spec.seed = seed;
            const auto d = synth::gen_two_view(spec);
            return py::make_tuple(array_from(d.x), array_from(d.y), d.true_correlations);
        },
        py::arg("latent_dim") = 5, py::arg("x_dim") = 128, py::arg("y_dim") = 64,
        py::arg("signal_std") = 1.0, py::arg("noise_x") = 1.0, py::arg("noise_y") = 1.0,
        py::arg("n_samples") = 5000, py::arg("seed") = 0);
    m.def(
        "gen_cohort",
        [](const std::filesystem::path& out_dir, std::size_t n_cases, double class_balance,
           std::uint64_t seed, const std::string& mode, std::size_t slices,
           std::size_t pathology_size) {
            synth::CohortSpec spec;
            spec.n_cases = n_cases;
            spec.class_balance = class_balance;
            spec.seed = seed;
            spec.mode = mode == "prostate-sim" ? synth::CohortMode::prostate_sim
                                               : synth::CohortMode::kidney;
            spec.slices = slices;
            spec.pathology_size = pathology_size;
            pipeline::run_synth(spec, out_dir);
        },
        py::arg("out_dir"), py::arg("n_cases") = 20, py::arg("class_balance") = 0.5,
        py::arg("seed") = 0, py::arg("mode") = "kidney", py::arg("slices") = 2,
        py::arg("pathology_size") = 224);

    // pipeline steps
    m.def(
        "run_step",
        [](const std::string& step, const std::string& config_path,
           const std::map<std::string, std::string>& overrides) {
            const auto cfg = config_from(config_path, overrides);
            if (step == "preprocess") pipeline::run_preprocess(cfg);
            else if (step == "extract") pipeline::run_extract(cfg);
            else if (step == "aggregate") pipeline::run_aggregate(cfg);
            else if (step == "train-fusion") pipeline::run_train_fusion(cfg);
            else if (step == "encode") pipeline::run_encode(cfg);
            else if (step == "train-predict") pipeline::run_train_predict(cfg);
            else if (step == "evaluate") return pipeline::run_evaluate(cfg).table;
            else if (step == "run") return pipeline::run_all(cfg).table;
            else throw InputError("unknown step: " + step);
            return std::string();
        },
        py::arg("step"), py::arg("config_path"),
        py::arg("overrides") = std::map<std::string, std::string>{});
}
