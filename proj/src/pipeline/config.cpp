#include "corrfabr/pipeline/config.hpp"

#include <fstream>
#include <sstream>

#include <json.hpp>

#include "corrfabr/core/error.hpp"
#include "corrfabr/core/rng.hpp"

namespace corrfabr::pipeline {

using nlohmann::json;

namespace {

Mode mode_from(const std::string& s) {
    if (s == "kidney") return Mode::kidney;
    if (s == "prostate-sim") return Mode::prostate_sim;
    throw InputError("unknown mode '" + s + "' (kidney | prostate-sim)");
}

Aggregation aggregation_from(const std::string& s) {
    if (s == "pixel-pixel") return Aggregation::pixel_pixel;
    if (s == "lesion-biopsy") return Aggregation::lesion_biopsy;
    if (s == "lesion-section") return Aggregation::lesion_section;
    throw InputError("unknown aggregation '" + s + "' (pixel-pixel | lesion-biopsy | lesion-section)");
}

PathologyResolution resolution_from(const std::string& s) {
    if (s == "low") return PathologyResolution::low;
    if (s == "high") return PathologyResolution::high;
    throw InputError("unknown pathology_resolution '" + s + "' (low | high)");
}

PredictorInputs inputs_from(const std::string& s) {
    if (s == "rad-only") return PredictorInputs::rad_only;
    if (s == "rad+corrfeat") return PredictorInputs::rad_corrfeat;
    if (s == "corrfeat-only") return PredictorInputs::corrfeat_only;
    throw InputError("unknown inputs '" + s + "' (rad-only | rad+corrfeat | corrfeat-only)");
}

template <typename T>
void maybe(const json& j, const char* key, T& out) {
    if (j.contains(key)) out = j.at(key).get<T>();
}

}  // namespace

std::string to_string(Mode m) { return m == Mode::kidney ? "kidney" : "prostate-sim"; }

std::string to_string(Aggregation a) {
    switch (a) {
        case Aggregation::pixel_pixel: return "pixel-pixel";
        case Aggregation::lesion_biopsy: return "lesion-biopsy";
        default: return "lesion-section";
    }
}

std::string to_string(PathologyResolution r) {
    return r == PathologyResolution::low ? "low" : "high";
}

std::string to_string(PredictorInputs i) {
    switch (i) {
        case PredictorInputs::rad_only: return "rad-only";
        case PredictorInputs::rad_corrfeat: return "rad+corrfeat";
        default: return "corrfeat-only";
    }
}

PipelineConfig PipelineConfig::from_json_file(const std::filesystem::path& path) {
    std::ifstream is(path);
    if (!is) throw IoError("cannot open config: " + path.string());
    std::ostringstream buf;
    buf << is.rdbuf();
    return from_json_text(buf.str());
}

PipelineConfig PipelineConfig::from_json_text(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        throw InputError("malformed config JSON: " + std::string(e.what()));
    }

    PipelineConfig c;
    try {
        if (j.contains("manifest")) c.manifest = j.at("manifest").get<std::string>();
        if (j.contains("workdir")) c.workdir = j.at("workdir").get<std::string>();
        if (j.contains("mode")) c.mode = mode_from(j.at("mode").get<std::string>());
        if (j.contains("aggregation")) {
            c.aggregation = aggregation_from(j.at("aggregation").get<std::string>());
        }
        if (j.contains("pathology_resolution")) {
            c.pathology_resolution = resolution_from(j.at("pathology_resolution").get<std::string>());
        }
        if (j.contains("inputs")) c.inputs = inputs_from(j.at("inputs").get<std::string>());
        maybe(j, "seed", c.seed);
        maybe(j, "folds", c.folds);
        maybe(j, "otsu_dark_foreground", c.otsu_dark_foreground);
        maybe(j, "stain_reference", c.stain_reference);
        maybe(j, "normal_region_size", c.normal_region_size);
        maybe(j, "pixel_cap", c.pixel_cap);
        if (j.contains("fusion")) {
            const auto& f = j.at("fusion");
            maybe(f, "epochs", c.fusion.epochs);
            maybe(f, "learning_rate", c.fusion.learning_rate);
            maybe(f, "batch_size", c.fusion.batch_size);
            maybe(f, "latent_dim", c.fusion.latent_dim);
            maybe(f, "lambda", c.fusion.lambda);
        }
        if (j.contains("predictor")) {
            const auto& p = j.at("predictor");
            maybe(p, "max_epochs", c.predictor.max_epochs);
            maybe(p, "learning_rate", c.predictor.learning_rate);
            maybe(p, "batch_size", c.predictor.batch_size);
            maybe(p, "lr_decay", c.predictor.lr_decay);
            maybe(p, "lr_patience", c.predictor.lr_patience);
            maybe(p, "early_stopping_patience", c.predictor.early_stopping_patience);
        }
        if (j.contains("extractor")) {
            const auto& e = j.at("extractor");
            maybe(e, "seed", c.extractor_seed);
            if (e.contains("weights")) {
                const auto w = e.at("weights").get<std::string>();
                if (!w.empty()) c.extractor_weights = w;
            }
        }
    } catch (const json::exception& e) {
        throw InputError("bad config value: " + std::string(e.what()));
    }
    return c;
}

void PipelineConfig::apply_override(const std::string& key, const std::string& value) {
    auto as_u64 = [&] { return static_cast<std::uint64_t>(std::stoull(value)); };
    auto as_size = [&] { return static_cast<std::size_t>(std::stoull(value)); };
    auto as_double = [&] { return std::stod(value); };
    auto as_bool = [&] {
        if (value == "true" || value == "1") return true;
        if (value == "false" || value == "0") return false;
        throw InputError("boolean override expects true/false: " + key);
    };

    try {
        if (key == "manifest") manifest = value;
        else if (key == "workdir") workdir = value;
        else if (key == "mode") mode = mode_from(value);
        else if (key == "aggregation") aggregation = aggregation_from(value);
        else if (key == "pathology_resolution") pathology_resolution = resolution_from(value);
        else if (key == "inputs") inputs = inputs_from(value);
        else if (key == "seed") seed = as_u64();
        else if (key == "folds") folds = static_cast<int>(std::stol(value));
        else if (key == "otsu_dark_foreground") otsu_dark_foreground = as_bool();
        else if (key == "stain_reference") stain_reference = value;
        else if (key == "normal_region_size") normal_region_size = as_size();
        else if (key == "pixel_cap") pixel_cap = as_size();
        else if (key == "fusion.epochs") fusion.epochs = as_size();
        else if (key == "fusion.learning_rate") fusion.learning_rate = as_double();
        else if (key == "fusion.batch_size") fusion.batch_size = as_size();
        else if (key == "fusion.latent_dim") fusion.latent_dim = as_size();
        else if (key == "fusion.lambda") fusion.lambda = as_double();
        else if (key == "predictor.max_epochs") predictor.max_epochs = as_size();
        else if (key == "predictor.learning_rate") predictor.learning_rate = as_double();
        else if (key == "predictor.batch_size") predictor.batch_size = as_size();
        else if (key == "predictor.lr_decay") predictor.lr_decay = as_double();
        else if (key == "predictor.lr_patience") predictor.lr_patience = as_size();
        else if (key == "predictor.early_stopping_patience") {
            predictor.early_stopping_patience = as_size();
        } else if (key == "extractor.seed") extractor_seed = as_u64();
        else if (key == "extractor.weights") extractor_weights = value;
        else throw InputError("unknown config key: " + key);
    } catch (const std::invalid_argument&) {
        throw InputError("cannot parse override value for " + key + ": '" + value + "'");
    } catch (const std::out_of_range&) {
        throw InputError("override value out of range for " + key + ": '" + value + "'");
    }
}

void PipelineConfig::validate() const {
    if (manifest.empty()) throw InputError("config needs a manifest path");
    if (workdir.empty()) throw InputError("config needs a workdir path");
    if (folds < 2) throw InputError("folds must be at least 2");
    if (aggregation == Aggregation::pixel_pixel) {
        if (pathology_resolution != PathologyResolution::low) {
            throw InputError(
                "pixel-pixel aggregation requires pathology_resolution=low: per-pixel pairing "
                "assumes both domains live on the same 224x224 grid");
        }
        if (mode != Mode::prostate_sim) {
            throw InputError("pixel-pixel aggregation requires spatially aligned (prostate-sim) data");
        }
    }
    if (fusion.epochs == 0 || fusion.batch_size == 0 || fusion.learning_rate <= 0.0) {
        throw InputError("fusion config values must be positive");
    }
    if (predictor.max_epochs == 0 || predictor.batch_size == 0 || predictor.learning_rate <= 0.0) {
        throw InputError("predictor config values must be positive");
    }
    if (fusion.latent_dim == 0) throw InputError("latent_dim must be positive");
}

std::string PipelineConfig::to_json_text() const {
    json j;
    j["manifest"] = manifest.string();
    j["workdir"] = workdir.string();
    j["mode"] = to_string(mode);
    j["aggregation"] = to_string(aggregation);
    j["pathology_resolution"] = to_string(pathology_resolution);
    j["inputs"] = to_string(inputs);
    j["seed"] = seed;
    j["folds"] = folds;
    j["otsu_dark_foreground"] = otsu_dark_foreground;
    j["stain_reference"] = stain_reference;
    j["normal_region_size"] = normal_region_size;
    j["pixel_cap"] = pixel_cap;
    j["fusion"] = {{"epochs", fusion.epochs},
                   {"learning_rate", fusion.learning_rate},
                   {"batch_size", fusion.batch_size},
                   {"latent_dim", fusion.latent_dim},
                   {"lambda", fusion.lambda}};
    j["predictor"] = {{"max_epochs", predictor.max_epochs},
                      {"learning_rate", predictor.learning_rate},
                      {"batch_size", predictor.batch_size},
                      {"lr_decay", predictor.lr_decay},
                      {"lr_patience", predictor.lr_patience},
                      {"early_stopping_patience", predictor.early_stopping_patience}};
    j["extractor"] = {{"seed", extractor_seed}, {"weights", extractor_weights.string()}};
    return j.dump(2);
}

std::string PipelineConfig::content_hash() const {
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx",
                  static_cast<unsigned long long>(core::fnv1a_hash(to_json_text())));
    return buf;
}

}  // namespace corrfabr::pipeline
