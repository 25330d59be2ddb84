#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include "corrfabr/fusion/corrnet.hpp"
#include "corrfabr/predict/classifier.hpp"

namespace corrfabr::pipeline {

enum class Mode { kidney, prostate_sim };
enum class Aggregation { pixel_pixel, lesion_biopsy, lesion_section };
enum class PathologyResolution { low, high };
enum class PredictorInputs { rad_only, rad_corrfeat, corrfeat_only };

std::string to_string(Mode m);
std::string to_string(Aggregation a);
std::string to_string(PathologyResolution r);
std::string to_string(PredictorInputs i);

struct PipelineConfig {
    std::filesystem::path manifest;
    std::filesystem::path workdir;
    Mode mode = Mode::kidney;
    Aggregation aggregation = Aggregation::lesion_section;
    PathologyResolution pathology_resolution = PathologyResolution::low;
    PredictorInputs inputs = PredictorInputs::rad_corrfeat;
    std::uint64_t seed = 0;
    int folds = 5;

    // Otsu polarity for tissue segmentation; H&E tissue is darker than the
    // slide background.
    bool otsu_dark_foreground = true;
    // Patient id whose stains define the normalization target; empty means
    // the first manifest entry.
    std::string stain_reference;

    fusion::FusionTrainConfig fusion;
    predict::PredictorTrainConfig predictor;

    std::uint64_t extractor_seed = 17;
    std::filesystem::path extractor_weights;  // optional CFTN weight directory

    std::size_t normal_region_size = 20;
    std::size_t pixel_cap = 1000000;

    static PipelineConfig from_json_file(const std::filesystem::path& path);
    static PipelineConfig from_json_text(const std::string& text);

    // Dotted-key overrides, e.g. "fusion.epochs" = "200".
    void apply_override(const std::string& key, const std::string& value);

    // Rejects contradictory combinations (pixel-pixel requires low-res
    // pathology and spatially aligned, prostate-sim style data).
    void validate() const;

    std::string to_json_text() const;
    std::string content_hash() const;
};

}  // namespace corrfabr::pipeline
