#include <CLI11.hpp>

#include <cstdio>
#include <exception>
#include <iostream>
#include <string>
#include <vector>

#include "corrfabr/core/error.hpp"
#include "corrfabr/io/image_file.hpp"
#include "corrfabr/io/tensor_file.hpp"
#include "corrfabr/pipeline/config.hpp"
#include "corrfabr/pipeline/steps.hpp"
#include "corrfabr/synth/generators.hpp"

namespace {

using corrfabr::pipeline::PipelineConfig;

struct CommonFlags {
    std::string config_path;
    std::string manifest;
    std::string workdir;
    std::string mode;
    std::string seed;
    std::vector<std::string> overrides;  // key=value
};

void add_common(CLI::App* cmd, CommonFlags& flags) {
    cmd->add_option("--config", flags.config_path, "pipeline config JSON");
    cmd->add_option("--manifest", flags.manifest, "dataset manifest path (overrides config)");
    cmd->add_option("--workdir", flags.workdir, "working directory (overrides config)");
    cmd->add_option("--mode", flags.mode, "kidney | prostate-sim (overrides config)");
    cmd->add_option("--seed", flags.seed, "master seed (overrides config)");
    cmd->add_option("--set", flags.overrides, "config override key=value (repeatable)")
        ->take_all();
}

PipelineConfig build_config(const CommonFlags& flags) {
    PipelineConfig cfg;
    if (!flags.config_path.empty()) cfg = PipelineConfig::from_json_file(flags.config_path);
    if (!flags.manifest.empty()) cfg.apply_override("manifest", flags.manifest);
    if (!flags.workdir.empty()) cfg.apply_override("workdir", flags.workdir);
    if (!flags.mode.empty()) cfg.apply_override("mode", flags.mode);
    if (!flags.seed.empty()) cfg.apply_override("seed", flags.seed);
    for (const auto& kv : flags.overrides) {
        const auto eq = kv.find('=');
        if (eq == std::string::npos) {
            throw corrfabr::InputError("--set expects key=value, got '" + kv + "'");
        }
        cfg.apply_override(kv.substr(0, eq), kv.substr(eq + 1));
    }
    cfg.validate();
    return cfg;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"CorrFABR: correlated feature aggregation by region"};
    app.require_subcommand(1);

    CommonFlags preprocess_flags, extract_flags, aggregate_flags, fusion_flags, encode_flags,
        predict_flags, evaluate_flags, run_flags;

    auto* cmd_preprocess =
        app.add_subcommand("preprocess", "crop/normalize radiology, stain-normalize pathology");
    add_common(cmd_preprocess, preprocess_flags);
    auto* cmd_extract = app.add_subcommand("extract", "extract 64-channel feature maps and vectors");
    add_common(cmd_extract, extract_flags);
    auto* cmd_aggregate =
        app.add_subcommand("aggregate", "build paired radiology/pathology feature sets per fold");
    add_common(cmd_aggregate, aggregate_flags);
    auto* cmd_train_fusion = app.add_subcommand("train-fusion", "train the CorrNet fusion models");
    add_common(cmd_train_fusion, fusion_flags);
    auto* cmd_encode =
        app.add_subcommand("encode", "apply radiology encoders to produce CorrFeat maps");
    add_common(cmd_encode, encode_flags);
    auto* cmd_train_predict =
        app.add_subcommand("train-predict", "train region classifiers and write predictions");
    add_common(cmd_train_predict, predict_flags);
    auto* cmd_evaluate = app.add_subcommand("evaluate", "compute cross-validated metrics");
    add_common(cmd_evaluate, evaluate_flags);
    auto* cmd_run = app.add_subcommand("run", "run every pipeline step in order");
    add_common(cmd_run, run_flags);

    // synth
    std::string synth_out;
    corrfabr::synth::CohortSpec synth_spec;
    std::string synth_mode = "kidney";
    auto* cmd_synth = app.add_subcommand("synth", "generate a synthetic cohort + manifest");
    cmd_synth->add_option("--out", synth_out, "output directory")->required();
    cmd_synth->add_option("--cases", synth_spec.n_cases, "number of cases");
    cmd_synth->add_option("--balance", synth_spec.class_balance, "aggressive fraction");
    cmd_synth->add_option("--seed", synth_spec.seed, "cohort seed");
    cmd_synth->add_option("--mode", synth_mode, "kidney | prostate-sim");
    cmd_synth->add_option("--slices", synth_spec.slices, "slices per case");
    cmd_synth->add_option("--pathology-size", synth_spec.pathology_size,
                          "pathology image side in pixels");

    // convert-image
    std::string convert_in, convert_out;
    auto* cmd_convert =
        app.add_subcommand("convert-image", "convert a PNG/PNM image to a CFTN tensor");
    cmd_convert->add_option("input", convert_in, "PNG or PNM image")->required();
    cmd_convert->add_option("output", convert_out, "output .cftn path")->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (cmd_preprocess->parsed()) {
            corrfabr::pipeline::run_preprocess(build_config(preprocess_flags));
        } else if (cmd_extract->parsed()) {
            corrfabr::pipeline::run_extract(build_config(extract_flags));
        } else if (cmd_aggregate->parsed()) {
            corrfabr::pipeline::run_aggregate(build_config(aggregate_flags));
        } else if (cmd_train_fusion->parsed()) {
            corrfabr::pipeline::run_train_fusion(build_config(fusion_flags));
        } else if (cmd_encode->parsed()) {
            corrfabr::pipeline::run_encode(build_config(encode_flags));
        } else if (cmd_train_predict->parsed()) {
            corrfabr::pipeline::run_train_predict(build_config(predict_flags));
        } else if (cmd_evaluate->parsed()) {
            const auto outcome = corrfabr::pipeline::run_evaluate(build_config(evaluate_flags));
            std::cout << outcome.table;
            std::cout << "metrics written to " << outcome.metrics_path.string() << "\n";
        } else if (cmd_run->parsed()) {
            const auto outcome = corrfabr::pipeline::run_all(build_config(run_flags));
            std::cout << outcome.table;
            std::cout << "metrics written to " << outcome.metrics_path.string() << "\n";
        } else if (cmd_synth->parsed()) {
            if (synth_mode == "kidney") {
                synth_spec.mode = corrfabr::synth::CohortMode::kidney;
            } else if (synth_mode == "prostate-sim") {
                synth_spec.mode = corrfabr::synth::CohortMode::prostate_sim;
            } else {
                throw corrfabr::InputError("unknown synth mode '" + synth_mode + "'");
            }
            corrfabr::pipeline::run_synth(synth_spec, synth_out);
            std::cout << "cohort written to " << synth_out << "\n";
        } else if (cmd_convert->parsed()) {
            corrfabr::io::save_tensor(corrfabr::io::read_image(convert_in), convert_out);
            std::cout << "tensor written to " << convert_out << "\n";
        }
    } catch (const corrfabr::InputError& e) {
        std::cerr << "input error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "internal error: " << e.what() << "\n";
        return 2;
    }
    return 0;
}
