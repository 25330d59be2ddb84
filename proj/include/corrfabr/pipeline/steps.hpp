#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include "corrfabr/eval/metrics.hpp"
#include "corrfabr/pipeline/config.hpp"
#include "corrfabr/synth/generators.hpp"

namespace corrfabr::pipeline {

// The three-step pipeline as resumable commands. Each command takes the
// workdir lock, verifies its upstream step stamps, rewrites its artifacts
// deterministically, and stamps itself. Only preprocess, extract, aggregate
// and train-fusion ever open pathology files.
void run_preprocess(const PipelineConfig& cfg);
void run_extract(const PipelineConfig& cfg);
void run_aggregate(const PipelineConfig& cfg);
void run_train_fusion(const PipelineConfig& cfg);
void run_encode(const PipelineConfig& cfg);
void run_train_predict(const PipelineConfig& cfg);

struct EvaluateOutcome {
    eval::MetricsReport report;
    std::filesystem::path metrics_path;
    std::string table;  // fixed-column text, also printed by the CLI
};

EvaluateOutcome run_evaluate(const PipelineConfig& cfg);

// synth: generate a cohort + manifest into out_dir.
void run_synth(const synth::CohortSpec& spec, const std::filesystem::path& out_dir);

// Convenience: every step in order (encode included).
EvaluateOutcome run_all(const PipelineConfig& cfg);

}  // namespace corrfabr::pipeline
