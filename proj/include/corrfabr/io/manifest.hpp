#pragma once

#include <filesystem>
#include <string>
#include <vector>

namespace corrfabr::io {

// One dataset case. Paths are relative to the manifest's directory and point
// at CFTN tensor files: radiology volumes [D,H,W] (one per sequence), masks
// [D,H,W] with 0/1 values, pathology images [H,W,3] with values in [0,255].
struct PatientEntry {
    std::string patient_id;
    std::vector<std::string> radiology;
    std::string lesion_mask;
    std::string organ_mask;               // optional
    std::vector<std::string> pathology;
    std::string pathology_lesion_mask;    // optional
    int grade = 1;
    bool necrosis = false;
};

struct Manifest {
    std::string mode;  // "kidney" or "prostate-sim"
    std::vector<PatientEntry> patients;
    std::filesystem::path base_dir;  // directory the manifest was loaded from
};

Manifest load_manifest(const std::filesystem::path& path);
void save_manifest(const Manifest& manifest, const std::filesystem::path& path);

}  // namespace corrfabr::io
