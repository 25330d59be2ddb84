#include "corrfabr/io/manifest.hpp"

#include <fstream>

#include <json.hpp>

#include "corrfabr/core/error.hpp"

namespace corrfabr::io {

using nlohmann::json;

Manifest load_manifest(const std::filesystem::path& path) {
    std::ifstream is(path);
    if (!is) throw IoError("cannot open manifest: " + path.string());
    json j;
    try {
        is >> j;
    } catch (const json::exception& e) {
        throw InputError("malformed manifest JSON: " + std::string(e.what()));
    }

    Manifest m;
    m.base_dir = path.parent_path();
    try {
        m.mode = j.at("mode").get<std::string>();
        for (const auto& p : j.at("patients")) {
            PatientEntry e;
            e.patient_id = p.at("patient_id").get<std::string>();
            for (const auto& r : p.at("radiology")) e.radiology.push_back(r.get<std::string>());
            e.lesion_mask = p.at("lesion_mask").get<std::string>();
            if (p.contains("organ_mask")) e.organ_mask = p.at("organ_mask").get<std::string>();
            for (const auto& r : p.at("pathology")) e.pathology.push_back(r.get<std::string>());
            if (p.contains("pathology_lesion_mask")) {
                e.pathology_lesion_mask = p.at("pathology_lesion_mask").get<std::string>();
            }
            e.grade = p.at("grade").get<int>();
            e.necrosis = p.at("necrosis").get<bool>();
            if (e.radiology.empty()) {
                throw InputError("patient " + e.patient_id + " has no radiology volumes");
            }
            m.patients.push_back(std::move(e));
        }
    } catch (const json::exception& e) {
        throw InputError("manifest is missing required keys: " + std::string(e.what()));
    }
    return m;
}

void save_manifest(const Manifest& manifest, const std::filesystem::path& path) {
    json patients = json::array();
    for (const auto& e : manifest.patients) {
        json p;
        p["patient_id"] = e.patient_id;
        p["radiology"] = e.radiology;
        p["lesion_mask"] = e.lesion_mask;
        if (!e.organ_mask.empty()) p["organ_mask"] = e.organ_mask;
        p["pathology"] = e.pathology;
        if (!e.pathology_lesion_mask.empty()) p["pathology_lesion_mask"] = e.pathology_lesion_mask;
        p["grade"] = e.grade;
        p["necrosis"] = e.necrosis;
        patients.push_back(std::move(p));
    }
    json j;
    j["mode"] = manifest.mode;
    j["patients"] = std::move(patients);

    std::ofstream os(path, std::ios::trunc);
    if (!os) throw IoError("cannot write manifest: " + path.string());
    os << j.dump(2) << "\n";
    if (!os) throw IoError("manifest write failed: " + path.string());
}

}  // namespace corrfabr::io
