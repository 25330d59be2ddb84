#include "corrfabr/pipeline/workdir.hpp"

#include <fstream>

#include <json.hpp>

#include "corrfabr/core/error.hpp"

namespace corrfabr::pipeline {

using nlohmann::json;

void Workdir::ensure_layout() const {
    for (const auto& dir : {root, preproc(), features(), pairs(), models(), predictions(),
                            reports(), stamps()}) {
        std::filesystem::create_directories(dir);
    }
}

WorkdirLock::WorkdirLock(const std::filesystem::path& root) {
    std::filesystem::create_directories(root);
    lock_path_ = root / ".lock";
    if (std::filesystem::exists(lock_path_)) {
        throw InputError("workdir is locked by another command: " + lock_path_.string());
    }
    std::ofstream os(lock_path_);
    if (!os) throw IoError("cannot create lock file: " + lock_path_.string());
    os << "locked\n";
}

WorkdirLock::~WorkdirLock() {
    std::error_code ec;
    std::filesystem::remove(lock_path_, ec);
}

void write_stamp(const Workdir& wd, const std::string& step, const std::string& config_hash,
                 const std::vector<std::string>& upstream_steps) {
    json upstream = json::object();
    for (const auto& u : upstream_steps) {
        std::ifstream is(wd.stamps() / (u + ".json"));
        if (!is) throw InputError("missing upstream stamp for step '" + u + "'");
        json j;
        is >> j;
        upstream[u] = j.at("config_hash");
    }
    json j;
    j["step"] = step;
    j["config_hash"] = config_hash;
    j["upstream"] = std::move(upstream);

    std::ofstream os(wd.stamps() / (step + ".json"), std::ios::trunc);
    if (!os) throw IoError("cannot write stamp for step '" + step + "'");
    os << j.dump(2) << "\n";
}

void require_stamp(const Workdir& wd, const std::string& step, const std::string& config_hash) {
    const auto path = wd.stamps() / (step + ".json");
    std::ifstream is(path);
    if (!is) {
        throw InputError("step '" + step + "' has not been run in this workdir (missing " +
                         path.string() + ")");
    }
    json j;
    try {
        is >> j;
    } catch (const json::exception&) {
        throw InputError("corrupt stamp for step '" + step + "'");
    }
    if (j.value("config_hash", std::string()) != config_hash) {
        throw InputError("step '" + step + "' was produced under a different config; rerun it");
    }
}

}  // namespace corrfabr::pipeline
