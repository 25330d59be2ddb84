#pragma once

#include <filesystem>
#include <string>
#include <vector>

namespace corrfabr::pipeline {

// Workdir layout: preproc/, features/, pairs/, models/, predictions/,
// reports/ plus content-addressed step stamps under reports/stamps/.
struct Workdir {
    std::filesystem::path root;

    std::filesystem::path preproc() const { return root / "preproc"; }
    std::filesystem::path features() const { return root / "features"; }
    std::filesystem::path pairs() const { return root / "pairs"; }
    std::filesystem::path models() const { return root / "models"; }
    std::filesystem::path predictions() const { return root / "predictions"; }
    std::filesystem::path reports() const { return root / "reports"; }
    std::filesystem::path stamps() const { return reports() / "stamps"; }

    void ensure_layout() const;
};

// One command owns the workdir at a time.
class WorkdirLock {
public:
    explicit WorkdirLock(const std::filesystem::path& root);
    ~WorkdirLock();
    WorkdirLock(const WorkdirLock&) = delete;
    WorkdirLock& operator=(const WorkdirLock&) = delete;

private:
    std::filesystem::path lock_path_;
};

// Stamps record the config hash a step ran under plus its upstream hashes, so
// downstream steps can verify their inputs exist and match.
void write_stamp(const Workdir& wd, const std::string& step, const std::string& config_hash,
                 const std::vector<std::string>& upstream_steps);

// Throws InputError when the stamp is missing or was produced under a
// different config hash.
void require_stamp(const Workdir& wd, const std::string& step, const std::string& config_hash);

}  // namespace corrfabr::pipeline
