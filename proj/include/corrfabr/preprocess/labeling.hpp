#pragma once

#include <cstddef>
#include <string>
#include <utility>
#include <vector>

#include "corrfabr/core/mask.hpp"

namespace corrfabr::preprocess {

enum class LesionLabel { indolent, aggressive };

// Aggressive means necrosis is present or the tumor grade is 3 or 4
// (Fuhrman and ISUP grades are treated as one 1-4 integer scale).
LesionLabel label_aggressiveness(int grade, bool necrosis);

std::string to_string(LesionLabel label);

// One lesion with its per-slice masks and the label derived from pathology.
struct LesionRecord {
    std::string patient_id;
    std::vector<std::pair<std::size_t, core::RegionMask>> slices;  // (slice index, [H,W] mask)
    int grade = 1;
    bool necrosis = false;
    LesionLabel label = LesionLabel::indolent;

    static LesionRecord make(std::string patient_id,
                             std::vector<std::pair<std::size_t, core::RegionMask>> slices,
                             int grade, bool necrosis);
};

}  // namespace corrfabr::preprocess
