#include "corrfabr/preprocess/labeling.hpp"

#include "corrfabr/core/error.hpp"

namespace corrfabr::preprocess {

LesionLabel label_aggressiveness(int grade, bool necrosis) {
    if (grade < 1 || grade > 4) {
        throw InputError("tumor grade must be in 1..4, got " + std::to_string(grade));
    }
    return (necrosis || grade >= 3) ? LesionLabel::aggressive : LesionLabel::indolent;
}

std::string to_string(LesionLabel label) {
    return label == LesionLabel::aggressive ? "aggressive" : "indolent";
}

LesionRecord LesionRecord::make(std::string patient_id,
                                std::vector<std::pair<std::size_t, core::RegionMask>> slices,
                                int grade, bool necrosis) {
    LesionRecord rec;
    rec.patient_id = std::move(patient_id);
    rec.slices = std::move(slices);
    rec.grade = grade;
    rec.necrosis = necrosis;
    rec.label = label_aggressiveness(grade, necrosis);
    return rec;
}

}  // namespace corrfabr::preprocess
