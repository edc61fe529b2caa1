#pragma once

#include <string>
#include <vector>

#include "averify/evaluation.hpp"

namespace averify::testing {

/// A published result row: confusion matrix plus its printed three-decimal metrics.
struct ReferenceRow {
    std::string corpus;
    std::string method;
    double accuracy, kappa, f1;
    ConfusionMatrix matrix;
    bool non_optimizable = false;
    bool non_deterministic = false;
};

// in printed order (accuracy descending within each corpus)
inline const std::vector<ReferenceRow>& reference_rows() {
    static const std::vector<ReferenceRow> rows{
        {"reddit", "GLAD", 0.826, 0.653, 0.827, {579, 121, 122, 578}},
        {"reddit", "GI", 0.805, 0.610, 0.768, {451, 249, 24, 676}, false, true},
        {"reddit", "AVeer", 0.776, 0.553, 0.769, {521, 179, 134, 566}},
        {"reddit", "COAV", 0.770, 0.540, 0.736, {449, 251, 71, 629}},
        {"reddit", "OCCAV", 0.767, 0.534, 0.766, {533, 167, 159, 541}, true},
        {"reddit", "NNCD", 0.764, 0.529, 0.695, {376, 324, 6, 694}, true},
        {"reddit", "ProfileCNG", 0.728, 0.457, 0.732, {519, 181, 199, 501}},
        {"reddit", "CNG", 0.719, 0.437, 0.743, {569, 131, 263, 437}},
        {"reddit", "OCC-LOF", 0.701, 0.403, 0.731, {568, 132, 286, 414}},
        {"reddit", "MOCC", 0.683, 0.366, 0.624, {368, 332, 112, 588}},
        {"reddit", "Unmasking", 0.682, 0.364, 0.691, {497, 203, 242, 458}, false, true},
        {"reddit", "OCC-kNN", 0.671, 0.343, 0.601, {347, 353, 107, 593}},
        {"reddit", "OCC-SVM", 0.651, 0.301, 0.560, {311, 389, 100, 600}},
        {"reddit", "Distractorless", 0.639, 0.277, 0.715, {634, 66, 440, 260}, true},
        {"reddit", "OCC-IF", 0.501, 0.001, 0.612, {551, 149, 550, 150}, false, true},
        {"amazon", "GLAD", 0.858, 0.716, 0.859, {867, 133, 151, 849}},
        {"amazon", "AVeer", 0.816, 0.631, 0.811, {790, 210, 159, 841}},
        {"amazon", "GI", 0.784, 0.567, 0.761, {690, 310, 123, 877}, false, true},
        {"amazon", "COAV", 0.778, 0.556, 0.763, {716, 284, 160, 840}},
        {"amazon", "OCC-LOF", 0.769, 0.537, 0.779, {817, 183, 280, 720}},
        {"amazon", "OCCAV", 0.757, 0.514, 0.769, {811, 189, 297, 703}, true},
        {"amazon", "OCC-kNN", 0.734, 0.467, 0.674, {552, 448, 85, 915}},
        {"amazon", "Unmasking", 0.731, 0.462, 0.728, {719, 281, 257, 743}, false, true},
        {"amazon", "ProfileCNG", 0.722, 0.443, 0.719, {714, 286, 271, 729}},
        {"amazon", "CNG", 0.713, 0.426, 0.750, {863, 137, 437, 563}},
        {"amazon", "MOCC", 0.712, 0.424, 0.660, {559, 441, 135, 865}},
        {"amazon", "OCC-SVM", 0.677, 0.353, 0.560, {411, 589, 58, 942}},
        {"amazon", "NNCD", 0.604, 0.208, 0.349, {212, 788, 4, 996}, true},
        {"amazon", "Distractorless", 0.604, 0.207, 0.708, {960, 40, 753, 247}, true},
        {"amazon", "OCC-IF", 0.495, -0.011, 0.608, {785, 215, 796, 204}, false, true},
    };
    return rows;
}

struct ReferenceCheck {
    std::size_t matched = 0, total = 0;
    std::vector<std::string> mismatches;
};

/// Recomputes every printed metric from its matrix; tolerance ±0.0005.
inline ReferenceCheck check_reference_rows() {
    ReferenceCheck c;
    for (const auto& r : reference_rows()) {
        const MetricValues v = metrics_of(r.matrix);
        const std::pair<const char*, std::pair<double, double>> pairs[] = {
            {"accuracy", {v.accuracy, r.accuracy}}, {"kappa", {v.kappa, r.kappa}}, {"f1", {v.f1, r.f1}}};
        for (const auto& [name, got_want] : pairs) {
            ++c.total;
            if (std::abs(got_want.first - got_want.second) <= 0.0005 + 1e-12)
                ++c.matched;
            else
                c.mismatches.push_back(r.corpus + "/" + r.method + " " + name + ": computed " +
                                       std::to_string(got_want.first) + ", printed " + format3(got_want.second));
        }
    }
    return c;
}

}  // namespace averify::testing
