#pragma once
// Confidence-threshold out-of-distribution detection. The cut-off is the
// lower empirical (1 - q) quantile of max predictive probability on a
// calibration set; samples below it are out-of-distribution.
#include "scd/learner.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

namespace scd {

struct OodDetector {
    double threshold = 0.0;
    double quantile = 0.95;
    std::size_t calibration_size = 0;
};

/// Max predictive probability per row.
inline std::vector<double> max_confidence(const Model& model, const Matrix& features) {
    const Matrix p = predict_proba(model, features);
    std::vector<double> out(static_cast<std::size_t>(p.rows()));
    for (Eigen::Index r = 0; r < p.rows(); ++r) out[static_cast<std::size_t>(r)] = p.row(r).maxCoeff();
    return out;
}

/// Threshold from raw confidences: sorted[floor((n - 1) * (1 - q))].
inline OodDetector calibrate_confidences(std::vector<double> confidences, double q) {
    require(!confidences.empty(), "calibrate: empty calibration set");
    require(q > 0.0 && q < 1.0, "calibrate: quantile must be in (0,1)");
    std::sort(confidences.begin(), confidences.end());
    const auto n = confidences.size();
    const auto pos = static_cast<std::size_t>(std::floor(static_cast<double>(n - 1) * (1.0 - q)));
    return {confidences[std::min(pos, n - 1)], q, n};
}

inline OodDetector calibrate(const Model& model, const Matrix& calibration, double q = 0.95) {
    require(calibration.rows() > 0, "calibrate: empty calibration set");
    return calibrate_confidences(max_confidence(model, calibration), q);
}

struct OodPartition {
    IndexList in_dist;                 ///< positions into the pool
    std::vector<int> predicted_labels;  ///< argmax class, aligned with in_dist
    IndexList ood;
};

/// Split pool rows by confidence; a confidence equal to the threshold is in-distribution.
inline OodPartition partition(const OodDetector& detector, const Model& model, const Matrix& pool) {
    OodPartition out;
    if (pool.rows() == 0) return out;
    const Matrix p = predict_proba(model, pool);
    for (Eigen::Index r = 0; r < p.rows(); ++r) {
        Eigen::Index arg = 0;
        const double conf = p.row(r).maxCoeff(&arg);
        if (conf >= detector.threshold) {
            out.in_dist.push_back(static_cast<Index>(r));
            out.predicted_labels.push_back(static_cast<int>(arg));
        } else {
            out.ood.push_back(static_cast<Index>(r));
        }
    }
    return out;
}

}  // namespace scd
