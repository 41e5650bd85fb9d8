#pragma once

#include <span>

namespace egolabel {

/// mse(pred_heatmaps, label_heatmaps) + mse(pred_distances, label_distances).
/// Inputs are flat tensors. Throws Error(ShapeMismatch) on differing or empty shapes.
double reconstruction_loss(std::span<const double> pred_heatmaps, std::span<const double> label_heatmaps,
                           std::span<const double> pred_distances, std::span<const double> label_distances);

inline constexpr double kProbabilityClamp = 1e-7;

struct AdversarialLoss {
    double value = 0.0;
    bool clamped = false;  // some score was pulled into [1e-7, 1 - 1e-7]
};

/// -mean(log s+) - mean(log(1 - s-)) for discriminator probabilities.
AdversarialLoss adversarial_loss(std::span<const double> scores_positive,
                                 std::span<const double> scores_negative);

}  // namespace egolabel
