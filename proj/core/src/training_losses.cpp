#include "egolabel/training_losses.hpp"

#include <algorithm>
#include <cmath>

#include "egolabel/error.hpp"

namespace egolabel {

namespace {

double mse(std::span<const double> a, std::span<const double> b, const char* what) {
    if (a.size() != b.size() || a.empty()) {
        throw Error(ErrorCode::ShapeMismatch, std::string(what) + " tensors differ in shape or are empty");
    }
    double sum = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double d = a[i] - b[i];
        sum += d * d;
    }
    return sum / static_cast<double>(a.size());
}

double clamp_probability(double s, bool& clamped) {
    const double c = std::clamp(s, kProbabilityClamp, 1.0 - kProbabilityClamp);
    if (c != s) clamped = true;
    return c;
}

}  // namespace

double reconstruction_loss(std::span<const double> pred_heatmaps, std::span<const double> label_heatmaps,
                           std::span<const double> pred_distances, std::span<const double> label_distances) {
    return mse(pred_heatmaps, label_heatmaps, "heatmap") + mse(pred_distances, label_distances, "distance");
}

AdversarialLoss adversarial_loss(std::span<const double> scores_positive, std::span<const double> scores_negative) {
    if (scores_positive.empty() || scores_negative.empty()) {
        throw Error(ErrorCode::ShapeMismatch, "adversarial loss needs non-empty score sets");
    }
    AdversarialLoss out;
    double pos = 0.0;
    for (double s : scores_positive) pos += std::log(clamp_probability(s, out.clamped));
    double neg = 0.0;
    for (double s : scores_negative) neg += std::log(1.0 - clamp_probability(s, out.clamped));
    out.value = -pos / static_cast<double>(scores_positive.size()) - neg / static_cast<double>(scores_negative.size());
    return out;
}

}  // namespace egolabel
