#pragma once

#include <cstddef>
#include <vector>

#include "egolabel/skeleton.hpp"

namespace egolabel {

struct MetricResult {
    double mean = 0.0;    // mm, mean over frames of the per-frame mean joint error
    double median = 0.0;  // mm, median of per-frame errors (reporting only)
    std::size_t frames_used = 0;
    std::size_t frames_skipped = 0;
    std::vector<double> per_frame;  // NaN for skipped frames
};

/// Per-frame error after aligning pred onto gt. Joints where either side has
/// zero confidence are ignored. Returns NaN when the frame is degenerate.
double aligned_joint_error(const JointSet15& pred, const JointSet15& gt, bool with_scale = true);

/// Procrustes-aligned MPJPE, aligned per frame (scale included by default).
/// Throws Error(DimensionMismatch) on differing frame counts.
MetricResult pa_mpjpe(const PoseSequence& pred, const PoseSequence& gt, bool with_scale = true);

/// PA-MPJPE after re-targeting both sequences to the reference skeleton.
/// Frames with a degenerate bone on either side are skipped.
MetricResult ba_mpjpe(const PoseSequence& pred, const PoseSequence& gt, const BoneTopology& topo,
                      bool with_scale = true);

}  // namespace egolabel
