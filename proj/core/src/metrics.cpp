#include "egolabel/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "egolabel/align.hpp"
#include "egolabel/error.hpp"

namespace egolabel {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

MetricResult summarize(std::vector<double> per_frame) {
    MetricResult r;
    std::vector<double> valid;
    for (double e : per_frame) {
        if (std::isnan(e)) {
            ++r.frames_skipped;
        } else {
            valid.push_back(e);
        }
    }
    r.frames_used = valid.size();
    if (!valid.empty()) {
        double sum = 0.0;
        for (double e : valid) sum += e;
        r.mean = sum / static_cast<double>(valid.size());
        std::sort(valid.begin(), valid.end());
        const std::size_t m = valid.size() / 2;
        r.median = valid.size() % 2 ? valid[m] : 0.5 * (valid[m - 1] + valid[m]);
    } else {
        r.mean = kNaN;
        r.median = kNaN;
    }
    r.per_frame = std::move(per_frame);
    return r;
}

}  // namespace

double aligned_joint_error(const JointSet15& pred, const JointSet15& gt, bool with_scale) {
    std::array<double, kNumJoints> w{};
    for (std::size_t j = 0; j < kNumJoints; ++j) {
        w[j] = (pred.confidence[j] > 0.0 && gt.confidence[j] > 0.0) ? 1.0 : 0.0;
    }
    bool identical = true;
    for (std::size_t j = 0; j < kNumJoints; ++j) {
        if (w[j] > 0.0 && pred[j] != gt[j]) identical = false;
    }
    AlignmentResult a;
    try {
        a = procrustes(pred.joints, gt.joints, w, with_scale);
    } catch (const Error&) {
        return kNaN;
    }
    if (identical) return 0.0;
    double sum = 0.0;
    int count = 0;
    for (std::size_t j = 0; j < kNumJoints; ++j) {
        if (w[j] == 0.0) continue;
        sum += (a.apply(pred[j]) - gt[j]).norm();
        ++count;
    }
    return sum / count;
}

MetricResult pa_mpjpe(const PoseSequence& pred, const PoseSequence& gt, bool with_scale) {
    if (pred.size() != gt.size()) throw Error(ErrorCode::DimensionMismatch, "pred and gt frame counts differ");
    std::vector<double> per_frame(pred.size());
    for (std::size_t i = 0; i < pred.size(); ++i) {
        per_frame[i] = aligned_joint_error(pred.frames[i], gt.frames[i], with_scale);
    }
    return summarize(std::move(per_frame));
}

MetricResult ba_mpjpe(const PoseSequence& pred, const PoseSequence& gt, const BoneTopology& topo,
                      bool with_scale) {
    if (pred.size() != gt.size()) throw Error(ErrorCode::DimensionMismatch, "pred and gt frame counts differ");
    std::vector<double> per_frame(pred.size());
    for (std::size_t i = 0; i < pred.size(); ++i) {
        try {
            per_frame[i] = aligned_joint_error(rescale_to_skeleton(pred.frames[i], topo),
                                               rescale_to_skeleton(gt.frames[i], topo), with_scale);
        } catch (const Error& e) {
            if (e.code() != ErrorCode::DegenerateBone) throw;
            per_frame[i] = kNaN;
        }
    }
    return summarize(std::move(per_frame));
}

}  // namespace egolabel
