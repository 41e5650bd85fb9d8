#pragma once

#include <array>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "egolabel/dataset.hpp"
#include "egolabel/optimize.hpp"

namespace egolabel {

/// Square label grid covering [center - image_radius, center + image_radius]
/// of the fisheye image. Grid point (W/2, H/2) sits on the image center.
struct LabelGrid {
    int width = 64;
    int height = 64;
    double sigma = 2.5;  // grid cells

    double cell_size_x(const FisheyeModel& m) const { return 2.0 * m.image_radius / width; }
    double cell_size_y(const FisheyeModel& m) const { return 2.0 * m.image_radius / height; }
    Vec2 to_pixel(const FisheyeModel& m, const Vec2& grid) const;
    Vec2 to_grid(const FisheyeModel& m, const Vec2& pixel) const;
    void validate() const;
};

/// Heatmaps (joint-major, then row y, then column x) and camera distances for one pose.
struct EncodedLabel {
    std::vector<float> heatmaps;
    std::array<double, kNumJoints> distances{};
    std::array<bool, kNumJoints> valid{};  // false: joint outside the fisheye field of view

    float at(std::size_t joint, int x, int y, const LabelGrid& g) const {
        return heatmaps[(joint * static_cast<std::size_t>(g.height) + static_cast<std::size_t>(y)) *
                            static_cast<std::size_t>(g.width) + static_cast<std::size_t>(x)];
    }
};

EncodedLabel encode_label(const JointSet15& pose, const FisheyeModel& fisheye, const LabelGrid& grid);
std::vector<EncodedLabel> labels_to_heatmaps_distances(const std::vector<JointSet15>& poses,
                                                       const FisheyeModel& fisheye, const LabelGrid& grid);

/// Grid coordinates of the heatmap maximum (first maximum in row-major order).
Vec2 heatmap_argmax(const EncodedLabel& label, std::size_t joint, const LabelGrid& grid);

struct Window {
    std::size_t offset = 0;
    WindowObservations obs;
};

/// Offsets 0, stride, 2*stride, ... plus an end-anchored window covering any
/// remainder. Throws Error(SequenceTooShort) when length < frames.
std::vector<std::size_t> window_offsets(std::size_t length, std::size_t frames, std::size_t stride);
WindowObservations window_observations(const SequenceDataset& dataset, std::size_t offset, std::size_t frames);
std::vector<Window> segment(const SequenceDataset& dataset, std::size_t frames, std::size_t stride);

struct PipelineConfig {
    std::size_t window = 50;
    std::size_t stride = 50;
    int threads = 1;
    LabelGrid grid;
    OptimizerConfig optimizer;
};

struct WindowSummary {
    std::size_t offset = 0;
    std::size_t length = 0;
    bool ok = false;
    std::string error;
    int iterations = 0;
    bool converged = false;
    double initial_energy = 0.0;
    double final_energy = 0.0;
    int dropped = 0;
    std::vector<double> energy_trace;
    std::vector<std::array<double, kNumTerms>> term_trace;
};

struct FrameLabel {
    std::int64_t frame = 0;
    bool labeled = false;
    std::size_t window = 0;  // index into PseudoLabelSet::windows
    JointSet15 pose;
    RigidTransform camera;
    EncodedLabel encoded;
    std::vector<std::string> flags;
};

struct PseudoLabelSet {
    std::vector<FrameLabel> frames;
    std::vector<WindowSummary> windows;
    LabelGrid grid;

    double labeled_fraction() const;
    /// Labeled poses; unlabeled frames get zero confidence everywhere.
    PoseSequence poses(double frame_rate = 30.0) const;
};

/// Runs every window (in parallel when config.threads > 1), keeps for each
/// frame the window whose center is nearest (ties: earlier window) and encodes
/// heatmaps/distances. Failed windows leave their frames unlabeled.
PseudoLabelSet generate_pseudo_labels(const SequenceDataset& dataset, const EnergyWeights& weights,
                                      const BoneTopology& topo, const MotionPrior* prior,
                                      const PipelineConfig& config);

/// Pose estimator driven by the bootstrapping loop.
class PoseEstimator {
public:
    virtual ~PoseEstimator() = default;
    /// One pose per dataset frame.
    virtual std::vector<JointSet15> predict(const SequenceDataset& dataset) = 0;
    virtual void update(const PseudoLabelSet& labels) = 0;
};

/// Predicts the dataset's own egocentric detections; update is a no-op.
class PassThroughEstimator : public PoseEstimator {
public:
    std::vector<JointSet15> predict(const SequenceDataset& dataset) override;
    void update(const PseudoLabelSet&) override {}
};

/// Reference stand-in for a trained network: remembers poses and moves them
/// toward each new label set, stored = alpha * label + (1 - alpha) * stored.
class BlendingEstimator : public PoseEstimator {
public:
    explicit BlendingEstimator(double alpha = 0.5) : alpha_(alpha) {}
    std::vector<JointSet15> predict(const SequenceDataset& dataset) override;
    void update(const PseudoLabelSet& labels) override;

private:
    double alpha_;
    std::vector<JointSet15> stored_;
};

struct BootstrapResult {
    PseudoLabelSet labels;                // from the final iteration
    std::vector<double> label_pa_mpjpe;   // per iteration, when ground truth is given
    int optimizer_passes = 0;
};

/// Thrown when the estimator fails; carries the iteration it failed in.
class EstimatorFailure : public std::runtime_error {
public:
    EstimatorFailure(int iteration, const std::string& what)
        : std::runtime_error("estimator failed in bootstrap iteration " + std::to_string(iteration) + ": " + what),
          iteration_(iteration) {}
    int iteration() const noexcept { return iteration_; }

private:
    int iteration_;
};

BootstrapResult bootstrap(const SequenceDataset& dataset, PoseEstimator& estimator, const EnergyWeights& weights,
                          const BoneTopology& topo, const MotionPrior* prior, const PipelineConfig& config,
                          int max_iter, const PoseSequence* ground_truth = nullptr);

}  // namespace egolabel
