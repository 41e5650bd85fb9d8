#pragma once

#include <array>
#include <cstddef>
#include <optional>
#include <string_view>
#include <vector>

#include "egolabel/geometry.hpp"
#include "egolabel/skeleton.hpp"

namespace egolabel {

using Joints = std::array<Vec3, kNumJoints>;

/// The eight terms of the window objective, in output/column order.
enum class Term : std::size_t {
    ReprojEgo = 0,
    ReprojExt,
    PoseEgo,
    PoseExt,
    Smooth,
    Bone,
    CamConsistency,
    CamOrth,
};
inline constexpr std::size_t kNumTerms = 8;
std::string_view term_name(Term t);
std::string_view term_name(std::size_t t);

/// Translations inside the camera-consistency term are compared in meters.
inline constexpr double kConsistencyLengthScale = 1e-3;

struct EnergyWeights {
    double lambda_reproj_ego = 1.0;
    double lambda_reproj_ext = 1.0;
    double lambda_pose_ego = 1.0;
    double lambda_pose_ext = 1.0;
    double lambda_smooth = 1.0;
    double lambda_bone = 1.0;
    double lambda_cam_consistency = 1.0;
    double lambda_cam_orth = 1.0;

    double operator[](Term t) const;
    double& operator[](Term t);
    void validate() const;

    /// Egocentric-only ablation: external-view and camera terms zeroed.
    EnergyWeights without_external() const;
};

struct Detection2D {
    std::array<Vec2, kNumJoints> pixels;
    std::array<double, kNumJoints> confidence;

    Detection2D() {
        pixels.fill(Vec2::Zero());
        confidence.fill(1.0);
    }
};

/// Everything the objective consumes for one window of B frames.
struct WindowObservations {
    std::vector<Detection2D> ego_2d;
    std::vector<JointSet15> ego_3d_init;
    std::vector<Detection2D> ext_2d;
    std::vector<JointSet15> ext_3d;
    /// slam_rel[i] maps frame i+1 egocentric coordinates into frame i; absent pairs are skipped.
    std::vector<std::optional<RigidTransform>> slam_rel;
    FisheyeModel fisheye;
    PinholeModel pinhole;

    std::size_t size() const { return ego_3d_init.size(); }
    void validate() const;
};

/// Optimization variables: per-frame poses in the egocentric camera frame and
/// per-frame egocentric camera poses in the external camera frame.
struct WindowState {
    std::vector<Joints> poses;
    std::vector<Mat3> rotations;
    std::vector<Vec3> translations;
    double slam_scale = 1.0;

    std::size_t size() const { return poses.size(); }
    RigidTransform camera(std::size_t i) const { return {rotations[i], translations[i]}; }
    void validate() const;
};

/// Same layout as WindowState; every entry is dE/d(variable).
struct StateGradient {
    std::vector<Joints> poses;
    std::vector<Mat3> rotations;
    std::vector<Vec3> translations;
    double slam_scale = 0.0;

    static StateGradient zeros(std::size_t frames);
    void add_scaled(const StateGradient& other, double factor);
};

struct TermEvaluation {
    double value = 0.0;
    StateGradient gradient;
    int dropped = 0;  // residuals (joints or frames) skipped for this term
};

TermEvaluation e_reproj_ego(const WindowState& state, const WindowObservations& obs);
TermEvaluation e_reproj_ext(const WindowState& state, const WindowObservations& obs);
TermEvaluation e_pose_ego(const WindowState& state, const WindowObservations& obs);
/// Joints weighted by the external 3D confidence; the state pose is complete.
TermEvaluation e_pose_ext(const WindowState& state, const WindowObservations& obs);
TermEvaluation e_smooth(const WindowState& state);
TermEvaluation e_bone(const WindowState& state, const BoneTopology& topo);
TermEvaluation e_cam_consistency(const WindowState& state, const WindowObservations& obs);
TermEvaluation e_cam_orth(const WindowState& state);

TermEvaluation evaluate_term(Term term, const WindowState& state, const WindowObservations& obs,
                             const BoneTopology& topo);

struct EnergyEvaluation {
    double total = 0.0;
    std::array<double, kNumTerms> terms{};  // unweighted
    std::array<int, kNumTerms> dropped{};
    StateGradient gradient;
};

EnergyEvaluation total_energy(const WindowState& state, const WindowObservations& obs,
                              const EnergyWeights& weights, const BoneTopology& topo);

}  // namespace egolabel
