#pragma once

#include <cstdint>
#include <vector>

#include "egolabel/dataset.hpp"
#include "egolabel/skeleton.hpp"

namespace egolabel {

enum class MotionKind { WalkCycle, RandomSmooth };
enum class Occlusion { None, LowerBodyEgo, HandsExt };

struct NoiseConfig {
    double ego_3d = 30.0;  // mm, per coordinate
    double ego_2d = 2.0;   // px
    double ext_2d = 1.0;   // px
    double ext_3d = 20.0;  // mm

    static NoiseConfig none() { return {0.0, 0.0, 0.0, 0.0}; }
};

struct SynthConfig {
    std::size_t frames = 50;
    double frame_rate = 30.0;
    MotionKind motion = MotionKind::WalkCycle;
    Occlusion occlusion = Occlusion::None;
    std::uint64_t seed = 0;
    NoiseConfig noise;
    /// Multiplies every SLAM relative translation (1 = metric SLAM).
    double slam_translation_scale = 1.0;
};

struct SynthScenario {
    PoseSequence gt_poses;                  // egocentric camera frame
    std::vector<RigidTransform> gt_cameras; // egocentric -> external camera
    SequenceDataset dataset;
};

/// Joints hidden by each occlusion mode: lower body in the egocentric view,
/// wrists in the external view.
std::vector<std::size_t> occluded_joints(Occlusion occlusion);

/// Deterministic for a given config.
///
/// walk_cycle: with gait phase phi = 2 pi t (1 Hz) the right thigh pitches
/// 25 deg * sin(phi) from vertical, the knee flexes 5 deg + 35 deg *
/// max(0, sin(phi - pi/3)), the right upper arm swings -20 deg * sin(phi) with
/// a 15-30 deg elbow bend; the left side runs half a cycle behind. The body
/// advances at 1.2 m/s with 15 mm vertical bob and a 5 deg heading sway.
/// random_smooth: every limb angle is a seeded sum of three sinusoids
/// (0.3-1.5 Hz) around the neutral pose.
SynthScenario gen_scenario(const SynthConfig& config, const BoneTopology& topo = BoneTopology::standard());

/// Egocentric fisheye mounted 120 mm ahead of and 160 mm above the neck,
/// pitched 30 deg forward of straight down. Body frame: x forward, y left, z up.
RigidTransform body_from_ego_camera();

PinholeModel default_external_camera();

}  // namespace egolabel
