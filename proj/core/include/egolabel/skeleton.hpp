#pragma once

#include <array>
#include <cstddef>
#include <string_view>
#include <utility>
#include <vector>

#include "egolabel/geometry.hpp"

namespace egolabel {

inline constexpr std::size_t kNumJoints = 15;
inline constexpr std::size_t kNumBones = 14;

/// Joint ordering shared by every file format and array in the library.
enum class Joint : std::size_t {
    Neck = 0,
    RightShoulder,
    RightElbow,
    RightWrist,
    LeftShoulder,
    LeftElbow,
    LeftWrist,
    RightHip,
    RightKnee,
    RightAnkle,
    RightToe,
    LeftHip,
    LeftKnee,
    LeftAnkle,
    LeftToe,
};

constexpr std::size_t index(Joint j) { return static_cast<std::size_t>(j); }

std::string_view joint_name(std::size_t joint);

/// 15 joints in a camera frame (mm). Confidence 0 marks a missing detection.
struct JointSet15 {
    std::array<Vec3, kNumJoints> joints;
    std::array<double, kNumJoints> confidence;

    JointSet15() {
        joints.fill(Vec3::Zero());
        confidence.fill(1.0);
    }

    Vec3& operator[](std::size_t j) { return joints[j]; }
    const Vec3& operator[](std::size_t j) const { return joints[j]; }

    JointSet15 transformed(const RigidTransform& t) const;
};

struct Bone {
    std::size_t parent;
    std::size_t child;
};

/// Tree rooted at the neck. Bones are stored parent-before-child so a single
/// forward pass visits every joint after its parent.
struct BoneTopology {
    std::array<Bone, kNumBones> edges;
    std::array<double, kNumBones> reference_lengths;

    static BoneTopology standard();
    void validate() const;
};

struct PoseSequence {
    std::vector<JointSet15> frames;
    double frame_rate = 30.0;

    std::size_t size() const { return frames.size(); }
};

std::array<double, kNumBones> bone_lengths(const JointSet15& pose, const BoneTopology& topo);

/// Re-places every joint along its original bone direction at the reference
/// length, keeping the root (neck) fixed. Throws Error(DegenerateBone).
JointSet15 rescale_to_skeleton(const JointSet15& pose, const BoneTopology& topo);

/// Upright neutral pose built from the reference lengths, neck at the origin.
/// Body frame: x forward, y left, z up.
JointSet15 reference_pose(const BoneTopology& topo);

}  // namespace egolabel
