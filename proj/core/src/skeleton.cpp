#include "egolabel/skeleton.hpp"

#include <string>

#include "egolabel/error.hpp"

namespace egolabel {

namespace {

constexpr std::array<std::string_view, kNumJoints> kJointNames = {
    "neck",       "right_shoulder", "right_elbow", "right_wrist", "left_shoulder",
    "left_elbow", "left_wrist",     "right_hip",   "right_knee",  "right_ankle",
    "right_toe",  "left_hip",       "left_knee",   "left_ankle",  "left_toe",
};

}  // namespace

std::string_view joint_name(std::size_t joint) { return kJointNames.at(joint); }

JointSet15 JointSet15::transformed(const RigidTransform& t) const {
    JointSet15 out = *this;
    for (auto& j : out.joints) j = t.apply(j);
    return out;
}

BoneTopology BoneTopology::standard() {
    using J = Joint;
    BoneTopology topo;
    topo.edges = {{
        {index(J::Neck), index(J::RightShoulder)},
        {index(J::RightShoulder), index(J::RightElbow)},
        {index(J::RightElbow), index(J::RightWrist)},
        {index(J::Neck), index(J::LeftShoulder)},
        {index(J::LeftShoulder), index(J::LeftElbow)},
        {index(J::LeftElbow), index(J::LeftWrist)},
        {index(J::Neck), index(J::RightHip)},
        {index(J::RightHip), index(J::RightKnee)},
        {index(J::RightKnee), index(J::RightAnkle)},
        {index(J::RightAnkle), index(J::RightToe)},
        {index(J::Neck), index(J::LeftHip)},
        {index(J::LeftHip), index(J::LeftKnee)},
        {index(J::LeftKnee), index(J::LeftAnkle)},
        {index(J::LeftAnkle), index(J::LeftToe)},
    }};
    // mm: neck-shoulder, upper arm, forearm, neck-hip, thigh, shin, foot.
    topo.reference_lengths = {180, 280, 250, 180, 280, 250, 520, 440, 430, 150, 520, 440, 430, 150};
    return topo;
}

void BoneTopology::validate() const {
    std::array<bool, kNumJoints> reached{};
    reached[0] = true;
    for (std::size_t e = 0; e < kNumBones; ++e) {
        const auto [p, c] = edges[e];
        if (p >= kNumJoints || c >= kNumJoints || !reached[p] || reached[c]) {
            throw Error(ErrorCode::InvalidArgument,
                        "bone topology must be a neck-rooted tree listed parent-first (edge " +
                            std::to_string(e) + ")");
        }
        if (!(reference_lengths[e] > 0.0)) {
            throw Error(ErrorCode::InvalidArgument, "reference bone lengths must be positive");
        }
        reached[c] = true;
    }
}

std::array<double, kNumBones> bone_lengths(const JointSet15& pose, const BoneTopology& topo) {
    std::array<double, kNumBones> out{};
    for (std::size_t e = 0; e < kNumBones; ++e) {
        out[e] = (pose[topo.edges[e].child] - pose[topo.edges[e].parent]).norm();
    }
    return out;
}

JointSet15 rescale_to_skeleton(const JointSet15& pose, const BoneTopology& topo) {
    JointSet15 out = pose;
    for (std::size_t e = 0; e < kNumBones; ++e) {
        const auto [p, c] = topo.edges[e];
        const Vec3 bone = pose[c] - pose[p];
        const double len = bone.norm();
        if (len < 1e-6) {
            throw Error(ErrorCode::DegenerateBone, "bone " + std::string(joint_name(p)) + "-" +
                                                       std::string(joint_name(c)) + " has zero length");
        }
        out[c] = out[p] + bone * (topo.reference_lengths[e] / len);
    }
    return out;
}

JointSet15 reference_pose(const BoneTopology& topo) {
    using J = Joint;
    // Unit bone directions of a relaxed standing pose (x forward, y left, z up).
    std::array<Vec3, kNumJoints> dir;
    dir[index(J::RightShoulder)] = Vec3(0.0, -1.0, -0.15);
    dir[index(J::LeftShoulder)] = Vec3(0.0, 1.0, -0.15);
    dir[index(J::RightElbow)] = Vec3(0.0, -0.1, -1.0);
    dir[index(J::LeftElbow)] = Vec3(0.0, 0.1, -1.0);
    dir[index(J::RightWrist)] = Vec3(0.2, 0.0, -1.0);
    dir[index(J::LeftWrist)] = Vec3(0.2, 0.0, -1.0);
    dir[index(J::RightHip)] = Vec3(0.0, -0.2, -1.0);
    dir[index(J::LeftHip)] = Vec3(0.0, 0.2, -1.0);
    dir[index(J::RightKnee)] = Vec3(0.0, 0.0, -1.0);
    dir[index(J::LeftKnee)] = Vec3(0.0, 0.0, -1.0);
    dir[index(J::RightAnkle)] = Vec3(0.0, 0.0, -1.0);
    dir[index(J::LeftAnkle)] = Vec3(0.0, 0.0, -1.0);
    dir[index(J::RightToe)] = Vec3(1.0, 0.0, -0.3);
    dir[index(J::LeftToe)] = Vec3(1.0, 0.0, -0.3);

    JointSet15 pose;
    for (std::size_t e = 0; e < kNumBones; ++e) {
        const auto [p, c] = topo.edges[e];
        pose[c] = pose[p] + dir[c].normalized() * topo.reference_lengths[e];
    }
    return pose;
}

}  // namespace egolabel
