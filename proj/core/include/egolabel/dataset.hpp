#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "egolabel/energy.hpp"

namespace egolabel {

/// Detector outputs for one synchronized egocentric/external frame pair.
struct FrameObservation {
    std::int64_t index = 0;
    Detection2D ego_2d;
    JointSet15 ego_3d;
    Detection2D ext_2d;
    JointSet15 ext_3d;
    /// Maps the next frame's egocentric coordinates into this frame's; absent
    /// when SLAM lost track (and always absent on the last frame).
    std::optional<RigidTransform> slam_to_next;
    std::string tag;
};

struct SequenceDataset {
    std::string id;
    std::vector<FrameObservation> frames;
    FisheyeModel fisheye;
    PinholeModel pinhole;
    double frame_rate = 30.0;

    std::size_t size() const { return frames.size(); }
    /// Throws Error(SchemaError) on non-increasing frame indices.
    void validate() const;
};

}  // namespace egolabel
