#include "egolabel/synth.hpp"

#include <cmath>
#include <random>

#include "egolabel/error.hpp"

namespace egolabel {

namespace {

constexpr double kDeg = M_PI / 180.0;

struct LimbAngles {
    // Index 0 = right side, 1 = left side. Radians.
    std::array<double, 2> arm_swing{}, arm_abduction{}, elbow{};
    std::array<double, 2> thigh{}, hip_abduction{}, knee{}, foot{};
};

struct BodyFrame {
    Vec3 root = Vec3::Zero();  // neck position in world, mm
    double heading = 0.0;      // yaw about world z
    LimbAngles limbs;
};

Mat3 yaw(double a) {
    Mat3 r;
    r << std::cos(a), -std::sin(a), 0.0,
         std::sin(a), std::cos(a), 0.0,
         0.0, 0.0, 1.0;
    return r;
}

JointSet15 body_pose(const LimbAngles& a, const BoneTopology& topo) {
    using J = Joint;
    std::array<Vec3, kNumJoints> dir;
    for (int s = 0; s < 2; ++s) {
        const double side = s == 0 ? -1.0 : 1.0;
        const auto shoulder = s == 0 ? J::RightShoulder : J::LeftShoulder;
        const auto elbow = s == 0 ? J::RightElbow : J::LeftElbow;
        const auto wrist = s == 0 ? J::RightWrist : J::LeftWrist;
        const auto hip = s == 0 ? J::RightHip : J::LeftHip;
        const auto knee = s == 0 ? J::RightKnee : J::LeftKnee;
        const auto ankle = s == 0 ? J::RightAnkle : J::LeftAnkle;
        const auto toe = s == 0 ? J::RightToe : J::LeftToe;

        dir[index(shoulder)] = Vec3(0.0, side, -0.15);
        dir[index(hip)] = Vec3(0.0, 0.2 * side, -1.0);

        const double ab = a.arm_abduction[s];
        const double sw = a.arm_swing[s];
        const double fore = sw + a.elbow[s];
        dir[index(elbow)] = Vec3(std::sin(sw) * std::cos(ab), side * std::sin(ab), -std::cos(sw) * std::cos(ab));
        dir[index(wrist)] = Vec3(std::sin(fore) * std::cos(ab), side * std::sin(ab), -std::cos(fore) * std::cos(ab));

        const double hb = a.hip_abduction[s];
        const double th = a.thigh[s];
        const double sh = th - a.knee[s];
        dir[index(knee)] = Vec3(std::sin(th) * std::cos(hb), side * std::sin(hb), -std::cos(th) * std::cos(hb));
        dir[index(ankle)] = Vec3(std::sin(sh) * std::cos(hb), side * std::sin(hb), -std::cos(sh) * std::cos(hb));
        dir[index(toe)] = Vec3(std::cos(a.foot[s]), 0.0, -std::sin(a.foot[s]));
    }
    JointSet15 pose;
    for (std::size_t e = 0; e < kNumBones; ++e) {
        const auto [p, c] = topo.edges[e];
        pose[c] = pose[p] + dir[c].normalized() * topo.reference_lengths[e];
    }
    return pose;
}

BodyFrame walk_frame(double t) {
    const double phi = 2.0 * M_PI * t;
    BodyFrame f;
    f.root = Vec3(1200.0 * t, 0.0, 1450.0 + 15.0 * std::sin(2.0 * phi));
    f.heading = 5.0 * kDeg * std::sin(0.5 * phi);
    for (int s = 0; s < 2; ++s) {
        const double p = phi + (s == 0 ? 0.0 : M_PI);
        f.limbs.thigh[s] = 25.0 * kDeg * std::sin(p);
        f.limbs.knee[s] = 5.0 * kDeg + 35.0 * kDeg * std::max(0.0, std::sin(p - M_PI / 3.0));
        f.limbs.hip_abduction[s] = 3.0 * kDeg;
        f.limbs.foot[s] = 20.0 * kDeg + 10.0 * kDeg * std::sin(p);
        f.limbs.arm_swing[s] = -20.0 * kDeg * std::sin(p);
        f.limbs.arm_abduction[s] = 8.0 * kDeg;
        f.limbs.elbow[s] = 22.5 * kDeg + 7.5 * kDeg * std::sin(p);
    }
    return f;
}

struct Sinusoids {
    std::array<double, 3> amp{}, freq{}, phase{};
    double base = 0.0;

    double at(double t) const {
        double v = base;
        for (int k = 0; k < 3; ++k) v += amp[k] * std::sin(2.0 * M_PI * freq[k] * t + phase[k]);
        return v;
    }
};

class RandomMotion {
public:
    explicit RandomMotion(std::mt19937_64& rng) {
        auto make = [&](double base, double amp) {
            std::uniform_real_distribution<double> a(0.2 * amp, amp), f(0.3, 1.5), p(0.0, 2.0 * M_PI);
            Sinusoids s;
            s.base = base;
            for (int k = 0; k < 3; ++k) {
                s.amp[k] = a(rng) / 3.0;
                s.freq[k] = f(rng);
                s.phase[k] = p(rng);
            }
            return s;
        };
        for (int s = 0; s < 2; ++s) {
            arm_swing_[s] = make(0.0, 50.0 * kDeg);
            arm_abduction_[s] = make(20.0 * kDeg, 30.0 * kDeg);
            elbow_[s] = make(40.0 * kDeg, 40.0 * kDeg);
            thigh_[s] = make(5.0 * kDeg, 30.0 * kDeg);
            hip_abduction_[s] = make(5.0 * kDeg, 8.0 * kDeg);
            knee_[s] = make(25.0 * kDeg, 25.0 * kDeg);
            foot_[s] = make(20.0 * kDeg, 10.0 * kDeg);
        }
        root_x_ = make(0.0, 600.0);
        root_y_ = make(0.0, 400.0);
        root_z_ = make(1400.0, 60.0);
        heading_ = make(0.0, 30.0 * kDeg);
    }

    BodyFrame at(double t) const {
        BodyFrame f;
        f.root = Vec3(root_x_.at(t), root_y_.at(t), root_z_.at(t));
        f.heading = heading_.at(t);
        for (int s = 0; s < 2; ++s) {
            f.limbs.arm_swing[s] = arm_swing_[s].at(t);
            f.limbs.arm_abduction[s] = arm_abduction_[s].at(t);
            f.limbs.elbow[s] = std::max(0.0, elbow_[s].at(t));
            f.limbs.thigh[s] = thigh_[s].at(t);
            f.limbs.hip_abduction[s] = hip_abduction_[s].at(t);
            f.limbs.knee[s] = std::max(0.0, knee_[s].at(t));
            f.limbs.foot[s] = foot_[s].at(t);
        }
        return f;
    }

private:
    std::array<Sinusoids, 2> arm_swing_, arm_abduction_, elbow_, thigh_, hip_abduction_, knee_, foot_;
    Sinusoids root_x_, root_y_, root_z_, heading_;
};

Vec3 gaussian3(std::mt19937_64& rng, double sigma) {
    if (sigma <= 0.0) return Vec3::Zero();
    std::normal_distribution<double> n(0.0, sigma);
    const double x = n(rng), y = n(rng), z = n(rng);
    return Vec3(x, y, z);
}

Vec2 gaussian2(std::mt19937_64& rng, double sigma) {
    if (sigma <= 0.0) return Vec2::Zero();
    std::normal_distribution<double> n(0.0, sigma);
    const double x = n(rng), y = n(rng);
    return Vec2(x, y);
}

RigidTransform random_rigid(std::mt19937_64& rng) {
    std::normal_distribution<double> n(0.0, 1.0);
    std::uniform_real_distribution<double> angle(0.0, M_PI), offset(-1000.0, 1000.0);
    Vec3 axis(n(rng), n(rng), n(rng));
    axis.normalize();
    const double a = angle(rng);
    RigidTransform t;
    t.rotation = RotationParam{axis * a}.to_matrix();
    const double x = offset(rng), y = offset(rng), z = offset(rng);
    t.translation = Vec3(x, y, z);
    return t;
}

}  // namespace

std::vector<std::size_t> occluded_joints(Occlusion occlusion) {
    using J = Joint;
    switch (occlusion) {
        case Occlusion::None: return {};
        case Occlusion::LowerBodyEgo:
            return {index(J::RightHip), index(J::RightKnee), index(J::RightAnkle), index(J::RightToe),
                    index(J::LeftHip),  index(J::LeftKnee),  index(J::LeftAnkle),  index(J::LeftToe)};
        case Occlusion::HandsExt: return {index(J::RightWrist), index(J::LeftWrist)};
    }
    return {};
}

RigidTransform body_from_ego_camera() {
    const double tilt = 30.0 * kDeg;
    const Vec3 z(std::sin(tilt), 0.0, -std::cos(tilt));
    const Vec3 x(0.0, -1.0, 0.0);
    const Vec3 y = z.cross(x);
    RigidTransform t;
    t.rotation.col(0) = x;
    t.rotation.col(1) = y;
    t.rotation.col(2) = z;
    t.translation = Vec3(120.0, 0.0, 160.0);
    return t;
}

PinholeModel default_external_camera() { return PinholeModel{1000.0, 1000.0, 640.0, 360.0}; }

SynthScenario gen_scenario(const SynthConfig& config, const BoneTopology& topo) {
    if (config.frames < 2) throw Error(ErrorCode::InvalidArgument, "a scenario needs at least two frames");
    if (!(config.frame_rate > 0.0)) throw Error(ErrorCode::InvalidArgument, "frame_rate must be positive");
    topo.validate();

    std::mt19937_64 rng(config.seed);
    const std::size_t n = config.frames;

    std::vector<BodyFrame> body(n);
    if (config.motion == MotionKind::WalkCycle) {
        for (std::size_t i = 0; i < n; ++i) body[i] = walk_frame(static_cast<double>(i) / config.frame_rate);
    } else {
        const RandomMotion motion(rng);
        for (std::size_t i = 0; i < n; ++i) body[i] = motion.at(static_cast<double>(i) / config.frame_rate);
    }

    // Static external camera 3.5 m to the right of the mean path, looking along +y.
    Vec3 mean_root = Vec3::Zero();
    for (const auto& b : body) mean_root += b.root;
    mean_root /= static_cast<double>(n);
    RigidTransform world_from_ext;
    world_from_ext.rotation.col(0) = Vec3(1.0, 0.0, 0.0);
    world_from_ext.rotation.col(1) = Vec3(0.0, 0.0, -1.0);
    world_from_ext.rotation.col(2) = Vec3(0.0, 1.0, 0.0);
    world_from_ext.translation = Vec3(mean_root.x(), mean_root.y() - 3500.0, 900.0);
    const RigidTransform ext_from_world = world_from_ext.inverse();
    const RigidTransform body_from_cam = body_from_ego_camera();
    const RigidTransform cam_from_body = body_from_cam.inverse();

    SynthScenario out;
    out.gt_poses.frame_rate = config.frame_rate;
    for (std::size_t i = 0; i < n; ++i) {
        const JointSet15 pose_body = body_pose(body[i].limbs, topo);
        out.gt_poses.frames.push_back(pose_body.transformed(cam_from_body));
        RigidTransform world_from_body{yaw(body[i].heading), body[i].root};
        out.gt_cameras.push_back(compose(ext_from_world, compose(world_from_body, body_from_cam)));
    }

    // Arbitrary rigid frame in which the external 3D detector reports poses.
    const RigidTransform ext3d_frame = random_rigid(rng);
    const auto ego_hidden = config.occlusion == Occlusion::LowerBodyEgo ? occluded_joints(config.occlusion)
                                                                        : std::vector<std::size_t>{};
    const auto ext_hidden = config.occlusion == Occlusion::HandsExt ? occluded_joints(config.occlusion)
                                                                    : std::vector<std::size_t>{};
    const PinholeModel pinhole = default_external_camera();
    const FisheyeModel fisheye = FisheyeModel::default_calibration();

    SequenceDataset& ds = out.dataset;
    ds.id = "synth-" + std::to_string(config.seed);
    ds.fisheye = fisheye;
    ds.pinhole = pinhole;
    ds.frame_rate = config.frame_rate;
    const char* tag = config.motion == MotionKind::WalkCycle ? "walk" : "random";

    for (std::size_t i = 0; i < n; ++i) {
        const JointSet15& gt = out.gt_poses.frames[i];
        const RigidTransform& cam = out.gt_cameras[i];
        FrameObservation f;
        f.index = static_cast<std::int64_t>(i);
        f.tag = tag;
        for (std::size_t j = 0; j < kNumJoints; ++j) {
            const auto ego_px = try_project_fisheye(fisheye, gt[j]);
            f.ego_2d.pixels[j] = (ego_px ? *ego_px : fisheye.center) + gaussian2(rng, config.noise.ego_2d);
            f.ego_2d.confidence[j] = ego_px ? 1.0 : 0.0;
            f.ego_3d[j] = gt[j] + gaussian3(rng, config.noise.ego_3d);

            const auto ext_px = try_project_pinhole(pinhole, cam, gt[j]);
            f.ext_2d.pixels[j] = (ext_px ? *ext_px : Vec2(pinhole.cx, pinhole.cy)) + gaussian2(rng, config.noise.ext_2d);
            f.ext_2d.confidence[j] = ext_px ? 1.0 : 0.0;
            f.ext_3d[j] = ext3d_frame.apply(cam.apply(gt[j])) + gaussian3(rng, config.noise.ext_3d);
        }
        for (std::size_t j : ego_hidden) f.ego_2d.confidence[j] = 0.0;
        for (std::size_t j : ext_hidden) f.ext_2d.confidence[j] = 0.0;
        // 3D detections carry the confidence of their view's 2D detection.
        f.ego_3d.confidence = f.ego_2d.confidence;
        f.ext_3d.confidence = f.ext_2d.confidence;
        if (i + 1 < n) {
            RigidTransform rel = compose(cam.inverse(), out.gt_cameras[i + 1]);
            rel.translation *= config.slam_translation_scale;
            f.slam_to_next = rel;
        }
        ds.frames.push_back(std::move(f));
    }
    return out;
}

}  // namespace egolabel
