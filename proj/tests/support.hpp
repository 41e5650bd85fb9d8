#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numbers>
#include <random>
#include <vector>

#include "egolabel/energy.hpp"
#include "egolabel/pipeline.hpp"
#include "egolabel/synth.hpp"

namespace egolabel::testing {

inline Mat3 random_rotation(std::mt19937_64& rng) {
    std::normal_distribution<double> n(0.0, 1.0);
    const Vec3 w(n(rng), n(rng), n(rng));
    std::uniform_real_distribution<double> angle(0.0, 3.0);
    return RotationParam{w.normalized() * angle(rng)}.to_matrix();
}

inline RigidTransform random_transform(std::mt19937_64& rng, double spread = 500.0) {
    std::normal_distribution<double> n(0.0, spread);
    return {random_rotation(rng), Vec3(n(rng), n(rng), n(rng))};
}

inline std::vector<Vec3> random_points(std::mt19937_64& rng, std::size_t count, double spread = 300.0) {
    std::normal_distribution<double> n(0.0, spread);
    std::vector<Vec3> pts(count);
    for (auto& p : pts) p = Vec3(n(rng), n(rng), n(rng));
    return pts;
}

struct GradientCase {
    WindowObservations obs;
    WindowState state;
};

/// Small noisy window with a state perturbed away from ground truth; raw
/// rotation blocks are pushed off SO(3) so every term is active.
inline GradientCase gradient_case(std::uint64_t seed, std::size_t frames = 4) {
    SynthConfig cfg;
    cfg.frames = frames;
    cfg.seed = seed;
    cfg.motion = seed % 2 ? MotionKind::RandomSmooth : MotionKind::WalkCycle;
    const SynthScenario s = gen_scenario(cfg);
    GradientCase c;
    c.obs = window_observations(s.dataset, 0, frames);
    std::mt19937_64 rng(seed * 7919 + 13);
    std::normal_distribution<double> pose_noise(0.0, 15.0), rot_noise(0.0, 0.03), trans_noise(0.0, 40.0);
    std::uniform_real_distribution<double> scale(0.9, 1.1);
    for (std::size_t i = 0; i < frames; ++i) {
        Joints p = s.gt_poses.frames[i].joints;
        for (auto& j : p) j += Vec3(pose_noise(rng), pose_noise(rng), pose_noise(rng));
        c.state.poses.push_back(p);
        Mat3 r = s.gt_cameras[i].rotation;
        for (int a = 0; a < 9; ++a) r.data()[a] += rot_noise(rng);
        c.state.rotations.push_back(r);
        c.state.translations.push_back(s.gt_cameras[i].translation +
                                       Vec3(trans_noise(rng), trans_noise(rng), trans_noise(rng)));
    }
    c.state.slam_scale = scale(rng);
    return c;
}

/// Flattened gradient: poses, rotations (row-major), translations, slam scale.
inline std::vector<double> flat(const StateGradient& g) {
    std::vector<double> v;
    for (const auto& p : g.poses)
        for (const auto& j : p) v.insert(v.end(), {j.x(), j.y(), j.z()});
    for (const auto& r : g.rotations)
        for (int a = 0; a < 3; ++a)
            for (int b = 0; b < 3; ++b) v.push_back(r(a, b));
    for (const auto& t : g.translations) v.insert(v.end(), {t.x(), t.y(), t.z()});
    v.push_back(g.slam_scale);
    return v;
}

/// Pointers to every scalar variable of the state, in `flat` order, with the
/// finite-difference step for each (1e-4 of the variable's scale).
inline std::vector<std::pair<double*, double>> variables(WindowState& s) {
    std::vector<std::pair<double*, double>> v;
    constexpr double kRel = 1e-4;
    for (auto& p : s.poses)
        for (auto& j : p)
            for (int k = 0; k < 3; ++k) v.emplace_back(&j[k], kRel * 1000.0);
    for (auto& r : s.rotations)
        for (int a = 0; a < 3; ++a)
            for (int b = 0; b < 3; ++b) v.emplace_back(&r(a, b), kRel * 1.0);
    for (auto& t : s.translations)
        for (int k = 0; k < 3; ++k) v.emplace_back(&t[k], kRel * 1000.0);
    v.emplace_back(&s.slam_scale, kRel * 1.0);
    return v;
}

/// Central finite differences of f at s.
inline std::vector<double> fd_gradient(const std::function<double(const WindowState&)>& f, WindowState s) {
    std::vector<double> g;
    for (auto [ptr, h] : variables(s)) {
        const double x0 = *ptr;
        *ptr = x0 + h;
        const double fp = f(s);
        *ptr = x0 - h;
        const double fm = f(s);
        *ptr = x0;
        g.push_back((fp - fm) / (2.0 * h));
    }
    return g;
}

/// max_i |a_i - b_i| / max_i |b_i| (zero when both vanish).
inline double relative_error(const std::vector<double>& a, const std::vector<double>& b) {
    double diff = 0.0, mag = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        diff = std::max(diff, std::abs(a[i] - b[i]));
        mag = std::max({mag, std::abs(a[i]), std::abs(b[i])});
    }
    return mag > 0.0 ? diff / mag : 0.0;
}

inline PoseSequence detector_poses(const SequenceDataset& ds) {
    PoseSequence seq;
    for (const auto& f : ds.frames) {
        JointSet15 p = f.ego_3d;
        p.confidence.fill(1.0);
        seq.frames.push_back(p);
    }
    return seq;
}

/// Rotations on a 5-degree yaw/pitch/roll grid (ZYX order).
inline const std::vector<Mat3>& euler_grid() {
    static const std::vector<Mat3> grid = [] {
        std::vector<Mat3> out;
        const double step = 5.0 * std::numbers::pi / 180.0;
        for (int a = -36; a < 36; ++a)
            for (int b = -18; b <= 18; ++b)
                for (int c = -36; c < 36; ++c) {
                    out.push_back((Eigen::AngleAxisd(a * step, Vec3::UnitZ()) *
                                   Eigen::AngleAxisd(b * step, Vec3::UnitY()) *
                                   Eigen::AngleAxisd(c * step, Vec3::UnitX()))
                                      .toRotationMatrix());
                }
        return out;
    }();
    return grid;
}

/// Smallest sum of squared residuals over the rotation grid, with the optimal
/// translation for each grid rotation.
inline double grid_rigid_sse(const std::vector<Vec3>& src, const std::vector<Vec3>& tgt) {
    Vec3 cs = Vec3::Zero(), ct = Vec3::Zero();
    for (std::size_t i = 0; i < src.size(); ++i) {
        cs += src[i];
        ct += tgt[i];
    }
    cs /= double(src.size());
    ct /= double(src.size());
    Mat3 h = Mat3::Zero();
    double base = 0.0;
    for (std::size_t i = 0; i < src.size(); ++i) {
        h += (src[i] - cs) * (tgt[i] - ct).transpose();
        base += (src[i] - cs).squaredNorm() + (tgt[i] - ct).squaredNorm();
    }
    double best = std::numeric_limits<double>::infinity();
    for (const Mat3& r : euler_grid()) best = std::min(best, base - 2.0 * (r * h).trace());
    return best;
}

inline double rigid_sse(const std::vector<Vec3>& src, const std::vector<Vec3>& tgt, const Mat3& r,
                        const Vec3& t, double scale = 1.0) {
    double sse = 0.0;
    for (std::size_t i = 0; i < src.size(); ++i) sse += (tgt[i] - (scale * (r * src[i]) + t)).squaredNorm();
    return sse;
}

}  // namespace egolabel::testing
