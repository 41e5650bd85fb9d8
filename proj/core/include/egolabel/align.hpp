#pragma once

#include <span>

#include "egolabel/geometry.hpp"

namespace egolabel {

struct AlignmentResult {
    double scale = 1.0;
    RigidTransform transform;  // target ~= scale * R * source + t
    double residual_rms = 0.0;

    Vec3 apply(const Vec3& p) const { return scale * (transform.rotation * p) + transform.translation; }
};

/// Weighted least-squares similarity (or rigid, with_scale = false) alignment
/// of `source` onto `target`. Reflections are rejected.
///
/// Throws Error(InsufficientPoints) when fewer than three points carry
/// positive weight and Error(DegenerateConfiguration) when the weighted source
/// points are collinear or coincident.
AlignmentResult procrustes(std::span<const Vec3> source, std::span<const Vec3> target,
                           std::span<const double> weights, bool with_scale);

struct PnpResult {
    RigidTransform pose;       // world -> camera
    double rms = 0.0;          // weighted reprojection RMS of `pose`, pixels
    double dlt_rms = 0.0;      // same for the linear initialization
    int iterations = 0;
    bool converged = false;    // false: refinement hit the iteration cap
};

struct PnpOptions {
    int max_iterations = 50;
    double coplanarity_tolerance = 1e-3;
};

/// DLT on normalized coordinates, projection onto SO(3), then damped
/// Gauss-Newton on reprojection error. Zero-weight points are ignored.
///
/// Throws Error(InsufficientPoints) with fewer than six weighted points and
/// Error(DegenerateConfiguration) for coplanar or collinear inputs.
PnpResult pnp_estimate(std::span<const Vec3> points3d, std::span<const Vec2> pixels,
                       const PinholeModel& model, std::span<const double> weights = {},
                       const PnpOptions& options = {});

/// Weighted reprojection RMS in pixels; points behind the camera count as infinite.
double reprojection_rms(std::span<const Vec3> points3d, std::span<const Vec2> pixels,
                        const PinholeModel& model, const RigidTransform& pose,
                        std::span<const double> weights = {});

}  // namespace egolabel
