#pragma once

#include <array>
#include <optional>

#include <Eigen/Core>
#include <Eigen/Geometry>

namespace egolabel {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Mat2 = Eigen::Matrix2d;
using Mat3 = Eigen::Matrix3d;
using Mat4 = Eigen::Matrix4d;

/// Rigid transform x -> R x + t. Translation is in millimeters.
///
/// While optimizing in raw-matrix mode the rotation block is not guaranteed to
/// be orthonormal; orthonormalized() projects it back onto SO(3).
struct RigidTransform {
    Mat3 rotation = Mat3::Identity();
    Vec3 translation = Vec3::Zero();

    static RigidTransform identity() { return {}; }
    static RigidTransform from_matrix(const Mat4& m);

    Vec3 apply(const Vec3& p) const { return rotation * p + translation; }
    Mat4 matrix() const;

    /// Inverse assuming an orthonormal rotation block.
    RigidTransform inverse() const;
    RigidTransform orthonormalized() const;
    bool is_orthonormal(double tol = 1e-9) const;
};

/// compose(a, b).apply(p) == a.apply(b.apply(p))
RigidTransform compose(const RigidTransform& a, const RigidTransform& b);
RigidTransform invert(const RigidTransform& t);

/// Geodesic distance between two rotations, radians.
double rotation_angle_between(const Mat3& a, const Mat3& b);

/// Nearest rotation in the Frobenius sense (polar decomposition, det +1).
Mat3 project_to_so3(const Mat3& m);

Mat3 skew(const Vec3& v);

/// Axis-angle rotation parameter (unit axis scaled by the angle in radians).
struct RotationParam {
    Vec3 axis_angle = Vec3::Zero();

    Mat3 to_matrix() const;
    static RotationParam from_matrix(const Mat3& r);

    /// d R / d axis_angle[k] for k = 0, 1, 2.
    std::array<Mat3, 3> matrix_derivatives() const;
};

struct PinholeModel {
    double fx = 1.0;
    double fy = 1.0;
    double cx = 0.0;
    double cy = 0.0;

    void validate() const;
};

/// Minimum camera-frame depth accepted by the pinhole projection, mm.
inline constexpr double kMinDepth = 1e-6;

/// Throws Error(BehindCamera) when the transformed point has z <= kMinDepth.
Vec2 project_pinhole(const PinholeModel& model, const RigidTransform& cam, const Vec3& point);
std::optional<Vec2> try_project_pinhole(const PinholeModel& model, const RigidTransform& cam,
                                        const Vec3& point);

/// Omnidirectional (Scaramuzza) fisheye model.
///
/// A pixel p maps to the camera ray (u', v', f(rho)) where (u', v') =
/// affine^-1 (p - center), rho = |(u', v')| and
/// f(rho) = a0 + a2 rho^2 + a3 rho^3 + a4 rho^4.
/// The sign of a0 selects which half-space counts as "in front".
struct FisheyeModel {
    std::array<double, 4> poly{};  // a0, a2, a3, a4
    Vec2 center = Vec2::Zero();
    Mat2 affine = Mat2::Identity();  // [[c, d], [e, 1]]
    double image_radius = 0.0;

    void validate() const;

    double radial(double rho) const;
    double radial_derivative(double rho) const;

    /// Synthetic default: equidistant-like lens, 1024x1024 image, ~195 deg field of view.
    static FisheyeModel default_calibration();
};

/// Throws Error(OutsideFieldOfView) when no root exists within image_radius.
Vec2 project_fisheye(const FisheyeModel& model, const Vec3& point);
std::optional<Vec2> try_project_fisheye(const FisheyeModel& model, const Vec3& point);

/// Projection plus its 2x3 Jacobian with respect to the camera-frame point.
struct FisheyeProjection {
    Vec2 pixel;
    Eigen::Matrix<double, 2, 3> jacobian;
};
std::optional<FisheyeProjection> project_fisheye_with_jacobian(const FisheyeModel& model,
                                                               const Vec3& point);

/// Point at Euclidean distance `distance` along the ray through `pixel`.
Vec3 unproject_fisheye(const FisheyeModel& model, const Vec2& pixel, double distance);

}  // namespace egolabel
