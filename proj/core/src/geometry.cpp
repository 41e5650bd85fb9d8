#include "egolabel/geometry.hpp"

#include <algorithm>
#include <cmath>

#include <Eigen/Dense>

#include "egolabel/error.hpp"

namespace egolabel {

const char* to_string(ErrorCode code) {
    switch (code) {
        case ErrorCode::BehindCamera: return "BehindCamera";
        case ErrorCode::OutsideFieldOfView: return "OutsideFieldOfView";
        case ErrorCode::DegenerateBone: return "DegenerateBone";
        case ErrorCode::DegenerateConfiguration: return "DegenerateConfiguration";
        case ErrorCode::InsufficientPoints: return "InsufficientPoints";
        case ErrorCode::NotConverged: return "NotConverged";
        case ErrorCode::InsufficientData: return "InsufficientData";
        case ErrorCode::DimensionMismatch: return "DimensionMismatch";
        case ErrorCode::InitializationFailure: return "InitializationFailure";
        case ErrorCode::SequenceTooShort: return "SequenceTooShort";
        case ErrorCode::ShapeMismatch: return "ShapeMismatch";
        case ErrorCode::SchemaError: return "SchemaError";
        case ErrorCode::InvalidArgument: return "InvalidArgument";
    }
    return "Unknown";
}

RigidTransform RigidTransform::from_matrix(const Mat4& m) {
    RigidTransform t;
    t.rotation = m.topLeftCorner<3, 3>();
    t.translation = m.topRightCorner<3, 1>();
    return t;
}

Mat4 RigidTransform::matrix() const {
    Mat4 m = Mat4::Identity();
    m.topLeftCorner<3, 3>() = rotation;
    m.topRightCorner<3, 1>() = translation;
    return m;
}

RigidTransform RigidTransform::inverse() const {
    RigidTransform inv;
    inv.rotation = rotation.transpose();
    inv.translation = -(inv.rotation * translation);
    return inv;
}

RigidTransform RigidTransform::orthonormalized() const {
    RigidTransform out = *this;
    out.rotation = project_to_so3(rotation);
    return out;
}

bool RigidTransform::is_orthonormal(double tol) const {
    return (rotation.transpose() * rotation - Mat3::Identity()).norm() < tol && rotation.determinant() > 0.0;
}

RigidTransform compose(const RigidTransform& a, const RigidTransform& b) {
    RigidTransform out;
    out.rotation = a.rotation * b.rotation;
    out.translation = a.rotation * b.translation + a.translation;
    return out;
}

RigidTransform invert(const RigidTransform& t) { return t.inverse(); }

Mat3 skew(const Vec3& v) {
    Mat3 s;
    s << 0.0, -v.z(), v.y(),
         v.z(), 0.0, -v.x(),
         -v.y(), v.x(), 0.0;
    return s;
}

namespace {

Vec3 vee_antisymmetric(const Mat3& m) {
    return Vec3(m(2, 1) - m(1, 2), m(0, 2) - m(2, 0), m(1, 0) - m(0, 1)) * 0.5;
}

}  // namespace

double rotation_angle_between(const Mat3& a, const Mat3& b) {
    const Mat3 rel = a.transpose() * b;
    const double s = vee_antisymmetric(rel).norm();
    const double c = 0.5 * (rel.trace() - 1.0);
    return std::atan2(s, c);
}

Mat3 project_to_so3(const Mat3& m) {
    Eigen::JacobiSVD<Mat3> svd(m, Eigen::ComputeFullU | Eigen::ComputeFullV);
    Mat3 d = Mat3::Identity();
    d(2, 2) = (svd.matrixU() * svd.matrixV().transpose()).determinant() < 0.0 ? -1.0 : 1.0;
    return svd.matrixU() * d * svd.matrixV().transpose();
}

Mat3 RotationParam::to_matrix() const {
    const double theta = axis_angle.norm();
    const Mat3 k = skew(axis_angle);
    if (theta < 1e-8) {
        return Mat3::Identity() + k + 0.5 * k * k;
    }
    const double a = std::sin(theta) / theta;
    const double b = (1.0 - std::cos(theta)) / (theta * theta);
    Mat3 r = Mat3::Identity() + a * k + b * k * k;
    return r;
}

RotationParam RotationParam::from_matrix(const Mat3& r) {
    const Vec3 v = vee_antisymmetric(r);
    const double s = v.norm();
    const double c = 0.5 * (r.trace() - 1.0);
    const double theta = std::atan2(s, c);
    RotationParam out;
    if (theta < 1e-10) {
        out.axis_angle = v;
        return out;
    }
    if (M_PI - theta < 1e-5) {
        // Near pi the antisymmetric part vanishes; recover the axis from R + I.
        const Mat3 b = 0.5 * (r + Mat3::Identity());
        int col = 0;
        b.diagonal().maxCoeff(&col);
        Vec3 axis = b.col(col) / std::sqrt(std::max(b(col, col), 1e-300));
        axis.normalize();
        if (axis.dot(v) < 0.0) axis = -axis;
        out.axis_angle = axis * theta;
        return out;
    }
    out.axis_angle = v * (theta / s);
    return out;
}

std::array<Mat3, 3> RotationParam::matrix_derivatives() const {
    std::array<Mat3, 3> d;
    const double theta2 = axis_angle.squaredNorm();
    if (theta2 < 1e-16) {
        const Mat3 w = skew(axis_angle);
        for (int k = 0; k < 3; ++k) {
            const Mat3 ek = skew(Vec3::Unit(k));
            d[k] = ek + 0.5 * (ek * w + w * ek);
        }
        return d;
    }
    const Mat3 r = to_matrix();
    const Mat3 w = skew(axis_angle);
    const Mat3 i_minus_r = Mat3::Identity() - r;
    for (int k = 0; k < 3; ++k) {
        const Vec3 c = axis_angle.cross(i_minus_r.col(k));
        d[k] = (axis_angle[k] * w + skew(c)) * r / theta2;
    }
    return d;
}

void PinholeModel::validate() const {
    if (!(fx > 0.0) || !(fy > 0.0)) {
        throw Error(ErrorCode::InvalidArgument, "pinhole focal lengths must be positive");
    }
}

std::optional<Vec2> try_project_pinhole(const PinholeModel& model, const RigidTransform& cam,
                                        const Vec3& point) {
    const Vec3 p = cam.apply(point);
    if (p.z() <= kMinDepth) return std::nullopt;
    return Vec2(model.fx * p.x() / p.z() + model.cx, model.fy * p.y() / p.z() + model.cy);
}

Vec2 project_pinhole(const PinholeModel& model, const RigidTransform& cam, const Vec3& point) {
    auto px = try_project_pinhole(model, cam, point);
    if (!px) throw Error(ErrorCode::BehindCamera, "point is not in front of the pinhole camera");
    return *px;
}

void FisheyeModel::validate() const {
    if (poly[0] == 0.0 || !std::isfinite(poly[0])) {
        throw Error(ErrorCode::InvalidArgument, "fisheye a0 must be non-zero");
    }
    if (!(image_radius > 0.0)) {
        throw Error(ErrorCode::InvalidArgument, "fisheye image_radius must be positive");
    }
    if (std::abs(affine.determinant()) < 1e-12) {
        throw Error(ErrorCode::InvalidArgument, "fisheye affine matrix is singular");
    }
}

double FisheyeModel::radial(double rho) const {
    const double r2 = rho * rho;
    return poly[0] + poly[1] * r2 + poly[2] * r2 * rho + poly[3] * r2 * r2;
}

double FisheyeModel::radial_derivative(double rho) const {
    return 2.0 * poly[1] * rho + 3.0 * poly[2] * rho * rho + 4.0 * poly[3] * rho * rho * rho;
}

FisheyeModel FisheyeModel::default_calibration() {
    // Taylor expansion of rho / tan(rho / k) for an equidistant lens with
    // k = 293 px/rad: a0 = k, a2 = -1/(3k), a4 = -1/(45 k^3).
    constexpr double k = 293.0;
    FisheyeModel m;
    m.poly = {k, -1.0 / (3.0 * k), 0.0, -1.0 / (45.0 * k * k * k)};
    m.center = Vec2(512.0, 512.0);
    m.affine = Mat2::Identity();
    m.image_radius = 512.0;
    return m;
}

namespace {

// Smallest root of f(rho) r - z rho on [0, image_radius].
std::optional<double> solve_fisheye_radius(const FisheyeModel& m, double r, double z) {
    auto g = [&](double rho) { return m.radial(rho) * r - z * rho; };
    auto dg = [&](double rho) { return m.radial_derivative(rho) * r - z; };

    constexpr int kScan = 32;
    const double g0 = g(0.0);
    double lo = 0.0, hi = -1.0;
    double glo = g0;
    for (int i = 1; i <= kScan; ++i) {
        const double rho = m.image_radius * static_cast<double>(i) / kScan;
        const double gv = g(rho);
        if (gv == 0.0) return rho;
        if ((gv > 0.0) != (g0 > 0.0)) {
            hi = rho;
            break;
        }
        lo = rho;
        glo = gv;
    }
    if (hi < 0.0) return std::nullopt;

    double ghi = g(hi);
    double rho = lo - glo * (hi - lo) / (ghi - glo);
    for (int iter = 0; iter < 100; ++iter) {
        const double gv = g(rho);
        if (gv == 0.0) return rho;
        if ((gv > 0.0) == (glo > 0.0)) {
            lo = rho;
            glo = gv;
        } else {
            hi = rho;
            ghi = gv;
        }
        const double d = dg(rho);
        double next = d != 0.0 ? rho - gv / d : 0.5 * (lo + hi);
        if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
        const double step = std::abs(next - rho);
        rho = next;
        if (step <= 1e-15 * std::max(1.0, rho) || hi - lo <= 1e-15 * std::max(1.0, rho)) break;
    }
    return rho;
}

}  // namespace

std::optional<FisheyeProjection> project_fisheye_with_jacobian(const FisheyeModel& m,
                                                               const Vec3& point) {
    const double norm = point.norm();
    if (norm < 1e-6) return std::nullopt;
    const double x = point.x(), y = point.y(), z = point.z();
    const double r = std::hypot(x, y);

    FisheyeProjection out;
    if (r < 1e-12 * norm) {
        if (z * m.poly[0] <= 0.0) return std::nullopt;
        const double scale = m.poly[0] / z;
        out.pixel = m.affine * Vec2(scale * x, scale * y) + m.center;
        Eigen::Matrix<double, 2, 3> local;
        local << scale, 0.0, -scale * x / z,
                 0.0, scale, -scale * y / z;
        out.jacobian = m.affine * local;
        return out;
    }

    const auto root = solve_fisheye_radius(m, r, z);
    if (!root) return std::nullopt;
    const double rho = *root;
    const double f = m.radial(rho);
    const double f_rho = m.radial_derivative(rho) * r - z;

    const double scale = rho / r;
    const double drho_dx = -f * (x / r) / f_rho;
    const double drho_dy = -f * (y / r) / f_rho;
    const double drho_dz = rho / f_rho;
    const double r3 = r * r * r;
    const double ds_dx = drho_dx / r - rho * x / r3;
    const double ds_dy = drho_dy / r - rho * y / r3;
    const double ds_dz = drho_dz / r;

    Eigen::Matrix<double, 2, 3> local;
    local << scale + x * ds_dx, x * ds_dy, x * ds_dz,
             y * ds_dx, scale + y * ds_dy, y * ds_dz;
    out.pixel = m.affine * Vec2(scale * x, scale * y) + m.center;
    out.jacobian = m.affine * local;
    return out;
}

std::optional<Vec2> try_project_fisheye(const FisheyeModel& model, const Vec3& point) {
    auto p = project_fisheye_with_jacobian(model, point);
    if (!p) return std::nullopt;
    return p->pixel;
}

Vec2 project_fisheye(const FisheyeModel& model, const Vec3& point) {
    auto px = try_project_fisheye(model, point);
    if (!px) throw Error(ErrorCode::OutsideFieldOfView, "point outside the fisheye field of view");
    return *px;
}

Vec3 unproject_fisheye(const FisheyeModel& model, const Vec2& pixel, double distance) {
    if (!(distance > 0.0)) throw Error(ErrorCode::InvalidArgument, "distance must be positive");
    const Vec2 q = model.affine.inverse() * (pixel - model.center);
    const double rho = q.norm();
    if (rho > model.image_radius * (1.0 + 1e-12)) {
        throw Error(ErrorCode::OutsideFieldOfView, "pixel beyond the fisheye image radius");
    }
    const Vec3 ray(q.x(), q.y(), model.radial(rho));
    return ray * (distance / ray.norm());
}

}  // namespace egolabel
