#include "egolabel/align.hpp"

#include <cmath>
#include <limits>
#include <vector>

#include <Eigen/Dense>

#include "egolabel/error.hpp"

namespace egolabel {

namespace {

double weight_at(std::span<const double> weights, std::size_t i) {
    return weights.empty() ? 1.0 : weights[i];
}

}  // namespace

AlignmentResult procrustes(std::span<const Vec3> source, std::span<const Vec3> target,
                           std::span<const double> weights, bool with_scale) {
    const std::size_t n = source.size();
    if (target.size() != n || (!weights.empty() && weights.size() != n)) {
        throw Error(ErrorCode::DimensionMismatch, "procrustes inputs differ in length");
    }
    std::size_t active = 0;
    double total = 0.0;
    Vec3 mu_s = Vec3::Zero(), mu_t = Vec3::Zero();
    for (std::size_t i = 0; i < n; ++i) {
        const double w = weight_at(weights, i);
        if (w < 0.0) throw Error(ErrorCode::InvalidArgument, "negative procrustes weight");
        if (w > 0.0) ++active;
        total += w;
        mu_s += w * source[i];
        mu_t += w * target[i];
    }
    if (active < 3) throw Error(ErrorCode::InsufficientPoints, "procrustes needs >= 3 weighted points");
    mu_s /= total;
    mu_t /= total;

    Mat3 cross = Mat3::Zero();
    Mat3 scatter = Mat3::Zero();
    double var_s = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double w = weight_at(weights, i);
        if (w == 0.0) continue;
        const Vec3 ds = source[i] - mu_s;
        const Vec3 dt = target[i] - mu_t;
        cross += w * dt * ds.transpose();
        scatter += w * ds * ds.transpose();
        var_s += w * ds.squaredNorm();
    }
    cross /= total;
    scatter /= total;
    var_s /= total;

    Eigen::SelfAdjointEigenSolver<Mat3> eig(scatter, Eigen::EigenvaluesOnly);
    const Vec3 ev = eig.eigenvalues();  // ascending
    if (!(ev[2] > 1e-18) || ev[1] <= 1e-10 * ev[2]) {
        throw Error(ErrorCode::DegenerateConfiguration, "procrustes source points are collinear");
    }

    Eigen::JacobiSVD<Mat3> svd(cross, Eigen::ComputeFullU | Eigen::ComputeFullV);
    Vec3 sign = Vec3::Ones();
    if ((svd.matrixU() * svd.matrixV().transpose()).determinant() < 0.0) sign[2] = -1.0;

    AlignmentResult out;
    out.transform.rotation = svd.matrixU() * sign.asDiagonal() * svd.matrixV().transpose();
    out.scale = with_scale ? svd.singularValues().dot(sign) / var_s : 1.0;
    out.transform.translation = mu_t - out.scale * (out.transform.rotation * mu_s);

    double sq = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double w = weight_at(weights, i);
        if (w == 0.0) continue;
        sq += w * (target[i] - out.apply(source[i])).squaredNorm();
    }
    out.residual_rms = std::sqrt(sq / total);
    return out;
}

double reprojection_rms(std::span<const Vec3> points3d, std::span<const Vec2> pixels,
                        const PinholeModel& model, const RigidTransform& pose,
                        std::span<const double> weights) {
    double sq = 0.0, total = 0.0;
    for (std::size_t i = 0; i < points3d.size(); ++i) {
        const double w = weight_at(weights, i);
        if (w == 0.0) continue;
        const auto px = try_project_pinhole(model, pose, points3d[i]);
        if (!px) return std::numeric_limits<double>::infinity();
        sq += w * (*px - pixels[i]).squaredNorm();
        total += w;
    }
    return total > 0.0 ? std::sqrt(sq / total) : 0.0;
}

namespace {

RigidTransform dlt_pose(const std::vector<Vec3>& pts, const std::vector<Vec2>& normalized,
                        const std::vector<double>& w) {
    const std::size_t n = pts.size();
    // Hartley-style conditioning of the 3D points.
    Vec3 centroid = Vec3::Zero();
    for (const auto& p : pts) centroid += p;
    centroid /= static_cast<double>(n);
    double mean_dist = 0.0;
    for (const auto& p : pts) mean_dist += (p - centroid).norm();
    mean_dist /= static_cast<double>(n);
    const double s = std::sqrt(3.0) / mean_dist;

    Eigen::MatrixXd a(2 * n, 12);
    a.setZero();
    for (std::size_t i = 0; i < n; ++i) {
        const double sw = std::sqrt(w[i]);
        Eigen::RowVector4d x;
        x << s * (pts[i] - centroid).transpose(), 1.0;
        const double u = normalized[i].x(), v = normalized[i].y();
        a.block<1, 4>(2 * i, 0) = sw * x;
        a.block<1, 4>(2 * i, 8) = -sw * u * x;
        a.block<1, 4>(2 * i + 1, 4) = sw * x;
        a.block<1, 4>(2 * i + 1, 8) = -sw * v * x;
    }
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(a, Eigen::ComputeFullV);
    const Eigen::VectorXd h = svd.matrixV().col(11);
    Eigen::Matrix<double, 3, 4> p_norm;
    p_norm << h.segment<4>(0).transpose(), h.segment<4>(4).transpose(), h.segment<4>(8).transpose();

    // Undo conditioning: X_norm = s (X - c).
    Eigen::Matrix4d cond = Eigen::Matrix4d::Identity();
    cond.topLeftCorner<3, 3>() *= s;
    cond.topRightCorner<3, 1>() = -s * centroid;
    Eigen::Matrix<double, 3, 4> p = p_norm * cond;

    Mat3 m = p.leftCols<3>();
    if (m.determinant() < 0.0) {
        p = -p;
        m = -m;
    }
    Eigen::JacobiSVD<Mat3> msvd(m, Eigen::ComputeFullU | Eigen::ComputeFullV);
    const double scale = msvd.singularValues().mean();
    RigidTransform pose;
    pose.rotation = project_to_so3(m);
    pose.translation = p.col(3) / scale;
    return pose;
}

}  // namespace

PnpResult pnp_estimate(std::span<const Vec3> points3d, std::span<const Vec2> pixels,
                       const PinholeModel& model, std::span<const double> weights,
                       const PnpOptions& options) {
    model.validate();
    if (pixels.size() != points3d.size() || (!weights.empty() && weights.size() != points3d.size())) {
        throw Error(ErrorCode::DimensionMismatch, "pnp inputs differ in length");
    }
    std::vector<Vec3> pts;
    std::vector<Vec2> px, normalized;
    std::vector<double> w;
    for (std::size_t i = 0; i < points3d.size(); ++i) {
        const double wi = weight_at(weights, i);
        if (wi <= 0.0) continue;
        pts.push_back(points3d[i]);
        px.push_back(pixels[i]);
        normalized.emplace_back((pixels[i].x() - model.cx) / model.fx, (pixels[i].y() - model.cy) / model.fy);
        w.push_back(wi);
    }
    const std::size_t n = pts.size();
    if (n < 6) throw Error(ErrorCode::InsufficientPoints, "pnp needs >= 6 weighted correspondences");

    Vec3 centroid = Vec3::Zero();
    for (const auto& p : pts) centroid += p;
    centroid /= static_cast<double>(n);
    Mat3 scatter = Mat3::Zero();
    for (const auto& p : pts) scatter += (p - centroid) * (p - centroid).transpose();
    Eigen::SelfAdjointEigenSolver<Mat3> eig(scatter, Eigen::EigenvaluesOnly);
    const Vec3 ev = eig.eigenvalues().cwiseMax(0.0).cwiseSqrt();
    if (!(ev[2] > 0.0) || ev[0] < options.coplanarity_tolerance * ev[2]) {
        throw Error(ErrorCode::DegenerateConfiguration, "pnp 3D points are coplanar or collinear");
    }

    PnpResult result;
    result.pose = dlt_pose(pts, normalized, w);
    result.dlt_rms = reprojection_rms(pts, px, model, result.pose, w);

    auto cost_of = [&](const RigidTransform& pose) {
        double c = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const auto p = try_project_pinhole(model, pose, pts[i]);
            if (!p) return std::numeric_limits<double>::infinity();
            c += w[i] * (*p - px[i]).squaredNorm();
        }
        return c;
    };

    RigidTransform pose = result.pose;
    double cost = cost_of(pose);
    double damping = 1e-3;
    bool converged = false;
    int iter = 0;
    for (; iter < options.max_iterations && std::isfinite(cost); ++iter) {
        Eigen::Matrix<double, 6, 6> jtj = Eigen::Matrix<double, 6, 6>::Zero();
        Eigen::Matrix<double, 6, 1> jtr = Eigen::Matrix<double, 6, 1>::Zero();
        for (std::size_t i = 0; i < n; ++i) {
            const Vec3 pc = pose.apply(pts[i]);
            const double iz = 1.0 / pc.z();
            const Vec2 res(model.fx * pc.x() * iz + model.cx - px[i].x(),
                           model.fy * pc.y() * iz + model.cy - px[i].y());
            Eigen::Matrix<double, 2, 3> dproj;
            dproj << model.fx * iz, 0.0, -model.fx * pc.x() * iz * iz,
                     0.0, model.fy * iz, -model.fy * pc.y() * iz * iz;
            Eigen::Matrix<double, 3, 6> dpc;
            dpc.leftCols<3>() = -skew(pose.rotation * pts[i]);
            dpc.rightCols<3>() = Mat3::Identity();
            const Eigen::Matrix<double, 2, 6> j = dproj * dpc;
            jtj += w[i] * j.transpose() * j;
            jtr += w[i] * j.transpose() * res;
        }
        bool accepted = false;
        while (damping < 1e12) {
            Eigen::Matrix<double, 6, 6> lhs = jtj;
            lhs.diagonal() += damping * jtj.diagonal().cwiseMax(1e-12);
            const Eigen::Matrix<double, 6, 1> delta = -lhs.ldlt().solve(jtr);
            RigidTransform trial;
            trial.rotation = RotationParam{delta.head<3>()}.to_matrix() * pose.rotation;
            trial.translation = pose.translation + delta.tail<3>();
            const double trial_cost = cost_of(trial);
            if (trial_cost < cost) {
                const double decrease = cost - trial_cost;
                pose = trial;
                cost = trial_cost;
                damping = std::max(damping * 0.1, 1e-12);
                accepted = true;
                if (decrease <= 1e-14 * std::max(cost, 1e-300) || delta.norm() < 1e-12) converged = true;
                break;
            }
            damping *= 10.0;
        }
        if (!accepted) {
            // No descent possible from here: a local minimum at working precision.
            converged = true;
        }
        if (converged) {
            ++iter;
            break;
        }
    }
    result.pose = pose;
    result.iterations = iter;
    result.converged = converged;
    result.rms = reprojection_rms(pts, px, model, pose, w);
    return result;
}

}  // namespace egolabel
