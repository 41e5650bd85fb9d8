#include "egolabel/prior.hpp"

#include <string>

#include <Eigen/Dense>

#include "egolabel/error.hpp"

namespace egolabel {

Eigen::VectorXd flatten(const std::vector<Joints>& poses) {
    Eigen::VectorXd v(static_cast<Eigen::Index>(poses.size() * kNumJoints * 3));
    Eigen::Index k = 0;
    for (const auto& frame : poses) {
        for (const auto& j : frame) {
            v[k++] = j.x();
            v[k++] = j.y();
            v[k++] = j.z();
        }
    }
    return v;
}

std::vector<Joints> unflatten(const Eigen::VectorXd& v, std::size_t frames) {
    if (static_cast<std::size_t>(v.size()) != frames * kNumJoints * 3) {
        throw Error(ErrorCode::DimensionMismatch, "flat pose vector has " + std::to_string(v.size()) + " entries");
    }
    std::vector<Joints> poses(frames);
    Eigen::Index k = 0;
    for (auto& frame : poses) {
        for (auto& j : frame) {
            j = Vec3(v[k], v[k + 1], v[k + 2]);
            k += 3;
        }
    }
    return poses;
}

MotionPrior MotionPrior::identity(std::size_t frames) {
    MotionPrior p;
    p.kind_ = Kind::Identity;
    p.frames_ = frames;
    return p;
}

MotionPrior MotionPrior::linear_subspace(std::size_t frames, Eigen::VectorXd mean, Eigen::MatrixXd basis) {
    const auto dim = static_cast<Eigen::Index>(frames * kNumJoints * 3);
    if (mean.size() != dim || basis.cols() != dim || basis.rows() == 0) {
        throw Error(ErrorCode::DimensionMismatch, "prior mean/basis do not match " + std::to_string(frames) + " frames");
    }
    const Eigen::MatrixXd gram = basis * basis.transpose();
    if ((gram - Eigen::MatrixXd::Identity(gram.rows(), gram.cols())).cwiseAbs().maxCoeff() > 1e-9) {
        throw Error(ErrorCode::InvalidArgument, "prior basis rows are not orthonormal");
    }
    MotionPrior p;
    p.kind_ = Kind::LinearSubspace;
    p.frames_ = frames;
    p.mean_ = std::move(mean);
    p.basis_ = std::move(basis);
    return p;
}

std::size_t MotionPrior::latent_dim() const {
    return kind_ == Kind::Identity ? pose_dim() : static_cast<std::size_t>(basis_.rows());
}

std::vector<Joints> MotionPrior::decode(const Eigen::VectorXd& z) const {
    if (static_cast<std::size_t>(z.size()) != latent_dim()) {
        throw Error(ErrorCode::DimensionMismatch, "latent vector has " + std::to_string(z.size()) +
                                                      " entries, prior expects " + std::to_string(latent_dim()));
    }
    if (kind_ == Kind::Identity) return unflatten(z, frames_);
    return unflatten(mean_ + basis_.transpose() * z, frames_);
}

Eigen::VectorXd MotionPrior::encode(const std::vector<Joints>& poses) const {
    if (poses.size() != frames_) {
        throw Error(ErrorCode::DimensionMismatch, "prior expects " + std::to_string(frames_) + " frames, got " +
                                                      std::to_string(poses.size()));
    }
    if (kind_ == Kind::Identity) return flatten(poses);
    return basis_ * (flatten(poses) - mean_);
}

Eigen::VectorXd MotionPrior::pullback(const std::vector<Joints>& pose_gradient) const {
    if (kind_ == Kind::Identity) return flatten(pose_gradient);
    return basis_ * flatten(pose_gradient);
}

MotionPrior fit_linear_subspace(const std::vector<PoseSequence>& motions, std::size_t latent_dim) {
    if (latent_dim == 0) throw Error(ErrorCode::InvalidArgument, "latent_dim must be positive");
    if (motions.size() < latent_dim + 1) {
        throw Error(ErrorCode::InsufficientData, "need at least " + std::to_string(latent_dim + 1) +
                                                     " training windows, got " + std::to_string(motions.size()));
    }
    const std::size_t frames = motions.front().size();
    const auto dim = static_cast<Eigen::Index>(frames * kNumJoints * 3);
    if (latent_dim > static_cast<std::size_t>(dim)) {
        throw Error(ErrorCode::InvalidArgument, "latent_dim exceeds the pose dimension");
    }
    const auto n = static_cast<Eigen::Index>(motions.size());
    Eigen::MatrixXd data(n, dim);
    for (Eigen::Index r = 0; r < n; ++r) {
        const auto& m = motions[static_cast<std::size_t>(r)];
        if (m.size() != frames) throw Error(ErrorCode::DimensionMismatch, "training windows differ in length");
        std::vector<Joints> poses;
        poses.reserve(frames);
        for (const auto& f : m.frames) poses.push_back(f.joints);
        data.row(r) = flatten(poses).transpose();
    }
    Eigen::VectorXd mean = data.colwise().mean().transpose();
    data.rowwise() -= mean.transpose();

    Eigen::BDCSVD<Eigen::MatrixXd> svd(data, Eigen::ComputeThinV);
    const auto k = static_cast<Eigen::Index>(latent_dim);
    Eigen::MatrixXd basis = svd.matrixV().leftCols(k).transpose();
    return MotionPrior::linear_subspace(frames, std::move(mean), std::move(basis));
}

}  // namespace egolabel
