#pragma once

#include <cstddef>
#include <vector>

#include <Eigen/Core>

#include "egolabel/energy.hpp"

namespace egolabel {

/// Decoder from a latent vector z to a B-frame pose sequence.
///
/// Poses are flattened frame-major, joint-major, xyz-minor (B * 45 values).
/// `identity` decodes by reshaping z directly; `linear_subspace` decodes as
/// mean + basis^T z with orthonormal basis rows.
class MotionPrior {
public:
    enum class Kind { Identity, LinearSubspace };

    static MotionPrior identity(std::size_t frames);
    /// Throws Error(InvalidArgument) unless the basis rows are orthonormal.
    static MotionPrior linear_subspace(std::size_t frames, Eigen::VectorXd mean, Eigen::MatrixXd basis);

    Kind kind() const { return kind_; }
    std::size_t frames() const { return frames_; }
    std::size_t latent_dim() const;
    std::size_t pose_dim() const { return frames_ * kNumJoints * 3; }
    const Eigen::VectorXd& mean() const { return mean_; }
    const Eigen::MatrixXd& basis() const { return basis_; }

    /// Throws Error(DimensionMismatch) when z has the wrong length.
    std::vector<Joints> decode(const Eigen::VectorXd& z) const;
    Eigen::VectorXd encode(const std::vector<Joints>& poses) const;

    /// Chain rule through decode: dE/dz given dE/dposes.
    Eigen::VectorXd pullback(const std::vector<Joints>& pose_gradient) const;

private:
    Kind kind_ = Kind::Identity;
    std::size_t frames_ = 0;
    Eigen::VectorXd mean_;
    Eigen::MatrixXd basis_;  // K x (B * 45)
};

Eigen::VectorXd flatten(const std::vector<Joints>& poses);
std::vector<Joints> unflatten(const Eigen::VectorXd& v, std::size_t frames);

/// PCA over training windows. Throws Error(InsufficientData) with fewer than
/// latent_dim + 1 windows, Error(DimensionMismatch) for ragged windows.
MotionPrior fit_linear_subspace(const std::vector<PoseSequence>& motions, std::size_t latent_dim);

}  // namespace egolabel
