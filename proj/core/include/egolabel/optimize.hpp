#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include <Eigen/Core>

#include "egolabel/energy.hpp"
#include "egolabel/prior.hpp"

namespace egolabel {

enum class RotationMode { AxisAngle, RawMatrix };
enum class DescentDirection { Steepest, Lbfgs };

struct OptimizerConfig {
    int max_iters = 2000;
    double step_size = 1.0;   // first trial step, in variable units along -g/|g|
    double tol_rel = 1e-8;    // stop when (E_prev - E) <= tol_rel * E_prev
    double tol_abs = 1e-12;   // stop when E <= tol_abs
    RotationMode rotation_mode = RotationMode::RawMatrix;
    bool optimize_slam_scale = false;
    std::uint64_t seed = 0;
    DescentDirection direction = DescentDirection::Lbfgs;
    int lbfgs_memory = 10;
    double armijo_c = 1e-4;
    int max_backtracks = 60;
    /// Optimizer variable = physical value * scale.
    double translation_scale = 1.0;  // per mm
    double rotation_scale = 1000.0;

    void validate() const;
};

struct OptimizationReport {
    WindowState final_state;              // rotations projected onto SO(3)
    Eigen::VectorXd final_latent;
    std::vector<double> energy_trace;     // accepted iterates, starting with the initial state
    std::vector<std::array<double, kNumTerms>> term_trace;
    int iterations_used = 0;
    bool converged = false;
    int dropped_residual_count = 0;
    double initial_energy = 0.0;
    double pre_projection_energy = 0.0;   // last iterate as optimized
    double post_projection_energy = 0.0;  // after orthonormalizing rotations
};

/// Cameras from PnP of ext_2d against ego_3d_init. Each run of frames linked by
/// SLAM transforms is solved jointly (camera_i = camera_first * slam chain);
/// runs where PnP fails copy a neighboring camera.
/// Throws Error(InitializationFailure) when every frame fails.
std::vector<RigidTransform> initialize_cameras(const WindowObservations& obs);

/// Detector poses plus PnP cameras.
WindowState initial_state(const WindowObservations& obs);

/// `prior == nullptr` optimizes the poses directly.
OptimizationReport optimize_window(const WindowObservations& obs, const EnergyWeights& weights,
                                   const BoneTopology& topo, const MotionPrior* prior,
                                   const OptimizerConfig& config);

/// Same minimization, started from an explicit state (poses are encoded
/// through the prior when one is given).
OptimizationReport optimize_from(const WindowState& start, const WindowObservations& obs,
                                 const EnergyWeights& weights, const BoneTopology& topo,
                                 const MotionPrior* prior, const OptimizerConfig& config);

}  // namespace egolabel
