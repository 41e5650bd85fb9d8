#include "egolabel/optimize.hpp"

#include <cmath>
#include <deque>
#include <limits>

#include "egolabel/align.hpp"
#include "egolabel/error.hpp"

namespace egolabel {

void OptimizerConfig::validate() const {
    if (max_iters < 1) throw Error(ErrorCode::InvalidArgument, "max_iters must be >= 1");
    if (!(tol_rel > 0.0)) throw Error(ErrorCode::InvalidArgument, "tol_rel must be > 0");
    if (!(step_size > 0.0)) throw Error(ErrorCode::InvalidArgument, "step_size must be > 0");
    if (!(translation_scale > 0.0) || !(rotation_scale > 0.0)) {
        throw Error(ErrorCode::InvalidArgument, "variable scales must be > 0");
    }
    if (lbfgs_memory < 1) throw Error(ErrorCode::InvalidArgument, "lbfgs_memory must be >= 1");
    if (!(armijo_c > 0.0 && armijo_c < 1.0)) throw Error(ErrorCode::InvalidArgument, "armijo_c must be in (0, 1)");
    if (max_backtracks < 1) throw Error(ErrorCode::InvalidArgument, "max_backtracks must be >= 1");
    if (tol_abs < 0.0) throw Error(ErrorCode::InvalidArgument, "tol_abs must be >= 0");
}

std::vector<RigidTransform> initialize_cameras(const WindowObservations& obs) {
    const std::size_t b = obs.size();
    std::vector<std::optional<RigidTransform>> cams(b);
    std::size_t solved = 0;

    // Frames linked by SLAM share one PnP: camera i = camera_first * chain_i,
    // so frame i's joints enter as chain_i * p in the first frame's coordinates.
    std::size_t first = 0;
    while (first < b) {
        std::size_t last = first;
        while (last + 1 < b && obs.slam_rel[last]) ++last;

        std::vector<RigidTransform> chain(last - first + 1);
        std::vector<Vec3> pts;
        std::vector<Vec2> px;
        std::vector<double> w;
        for (std::size_t i = first; i <= last; ++i) {
            if (i > first) chain[i - first] = compose(chain[i - first - 1], *obs.slam_rel[i - 1]);
            for (std::size_t j = 0; j < kNumJoints; ++j) {
                const double wj = obs.ext_2d[i].confidence[j] * obs.ego_3d_init[i].confidence[j];
                if (wj <= 0.0) continue;
                pts.push_back(chain[i - first].apply(obs.ego_3d_init[i][j]));
                px.push_back(obs.ext_2d[i].pixels[j]);
                w.push_back(wj);
            }
        }
        try {
            const RigidTransform anchor = pnp_estimate(pts, px, obs.pinhole, w).pose;
            for (std::size_t i = first; i <= last; ++i) {
                cams[i] = compose(anchor, chain[i - first]);
                ++solved;
            }
        } catch (const Error&) {
        }
        first = last + 1;
    }
    if (solved == 0) throw Error(ErrorCode::InitializationFailure, "PnP failed on every frame of the window");

    // Runs without a solution copy their neighbor.
    for (std::size_t i = 0; i + 1 < b; ++i) {
        if (cams[i] && !cams[i + 1]) cams[i + 1] = *cams[i];
    }
    for (std::size_t i = b - 1; i > 0; --i) {
        if (cams[i] && !cams[i - 1]) cams[i - 1] = *cams[i];
    }
    std::vector<RigidTransform> out;
    out.reserve(b);
    for (auto& c : cams) out.push_back(*c);
    return out;
}

WindowState initial_state(const WindowObservations& obs) {
    obs.validate();
    WindowState s;
    for (const auto& p : obs.ego_3d_init) s.poses.push_back(p.joints);
    for (const auto& c : initialize_cameras(obs)) {
        s.rotations.push_back(c.rotation);
        s.translations.push_back(c.translation);
    }
    return s;
}

namespace {

// Maps between the flat optimizer vector and the physical window state.
class VariableLayout {
public:
    VariableLayout(std::size_t frames, const MotionPrior* prior, const OptimizerConfig& cfg)
        : frames_(frames), prior_(prior), cfg_(cfg) {
        latent_ = prior ? prior->latent_dim() : frames * kNumJoints * 3;
        rot_block_ = cfg.rotation_mode == RotationMode::RawMatrix ? 9 : 3;
        rot_offset_ = latent_;
        trans_offset_ = rot_offset_ + frames * rot_block_;
        scale_offset_ = trans_offset_ + frames * 3;
        size_ = scale_offset_ + (cfg.optimize_slam_scale ? 1 : 0);
    }

    std::size_t size() const { return size_; }
    std::size_t latent_size() const { return latent_; }

    Eigen::VectorXd pack(const WindowState& s) const {
        Eigen::VectorXd x(static_cast<Eigen::Index>(size_));
        x.head(static_cast<Eigen::Index>(latent_)) = prior_ ? prior_->encode(s.poses) : flatten(s.poses);
        for (std::size_t i = 0; i < frames_; ++i) {
            const Eigen::Index r = static_cast<Eigen::Index>(rot_offset_ + i * rot_block_);
            if (rot_block_ == 9) {
                for (int a = 0; a < 3; ++a)
                    for (int c = 0; c < 3; ++c) x[r + 3 * a + c] = s.rotations[i](a, c) * cfg_.rotation_scale;
            } else {
                x.segment<3>(r) = RotationParam::from_matrix(project_to_so3(s.rotations[i])).axis_angle *
                                  cfg_.rotation_scale;
            }
            x.segment<3>(static_cast<Eigen::Index>(trans_offset_ + 3 * i)) = s.translations[i] * cfg_.translation_scale;
        }
        if (cfg_.optimize_slam_scale) x[static_cast<Eigen::Index>(scale_offset_)] = s.slam_scale;
        return x;
    }

    WindowState unpack(const Eigen::VectorXd& x, double fixed_slam_scale) const {
        WindowState s;
        const Eigen::VectorXd z = x.head(static_cast<Eigen::Index>(latent_));
        s.poses = prior_ ? prior_->decode(z) : unflatten(z, frames_);
        s.rotations.resize(frames_);
        s.translations.resize(frames_);
        for (std::size_t i = 0; i < frames_; ++i) {
            const Eigen::Index r = static_cast<Eigen::Index>(rot_offset_ + i * rot_block_);
            if (rot_block_ == 9) {
                for (int a = 0; a < 3; ++a)
                    for (int c = 0; c < 3; ++c) s.rotations[i](a, c) = x[r + 3 * a + c] / cfg_.rotation_scale;
            } else {
                s.rotations[i] = RotationParam{x.segment<3>(r) / cfg_.rotation_scale}.to_matrix();
            }
            s.translations[i] = x.segment<3>(static_cast<Eigen::Index>(trans_offset_ + 3 * i)) / cfg_.translation_scale;
        }
        s.slam_scale = cfg_.optimize_slam_scale ? x[static_cast<Eigen::Index>(scale_offset_)] : fixed_slam_scale;
        return s;
    }

    Eigen::VectorXd pull_gradient(const Eigen::VectorXd& x, const StateGradient& g) const {
        Eigen::VectorXd out(static_cast<Eigen::Index>(size_));
        out.head(static_cast<Eigen::Index>(latent_)) = prior_ ? prior_->pullback(g.poses) : flatten(g.poses);
        for (std::size_t i = 0; i < frames_; ++i) {
            const Eigen::Index r = static_cast<Eigen::Index>(rot_offset_ + i * rot_block_);
            if (rot_block_ == 9) {
                for (int a = 0; a < 3; ++a)
                    for (int c = 0; c < 3; ++c) out[r + 3 * a + c] = g.rotations[i](a, c) / cfg_.rotation_scale;
            } else {
                const auto d = RotationParam{x.segment<3>(r) / cfg_.rotation_scale}.matrix_derivatives();
                for (int k = 0; k < 3; ++k) out[r + k] = g.rotations[i].cwiseProduct(d[k]).sum() / cfg_.rotation_scale;
            }
            out.segment<3>(static_cast<Eigen::Index>(trans_offset_ + 3 * i)) = g.translations[i] / cfg_.translation_scale;
        }
        if (cfg_.optimize_slam_scale) out[static_cast<Eigen::Index>(scale_offset_)] = g.slam_scale;
        return out;
    }

private:
    std::size_t frames_;
    const MotionPrior* prior_;
    const OptimizerConfig& cfg_;
    std::size_t latent_ = 0, rot_block_ = 9, rot_offset_ = 0, trans_offset_ = 0, scale_offset_ = 0, size_ = 0;
};

struct Evaluated {
    EnergyEvaluation energy;
    Eigen::VectorXd gradient;
};

Eigen::VectorXd lbfgs_direction(const Eigen::VectorXd& g, const std::deque<Eigen::VectorXd>& s,
                                const std::deque<Eigen::VectorXd>& y) {
    Eigen::VectorXd q = g;
    const std::size_t m = s.size();
    std::vector<double> alpha(m), rho(m);
    for (std::size_t k = m; k-- > 0;) {
        rho[k] = 1.0 / y[k].dot(s[k]);
        alpha[k] = rho[k] * s[k].dot(q);
        q -= alpha[k] * y[k];
    }
    const double gamma = s.back().dot(y.back()) / y.back().squaredNorm();
    Eigen::VectorXd r = gamma * q;
    for (std::size_t k = 0; k < m; ++k) {
        const double beta = rho[k] * y[k].dot(r);
        r += s[k] * (alpha[k] - beta);
    }
    return -r;
}

}  // namespace

OptimizationReport optimize_from(const WindowState& start, const WindowObservations& obs,
                                 const EnergyWeights& weights, const BoneTopology& topo,
                                 const MotionPrior* prior, const OptimizerConfig& config) {
    config.validate();
    weights.validate();
    obs.validate();
    start.validate();
    if (start.size() != obs.size()) throw Error(ErrorCode::DimensionMismatch, "state/observation frame counts differ");
    if (prior && prior->frames() != obs.size()) {
        throw Error(ErrorCode::DimensionMismatch, "prior window length differs from the observation window");
    }

    const VariableLayout layout(obs.size(), prior, config);
    const double fixed_scale = start.slam_scale;
    auto evaluate = [&](const Eigen::VectorXd& x) {
        Evaluated e;
        const WindowState s = layout.unpack(x, fixed_scale);
        e.energy = total_energy(s, obs, weights, topo);
        e.gradient = layout.pull_gradient(x, e.energy.gradient);
        return e;
    };

    OptimizationReport report;
    Eigen::VectorXd x = layout.pack(start);
    Evaluated cur = evaluate(x);
    report.initial_energy = cur.energy.total;
    report.energy_trace.push_back(cur.energy.total);
    report.term_trace.push_back(cur.energy.terms);

    std::deque<Eigen::VectorXd> s_hist, y_hist;
    int iter = 0;
    bool converged = false;
    while (iter < config.max_iters) {
        if (cur.energy.total <= config.tol_abs || cur.gradient.squaredNorm() == 0.0) {
            converged = true;
            break;
        }
        Eigen::VectorXd dir;
        double step = 1.0;
        if (config.direction == DescentDirection::Lbfgs && !s_hist.empty()) {
            dir = lbfgs_direction(cur.gradient, s_hist, y_hist);
            if (!(dir.dot(cur.gradient) < 0.0)) {
                s_hist.clear();
                y_hist.clear();
            }
        }
        if (s_hist.empty() || config.direction == DescentDirection::Steepest) {
            dir = -cur.gradient;
            step = config.step_size / cur.gradient.norm();
        }

        const double slope = cur.gradient.dot(dir);
        bool accepted = false;
        Evaluated next;
        Eigen::VectorXd x_next;
        for (int bt = 0; bt <= config.max_backtracks; ++bt, step *= 0.5) {
            x_next = x + step * dir;
            next = evaluate(x_next);
            if (std::isfinite(next.energy.total) &&
                next.energy.total <= cur.energy.total + config.armijo_c * step * slope) {
                accepted = true;
                break;
            }
        }
        if (!accepted) break;

        ++iter;
        const double decrease = cur.energy.total - next.energy.total;
        const double prev = cur.energy.total;

        if (config.direction == DescentDirection::Lbfgs) {
            Eigen::VectorXd sv = x_next - x;
            Eigen::VectorXd yv = next.gradient - cur.gradient;
            if (sv.dot(yv) > 1e-12 * sv.norm() * yv.norm()) {
                s_hist.push_back(std::move(sv));
                y_hist.push_back(std::move(yv));
                if (static_cast<int>(s_hist.size()) > config.lbfgs_memory) {
                    s_hist.pop_front();
                    y_hist.pop_front();
                }
            }
        }
        x = std::move(x_next);
        cur = std::move(next);
        report.energy_trace.push_back(cur.energy.total);
        report.term_trace.push_back(cur.energy.terms);
        if (decrease <= config.tol_rel * prev) {
            converged = true;
            break;
        }
    }

    report.iterations_used = iter;
    report.converged = converged;
    report.final_latent = x.head(static_cast<Eigen::Index>(layout.latent_size()));
    report.pre_projection_energy = cur.energy.total;

    WindowState final_state = layout.unpack(x, fixed_scale);
    for (auto& r : final_state.rotations) r = project_to_so3(r);
    const EnergyEvaluation projected = total_energy(final_state, obs, weights, topo);
    report.post_projection_energy = projected.total;
    for (int d : projected.dropped) report.dropped_residual_count += d;
    report.final_state = std::move(final_state);
    return report;
}

OptimizationReport optimize_window(const WindowObservations& obs, const EnergyWeights& weights,
                                   const BoneTopology& topo, const MotionPrior* prior,
                                   const OptimizerConfig& config) {
    return optimize_from(initial_state(obs), obs, weights, topo, prior, config);
}

}  // namespace egolabel
