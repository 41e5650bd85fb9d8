#include "egolabel/energy.hpp"

#include <cmath>
#include <string>

#include "egolabel/align.hpp"
#include "egolabel/error.hpp"

namespace egolabel {

namespace {

constexpr std::array<std::string_view, kNumTerms> kTermNames = {
    "reproj_ego", "reproj_ext", "pose_ego", "pose_ext", "smooth", "bone", "cam_consistency", "cam_orth",
};

void check_frames(const WindowState& state, const WindowObservations& obs) {
    if (state.size() != obs.size()) {
        throw Error(ErrorCode::DimensionMismatch, "state has " + std::to_string(state.size()) +
                                                      " frames, observations " + std::to_string(obs.size()));
    }
}

}  // namespace

std::string_view term_name(Term t) { return kTermNames[static_cast<std::size_t>(t)]; }
std::string_view term_name(std::size_t t) { return kTermNames.at(t); }

double EnergyWeights::operator[](Term t) const { return const_cast<EnergyWeights&>(*this)[t]; }

double& EnergyWeights::operator[](Term t) {
    switch (t) {
        case Term::ReprojEgo: return lambda_reproj_ego;
        case Term::ReprojExt: return lambda_reproj_ext;
        case Term::PoseEgo: return lambda_pose_ego;
        case Term::PoseExt: return lambda_pose_ext;
        case Term::Smooth: return lambda_smooth;
        case Term::Bone: return lambda_bone;
        case Term::CamConsistency: return lambda_cam_consistency;
        case Term::CamOrth: return lambda_cam_orth;
    }
    throw Error(ErrorCode::InvalidArgument, "unknown energy term");
}

void EnergyWeights::validate() const {
    bool any = false;
    for (std::size_t k = 0; k < kNumTerms; ++k) {
        const double w = (*this)[static_cast<Term>(k)];
        if (!(w >= 0.0) || !std::isfinite(w)) {
            throw Error(ErrorCode::InvalidArgument, "energy weight " + std::string(term_name(k)) + " must be >= 0");
        }
        any = any || w > 0.0;
    }
    if (!any) throw Error(ErrorCode::InvalidArgument, "at least one energy weight must be positive");
}

EnergyWeights EnergyWeights::without_external() const {
    EnergyWeights w = *this;
    w.lambda_reproj_ext = 0.0;
    w.lambda_pose_ext = 0.0;
    w.lambda_cam_consistency = 0.0;
    w.lambda_cam_orth = 0.0;
    return w;
}

void WindowObservations::validate() const {
    const std::size_t b = size();
    if (b < 2) throw Error(ErrorCode::InvalidArgument, "a window needs at least two frames");
    if (ego_2d.size() != b || ext_2d.size() != b || ext_3d.size() != b || slam_rel.size() + 1 != b) {
        throw Error(ErrorCode::DimensionMismatch, "window observation sequences differ in length");
    }
    for (const auto& rel : slam_rel) {
        if (rel && !rel->is_orthonormal(1e-6)) {
            throw Error(ErrorCode::InvalidArgument, "slam relative rotation is not orthonormal");
        }
    }
    fisheye.validate();
    pinhole.validate();
}

void WindowState::validate() const {
    if (poses.size() < 2) throw Error(ErrorCode::InvalidArgument, "a window needs at least two frames");
    if (rotations.size() != poses.size() || translations.size() != poses.size()) {
        throw Error(ErrorCode::DimensionMismatch, "pose and camera counts differ");
    }
}

StateGradient StateGradient::zeros(std::size_t frames) {
    StateGradient g;
    Joints zero;
    zero.fill(Vec3::Zero());
    g.poses.assign(frames, zero);
    g.rotations.assign(frames, Mat3::Zero());
    g.translations.assign(frames, Vec3::Zero());
    return g;
}

void StateGradient::add_scaled(const StateGradient& other, double factor) {
    for (std::size_t i = 0; i < poses.size(); ++i) {
        for (std::size_t j = 0; j < kNumJoints; ++j) poses[i][j] += factor * other.poses[i][j];
        rotations[i] += factor * other.rotations[i];
        translations[i] += factor * other.translations[i];
    }
    slam_scale += factor * other.slam_scale;
}

TermEvaluation e_reproj_ego(const WindowState& state, const WindowObservations& obs) {
    check_frames(state, obs);
    TermEvaluation out;
    out.gradient = StateGradient::zeros(state.size());
    for (std::size_t i = 0; i < state.size(); ++i) {
        for (std::size_t j = 0; j < kNumJoints; ++j) {
            const double c = obs.ego_2d[i].confidence[j];
            if (c <= 0.0) continue;
            const auto proj = project_fisheye_with_jacobian(obs.fisheye, state.poses[i][j]);
            if (!proj) {
                ++out.dropped;
                continue;
            }
            const Vec2 r = proj->pixel - obs.ego_2d[i].pixels[j];
            out.value += c * r.squaredNorm();
            out.gradient.poses[i][j] += 2.0 * c * proj->jacobian.transpose() * r;
        }
    }
    return out;
}

TermEvaluation e_reproj_ext(const WindowState& state, const WindowObservations& obs) {
    check_frames(state, obs);
    const PinholeModel& k = obs.pinhole;
    TermEvaluation out;
    out.gradient = StateGradient::zeros(state.size());
    for (std::size_t i = 0; i < state.size(); ++i) {
        const Mat3& rot = state.rotations[i];
        for (std::size_t j = 0; j < kNumJoints; ++j) {
            const double c = obs.ext_2d[i].confidence[j];
            if (c <= 0.0) continue;
            const Vec3& p = state.poses[i][j];
            const Vec3 pc = rot * p + state.translations[i];
            if (pc.z() <= kMinDepth) {
                ++out.dropped;
                continue;
            }
            const double iz = 1.0 / pc.z();
            const Vec2 r(k.fx * pc.x() * iz + k.cx - obs.ext_2d[i].pixels[j].x(),
                         k.fy * pc.y() * iz + k.cy - obs.ext_2d[i].pixels[j].y());
            out.value += c * r.squaredNorm();
            Eigen::Matrix<double, 2, 3> dproj;
            dproj << k.fx * iz, 0.0, -k.fx * pc.x() * iz * iz,
                     0.0, k.fy * iz, -k.fy * pc.y() * iz * iz;
            const Vec3 g_pc = 2.0 * c * dproj.transpose() * r;
            out.gradient.poses[i][j] += rot.transpose() * g_pc;
            out.gradient.rotations[i] += g_pc * p.transpose();
            out.gradient.translations[i] += g_pc;
        }
    }
    return out;
}

TermEvaluation e_pose_ego(const WindowState& state, const WindowObservations& obs) {
    check_frames(state, obs);
    TermEvaluation out;
    out.gradient = StateGradient::zeros(state.size());
    for (std::size_t i = 0; i < state.size(); ++i) {
        for (std::size_t j = 0; j < kNumJoints; ++j) {
            const double c = obs.ego_3d_init[i].confidence[j];
            if (c <= 0.0) continue;
            const Vec3 d = state.poses[i][j] - obs.ego_3d_init[i][j];
            out.value += c * d.squaredNorm();
            out.gradient.poses[i][j] += 2.0 * c * d;
        }
    }
    return out;
}

TermEvaluation e_pose_ext(const WindowState& state, const WindowObservations& obs) {
    check_frames(state, obs);
    TermEvaluation out;
    out.gradient = StateGradient::zeros(state.size());
    std::array<double, kNumJoints> w{};
    for (std::size_t i = 0; i < state.size(); ++i) {
        for (std::size_t j = 0; j < kNumJoints; ++j) {
            w[j] = obs.ext_3d[i].confidence[j];
        }
        AlignmentResult align;
        try {
            align = procrustes(state.poses[i], obs.ext_3d[i].joints, w, false);
        } catch (const Error&) {
            ++out.dropped;
            continue;
        }
        // The alignment minimizes this same weighted sum, so its own
        // dependence on the poses drops out of the first derivative.
        const Mat3& rot = align.transform.rotation;
        for (std::size_t j = 0; j < kNumJoints; ++j) {
            if (w[j] <= 0.0) continue;
            const Vec3 r = obs.ext_3d[i][j] - align.apply(state.poses[i][j]);
            out.value += w[j] * r.squaredNorm();
            out.gradient.poses[i][j] += -2.0 * w[j] * (rot.transpose() * r);
        }
    }
    return out;
}

TermEvaluation e_smooth(const WindowState& state) {
    TermEvaluation out;
    out.gradient = StateGradient::zeros(state.size());
    for (std::size_t i = 0; i + 1 < state.size(); ++i) {
        for (std::size_t j = 0; j < kNumJoints; ++j) {
            const Vec3 d = state.poses[i + 1][j] - state.poses[i][j];
            out.value += d.squaredNorm();
            out.gradient.poses[i + 1][j] += 2.0 * d;
            out.gradient.poses[i][j] -= 2.0 * d;
        }
    }
    return out;
}

TermEvaluation e_bone(const WindowState& state, const BoneTopology& topo) {
    TermEvaluation out;
    out.gradient = StateGradient::zeros(state.size());
    for (std::size_t i = 0; i < state.size(); ++i) {
        for (std::size_t e = 0; e < kNumBones; ++e) {
            const auto [p, c] = topo.edges[e];
            const Vec3 d = state.poses[i][c] - state.poses[i][p];
            const double len = d.norm();
            const double diff = len - topo.reference_lengths[e];
            out.value += diff * diff;
            if (len > 0.0) {
                const Vec3 g = 2.0 * diff * d / len;
                out.gradient.poses[i][c] += g;
                out.gradient.poses[i][p] -= g;
            }
        }
    }
    return out;
}

TermEvaluation e_cam_consistency(const WindowState& state, const WindowObservations& obs) {
    check_frames(state, obs);
    constexpr double ls = kConsistencyLengthScale;
    TermEvaluation out;
    out.gradient = StateGradient::zeros(state.size());
    for (std::size_t i = 0; i + 1 < state.size(); ++i) {
        const auto& rel = obs.slam_rel[i];
        if (!rel) continue;
        const Mat3& ri = state.rotations[i];
        const Vec3 rel_t = state.slam_scale * ls * rel->translation;
        const Mat3 d_rot = ri * rel->rotation - state.rotations[i + 1];
        const Vec3 d_t = ri * rel_t + ls * state.translations[i] - ls * state.translations[i + 1];
        out.value += d_rot.squaredNorm() + d_t.squaredNorm();

        out.gradient.rotations[i] += 2.0 * d_rot * rel->rotation.transpose() + 2.0 * d_t * rel_t.transpose();
        out.gradient.rotations[i + 1] -= 2.0 * d_rot;
        out.gradient.translations[i] += 2.0 * ls * d_t;
        out.gradient.translations[i + 1] -= 2.0 * ls * d_t;
        out.gradient.slam_scale += 2.0 * d_t.dot(ri * (ls * rel->translation));
    }
    return out;
}

TermEvaluation e_cam_orth(const WindowState& state) {
    TermEvaluation out;
    out.gradient = StateGradient::zeros(state.size());
    for (std::size_t i = 0; i < state.size(); ++i) {
        const Mat3& r = state.rotations[i];
        const Mat3 e = r.transpose() * r - Mat3::Identity();
        out.value += e.squaredNorm();
        out.gradient.rotations[i] += 4.0 * r * e;
    }
    return out;
}

TermEvaluation evaluate_term(Term term, const WindowState& state, const WindowObservations& obs,
                             const BoneTopology& topo) {
    switch (term) {
        case Term::ReprojEgo: return e_reproj_ego(state, obs);
        case Term::ReprojExt: return e_reproj_ext(state, obs);
        case Term::PoseEgo: return e_pose_ego(state, obs);
        case Term::PoseExt: return e_pose_ext(state, obs);
        case Term::Smooth: return e_smooth(state);
        case Term::Bone: return e_bone(state, topo);
        case Term::CamConsistency: return e_cam_consistency(state, obs);
        case Term::CamOrth: return e_cam_orth(state);
    }
    throw Error(ErrorCode::InvalidArgument, "unknown energy term");
}

EnergyEvaluation total_energy(const WindowState& state, const WindowObservations& obs,
                              const EnergyWeights& weights, const BoneTopology& topo) {
    state.validate();
    check_frames(state, obs);
    EnergyEvaluation out;
    out.gradient = StateGradient::zeros(state.size());
    for (std::size_t k = 0; k < kNumTerms; ++k) {
        const Term term = static_cast<Term>(k);
        TermEvaluation t = evaluate_term(term, state, obs, topo);
        out.terms[k] = t.value;
        out.dropped[k] = t.dropped;
        const double w = weights[term];
        if (w != 0.0) {
            out.total += w * t.value;
            out.gradient.add_scaled(t.gradient, w);
        }
    }
    return out;
}

}  // namespace egolabel
