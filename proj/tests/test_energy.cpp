#include <doctest.h>

#include "egolabel/energy.hpp"
#include "egolabel/error.hpp"
#include "support.hpp"

using namespace egolabel;
using namespace egolabel::testing;

namespace {

struct Exact {
    SynthScenario scenario;
    WindowObservations obs;
    WindowState state;
};

Exact exact_window(std::size_t frames = 3, std::uint64_t seed = 5) {
    SynthConfig cfg;
    cfg.frames = frames;
    cfg.seed = seed;
    cfg.noise = NoiseConfig::none();
    Exact e;
    e.scenario = gen_scenario(cfg);
    e.obs = window_observations(e.scenario.dataset, 0, frames);
    for (std::size_t i = 0; i < frames; ++i) {
        e.state.poses.push_back(e.scenario.gt_poses.frames[i].joints);
        e.state.rotations.push_back(e.scenario.gt_cameras[i].rotation);
        e.state.translations.push_back(e.scenario.gt_cameras[i].translation);
    }
    return e;
}

const BoneTopology kTopo = BoneTopology::standard();

double value_of(Term t, const WindowState& s, const WindowObservations& obs) {
    return evaluate_term(t, s, obs, kTopo).value;
}

}  // namespace

TEST_CASE("consistency terms vanish on an exactly consistent window") {
    const Exact e = exact_window();
    for (std::size_t k = 0; k < kNumTerms; ++k) {
        if (static_cast<Term>(k) == Term::Smooth) continue;
        CAPTURE(term_name(k));
        CHECK(value_of(static_cast<Term>(k), e.state, e.obs) < 1e-6);
    }
    EnergyWeights w;
    w.lambda_smooth = 0.0;
    CHECK(total_energy(e.state, e.obs, w, kTopo).total < 1e-6);
}

TEST_CASE("smoothness at ground truth is the moving body's squared velocity") {
    const Exact e = exact_window();
    double oracle = 0.0;
    for (std::size_t i = 0; i + 1 < e.state.size(); ++i)
        for (std::size_t j = 0; j < kNumJoints; ++j)
            for (int k = 0; k < 3; ++k) {
                const double d = e.state.poses[i + 1][j][k] - e.state.poses[i][j][k];
                oracle += d * d;
            }
    CHECK(oracle > 0.0);
    CHECK(e_smooth(e.state).value == doctest::Approx(oracle).epsilon(1e-12));
}

TEST_CASE("egocentric reprojection") {
    Exact e = exact_window();
    e.obs.ego_2d[1].pixels[4] += Vec2(3.0, 4.0);
    CHECK(e_reproj_ego(e.state, e.obs).value == doctest::Approx(25.0).epsilon(1e-9));

    e.obs.ego_2d[1].confidence[4] = 0.5;
    CHECK(e_reproj_ego(e.state, e.obs).value == doctest::Approx(12.5).epsilon(1e-9));
    e.obs.ego_2d[1].confidence[4] = 0.0;
    CHECK(e_reproj_ego(e.state, e.obs).value < 1e-9);
}

TEST_CASE("egocentric reprojection drops joints outside the field of view") {
    Exact e = exact_window();
    e.state.poses[0][2] = Vec3(0.0, 0.0, -500.0);
    const TermEvaluation t = e_reproj_ego(e.state, e.obs);
    CHECK(t.dropped == 1);
    CHECK(t.value < 1e-6);
    CHECK(t.gradient.poses[0][2].norm() == 0.0);
}

TEST_CASE("external reprojection") {
    Exact e = exact_window();
    e.obs.ext_2d[2].pixels[7] += Vec2(3.0, 4.0);
    CHECK(e_reproj_ext(e.state, e.obs).value == doctest::Approx(25.0).epsilon(1e-9));
}

TEST_CASE("external reprojection drops joints behind the camera") {
    Exact e = exact_window();
    e.state.translations[0].z() = -1e5;
    const TermEvaluation t = e_reproj_ext(e.state, e.obs);
    CHECK(t.dropped == static_cast<int>(kNumJoints));
    CHECK(std::isfinite(t.value));
}

TEST_CASE("egocentric pose regularization") {
    Exact e = exact_window();
    for (std::size_t i = 0; i < e.state.size(); ++i) e.state.poses[i] = e.obs.ego_3d_init[i].joints;
    CHECK(e_pose_ego(e.state, e.obs).value == 0.0);
    e.state.poses[1][3].x() += 10.0;
    CHECK(e_pose_ego(e.state, e.obs).value == doctest::Approx(100.0).epsilon(1e-12));
}

TEST_CASE("external pose term absorbs a rigid transform") {
    Exact e = exact_window();
    std::mt19937_64 rng(3);
    for (std::size_t i = 0; i < e.state.size(); ++i) {
        const RigidTransform t = random_transform(rng);
        for (std::size_t j = 0; j < kNumJoints; ++j) e.obs.ext_3d[i].joints[j] = t.apply(e.state.poses[i][j]);
    }
    CHECK(e_pose_ext(e.state, e.obs).value < 1e-9);

    // The state side too: per-frame rigid motion of the poses leaves it unchanged.
    e.obs.ext_3d[0].joints[5].y() += 25.0;
    const double before = e_pose_ext(e.state, e.obs).value;
    WindowState moved = e.state;
    for (std::size_t i = 0; i < moved.size(); ++i) {
        const RigidTransform t = random_transform(rng);
        for (auto& p : moved.poses[i]) p = t.apply(p);
    }
    CHECK(e_pose_ext(moved, e.obs).value == doctest::Approx(before).epsilon(1e-9));
}

TEST_CASE("external pose term is bounded by the unaligned residual") {
    Exact e = exact_window(2);
    for (std::size_t i = 0; i < 2; ++i) e.obs.ext_3d[i].joints = e.state.poses[i];
    e.obs.ext_3d[1].joints[9] += Vec3(6.0, 8.0, 0.0);
    const double v = e_pose_ext(e.state, e.obs).value;
    CHECK(v > 0.0);
    CHECK(v <= 100.0 + 1e-9);
}

TEST_CASE("external pose term drops degenerate frames") {
    Exact e = exact_window(2);
    e.obs.ext_3d[0].confidence.fill(0.0);
    e.obs.ext_3d[0].confidence[0] = e.obs.ext_3d[0].confidence[1] = 1.0;
    const TermEvaluation t = e_pose_ext(e.state, e.obs);
    CHECK(t.dropped == 1);
}

TEST_CASE("smoothness") {
    WindowState s;
    Joints p;
    p.fill(Vec3(1.0, 2.0, 3.0));
    s.poses = {p, p, p};
    s.rotations.assign(3, Mat3::Identity());
    s.translations.assign(3, Vec3::Zero());
    CHECK(e_smooth(s).value == 0.0);
    s.poses = {p, p};
    s.rotations.resize(2);
    s.translations.resize(2);
    s.poses[1][6].z() += 1.0;
    CHECK(e_smooth(s).value == doctest::Approx(1.0));
}

TEST_CASE("bone length") {
    WindowState s;
    s.poses = {reference_pose(kTopo).joints};
    s.rotations = {Mat3::Identity()};
    s.translations = {Vec3::Zero()};
    CHECK(e_bone(s, kTopo).value < 1e-18);

    // Shrink the forearm (elbow -> wrist, reference 250) to 10 mm.
    Joints& j = s.poses[0];
    const Vec3 dir = (j[3] - j[2]).normalized();
    j[3] = j[2] + 10.0 * dir;
    CHECK(e_bone(s, kTopo).value == doctest::Approx(240.0 * 240.0).epsilon(1e-9));
}

TEST_CASE("camera consistency") {
    Exact e = exact_window();
    CHECK(e_cam_consistency(e.state, e.obs).value < 1e-18);
    // One meter on the last camera translation is one unit in the 4x4 difference.
    e.state.translations.back().x() += 1000.0;
    CHECK(e_cam_consistency(e.state, e.obs).value == doctest::Approx(1.0).epsilon(1e-9));

    e.obs.slam_rel.back().reset();
    CHECK(e_cam_consistency(e.state, e.obs).value < 1e-18);
}

TEST_CASE("camera consistency scales SLAM translations") {
    Exact e = exact_window(2);
    e.state.slam_scale = 2.0;
    const Vec3 t = e.obs.slam_rel[0]->translation;
    const double expected = (e.state.rotations[0] * t * kConsistencyLengthScale).squaredNorm();
    CHECK(e_cam_consistency(e.state, e.obs).value == doctest::Approx(expected).epsilon(1e-9));
}

TEST_CASE("camera orthonormality") {
    WindowState s;
    s.poses.resize(2);
    s.rotations = {Mat3::Identity(), RotationParam{Vec3(0.3, -1.0, 2.0)}.to_matrix()};
    s.translations.assign(2, Vec3::Zero());
    CHECK(e_cam_orth(s).value < 1e-24);
    s.rotations[0] = 2.0 * Mat3::Identity();
    CHECK(e_cam_orth(s).value == doctest::Approx(27.0));
}

TEST_CASE("terms are non-negative and the total is their weighted sum") {
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        const GradientCase c = gradient_case(seed);
        EnergyWeights w;
        std::mt19937_64 rng(seed);
        std::uniform_real_distribution<double> u(0.0, 3.0);
        for (std::size_t k = 0; k < kNumTerms; ++k) w[static_cast<Term>(k)] = u(rng);
        const EnergyEvaluation total = total_energy(c.state, c.obs, w, kTopo);
        double sum = 0.0;
        for (std::size_t k = 0; k < kNumTerms; ++k) {
            const double v = value_of(static_cast<Term>(k), c.state, c.obs);
            CHECK(v >= 0.0);
            CHECK(total.terms[k] == v);
            sum += w[static_cast<Term>(k)] * v;
        }
        CHECK(total.total == doctest::Approx(sum).epsilon(1e-12));

        EnergyWeights doubled = w;
        doubled.lambda_smooth *= 2.0;
        const double d = total_energy(c.state, c.obs, doubled, kTopo).total;
        CHECK(d - total.total == doctest::Approx(w.lambda_smooth * total.terms[4]).epsilon(1e-9));
    }
}

TEST_CASE("only the orthonormality weight on orthonormal cameras gives zero") {
    GradientCase c = gradient_case(2);
    for (auto& r : c.state.rotations) r = project_to_so3(r);
    EnergyWeights w;
    for (std::size_t k = 0; k < kNumTerms; ++k) w[static_cast<Term>(k)] = 0.0;
    w.lambda_cam_orth = 1.0;
    CHECK(total_energy(c.state, c.obs, w, kTopo).total < 1e-20);
}

TEST_CASE("analytic gradients match central differences") {
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        const GradientCase c = gradient_case(seed);
        for (std::size_t k = 0; k < kNumTerms; ++k) {
            const Term t = static_cast<Term>(k);
            CAPTURE(seed);
            CAPTURE(term_name(k));
            const auto analytic = flat(evaluate_term(t, c.state, c.obs, kTopo).gradient);
            const auto numeric = fd_gradient([&](const WindowState& s) { return value_of(t, s, c.obs); }, c.state);
            CHECK(relative_error(analytic, numeric) < (t == Term::PoseExt || t == Term::ReprojEgo ? 1e-4 : 1e-5));
        }
        const EnergyWeights w;
        const auto analytic = flat(total_energy(c.state, c.obs, w, kTopo).gradient);
        const auto numeric =
            fd_gradient([&](const WindowState& s) { return total_energy(s, c.obs, w, kTopo).total; }, c.state);
        CHECK(relative_error(analytic, numeric) < 1e-4);
    }
}

TEST_CASE("weights validation") {
    EnergyWeights w;
    w.lambda_bone = -1.0;
    CHECK_THROWS_AS(w.validate(), Error);
    EnergyWeights zero;
    for (std::size_t k = 0; k < kNumTerms; ++k) zero[static_cast<Term>(k)] = 0.0;
    CHECK_THROWS_AS(zero.validate(), Error);

    const EnergyWeights ego = EnergyWeights{}.without_external();
    CHECK(ego.lambda_reproj_ext == 0.0);
    CHECK(ego.lambda_pose_ext == 0.0);
    CHECK(ego.lambda_cam_consistency == 0.0);
    CHECK(ego.lambda_cam_orth == 0.0);
    CHECK(ego.lambda_reproj_ego == 1.0);
}

TEST_CASE("observations must be length-consistent") {
    Exact e = exact_window();
    e.obs.ext_2d.pop_back();
    CHECK_THROWS_AS(e.obs.validate(), Error);
    Exact f = exact_window();
    f.state.rotations.pop_back();
    CHECK_THROWS_AS(total_energy(f.state, f.obs, EnergyWeights{}, kTopo), Error);
}
