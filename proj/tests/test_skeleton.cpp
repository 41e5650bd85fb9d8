#include <doctest.h>

#include <random>

#include "egolabel/error.hpp"
#include "egolabel/skeleton.hpp"
#include "support.hpp"

using namespace egolabel;

namespace {

JointSet15 jittered(const BoneTopology& topo, std::mt19937_64& rng, double scale_lo, double scale_hi) {
    std::uniform_real_distribution<double> scale(scale_lo, scale_hi);
    std::normal_distribution<double> n(0.0, 1.0);
    JointSet15 ref = reference_pose(topo);
    JointSet15 out;
    out[0] = Vec3(n(rng), n(rng), n(rng)) * 100.0;
    for (const auto& [p, c] : topo.edges) {
        const Vec3 dir = (ref[c] - ref[p]).normalized() + 0.4 * Vec3(n(rng), n(rng), n(rng));
        out[c] = out[p] + dir.normalized() * (ref[c] - ref[p]).norm() * scale(rng);
    }
    return out;
}

}  // namespace

TEST_CASE("standard topology is a valid neck-rooted tree") {
    const BoneTopology topo = BoneTopology::standard();
    CHECK_NOTHROW(topo.validate());
    CHECK(joint_name(0) == "neck");
    for (double l : topo.reference_lengths) CHECK(l > 0.0);
}

TEST_CASE("topology validation") {
    BoneTopology topo = BoneTopology::standard();
    SUBCASE("child listed before parent") {
        std::swap(topo.edges[0], topo.edges[1]);
        std::swap(topo.edges[1], topo.edges[2]);
        CHECK_THROWS_AS(topo.validate(), Error);
    }
    SUBCASE("joint reached twice") {
        topo.edges[13] = topo.edges[12];
        CHECK_THROWS_AS(topo.validate(), Error);
    }
    SUBCASE("non-positive length") {
        topo.reference_lengths[4] = 0.0;
        CHECK_THROWS_AS(topo.validate(), Error);
    }
}

TEST_CASE("bone lengths of a collapsed pose are zero") {
    JointSet15 pose;
    for (double l : bone_lengths(pose, BoneTopology::standard())) CHECK(l == 0.0);
}

TEST_CASE("bone lengths against a scalar loop") {
    const BoneTopology topo = BoneTopology::standard();
    std::mt19937_64 rng(3);
    std::normal_distribution<double> n(0.0, 300.0);
    for (int trial = 0; trial < 20; ++trial) {
        JointSet15 pose;
        for (auto& j : pose.joints) j = Vec3(n(rng), n(rng), n(rng));
        const auto lengths = bone_lengths(pose, topo);
        for (std::size_t e = 0; e < kNumBones; ++e) {
            double s = 0.0;
            for (int k = 0; k < 3; ++k) {
                const double d = pose[topo.edges[e].child][k] - pose[topo.edges[e].parent][k];
                s += d * d;
            }
            CHECK(lengths[e] == doctest::Approx(std::sqrt(s)).epsilon(1e-14));
        }
    }
}

TEST_CASE("reference pose has the reference lengths") {
    const BoneTopology topo = BoneTopology::standard();
    const JointSet15 ref = reference_pose(topo);
    CHECK(ref[0].norm() == 0.0);
    const auto lengths = bone_lengths(ref, topo);
    for (std::size_t e = 0; e < kNumBones; ++e) CHECK(lengths[e] == doctest::Approx(topo.reference_lengths[e]));
}

TEST_CASE("rescale keeps a reference-length pose fixed") {
    const BoneTopology topo = BoneTopology::standard();
    const JointSet15 ref = reference_pose(topo);
    const JointSet15 out = rescale_to_skeleton(ref, topo);
    for (std::size_t j = 0; j < kNumJoints; ++j) CHECK((out[j] - ref[j]).norm() < 1e-12);
}

TEST_CASE("rescale undoes a uniform stretch about the neck") {
    const BoneTopology topo = BoneTopology::standard();
    const JointSet15 ref = reference_pose(topo);
    JointSet15 doubled;
    for (std::size_t j = 0; j < kNumJoints; ++j) doubled[j] = 2.0 * ref[j];
    const JointSet15 out = rescale_to_skeleton(doubled, topo);
    for (std::size_t j = 0; j < kNumJoints; ++j) CHECK((out[j] - ref[j]).norm() < 1e-9);
}

TEST_CASE("rescale sets lengths and keeps directions and root") {
    const BoneTopology topo = BoneTopology::standard();
    std::mt19937_64 rng(11);
    for (int trial = 0; trial < 50; ++trial) {
        const JointSet15 pose = jittered(topo, rng, 0.5, 1.8);
        const JointSet15 out = rescale_to_skeleton(pose, topo);
        CHECK((out[0] - pose[0]).norm() == 0.0);
        const auto lengths = bone_lengths(out, topo);
        for (std::size_t e = 0; e < kNumBones; ++e) {
            const auto [p, c] = topo.edges[e];
            CHECK(lengths[e] == doctest::Approx(topo.reference_lengths[e]).epsilon(1e-12));
            const Vec3 a = (pose[c] - pose[p]).normalized();
            const Vec3 b = (out[c] - out[p]).normalized();
            CHECK(a.cross(b).norm() < 1e-12);
            CHECK(a.dot(b) > 0.0);
        }
        const JointSet15 again = rescale_to_skeleton(out, topo);
        for (std::size_t j = 0; j < kNumJoints; ++j) CHECK((again[j] - out[j]).norm() < 1e-9);
    }
}

TEST_CASE("rescale commutes with rigid motion") {
    const BoneTopology topo = BoneTopology::standard();
    std::mt19937_64 rng(5);
    for (int trial = 0; trial < 20; ++trial) {
        const JointSet15 pose = jittered(topo, rng, 0.7, 1.3);
        const RigidTransform t = testing::random_transform(rng);
        const JointSet15 a = rescale_to_skeleton(pose.transformed(t), topo);
        const JointSet15 b = rescale_to_skeleton(pose, topo).transformed(t);
        for (std::size_t j = 0; j < kNumJoints; ++j) CHECK((a[j] - b[j]).norm() < 1e-9);
    }
}

TEST_CASE("rescale rejects a zero-length bone") {
    const BoneTopology topo = BoneTopology::standard();
    JointSet15 pose = reference_pose(topo);
    pose[topo.edges[5].child] = pose[topo.edges[5].parent];
    try {
        rescale_to_skeleton(pose, topo);
        FAIL("expected DegenerateBone");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::DegenerateBone);
    }
}
