#include <doctest.h>

#include <functional>
#include <random>

#include "egolabel/error.hpp"
#include "egolabel/prior.hpp"

using namespace egolabel;

namespace {

std::vector<PoseSequence> windows_from(const std::vector<Eigen::VectorXd>& flat, std::size_t frames) {
    std::vector<PoseSequence> out;
    for (const auto& v : flat) {
        PoseSequence s;
        for (const auto& j : unflatten(v, frames)) {
            JointSet15 p;
            p.joints = j;
            s.frames.push_back(p);
        }
        out.push_back(s);
    }
    return out;
}

/// Windows drawn from mean + span(directions) with Gaussian coefficients.
std::vector<Eigen::VectorXd> subspace_samples(std::mt19937_64& rng, const Eigen::VectorXd& mean,
                                              const Eigen::MatrixXd& directions, std::size_t count) {
    std::normal_distribution<double> n(0.0, 100.0);
    std::vector<Eigen::VectorXd> out;
    for (std::size_t i = 0; i < count; ++i) {
        Eigen::VectorXd c(directions.cols());
        for (auto& x : c) x = n(rng);
        out.push_back(mean + directions * c);
    }
    return out;
}

Eigen::VectorXd random_vector(std::mt19937_64& rng, Eigen::Index n, double sd) {
    std::normal_distribution<double> d(0.0, sd);
    Eigen::VectorXd v(n);
    for (auto& x : v) x = d(rng);
    return v;
}

ErrorCode code_of(const std::function<void()>& f) {
    try {
        f();
    } catch (const Error& e) {
        return e.code();
    }
    FAIL("no error thrown");
    return ErrorCode::InvalidArgument;
}

}  // namespace

TEST_CASE("flatten is frame-major, joint-major, xyz-minor") {
    std::vector<Joints> poses(2);
    for (std::size_t f = 0; f < 2; ++f)
        for (std::size_t j = 0; j < kNumJoints; ++j) poses[f][j] = Vec3(f * 1000 + j * 10, 1, 2);
    const Eigen::VectorXd v = flatten(poses);
    CHECK(v.size() == 90);
    CHECK(v[45 + 3 * 4] == 1040.0);
    CHECK(v[45 + 3 * 4 + 2] == 2.0);
    const auto back = unflatten(v, 2);
    CHECK(back[1][4] == poses[1][4]);
    CHECK_THROWS_AS(unflatten(v, 3), Error);
}

TEST_CASE("identity prior reshapes the latent") {
    const MotionPrior prior = MotionPrior::identity(3);
    CHECK(prior.latent_dim() == 135);
    std::mt19937_64 rng(1);
    const Eigen::VectorXd z = random_vector(rng, 135, 100.0);
    const auto poses = prior.decode(z);
    CHECK(poses.size() == 3);
    CHECK(flatten(poses) == z);
    CHECK(prior.encode(poses) == z);
    CHECK(prior.pullback(poses) == z);
}

TEST_CASE("linear prior decodes mean plus basis rows") {
    std::mt19937_64 rng(2);
    const std::size_t frames = 2;
    const Eigen::Index dim = 90;
    Eigen::MatrixXd q = Eigen::HouseholderQR<Eigen::MatrixXd>(Eigen::MatrixXd::Random(dim, 4)).householderQ() *
                        Eigen::MatrixXd::Identity(dim, 4);
    const Eigen::VectorXd mean = random_vector(rng, dim, 300.0);
    const MotionPrior prior = MotionPrior::linear_subspace(frames, mean, q.transpose());
    CHECK(prior.latent_dim() == 4);
    CHECK((flatten(prior.decode(Eigen::VectorXd::Zero(4))) - mean).norm() < 1e-9);
    for (Eigen::Index k = 0; k < 4; ++k) {
        const Eigen::VectorXd e = Eigen::VectorXd::Unit(4, k);
        CHECK((flatten(prior.decode(e)) - mean - q.col(k)).norm() < 1e-12);
    }
    const Eigen::VectorXd a = random_vector(rng, 4, 1.0), b = random_vector(rng, 4, 1.0);
    const Eigen::VectorXd lin = flatten(prior.decode(2.0 * a + b)) - mean;
    const Eigen::VectorXd sep = 2.0 * (flatten(prior.decode(a)) - mean) + (flatten(prior.decode(b)) - mean);
    CHECK((lin - sep).norm() < 1e-9);
    CHECK((prior.encode(prior.decode(a)) - a).norm() < 1e-9);
    CHECK(code_of([&] { prior.decode(Eigen::VectorXd::Zero(5)); }) == ErrorCode::DimensionMismatch);
}

TEST_CASE("pullback is the chain rule through decode") {
    std::mt19937_64 rng(3);
    Eigen::MatrixXd q = Eigen::HouseholderQR<Eigen::MatrixXd>(Eigen::MatrixXd::Random(45, 3)).householderQ() *
                        Eigen::MatrixXd::Identity(45, 3);
    const MotionPrior prior = MotionPrior::linear_subspace(1, random_vector(rng, 45, 10.0), q.transpose());
    const Eigen::VectorXd c = random_vector(rng, 45, 1.0);
    const auto energy = [&](const Eigen::VectorXd& z) { return c.dot(flatten(prior.decode(z))); };
    const Eigen::VectorXd g = prior.pullback(unflatten(c, 1));
    for (Eigen::Index k = 0; k < 3; ++k) {
        const Eigen::VectorXd h = Eigen::VectorXd::Unit(3, k) * 1e-3;
        const Eigen::VectorXd z = random_vector(rng, 3, 1.0);
        CHECK((energy(z + h) - energy(z - h)) / 2e-3 == doctest::Approx(g[k]).epsilon(1e-7));
    }
}

TEST_CASE("linear prior rejects non-orthonormal bases") {
    Eigen::MatrixXd basis = Eigen::MatrixXd::Zero(2, 45);
    basis(0, 0) = 1.0;
    basis(1, 0) = 1.0;
    CHECK(code_of([&] { MotionPrior::linear_subspace(1, Eigen::VectorXd::Zero(45), basis); }) ==
          ErrorCode::InvalidArgument);
    CHECK(code_of([&] { MotionPrior::linear_subspace(2, Eigen::VectorXd::Zero(45), basis); }) ==
          ErrorCode::DimensionMismatch);
}

TEST_CASE("fit recovers a low-dimensional subspace") {
    std::mt19937_64 rng(4);
    const std::size_t frames = 3;
    const Eigen::Index dim = 135;
    const Eigen::MatrixXd directions = Eigen::MatrixXd::Random(dim, 3);
    const auto samples = subspace_samples(rng, random_vector(rng, dim, 500.0), directions, 40);
    const MotionPrior prior = fit_linear_subspace(windows_from(samples, frames), 3);
    const Eigen::MatrixXd gram = prior.basis() * prior.basis().transpose();
    CHECK((gram - Eigen::MatrixXd::Identity(3, 3)).norm() < 1e-9);
    for (const auto& s : samples) {
        const auto poses = unflatten(s, frames);
        CHECK((flatten(prior.decode(prior.encode(poses))) - s).norm() < 1e-6);
    }
}

TEST_CASE("fit at full rank reproduces the training windows") {
    std::mt19937_64 rng(5);
    const std::size_t k = 45;
    std::vector<Eigen::VectorXd> samples;
    for (std::size_t i = 0; i < k + 1; ++i) samples.push_back(random_vector(rng, 45, 200.0));
    const MotionPrior prior = fit_linear_subspace(windows_from(samples, 1), k);
    for (const auto& s : samples) {
        CHECK((flatten(prior.decode(prior.encode(unflatten(s, 1)))) - s).norm() < 1e-6);
    }
}

TEST_CASE("fit minimizes reconstruction error among rank-k subspaces") {
    std::mt19937_64 rng(6);
    std::vector<Eigen::VectorXd> samples;
    Eigen::VectorXd scales(45);
    for (Eigen::Index i = 0; i < 45; ++i) scales[i] = 300.0 / (1.0 + i);
    for (int i = 0; i < 60; ++i) samples.push_back(random_vector(rng, 45, 1.0).cwiseProduct(scales));
    const MotionPrior prior = fit_linear_subspace(windows_from(samples, 1), 5);
    const auto error = [&](const MotionPrior& p) {
        double e = 0.0;
        for (const auto& s : samples) e += (flatten(p.decode(p.encode(unflatten(s, 1)))) - s).squaredNorm();
        return e;
    };
    const double best = error(prior);
    for (int trial = 0; trial < 20; ++trial) {
        Eigen::MatrixXd q =
            Eigen::HouseholderQR<Eigen::MatrixXd>(Eigen::MatrixXd::Random(45, 5)).householderQ() *
            Eigen::MatrixXd::Identity(45, 5);
        CHECK(best <= error(MotionPrior::linear_subspace(1, prior.mean(), q.transpose())));
    }
}

TEST_CASE("fit input errors") {
    std::mt19937_64 rng(7);
    std::vector<Eigen::VectorXd> samples;
    for (int i = 0; i < 4; ++i) samples.push_back(random_vector(rng, 90, 1.0));
    CHECK(code_of([&] { fit_linear_subspace(windows_from(samples, 2), 4); }) == ErrorCode::InsufficientData);
    auto windows = windows_from(samples, 2);
    windows[1].frames.pop_back();
    CHECK(code_of([&] { fit_linear_subspace(windows, 2); }) == ErrorCode::DimensionMismatch);
}
