#include <doctest.h>

#include <cmath>

#include "egolabel/error.hpp"
#include "egolabel/metrics.hpp"
#include "egolabel/optimize.hpp"
#include "support.hpp"

using namespace egolabel;

namespace {

SynthScenario scenario(std::uint64_t seed, std::size_t frames) {
    SynthConfig cfg;
    cfg.seed = seed;
    cfg.frames = frames;
    return gen_scenario(cfg);
}

class FailingEstimator : public PoseEstimator {
public:
    explicit FailingEstimator(int fail_at) : fail_at_(fail_at) {}
    std::vector<JointSet15> predict(const SequenceDataset& dataset) override {
        if (calls_++ == fail_at_) throw std::runtime_error("network diverged");
        return inner_.predict(dataset);
    }
    void update(const PseudoLabelSet&) override {}

private:
    int fail_at_;
    int calls_ = 0;
    PassThroughEstimator inner_;
};

}  // namespace

TEST_CASE("window offsets") {
    CHECK(window_offsets(100, 50, 50) == std::vector<std::size_t>{0, 50});
    CHECK(window_offsets(120, 50, 50) == std::vector<std::size_t>{0, 50, 70});
    CHECK(window_offsets(50, 50, 50) == std::vector<std::size_t>{0});
    CHECK(window_offsets(100, 50, 25) == std::vector<std::size_t>{0, 25, 50});
    for (std::size_t length : {50u, 73u, 99u, 150u, 201u}) {
        for (std::size_t stride : {10u, 25u, 50u}) {
            std::vector<int> covered(length, 0);
            for (std::size_t o : window_offsets(length, 50, stride)) {
                CHECK(o + 50 <= length);
                for (std::size_t k = o; k < o + 50; ++k) ++covered[k];
            }
            for (int c : covered) CHECK(c > 0);
        }
    }
    try {
        window_offsets(49, 50, 50);
        FAIL("expected SequenceTooShort");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::SequenceTooShort);
    }
}

TEST_CASE("window observations slice the dataset") {
    const auto s = scenario(1, 60);
    const auto obs = window_observations(s.dataset, 10, 20);
    CHECK(obs.size() == 20);
    CHECK(obs.slam_rel.size() == 19);
    CHECK(obs.ego_3d_init[0].joints == s.dataset.frames[10].ego_3d.joints);
    CHECK(segment(s.dataset, 20, 20).size() == 3);
    CHECK_THROWS_AS(window_observations(s.dataset, 50, 20), Error);
}

TEST_CASE("a single window reproduces optimize_window") {
    const auto s = scenario(2, 50);
    PipelineConfig cfg;
    const auto labels = generate_pseudo_labels(s.dataset, EnergyWeights{}, BoneTopology::standard(), nullptr, cfg);
    const auto r = optimize_window(window_observations(s.dataset, 0, 50), EnergyWeights{},
                                   BoneTopology::standard(), nullptr, cfg.optimizer);
    REQUIRE(labels.frames.size() == 50);
    CHECK(labels.labeled_fraction() == 1.0);
    for (std::size_t i = 0; i < 50; ++i) CHECK(labels.frames[i].pose.joints == r.final_state.poses[i]);
    CHECK(labels.windows[0].energy_trace == r.energy_trace);
}

TEST_CASE("frames take the window with the nearest center") {
    const auto s = scenario(3, 120);
    PipelineConfig cfg;
    cfg.optimizer.max_iters = 50;
    const auto labels = generate_pseudo_labels(s.dataset, EnergyWeights{}, BoneTopology::standard(), nullptr, cfg);
    CHECK(labels.windows.size() == 3);
    CHECK(labels.frames[10].window == 0);
    CHECK(labels.frames[60].window == 1);
    CHECK(labels.frames[84].window == 1);
    CHECK(labels.frames[85].window == 2);
    CHECK(labels.frames[119].window == 2);
}

TEST_CASE("results do not depend on the thread count") {
    const auto s = scenario(4, 150);
    PipelineConfig cfg;
    cfg.stride = 25;
    cfg.optimizer.max_iters = 100;
    const auto a = generate_pseudo_labels(s.dataset, EnergyWeights{}, BoneTopology::standard(), nullptr, cfg);
    cfg.threads = 4;
    const auto b = generate_pseudo_labels(s.dataset, EnergyWeights{}, BoneTopology::standard(), nullptr, cfg);
    REQUIRE(a.frames.size() == b.frames.size());
    for (std::size_t i = 0; i < a.frames.size(); ++i) {
        CHECK(a.frames[i].pose.joints == b.frames[i].pose.joints);
        CHECK(a.frames[i].encoded.heatmaps == b.frames[i].encoded.heatmaps);
    }
}

TEST_CASE("failed windows leave their frames unlabeled") {
    auto s = scenario(5, 150);
    for (std::size_t i = 50; i < 100; ++i) s.dataset.frames[i].ext_2d.confidence.fill(0.0);
    PipelineConfig cfg;
    cfg.optimizer.max_iters = 50;
    const auto labels = generate_pseudo_labels(s.dataset, EnergyWeights{}, BoneTopology::standard(), nullptr, cfg);
    CHECK_FALSE(labels.windows[1].ok);
    CHECK(labels.windows[1].error.find("InitializationFailure") != std::string::npos);
    CHECK(labels.labeled_fraction() == doctest::Approx(2.0 / 3.0));
    CHECK_FALSE(labels.frames[70].labeled);
    CHECK(labels.frames[70].flags == std::vector<std::string>{"unlabeled"});
    const auto poses = labels.poses();
    for (double c : poses.frames[70].confidence) CHECK(c == 0.0);
    CHECK(pa_mpjpe(poses, s.gt_poses).frames_skipped == 50);
}

TEST_CASE("heatmaps peak at the projected joint") {
    const FisheyeModel m = FisheyeModel::default_calibration();
    const LabelGrid grid;
    CHECK((grid.to_grid(m, m.center) - Vec2(32.0, 32.0)).norm() < 1e-12);
    const auto s = scenario(6, 10);
    for (const auto& pose : s.gt_poses.frames) {
        const EncodedLabel label = encode_label(pose, m, grid);
        CHECK(label.heatmaps.size() == 15u * 64u * 64u);
        for (std::size_t j = 0; j < kNumJoints; ++j) {
            CHECK(label.distances[j] == doctest::Approx(pose[j].norm()));
            REQUIRE(label.valid[j]);
            const Vec2 px = project_fisheye(m, pose[j]);
            const Vec2 g = grid.to_grid(m, px);
            CHECK((grid.to_pixel(m, g) - px).norm() < 1e-9);
            const Vec2 peak = heatmap_argmax(label, j, grid);
            if (g.x() >= 0.0 && g.x() <= 63.0 && g.y() >= 0.0 && g.y() <= 63.0) {
                CHECK(std::abs(peak.x() - g.x()) <= 0.5 + 1e-9);
                CHECK(std::abs(peak.y() - g.y()) <= 0.5 + 1e-9);
            }
            const int x = 17, y = 40;
            const double expected = std::exp(-((x - g.x()) * (x - g.x()) + (y - g.y()) * (y - g.y())) /
                                             (2.0 * grid.sigma * grid.sigma));
            CHECK(label.at(j, x, y, grid) == doctest::Approx(expected).epsilon(1e-6));
        }
    }
}

TEST_CASE("joints outside the field of view are flagged") {
    const FisheyeModel m = FisheyeModel::default_calibration();
    JointSet15 pose;
    for (std::size_t j = 0; j < kNumJoints; ++j) pose[j] = Vec3(100.0, 50.0 * j, 1000.0);
    pose[3] = Vec3(0.0, 0.0, -1000.0);
    const EncodedLabel label = encode_label(pose, m, LabelGrid{});
    CHECK_FALSE(label.valid[3]);
    CHECK(label.valid[4]);
    CHECK(label.distances[3] == doctest::Approx(1000.0));
    for (int y = 0; y < 64; ++y)
        for (int x = 0; x < 64; ++x) CHECK(label.at(3, x, y, LabelGrid{}) == 0.0f);
}

TEST_CASE("label grid validation") {
    LabelGrid g;
    g.width = 0;
    CHECK_THROWS_AS(g.validate(), Error);
    g = {};
    g.sigma = 0.0;
    CHECK_THROWS_AS(g.validate(), Error);
}

TEST_CASE("bootstrap with a pass-through estimator repeats one pass") {
    const auto s = scenario(7, 50);
    PipelineConfig cfg;
    cfg.optimizer.max_iters = 200;
    PassThroughEstimator est;
    const auto b = bootstrap(s.dataset, est, EnergyWeights{}, BoneTopology::standard(), nullptr, cfg, 2, &s.gt_poses);
    const auto once = generate_pseudo_labels(s.dataset, EnergyWeights{}, BoneTopology::standard(), nullptr, cfg);
    CHECK(b.optimizer_passes == 2);
    REQUIRE(b.label_pa_mpjpe.size() == 2);
    CHECK(b.label_pa_mpjpe[0] == b.label_pa_mpjpe[1]);
    for (std::size_t i = 0; i < 50; ++i) CHECK(b.labels.frames[i].pose.joints == once.frames[i].pose.joints);
}

TEST_CASE("bootstrap with a blending estimator improves the labels") {
    const auto s = scenario(8, 50);
    PipelineConfig cfg;
    BlendingEstimator est(0.5);
    const auto b = bootstrap(s.dataset, est, EnergyWeights{}, BoneTopology::standard(), nullptr, cfg, 3, &s.gt_poses);
    REQUIRE(b.label_pa_mpjpe.size() == 3);
    CHECK(b.label_pa_mpjpe[1] <= b.label_pa_mpjpe[0]);
    CHECK(b.label_pa_mpjpe[2] <= b.label_pa_mpjpe[1]);
}

TEST_CASE("estimator failures report the iteration") {
    const auto s = scenario(9, 50);
    PipelineConfig cfg;
    cfg.optimizer.max_iters = 20;
    FailingEstimator est(1);
    try {
        bootstrap(s.dataset, est, EnergyWeights{}, BoneTopology::standard(), nullptr, cfg, 3);
        FAIL("expected EstimatorFailure");
    } catch (const EstimatorFailure& e) {
        CHECK(e.iteration() == 1);
    }
    PassThroughEstimator ok;
    CHECK_THROWS_AS(bootstrap(s.dataset, ok, EnergyWeights{}, BoneTopology::standard(), nullptr, cfg, 0), Error);
}
