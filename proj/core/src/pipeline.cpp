#include "egolabel/pipeline.hpp"

#include <atomic>
#include <cmath>
#include <thread>

#include "egolabel/error.hpp"
#include "egolabel/metrics.hpp"

namespace egolabel {

void SequenceDataset::validate() const {
    for (std::size_t i = 1; i < frames.size(); ++i) {
        if (frames[i].index <= frames[i - 1].index) {
            throw Error(ErrorCode::SchemaError, "frame indices must increase (frame " +
                                                    std::to_string(frames[i].index) + ")");
        }
    }
    fisheye.validate();
    pinhole.validate();
}

void LabelGrid::validate() const {
    if (width < 2 || height < 2) throw Error(ErrorCode::InvalidArgument, "label grid must be at least 2x2");
    if (!(sigma > 0.0)) throw Error(ErrorCode::InvalidArgument, "heatmap sigma must be positive");
}

Vec2 LabelGrid::to_pixel(const FisheyeModel& m, const Vec2& grid) const {
    return m.center + Vec2((grid.x() - 0.5 * width) * cell_size_x(m), (grid.y() - 0.5 * height) * cell_size_y(m));
}

Vec2 LabelGrid::to_grid(const FisheyeModel& m, const Vec2& pixel) const {
    const Vec2 d = pixel - m.center;
    return Vec2(d.x() / cell_size_x(m) + 0.5 * width, d.y() / cell_size_y(m) + 0.5 * height);
}

EncodedLabel encode_label(const JointSet15& pose, const FisheyeModel& fisheye, const LabelGrid& grid) {
    const auto w = static_cast<std::size_t>(grid.width);
    const auto h = static_cast<std::size_t>(grid.height);
    EncodedLabel out;
    out.heatmaps.assign(kNumJoints * w * h, 0.0f);
    const double inv_two_sigma2 = 1.0 / (2.0 * grid.sigma * grid.sigma);
    for (std::size_t j = 0; j < kNumJoints; ++j) {
        out.distances[j] = pose[j].norm();
        const auto px = try_project_fisheye(fisheye, pose[j]);
        out.valid[j] = px.has_value();
        if (!px) continue;
        const Vec2 g = grid.to_grid(fisheye, *px);
        float* map = out.heatmaps.data() + j * w * h;
        for (std::size_t y = 0; y < h; ++y) {
            const double dy = static_cast<double>(y) - g.y();
            for (std::size_t x = 0; x < w; ++x) {
                const double dx = static_cast<double>(x) - g.x();
                map[y * w + x] = static_cast<float>(std::exp(-(dx * dx + dy * dy) * inv_two_sigma2));
            }
        }
    }
    return out;
}

std::vector<EncodedLabel> labels_to_heatmaps_distances(const std::vector<JointSet15>& poses,
                                                       const FisheyeModel& fisheye, const LabelGrid& grid) {
    grid.validate();
    std::vector<EncodedLabel> out;
    out.reserve(poses.size());
    for (const auto& p : poses) out.push_back(encode_label(p, fisheye, grid));
    return out;
}

Vec2 heatmap_argmax(const EncodedLabel& label, std::size_t joint, const LabelGrid& grid) {
    int best_x = 0, best_y = 0;
    float best = -1.0f;
    for (int y = 0; y < grid.height; ++y) {
        for (int x = 0; x < grid.width; ++x) {
            const float v = label.at(joint, x, y, grid);
            if (v > best) {
                best = v;
                best_x = x;
                best_y = y;
            }
        }
    }
    return Vec2(best_x, best_y);
}

std::vector<std::size_t> window_offsets(std::size_t length, std::size_t frames, std::size_t stride) {
    if (frames < 2) throw Error(ErrorCode::InvalidArgument, "window length must be >= 2");
    if (stride < 1) throw Error(ErrorCode::InvalidArgument, "stride must be >= 1");
    if (length < frames) {
        throw Error(ErrorCode::SequenceTooShort, "sequence of " + std::to_string(length) +
                                                     " frames is shorter than the window (" +
                                                     std::to_string(frames) + ")");
    }
    std::vector<std::size_t> offsets;
    for (std::size_t o = 0; o + frames <= length; o += stride) offsets.push_back(o);
    if (offsets.back() + frames < length) offsets.push_back(length - frames);
    return offsets;
}

WindowObservations window_observations(const SequenceDataset& dataset, std::size_t offset, std::size_t frames) {
    if (offset + frames > dataset.size()) throw Error(ErrorCode::InvalidArgument, "window exceeds the dataset");
    WindowObservations obs;
    obs.fisheye = dataset.fisheye;
    obs.pinhole = dataset.pinhole;
    for (std::size_t k = 0; k < frames; ++k) {
        const FrameObservation& f = dataset.frames[offset + k];
        obs.ego_2d.push_back(f.ego_2d);
        obs.ego_3d_init.push_back(f.ego_3d);
        obs.ext_2d.push_back(f.ext_2d);
        obs.ext_3d.push_back(f.ext_3d);
        if (k + 1 < frames) obs.slam_rel.push_back(f.slam_to_next);
    }
    return obs;
}

std::vector<Window> segment(const SequenceDataset& dataset, std::size_t frames, std::size_t stride) {
    std::vector<Window> out;
    for (std::size_t o : window_offsets(dataset.size(), frames, stride)) {
        out.push_back({o, window_observations(dataset, o, frames)});
    }
    return out;
}

double PseudoLabelSet::labeled_fraction() const {
    if (frames.empty()) return 0.0;
    std::size_t n = 0;
    for (const auto& f : frames) n += f.labeled ? 1 : 0;
    return static_cast<double>(n) / static_cast<double>(frames.size());
}

PoseSequence PseudoLabelSet::poses(double frame_rate) const {
    PoseSequence seq;
    seq.frame_rate = frame_rate;
    for (const auto& f : frames) {
        JointSet15 p = f.pose;
        if (!f.labeled) p.confidence.fill(0.0);
        seq.frames.push_back(p);
    }
    return seq;
}

namespace {

struct WindowOutcome {
    WindowSummary summary;
    std::optional<OptimizationReport> report;
};

WindowOutcome run_window(const SequenceDataset& dataset, std::size_t offset, const EnergyWeights& weights,
                         const BoneTopology& topo, const MotionPrior* prior, const PipelineConfig& config) {
    WindowOutcome out;
    out.summary.offset = offset;
    out.summary.length = config.window;
    try {
        const WindowObservations obs = window_observations(dataset, offset, config.window);
        OptimizationReport r = optimize_window(obs, weights, topo, prior, config.optimizer);
        out.summary.ok = true;
        out.summary.iterations = r.iterations_used;
        out.summary.converged = r.converged;
        out.summary.initial_energy = r.initial_energy;
        out.summary.final_energy = r.post_projection_energy;
        out.summary.dropped = r.dropped_residual_count;
        out.summary.energy_trace = r.energy_trace;
        out.summary.term_trace = r.term_trace;
        out.report = std::move(r);
    } catch (const Error& e) {
        out.summary.ok = false;
        out.summary.error = e.what();
    }
    return out;
}

}  // namespace

PseudoLabelSet generate_pseudo_labels(const SequenceDataset& dataset, const EnergyWeights& weights,
                                      const BoneTopology& topo, const MotionPrior* prior,
                                      const PipelineConfig& config) {
    dataset.validate();
    config.grid.validate();
    config.optimizer.validate();
    weights.validate();
    const auto offsets = window_offsets(dataset.size(), config.window, config.stride);

    std::vector<WindowOutcome> outcomes(offsets.size());
    const int threads = std::max(1, std::min<int>(config.threads, static_cast<int>(offsets.size())));
    if (threads == 1) {
        for (std::size_t w = 0; w < offsets.size(); ++w) {
            outcomes[w] = run_window(dataset, offsets[w], weights, topo, prior, config);
        }
    } else {
        std::atomic<std::size_t> next{0};
        std::vector<std::jthread> pool;
        for (int t = 0; t < threads; ++t) {
            pool.emplace_back([&] {
                for (std::size_t w = next++; w < offsets.size(); w = next++) {
                    outcomes[w] = run_window(dataset, offsets[w], weights, topo, prior, config);
                }
            });
        }
    }

    PseudoLabelSet labels;
    labels.grid = config.grid;
    for (const auto& o : outcomes) labels.windows.push_back(o.summary);

    const double half = 0.5 * static_cast<double>(config.window - 1);
    for (std::size_t f = 0; f < dataset.size(); ++f) {
        FrameLabel label;
        label.frame = dataset.frames[f].index;
        std::optional<std::size_t> best;
        double best_dist = 0.0;
        for (std::size_t w = 0; w < offsets.size(); ++w) {
            if (!outcomes[w].report || f < offsets[w] || f >= offsets[w] + config.window) continue;
            const double d = std::abs(static_cast<double>(f) - (static_cast<double>(offsets[w]) + half));
            if (!best || d < best_dist) {
                best = w;
                best_dist = d;
            }
        }
        if (!best) {
            label.flags.push_back("unlabeled");
            labels.frames.push_back(std::move(label));
            continue;
        }
        const OptimizationReport& r = *outcomes[*best].report;
        const std::size_t k = f - offsets[*best];
        label.labeled = true;
        label.window = *best;
        label.pose.joints = r.final_state.poses[k];
        label.pose.confidence.fill(1.0);
        label.camera = r.final_state.camera(k);
        label.encoded = encode_label(label.pose, dataset.fisheye, config.grid);
        if (!r.converged) label.flags.push_back("not_converged");
        for (std::size_t j = 0; j < kNumJoints; ++j) {
            if (!label.encoded.valid[j]) {
                label.flags.push_back("outside_fov:" + std::string(joint_name(j)));
            }
        }
        labels.frames.push_back(std::move(label));
    }
    return labels;
}

std::vector<JointSet15> PassThroughEstimator::predict(const SequenceDataset& dataset) {
    std::vector<JointSet15> out;
    out.reserve(dataset.size());
    for (const auto& f : dataset.frames) out.push_back(f.ego_3d);
    return out;
}

std::vector<JointSet15> BlendingEstimator::predict(const SequenceDataset& dataset) {
    if (stored_.size() != dataset.size()) {
        stored_.clear();
        for (const auto& f : dataset.frames) stored_.push_back(f.ego_3d);
    }
    return stored_;
}

void BlendingEstimator::update(const PseudoLabelSet& labels) {
    if (labels.frames.size() != stored_.size()) {
        throw Error(ErrorCode::DimensionMismatch, "label set does not match the estimator's frames");
    }
    for (std::size_t i = 0; i < stored_.size(); ++i) {
        if (!labels.frames[i].labeled) continue;
        for (std::size_t j = 0; j < kNumJoints; ++j) {
            stored_[i][j] = alpha_ * labels.frames[i].pose[j] + (1.0 - alpha_) * stored_[i][j];
        }
    }
}

BootstrapResult bootstrap(const SequenceDataset& dataset, PoseEstimator& estimator, const EnergyWeights& weights,
                          const BoneTopology& topo, const MotionPrior* prior, const PipelineConfig& config,
                          int max_iter, const PoseSequence* ground_truth) {
    if (max_iter < 1) throw Error(ErrorCode::InvalidArgument, "max_iter must be >= 1");
    BootstrapResult result;
    SequenceDataset current = dataset;
    for (int iter = 0; iter < max_iter; ++iter) {
        std::vector<JointSet15> predicted;
        try {
            predicted = estimator.predict(current);
        } catch (const std::exception& e) {
            throw EstimatorFailure(iter, e.what());
        }
        if (predicted.size() != current.size()) {
            throw EstimatorFailure(iter, "prediction count differs from the dataset frame count");
        }
        // Detector visibility stays with the dataset; only positions are replaced.
        for (std::size_t i = 0; i < current.size(); ++i) current.frames[i].ego_3d.joints = predicted[i].joints;

        result.labels = generate_pseudo_labels(current, weights, topo, prior, config);
        ++result.optimizer_passes;
        if (ground_truth) {
            result.label_pa_mpjpe.push_back(pa_mpjpe(result.labels.poses(), *ground_truth).mean);
        }
        try {
            estimator.update(result.labels);
        } catch (const std::exception& e) {
            throw EstimatorFailure(iter, e.what());
        }
    }
    return result;
}

}  // namespace egolabel
