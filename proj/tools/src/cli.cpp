#include "cli.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <ostream>
#include <sstream>

#include <CLI11.hpp>

#include "egolabel/error.hpp"
#include "egolabel/io.hpp"
#include "egolabel/metrics.hpp"
#include "egolabel/pipeline.hpp"
#include "egolabel/synth.hpp"

namespace egolabel::cli {

namespace fs = std::filesystem;
using io::json;

namespace {

struct SynthArgs {
    std::string out;
    std::size_t frames = 50;
    std::uint64_t seed = 0;
    std::string motion = "walk";
    std::string occlusion = "none";
    NoiseConfig noise;
    double slam_scale = 1.0;
};

struct OptimizeArgs {
    std::string dataset;
    std::string calib;
    std::string weights;
    std::string prior;
    std::string config;
    std::optional<std::size_t> window;
    std::optional<std::size_t> stride;
    std::optional<std::string> rotation_mode;
    std::optional<int> threads;
    std::optional<int> max_iters;
    std::optional<double> sigma;
    std::optional<int> grid;
    bool optimize_slam_scale = false;
    std::string out;
    std::string trace;
    std::string gt;
    int iters = 3;
    double alpha = 0.5;
    bool json_report = false;
};

struct EvaluateArgs {
    std::string pred;
    std::string gt;
    std::string topo;
    bool per_action = false;
    bool json_report = false;
};

void add_pipeline_options(CLI::App* cmd, OptimizeArgs& a) {
    cmd->add_option("--dataset", a.dataset, "Dataset JSON-lines file")->required()->check(CLI::ExistingFile);
    cmd->add_option("--calib", a.calib, "Calibration JSON file")->required()->check(CLI::ExistingFile);
    cmd->add_option("--weights", a.weights, "Energy weights JSON file")->check(CLI::ExistingFile);
    cmd->add_option("--prior", a.prior, "Motion prior JSON file")->check(CLI::ExistingFile);
    cmd->add_option("--config", a.config, "Pipeline/optimizer config JSON file")->check(CLI::ExistingFile);
    cmd->add_option("--window,-B", a.window, "Window length in frames");
    cmd->add_option("--stride", a.stride, "Window stride in frames");
    cmd->add_option("--rotation-mode", a.rotation_mode, "axis_angle or raw_matrix")
        ->check(CLI::IsMember({"axis_angle", "raw_matrix"}));
    cmd->add_option("--threads", a.threads, "Worker threads (results do not depend on it)");
    cmd->add_option("--max-iters", a.max_iters, "Optimizer iteration cap");
    cmd->add_option("--grid", a.grid, "Square label grid size");
    cmd->add_option("--sigma", a.sigma, "Heatmap sigma in grid cells");
    cmd->add_flag("--optimize-slam-scale", a.optimize_slam_scale, "Optimize the SLAM translation scale");
    cmd->add_option("--out", a.out, "Output labels JSON-lines file")->required();
    cmd->add_option("--trace", a.trace, "Energy trace CSV file");
    cmd->add_flag("--json", a.json_report, "Print a JSON summary");
}

MotionKind parse_motion(const std::string& s) {
    return s == "random" ? MotionKind::RandomSmooth : MotionKind::WalkCycle;
}

Occlusion parse_occlusion(const std::string& s) {
    if (s == "lower_body_ego") return Occlusion::LowerBodyEgo;
    if (s == "hands_ext") return Occlusion::HandsExt;
    return Occlusion::None;
}

int cmd_synth(const SynthArgs& a, std::ostream& out) {
    SynthConfig cfg;
    cfg.frames = a.frames;
    cfg.seed = a.seed;
    cfg.motion = parse_motion(a.motion);
    cfg.occlusion = parse_occlusion(a.occlusion);
    cfg.noise = a.noise;
    cfg.slam_translation_scale = a.slam_scale;
    const SynthScenario s = gen_scenario(cfg);

    const fs::path dir(a.out);
    fs::create_directories(dir);
    std::ostringstream lines;
    io::write_dataset_jsonl(s.dataset, lines);
    io::write_text_file(dir / "dataset.jsonl", lines.str());
    io::write_text_file(dir / "calib.json",
                        io::to_json(io::Calibration{s.dataset.pinhole, s.dataset.fisheye}).dump(2) + "\n");

    std::vector<std::string> tags;
    for (const auto& f : s.dataset.frames) tags.push_back(f.tag);
    json gt = io::to_json(s.gt_poses, tags);
    json cams = json::array();
    for (const auto& c : s.gt_cameras) cams.push_back(io::to_json(c));
    gt["cameras"] = std::move(cams);
    io::write_text_file(dir / "gt.json", gt.dump() + "\n");

    out << "wrote " << s.dataset.size() << " frames to " << dir.string() << "\n";
    return kOk;
}

struct PipelineInputs {
    SequenceDataset dataset;
    EnergyWeights weights;
    std::optional<MotionPrior> prior;
    PipelineConfig config;
};

PipelineInputs load_pipeline(const OptimizeArgs& a) {
    PipelineInputs in;
    const io::Calibration calib = io::calibration_from_json(io::read_json_file(a.calib));
    std::ifstream ds(a.dataset);
    if (!ds) throw Error(ErrorCode::SchemaError, "cannot open " + a.dataset);
    in.dataset = io::read_dataset_jsonl(ds, calib);
    in.dataset.id = fs::path(a.dataset).stem().string();
    if (!a.weights.empty()) in.weights = io::weights_from_json(io::read_json_file(a.weights));
    if (!a.prior.empty()) in.prior = io::prior_from_json(io::read_json_file(a.prior));

    PipelineConfig& c = in.config;
    if (!a.config.empty()) {
        const json j = io::read_json_file(a.config);
        if (!j.is_object()) throw Error(ErrorCode::SchemaError, "config must be a JSON object");
        try {
            for (const auto& [key, v] : j.items()) {
                if (key == "window") c.window = v.get<std::size_t>();
                else if (key == "stride") c.stride = v.get<std::size_t>();
                else if (key == "threads") c.threads = v.get<int>();
                else if (key == "grid") {
                    c.grid.width = v.value("width", c.grid.width);
                    c.grid.height = v.value("height", c.grid.height);
                    c.grid.sigma = v.value("sigma", c.grid.sigma);
                } else if (key == "optimizer") c.optimizer = io::optimizer_config_from_json(v, c.optimizer);
                else throw Error(ErrorCode::SchemaError, "unknown config key '" + key + "'");
            }
        } catch (const json::exception& e) {
            throw Error(ErrorCode::SchemaError, std::string("config: ") + e.what());
        }
    }
    if (a.window) c.window = *a.window;
    if (a.stride) c.stride = *a.stride;
    if (a.threads) c.threads = *a.threads;
    if (a.max_iters) c.optimizer.max_iters = *a.max_iters;
    if (a.rotation_mode) c.optimizer.rotation_mode = io::parse_rotation_mode(*a.rotation_mode);
    if (a.optimize_slam_scale) c.optimizer.optimize_slam_scale = true;
    if (a.grid) c.grid.width = c.grid.height = *a.grid;
    if (a.sigma) c.grid.sigma = *a.sigma;
    if (in.prior && in.prior->frames() != c.window) {
        throw Error(ErrorCode::SchemaError, "prior was fit for " + std::to_string(in.prior->frames()) +
                                                "-frame windows, window is " + std::to_string(c.window));
    }
    return in;
}

json window_report(const PseudoLabelSet& labels) {
    json windows = json::array();
    for (const auto& w : labels.windows) {
        json jw = {{"offset", w.offset}, {"length", w.length}, {"ok", w.ok}};
        if (w.ok) {
            jw["iterations"] = w.iterations;
            jw["converged"] = w.converged;
            jw["initial_energy"] = w.initial_energy;
            jw["final_energy"] = w.final_energy;
            jw["dropped"] = w.dropped;
        } else {
            jw["error"] = w.error;
        }
        windows.push_back(std::move(jw));
    }
    return windows;
}

bool all_failed(const PseudoLabelSet& labels) {
    return std::none_of(labels.windows.begin(), labels.windows.end(), [](const WindowSummary& w) { return w.ok; });
}

int finish_labels(const OptimizeArgs& a, const PseudoLabelSet& labels, const EnergyWeights& weights, json report,
                  std::ostream& out, std::ostream& err) {
    const io::LabelFiles files = io::write_labels(labels, a.out);
    if (!a.trace.empty()) {
        std::ostringstream csv;
        io::write_trace_csv(labels, weights, csv);
        io::write_text_file(a.trace, csv.str());
    }
    report["labels"] = files.jsonl.string();
    report["heatmaps"] = files.heatmaps.string();
    report["labeled_fraction"] = labels.labeled_fraction();
    report["windows"] = window_report(labels);
    if (a.json_report) {
        out << report.dump(2) << "\n";
    } else {
        std::size_t ok = 0;
        for (const auto& w : labels.windows) ok += w.ok ? 1 : 0;
        out << "windows ok " << ok << "/" << labels.windows.size() << ", labeled fraction "
            << labels.labeled_fraction() << ", labels in " << files.jsonl.string() << "\n";
    }
    if (all_failed(labels)) {
        err << "error: optimization failed in every window\n";
        for (const auto& w : labels.windows) err << "  window at " << w.offset << ": " << w.error << "\n";
        return kAllWindowsFailed;
    }
    return kOk;
}

int cmd_optimize(const OptimizeArgs& a, std::ostream& out, std::ostream& err) {
    const PipelineInputs in = load_pipeline(a);
    const PseudoLabelSet labels = generate_pseudo_labels(in.dataset, in.weights, BoneTopology::standard(),
                                                         in.prior ? &*in.prior : nullptr, in.config);
    return finish_labels(a, labels, in.weights, json::object(), out, err);
}

int cmd_bootstrap(const OptimizeArgs& a, std::ostream& out, std::ostream& err) {
    if (a.iters < 1) throw Error(ErrorCode::InvalidArgument, "--iters must be >= 1");
    if (!(a.alpha > 0.0 && a.alpha <= 1.0)) throw Error(ErrorCode::InvalidArgument, "--alpha must be in (0, 1]");
    const PipelineInputs in = load_pipeline(a);
    std::optional<PoseSequence> gt;
    if (!a.gt.empty()) gt = io::read_poses_any(a.gt);
    BlendingEstimator estimator(a.alpha);
    const BootstrapResult r = bootstrap(in.dataset, estimator, in.weights, BoneTopology::standard(),
                                        in.prior ? &*in.prior : nullptr, in.config, a.iters, gt ? &*gt : nullptr);
    json report;
    report["iterations"] = r.optimizer_passes;
    if (gt) report["label_pa_mpjpe"] = r.label_pa_mpjpe;
    if (!a.json_report && gt) {
        out << "label PA-MPJPE per iteration:";
        for (double v : r.label_pa_mpjpe) out << " " << v;
        out << "\n";
    }
    return finish_labels(a, r.labels, in.weights, std::move(report), out, err);
}

json metric_json(const MetricResult& pa, const MetricResult& ba) {
    return {
        {"pa_mpjpe", pa.mean},
        {"ba_mpjpe", ba.mean},
        {"pa_mpjpe_median", pa.median},
        {"ba_mpjpe_median", ba.median},
        {"frames_used", pa.frames_used},
        {"frames_skipped", pa.frames_skipped},
        {"ba_frames_used", ba.frames_used},
        {"ba_frames_skipped", ba.frames_skipped},
    };
}

int cmd_evaluate(const EvaluateArgs& a, std::ostream& out) {
    std::vector<std::string> pred_tags, gt_tags;
    const PoseSequence pred = io::read_poses_any(a.pred, &pred_tags);
    const PoseSequence gt = io::read_poses_any(a.gt, &gt_tags);
    if (pred.size() != gt.size()) {
        throw Error(ErrorCode::SchemaError, "pred has " + std::to_string(pred.size()) + " frames, gt has " +
                                                std::to_string(gt.size()));
    }
    const BoneTopology topo = a.topo.empty() ? BoneTopology::standard()
                                             : io::topology_from_json(io::read_json_file(a.topo));
    const MetricResult pa = pa_mpjpe(pred, gt);
    const MetricResult ba = ba_mpjpe(pred, gt, topo);
    json report = metric_json(pa, ba);

    if (a.per_action) {
        std::map<std::string, std::pair<PoseSequence, PoseSequence>> groups;
        for (std::size_t i = 0; i < gt.size(); ++i) {
            std::string tag = gt_tags[i].empty() ? pred_tags[i] : gt_tags[i];
            if (tag.empty()) tag = "untagged";
            groups[tag].first.frames.push_back(pred.frames[i]);
            groups[tag].second.frames.push_back(gt.frames[i]);
        }
        json per_action = json::object();
        for (const auto& [tag, seqs] : groups) {
            per_action[tag] = metric_json(pa_mpjpe(seqs.first, seqs.second), ba_mpjpe(seqs.first, seqs.second, topo));
        }
        report["per_action"] = std::move(per_action);
    }

    if (a.json_report) {
        out << report.dump(2) << "\n";
    } else {
        out << "PA-MPJPE " << pa.mean << " mm (median " << pa.median << ")\n"
            << "BA-MPJPE " << ba.mean << " mm (median " << ba.median << ")\n"
            << "frames used " << pa.frames_used << ", skipped " << pa.frames_skipped << "\n";
        if (a.per_action) {
            for (const auto& [tag, m] : report["per_action"].items()) {
                out << "  " << tag << ": PA " << m["pa_mpjpe"] << ", BA " << m["ba_mpjpe"] << "\n";
            }
        }
    }
    return kOk;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Egocentric pose pseudo-label generation"};
    app.require_subcommand(1);

    SynthArgs sa;
    auto* synth = app.add_subcommand("synth", "Generate a synthetic scenario");
    synth->add_option("--out", sa.out, "Output directory")->required();
    synth->add_option("--frames", sa.frames, "Frame count")->check(CLI::Range(2, 1000000));
    synth->add_option("--seed", sa.seed, "Random seed");
    synth->add_option("--motion", sa.motion, "walk or random")->check(CLI::IsMember({"walk", "random"}));
    synth->add_option("--occlusion", sa.occlusion, "none, lower_body_ego or hands_ext")
        ->check(CLI::IsMember({"none", "lower_body_ego", "hands_ext"}));
    synth->add_option("--noise-ego3d", sa.noise.ego_3d, "mm")->check(CLI::NonNegativeNumber);
    synth->add_option("--noise-ego2d", sa.noise.ego_2d, "px")->check(CLI::NonNegativeNumber);
    synth->add_option("--noise-ext2d", sa.noise.ext_2d, "px")->check(CLI::NonNegativeNumber);
    synth->add_option("--noise-ext3d", sa.noise.ext_3d, "mm")->check(CLI::NonNegativeNumber);
    synth->add_option("--slam-scale", sa.slam_scale, "Scale applied to SLAM translations")
        ->check(CLI::PositiveNumber);

    OptimizeArgs oa;
    auto* optimize = app.add_subcommand("optimize", "Generate pseudo labels");
    add_pipeline_options(optimize, oa);

    OptimizeArgs ba;
    auto* boot = app.add_subcommand("bootstrap", "Bootstrapping loop with the reference estimator");
    add_pipeline_options(boot, ba);
    boot->add_option("--iters", ba.iters, "Bootstrapping iterations");
    boot->add_option("--alpha", ba.alpha, "Estimator blending factor");
    boot->add_option("--gt", ba.gt, "Ground-truth poses for the per-iteration trace")->check(CLI::ExistingFile);

    EvaluateArgs ea;
    auto* evaluate = app.add_subcommand("evaluate", "PA-MPJPE and BA-MPJPE");
    evaluate->add_option("--pred", ea.pred, "Predicted poses (pose JSON, labels or dataset JSON-lines)")
        ->required()
        ->check(CLI::ExistingFile);
    evaluate->add_option("--gt", ea.gt, "Ground-truth poses")->required()->check(CLI::ExistingFile);
    evaluate->add_option("--topo", ea.topo, "Bone topology JSON file")->check(CLI::ExistingFile);
    evaluate->add_flag("--per-action", ea.per_action, "Break results down by frame tag");
    evaluate->add_flag("--json", ea.json_report, "Print a JSON report");

    try {
        std::vector<std::string> reversed(args.rbegin(), args.rend());
        app.parse(reversed);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e, out, err);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e, out, err);
    } catch (const CLI::ParseError& e) {
        app.exit(e, out, err);
        return kInputError;
    }

    try {
        if (*synth) return cmd_synth(sa, out);
        if (*optimize) return cmd_optimize(oa, out, err);
        if (*boot) return cmd_bootstrap(ba, out, err);
        if (*evaluate) return cmd_evaluate(ea, out);
    } catch (const EstimatorFailure& e) {
        err << "error: " << e.what() << "\n";
        return kFailure;
    } catch (const Error& e) {
        err << "error: " << e.what() << "\n";
        switch (e.code()) {
        case ErrorCode::SchemaError:
        case ErrorCode::InvalidArgument:
        case ErrorCode::SequenceTooShort:
        case ErrorCode::DimensionMismatch:
            return kInputError;
        default:
            return kFailure;
        }
    } catch (const fs::filesystem_error& e) {
        err << "error: " << e.what() << "\n";
        return kInputError;
    }
    return kFailure;
}

}  // namespace egolabel::cli
