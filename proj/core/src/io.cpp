#include "egolabel/io.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

#include "egolabel/error.hpp"

namespace egolabel::io {

namespace {

[[noreturn]] void schema_error(const std::string& what) { throw Error(ErrorCode::SchemaError, what); }

const json& require(const json& j, const char* key) {
    if (!j.is_object() || !j.contains(key)) schema_error(std::string("missing key '") + key + "'");
    return j.at(key);
}

double number(const json& j, const char* what) {
    if (!j.is_number()) schema_error(std::string(what) + " must be a number");
    return j.get<double>();
}

std::vector<double> numbers(const json& j, std::size_t expected, const char* what) {
    if (!j.is_array() || (expected != 0 && j.size() != expected)) {
        schema_error(std::string(what) + " must be an array of " + std::to_string(expected) + " numbers");
    }
    std::vector<double> out;
    out.reserve(j.size());
    for (const auto& v : j) out.push_back(number(v, what));
    return out;
}

json vec_json(const Vec3& v) { return json::array({v.x(), v.y(), v.z()}); }

std::array<Vec3, kNumJoints> joints_from_json(const json& j, const char* what) {
    if (!j.is_array() || j.size() != kNumJoints) schema_error(std::string(what) + " must list 15 joints");
    std::array<Vec3, kNumJoints> out;
    for (std::size_t k = 0; k < kNumJoints; ++k) {
        const auto v = numbers(j[k], 3, what);
        out[k] = Vec3(v[0], v[1], v[2]);
    }
    return out;
}

json joints_json(const std::array<Vec3, kNumJoints>& joints) {
    json arr = json::array();
    for (const auto& p : joints) arr.push_back(vec_json(p));
    return arr;
}

Detection2D detection_from_json(const json& j, const char* what) {
    if (!j.is_array() || j.size() != kNumJoints) schema_error(std::string(what) + " must list 15 joints");
    Detection2D d;
    for (std::size_t k = 0; k < kNumJoints; ++k) {
        const auto v = numbers(j[k], 3, what);
        d.pixels[k] = Vec2(v[0], v[1]);
        if (v[2] < 0.0 || v[2] > 1.0) schema_error(std::string(what) + " confidence outside [0, 1]");
        d.confidence[k] = v[2];
    }
    return d;
}

json detection_json(const Detection2D& d) {
    json arr = json::array();
    for (std::size_t k = 0; k < kNumJoints; ++k) {
        arr.push_back(json::array({d.pixels[k].x(), d.pixels[k].y(), d.confidence[k]}));
    }
    return arr;
}

template <typename F>
auto guarded(F&& f) {
    try {
        return f();
    } catch (const json::exception& e) {
        schema_error(e.what());
    }
}

}  // namespace

json to_json(const Calibration& c) {
    json j;
    j["pinhole"] = {{"fx", c.pinhole.fx}, {"fy", c.pinhole.fy}, {"cx", c.pinhole.cx}, {"cy", c.pinhole.cy}};
    const auto& f = c.fisheye;
    j["fisheye"] = {
        {"poly", json::array({f.poly[0], f.poly[1], f.poly[2], f.poly[3]})},
        {"center", json::array({f.center.x(), f.center.y()})},
        {"affine", json::array({json::array({f.affine(0, 0), f.affine(0, 1)}),
                                json::array({f.affine(1, 0), f.affine(1, 1)})})},
        {"image_radius", f.image_radius},
    };
    return j;
}

Calibration calibration_from_json(const json& j) {
    Calibration c;
    const json& p = require(j, "pinhole");
    c.pinhole.fx = number(require(p, "fx"), "pinhole.fx");
    c.pinhole.fy = number(require(p, "fy"), "pinhole.fy");
    c.pinhole.cx = number(require(p, "cx"), "pinhole.cx");
    c.pinhole.cy = number(require(p, "cy"), "pinhole.cy");
    const json& f = require(j, "fisheye");
    const auto poly = numbers(require(f, "poly"), 4, "fisheye.poly");
    for (std::size_t k = 0; k < 4; ++k) c.fisheye.poly[k] = poly[k];
    const auto center = numbers(require(f, "center"), 2, "fisheye.center");
    c.fisheye.center = Vec2(center[0], center[1]);
    const json& a = require(f, "affine");
    if (!a.is_array() || a.size() != 2) schema_error("fisheye.affine must be 2x2");
    const auto r0 = numbers(a[0], 2, "fisheye.affine");
    const auto r1 = numbers(a[1], 2, "fisheye.affine");
    c.fisheye.affine << r0[0], r0[1], r1[0], r1[1];
    c.fisheye.image_radius = number(require(f, "image_radius"), "fisheye.image_radius");
    try {
        c.pinhole.validate();
        c.fisheye.validate();
    } catch (const Error& e) {
        schema_error(e.what());
    }
    return c;
}

json to_json(const RigidTransform& t) {
    json r = json::array();
    for (int a = 0; a < 3; ++a)
        for (int b = 0; b < 3; ++b) r.push_back(t.rotation(a, b));
    return {{"R", r}, {"t", vec_json(t.translation)}};
}

RigidTransform transform_from_json(const json& j) {
    const auto r = numbers(require(j, "R"), 9, "R");
    const auto t = numbers(require(j, "t"), 3, "t");
    RigidTransform out;
    for (int a = 0; a < 3; ++a)
        for (int b = 0; b < 3; ++b) out.rotation(a, b) = r[static_cast<std::size_t>(3 * a + b)];
    out.translation = Vec3(t[0], t[1], t[2]);
    return out;
}

json to_json(const PoseSequence& seq, const std::vector<std::string>& tags) {
    json frames = json::array();
    for (std::size_t i = 0; i < seq.size(); ++i) {
        json f;
        f["joints"] = joints_json(seq.frames[i].joints);
        f["conf"] = seq.frames[i].confidence;
        if (i < tags.size() && !tags[i].empty()) f["tag"] = tags[i];
        frames.push_back(std::move(f));
    }
    return {{"frames", frames}, {"frame_rate", seq.frame_rate}};
}

PoseSequence pose_sequence_from_json(const json& j, std::vector<std::string>* tags) {
    PoseSequence seq;
    const json& frames = require(j, "frames");
    if (!frames.is_array() || frames.empty()) schema_error("'frames' must be a non-empty array");
    seq.frame_rate = j.contains("frame_rate") ? number(j.at("frame_rate"), "frame_rate") : 30.0;
    for (const auto& f : frames) {
        JointSet15 p;
        p.joints = joints_from_json(require(f, "joints"), "joints");
        if (f.contains("conf")) {
            const auto c = numbers(f.at("conf"), kNumJoints, "conf");
            std::copy(c.begin(), c.end(), p.confidence.begin());
        }
        seq.frames.push_back(p);
        if (tags) tags->push_back(f.contains("tag") && f.at("tag").is_string() ? f.at("tag").get<std::string>() : "");
    }
    return seq;
}

json to_json(const BoneTopology& topo) {
    json edges = json::array();
    for (const auto& e : topo.edges) edges.push_back(json::array({e.parent, e.child}));
    return {{"edges", edges}, {"lengths", topo.reference_lengths}};
}

BoneTopology topology_from_json(const json& j) {
    BoneTopology topo;
    const json& edges = require(j, "edges");
    if (!edges.is_array() || edges.size() != kNumBones) schema_error("'edges' must list 14 bones");
    for (std::size_t k = 0; k < kNumBones; ++k) {
        const auto e = numbers(edges[k], 2, "edges");
        if (e[0] < 0 || e[1] < 0 || e[0] >= kNumJoints || e[1] >= kNumJoints || e[0] != std::floor(e[0]) ||
            e[1] != std::floor(e[1])) {
            schema_error("edge joints must be integers in [0, 15)");
        }
        topo.edges[k] = {static_cast<std::size_t>(e[0]), static_cast<std::size_t>(e[1])};
    }
    const auto lengths = numbers(require(j, "lengths"), kNumBones, "lengths");
    std::copy(lengths.begin(), lengths.end(), topo.reference_lengths.begin());
    try {
        topo.validate();
    } catch (const Error& e) {
        schema_error(e.what());
    }
    return topo;
}

json to_json(const EnergyWeights& w) {
    json j;
    j["lambda_reproj_ego"] = w.lambda_reproj_ego;
    j["lambda_reproj_ext"] = w.lambda_reproj_ext;
    j["lambda_pose_ego"] = w.lambda_pose_ego;
    j["lambda_pose_ext"] = w.lambda_pose_ext;
    j["lambda_smooth"] = w.lambda_smooth;
    j["lambda_bone"] = w.lambda_bone;
    j["lambda_cam_consistency"] = w.lambda_cam_consistency;
    j["lambda_cam_orth"] = w.lambda_cam_orth;
    return j;
}

EnergyWeights weights_from_json(const json& j) {
    if (!j.is_object()) schema_error("weights must be a JSON object");
    EnergyWeights w;
    for (const auto& [key, value] : j.items()) {
        double* slot = nullptr;
        if (key == "lambda_reproj_ego") slot = &w.lambda_reproj_ego;
        else if (key == "lambda_reproj_ext") slot = &w.lambda_reproj_ext;
        else if (key == "lambda_pose_ego") slot = &w.lambda_pose_ego;
        else if (key == "lambda_pose_ext") slot = &w.lambda_pose_ext;
        else if (key == "lambda_smooth") slot = &w.lambda_smooth;
        else if (key == "lambda_bone") slot = &w.lambda_bone;
        else if (key == "lambda_cam_consistency") slot = &w.lambda_cam_consistency;
        else if (key == "lambda_cam_orth") slot = &w.lambda_cam_orth;
        else schema_error("unknown weight '" + key + "'");
        *slot = number(value, key.c_str());
    }
    try {
        w.validate();
    } catch (const Error& e) {
        schema_error(e.what());
    }
    return w;
}

RotationMode parse_rotation_mode(const std::string& s) {
    if (s == "axis_angle") return RotationMode::AxisAngle;
    if (s == "raw_matrix") return RotationMode::RawMatrix;
    schema_error("rotation_mode must be axis_angle or raw_matrix, got '" + s + "'");
}

json to_json(const OptimizerConfig& c) {
    return {
        {"max_iters", c.max_iters},
        {"step_size", c.step_size},
        {"tol_rel", c.tol_rel},
        {"tol_abs", c.tol_abs},
        {"rotation_mode", c.rotation_mode == RotationMode::AxisAngle ? "axis_angle" : "raw_matrix"},
        {"optimize_slam_scale", c.optimize_slam_scale},
        {"seed", c.seed},
        {"direction", c.direction == DescentDirection::Lbfgs ? "lbfgs" : "steepest"},
        {"lbfgs_memory", c.lbfgs_memory},
        {"translation_scale", c.translation_scale},
        {"rotation_scale", c.rotation_scale},
    };
}

OptimizerConfig optimizer_config_from_json(const json& j, OptimizerConfig c) {
    if (!j.is_object()) schema_error("optimizer config must be a JSON object");
    guarded([&] {
        for (const auto& [key, v] : j.items()) {
            if (key == "max_iters") c.max_iters = v.get<int>();
            else if (key == "step_size") c.step_size = v.get<double>();
            else if (key == "tol_rel") c.tol_rel = v.get<double>();
            else if (key == "tol_abs") c.tol_abs = v.get<double>();
            else if (key == "rotation_mode") c.rotation_mode = parse_rotation_mode(v.get<std::string>());
            else if (key == "optimize_slam_scale") c.optimize_slam_scale = v.get<bool>();
            else if (key == "seed") c.seed = v.get<std::uint64_t>();
            else if (key == "direction") {
                const auto d = v.get<std::string>();
                if (d == "lbfgs") c.direction = DescentDirection::Lbfgs;
                else if (d == "steepest") c.direction = DescentDirection::Steepest;
                else schema_error("direction must be lbfgs or steepest");
            }
            else if (key == "lbfgs_memory") c.lbfgs_memory = v.get<int>();
            else if (key == "translation_scale") c.translation_scale = v.get<double>();
            else if (key == "rotation_scale") c.rotation_scale = v.get<double>();
            else schema_error("unknown optimizer option '" + key + "'");
        }
        return 0;
    });
    try {
        c.validate();
    } catch (const Error& e) {
        schema_error(e.what());
    }
    return c;
}

json to_json(const MotionPrior& p) {
    json j;
    j["kind"] = p.kind() == MotionPrior::Kind::Identity ? "identity" : "linear_subspace";
    j["B"] = p.frames();
    j["K"] = p.latent_dim();
    if (p.kind() == MotionPrior::Kind::LinearSubspace) {
        j["mean"] = std::vector<double>(p.mean().data(), p.mean().data() + p.mean().size());
        std::vector<double> basis;
        basis.reserve(static_cast<std::size_t>(p.basis().size()));
        for (Eigen::Index r = 0; r < p.basis().rows(); ++r)
            for (Eigen::Index c = 0; c < p.basis().cols(); ++c) basis.push_back(p.basis()(r, c));
        j["basis"] = std::move(basis);
    }
    return j;
}

MotionPrior prior_from_json(const json& j) {
    return guarded([&] {
        const auto kind = require(j, "kind").get<std::string>();
        const auto frames = require(j, "B").get<std::size_t>();
        if (kind == "identity") return MotionPrior::identity(frames);
        if (kind != "linear_subspace") schema_error("unknown prior kind '" + kind + "'");
        const auto k = require(j, "K").get<std::size_t>();
        const std::size_t dim = frames * kNumJoints * 3;
        const auto mean = numbers(require(j, "mean"), dim, "mean");
        const auto basis = numbers(require(j, "basis"), k * dim, "basis");
        Eigen::VectorXd m = Eigen::Map<const Eigen::VectorXd>(mean.data(), static_cast<Eigen::Index>(dim));
        Eigen::MatrixXd b = Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(
            basis.data(), static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(dim));
        try {
            return MotionPrior::linear_subspace(frames, std::move(m), std::move(b));
        } catch (const Error& e) {
            schema_error(e.what());
        }
    });
}

json frame_to_json(const FrameObservation& f) {
    json j;
    j["frame"] = f.index;
    j["ego2d"] = detection_json(f.ego_2d);
    j["ego3d"] = joints_json(f.ego_3d.joints);
    j["ext2d"] = detection_json(f.ext_2d);
    j["ext3d"] = joints_json(f.ext_3d.joints);
    j["slam_to_next"] = f.slam_to_next ? to_json(*f.slam_to_next) : json(nullptr);
    if (!f.tag.empty()) j["tag"] = f.tag;
    return j;
}

FrameObservation frame_from_json(const json& j) {
    FrameObservation f;
    const json& idx = require(j, "frame");
    if (!idx.is_number_integer()) schema_error("'frame' must be an integer");
    f.index = idx.get<std::int64_t>();
    f.ego_2d = detection_from_json(require(j, "ego2d"), "ego2d");
    f.ego_3d.joints = joints_from_json(require(j, "ego3d"), "ego3d");
    f.ego_3d.confidence = f.ego_2d.confidence;
    f.ext_2d = detection_from_json(require(j, "ext2d"), "ext2d");
    f.ext_3d.joints = joints_from_json(require(j, "ext3d"), "ext3d");
    f.ext_3d.confidence = f.ext_2d.confidence;
    const json& slam = require(j, "slam_to_next");
    if (!slam.is_null()) f.slam_to_next = transform_from_json(slam);
    if (j.contains("tag") && j.at("tag").is_string()) f.tag = j.at("tag").get<std::string>();
    return f;
}

void write_dataset_jsonl(const SequenceDataset& ds, std::ostream& out) {
    for (const auto& f : ds.frames) out << frame_to_json(f).dump() << '\n';
}

SequenceDataset read_dataset_jsonl(std::istream& in, const Calibration& calib) {
    SequenceDataset ds;
    ds.fisheye = calib.fisheye;
    ds.pinhole = calib.pinhole;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        try {
            ds.frames.push_back(frame_from_json(json::parse(line)));
        } catch (const json::exception& e) {
            schema_error("line " + std::to_string(lineno) + ": " + e.what());
        } catch (const Error& e) {
            schema_error("line " + std::to_string(lineno) + ": " + e.what());
        }
    }
    if (ds.frames.empty()) schema_error("dataset has no frames");
    ds.validate();
    return ds;
}

LabelFiles label_paths(const std::filesystem::path& jsonl_path) {
    LabelFiles f;
    f.jsonl = jsonl_path;
    auto stem = jsonl_path;
    stem.replace_extension();
    f.heatmaps = stem.string() + ".heatmaps.bin";
    f.header = stem.string() + ".heatmaps.json";
    return f;
}

std::size_t heatmap_offset(std::size_t frame, int x, int y, std::size_t joint, const LabelGrid& grid) {
    const auto w = static_cast<std::size_t>(grid.width);
    const auto h = static_cast<std::size_t>(grid.height);
    return ((frame * w + static_cast<std::size_t>(x)) * h + static_cast<std::size_t>(y)) * kNumJoints + joint;
}

LabelFiles write_labels(const PseudoLabelSet& labels, const std::filesystem::path& jsonl_path) {
    const LabelFiles files = label_paths(jsonl_path);
    const LabelGrid& g = labels.grid;
    const std::size_t per_frame = static_cast<std::size_t>(g.width) * static_cast<std::size_t>(g.height) * kNumJoints;

    std::vector<float> sidecar(per_frame * labels.frames.size(), 0.0f);
    std::ostringstream lines;
    for (std::size_t i = 0; i < labels.frames.size(); ++i) {
        const FrameLabel& f = labels.frames[i];
        json j;
        j["frame"] = f.frame;
        if (f.labeled) {
            j["pose"] = joints_json(f.pose.joints);
            j["cam"] = to_json(f.camera);
            j["distances"] = f.encoded.distances;
            for (std::size_t joint = 0; joint < kNumJoints; ++joint)
                for (int y = 0; y < g.height; ++y)
                    for (int x = 0; x < g.width; ++x)
                        sidecar[heatmap_offset(i, x, y, joint, g)] = f.encoded.at(joint, x, y, g);
            j["window"] = f.window;
        } else {
            j["pose"] = nullptr;
            j["cam"] = nullptr;
            j["distances"] = nullptr;
        }
        j["heatmap_file"] = files.heatmaps.filename().string();
        j["heatmap_index"] = i;
        j["flags"] = f.flags;
        lines << j.dump() << '\n';
    }
    write_text_file(files.jsonl, lines.str());

    std::ofstream bin(files.heatmaps, std::ios::binary);
    if (!bin) throw Error(ErrorCode::InvalidArgument, "cannot write " + files.heatmaps.string());
    bin.write(reinterpret_cast<const char*>(sidecar.data()),
              static_cast<std::streamsize>(sidecar.size() * sizeof(float)));

    json header = {
        {"dtype", "float32"},
        {"byte_order", "little"},
        {"frames", labels.frames.size()},
        {"width", g.width},
        {"height", g.height},
        {"joints", kNumJoints},
        {"shape_per_frame", json::array({g.width, g.height, kNumJoints})},
        {"order", "row-major: frame, x, y, joint"},
        {"sigma", g.sigma},
        {"file", files.heatmaps.filename().string()},
    };
    write_text_file(files.header, header.dump(2) + "\n");
    return files;
}

void write_trace_csv(const PseudoLabelSet& labels, const EnergyWeights& weights, std::ostream& out) {
    out << "window,iter,total";
    for (std::size_t k = 0; k < kNumTerms; ++k) out << ',' << term_name(k);
    out << '\n';
    out.precision(17);
    for (std::size_t w = 0; w < labels.windows.size(); ++w) {
        const auto& s = labels.windows[w];
        for (std::size_t it = 0; it < s.energy_trace.size(); ++it) {
            out << w << ',' << it << ',' << s.energy_trace[it];
            for (std::size_t k = 0; k < kNumTerms; ++k) out << ',' << s.term_trace[it][k];
            out << '\n';
        }
    }
    (void)weights;
}

json read_json_file(const std::filesystem::path& p) {
    std::ifstream in(p);
    if (!in) schema_error("cannot open " + p.string());
    try {
        return json::parse(in);
    } catch (const json::exception& e) {
        schema_error(p.string() + ": " + e.what());
    }
}

void write_text_file(const std::filesystem::path& p, const std::string& content) {
    std::ofstream out(p, std::ios::binary);
    if (!out) throw Error(ErrorCode::InvalidArgument, "cannot write " + p.string());
    out << content;
}

PoseSequence read_poses_any(const std::filesystem::path& p, std::vector<std::string>* tags) {
    std::ifstream in(p);
    if (!in) schema_error("cannot open " + p.string());
    std::string first;
    while (std::getline(in, first) && first.find_first_not_of(" \t\r") == std::string::npos) {
    }
    in.clear();
    in.seekg(0);

    json first_line;
    try {
        first_line = json::parse(first);
    } catch (const json::exception&) {
        // Multi-line document: a pose JSON file.
        return guarded([&] { return pose_sequence_from_json(json::parse(in), tags); });
    }
    if (first_line.is_object() && first_line.contains("frames")) return pose_sequence_from_json(first_line, tags);

    PoseSequence seq;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        guarded([&] {
            const json j = json::parse(line);
            JointSet15 pose;
            std::string tag;
            if (j.contains("tag") && j.at("tag").is_string()) tag = j.at("tag").get<std::string>();
            if (j.contains("pose")) {
                if (j.at("pose").is_null()) {
                    pose.confidence.fill(0.0);
                } else {
                    pose.joints = joints_from_json(j.at("pose"), "pose");
                }
            } else if (j.contains("ego3d")) {
                const FrameObservation f = frame_from_json(j);
                pose = f.ego_3d;
                pose.confidence.fill(1.0);
                tag = f.tag;
            } else {
                schema_error("line " + std::to_string(lineno) + " has neither 'pose' nor 'ego3d'");
            }
            seq.frames.push_back(pose);
            if (tags) tags->push_back(tag);
            return 0;
        });
    }
    if (seq.frames.empty()) schema_error(p.string() + " contains no frames");
    return seq;
}

}  // namespace egolabel::io
