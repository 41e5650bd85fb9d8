#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "egolabel/dataset.hpp"
#include "egolabel/optimize.hpp"
#include "egolabel/pipeline.hpp"
#include "egolabel/prior.hpp"

// File formats. All parse failures throw Error(SchemaError).
namespace egolabel::io {

using nlohmann::json;

struct Calibration {
    PinholeModel pinhole;
    FisheyeModel fisheye;
};

json to_json(const Calibration& c);
Calibration calibration_from_json(const json& j);

json to_json(const RigidTransform& t);  // {"R": [9 row-major], "t": [3]}
RigidTransform transform_from_json(const json& j);

/// {"frames": [{"joints": [[x,y,z] x15], "conf": [c x15], "tag"?: s}], "frame_rate": f}
json to_json(const PoseSequence& seq, const std::vector<std::string>& tags = {});
PoseSequence pose_sequence_from_json(const json& j, std::vector<std::string>* tags = nullptr);

/// {"edges": [[parent, child] x14], "lengths": [mm x14]}
json to_json(const BoneTopology& topo);
BoneTopology topology_from_json(const json& j);

json to_json(const EnergyWeights& w);
/// Missing keys keep their defaults; unknown keys are rejected.
EnergyWeights weights_from_json(const json& j);

json to_json(const OptimizerConfig& c);
OptimizerConfig optimizer_config_from_json(const json& j, OptimizerConfig base = {});
RotationMode parse_rotation_mode(const std::string& s);

json to_json(const MotionPrior& p);  // {"kind", "B", "K", "mean", "basis" (row-major)}
MotionPrior prior_from_json(const json& j);

/// One JSON object per line:
/// {frame, ego2d:[[u,v,c]x15], ego3d:[[x,y,z]x15], ext2d:[[u,v,c]x15], ext3d:[[x,y,z]x15],
///  slam_to_next:{R:[9],t:[3]}|null, tag?}
/// 3D detections take the confidence of the same view's 2D detection.
json frame_to_json(const FrameObservation& f);
FrameObservation frame_from_json(const json& j);
void write_dataset_jsonl(const SequenceDataset& ds, std::ostream& out);
SequenceDataset read_dataset_jsonl(std::istream& in, const Calibration& calib);

/// Labels: `<stem>.jsonl` (one line per frame), heatmaps in `<stem>.heatmaps.bin`
/// (float32, per frame shape (W, H, 15) row-major) described by `<stem>.heatmaps.json`.
struct LabelFiles {
    std::filesystem::path jsonl;
    std::filesystem::path heatmaps;
    std::filesystem::path header;
};
LabelFiles label_paths(const std::filesystem::path& jsonl_path);
LabelFiles write_labels(const PseudoLabelSet& labels, const std::filesystem::path& jsonl_path);

/// Index of a flat float32 in the heatmap sidecar.
std::size_t heatmap_offset(std::size_t frame, int x, int y, std::size_t joint, const LabelGrid& grid);

/// CSV: window,iter,total,<eight term columns>
void write_trace_csv(const PseudoLabelSet& labels, const EnergyWeights& weights, std::ostream& out);

json read_json_file(const std::filesystem::path& p);
void write_text_file(const std::filesystem::path& p, const std::string& content);

/// Poses from a pose JSON file, a label JSONL file or a dataset JSONL file
/// (its egocentric 3D detections). Unlabeled label lines become zero-confidence frames.
PoseSequence read_poses_any(const std::filesystem::path& p, std::vector<std::string>* tags = nullptr);

}  // namespace egolabel::io
