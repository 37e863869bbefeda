#pragma once

// On-disk dataset container:
//   meta.json
//   motion/joints.f32                [T, J, 3]
//   coarse/topology.json             faces and per-corner uv (rest vertices included)
//   coarse/verts.f32                 [T, Vc, 3]
//   views/view_<p>.json              camera
//   frames/view_<p>/gt_<t>.png, bg_<t>.png
//   masks/view_<p>/arm_<t>.png
// Raw arrays are little-endian float32 without a header.

#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "dng/cloth_sim.hpp"
#include "dng/domain.hpp"
#include "dng/neural_descriptor.hpp"
#include "dng/rasterizer.hpp"

namespace dng {

using json = nlohmann::json;

struct DatasetMeta {
    double fps = 30.0;
    int frame_count = 0;
    std::vector<std::string> joint_names;
    Resolution resolution;
    std::vector<int> views;
    DescriptorWindow window;
    MotionFeatureConfig motion;   // `enabled` is not stored; maps/stride/sigma are
    float body_girth = 1.0f;
    std::string garment = "long_skirt";
    std::string motion_style = "sway";
    std::vector<int> triplet_frames;  // frames t with t-1 and t+1 available
    json generator = json::object();  // settings the data was generated with

    int joint_count() const { return static_cast<int>(joint_names.size()); }
};

json meta_to_json(const DatasetMeta& meta);
DatasetMeta meta_from_json(const json& j);

json camera_to_json(const Camera& camera);
Camera camera_from_json(const json& j);

json topology_to_json(const TriMesh& mesh);
TriMesh topology_from_json(const json& j);

/// Minimal joint-clip interchange: {"fps": f, "root_index": r, "frames": [[[x,y,z], ...], ...]}.
json clip_to_json(const MotionClip& clip);
MotionClip clip_from_json(const json& j);

json read_json(const std::filesystem::path& path);
void write_json(const std::filesystem::path& path, const json& value);

void write_f32(const std::filesystem::path& path, std::span<const float> values);
std::vector<float> read_f32(const std::filesystem::path& path);

struct Dataset {
    DatasetMeta meta;
    MotionClip clip;
    MeshSequence coarse;
    std::vector<ViewFrames> views;  // images empty when loaded without pixels

    const ViewFrames& view(int view_id) const;
};

void write_dataset(const std::filesystem::path& root, const Dataset& dataset);
/// Throws ConfigError for missing files and SchemaMismatch for inconsistent layouts.
Dataset load_dataset(const std::filesystem::path& root, bool with_images = true);

/// Problems found in a dataset directory; empty when it is well formed.
std::vector<std::string> validate_dataset(const std::filesystem::path& root);

}  // namespace dng
