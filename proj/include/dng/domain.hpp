#pragma once

// Shared geometric and kinematic types used by every module.
//
// Units: meters and seconds. World frame is y-up; the body faces +z at rest.

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Core>

#include "dng/error.hpp"

namespace dng {

using Vec2 = Eigen::Vector2f;
using Vec3 = Eigen::Vector3f;
using Mat3 = Eigen::Matrix3f;

inline constexpr int kDefaultJointCount = 19;

/// Joint ordering of the procedural skeleton. Index 0 (pelvis) is the root.
enum Joint : int {
    kPelvis = 0,
    kSpine,
    kChest,
    kNeck,
    kHead,
    kLeftShoulder,
    kLeftElbow,
    kLeftWrist,
    kRightShoulder,
    kRightElbow,
    kRightWrist,
    kLeftHip,
    kLeftKnee,
    kLeftAnkle,
    kLeftFoot,
    kRightHip,
    kRightKnee,
    kRightAnkle,
    kRightFoot,
};

const std::array<std::string_view, kDefaultJointCount>& joint_names();

struct SkeletonPose {
    std::vector<Vec3> joints;
    int root_index = 0;

    int joint_count() const { return static_cast<int>(joints.size()); }
    const Vec3& root() const { return joints.at(static_cast<std::size_t>(root_index)); }
};

/// A sequence of poses with a constant joint count.
class MotionClip {
public:
    MotionClip() = default;
    /// Throws ConfigError when the clip is empty, fps <= 0, the joint count varies
    /// or any coordinate is non-finite.
    MotionClip(std::vector<SkeletonPose> poses, double fps);

    const std::vector<SkeletonPose>& poses() const { return poses_; }
    const SkeletonPose& pose(int t) const { return poses_.at(static_cast<std::size_t>(t)); }
    int frame_count() const { return static_cast<int>(poses_.size()); }
    int joint_count() const { return poses_.empty() ? 0 : poses_.front().joint_count(); }
    double fps() const { return fps_; }

    /// Copy with every joint moved by `offset`.
    MotionClip translated(const Vec3& offset) const;

private:
    std::vector<SkeletonPose> poses_;
    double fps_ = 30.0;
};

/// Window layout of the motion descriptor: frames t, t-stride, ..., t-stride*(count-1).
struct DescriptorWindow {
    int stride = 2;
    int count = 17;

    bool operator==(const DescriptorWindow&) const = default;
};

enum class HistoryPolicy {
    kStrict,  // throw when t lacks history
    kClamp,   // clamp missing past frames to frame 0
};

struct MotionDescriptor {
    int frame_index = 0;
    int count = 0;
    int joint_count = 0;
    /// count x J x 3, row 0 is frame t; root-relative to the root of frame t.
    std::vector<float> window;

    std::size_t flat_size() const { return window.size(); }
    float at(int row, int joint, int axis) const {
        return window[(static_cast<std::size_t>(row) * joint_count + joint) * 3 + axis];
    }
};

/// Thrown by make_descriptor under HistoryPolicy::kStrict.
class InsufficientHistory : public ConfigError {
public:
    using ConfigError::ConfigError;
};

MotionDescriptor make_descriptor(const MotionClip& clip, int t, int stride, int count,
                                 HistoryPolicy policy = HistoryPolicy::kStrict);

inline MotionDescriptor make_descriptor(const MotionClip& clip, int t, const DescriptorWindow& w,
                                        HistoryPolicy policy = HistoryPolicy::kClamp) {
    return make_descriptor(clip, t, w.stride, w.count, policy);
}

using Face = std::array<int, 3>;
using FaceUV = std::array<Vec2, 3>;

struct TriMesh {
    std::vector<Vec3> vertices;
    std::vector<Face> faces;
    /// Per face corner, in [0,1]^2.
    std::vector<FaceUV> uv;

    int vertex_count() const { return static_cast<int>(vertices.size()); }
    int face_count() const { return static_cast<int>(faces.size()); }
};

enum class MeshViolationKind {
    kIndexOutOfRange,
    kUvOutOfRange,
    kDegenerateFace,
    kNonFiniteVertex,
    kUvCountMismatch,
};

std::string_view to_string(MeshViolationKind kind);

struct MeshViolation {
    MeshViolationKind kind;
    int index;  // face index, or vertex index for kNonFiniteVertex
    std::string message;
};

std::vector<MeshViolation> validate_mesh(const TriMesh& mesh);

/// Topology plus per-frame vertex positions.
class MeshSequence {
public:
    MeshSequence() = default;
    /// Throws SchemaMismatch when any frame's vertex count differs from the topology.
    MeshSequence(TriMesh topology, std::vector<std::vector<Vec3>> frames);

    const TriMesh& topology() const { return topology_; }
    const std::vector<Vec3>& frame(int t) const { return frames_.at(static_cast<std::size_t>(t)); }
    const std::vector<std::vector<Vec3>>& frames() const { return frames_; }
    int frame_count() const { return static_cast<int>(frames_.size()); }
    int vertex_count() const { return topology_.vertex_count(); }

private:
    TriMesh topology_;
    std::vector<std::vector<Vec3>> frames_;
};

/// Pinhole camera. x_cam = rotation * x_world + translation; the camera looks down +z,
/// image rows grow along +y_cam.
struct Camera {
    float fx = 1, fy = 1, cx = 0, cy = 0;
    Mat3 rotation = Mat3::Identity();
    Vec3 translation = Vec3::Zero();
    int view_id = 0;

    /// Throws ConfigError when focal lengths are not positive or rotation is not orthonormal.
    void validate() const;
    Vec3 to_camera(const Vec3& world) const { return rotation * world + translation; }
    Vec3 center() const { return -rotation.transpose() * translation; }

    /// Camera at `eye` looking at `target` with world up +y.
    static Camera look_at(const Vec3& eye, const Vec3& target, float fov_y_rad, int width,
                          int height, int view_id = 0);
};

enum class ImageKind { kRgb, kFeature, kMask, kDepth };

/// H x W x C float image, row-major with interleaved channels.
struct Image {
    int height = 0;
    int width = 0;
    int channels = 0;
    ImageKind kind = ImageKind::kRgb;
    std::vector<float> pixels;

    Image() = default;
    Image(int h, int w, int c, ImageKind k, float fill = 0.0f)
        : height(h), width(w), channels(c), kind(k),
          pixels(static_cast<std::size_t>(h) * w * c, fill) {}

    float& at(int y, int x, int c) {
        return pixels[(static_cast<std::size_t>(y) * width + x) * channels + c];
    }
    float at(int y, int x, int c) const {
        return pixels[(static_cast<std::size_t>(y) * width + x) * channels + c];
    }
    bool same_shape(const Image& o) const {
        return height == o.height && width == o.width && channels == o.channels;
    }
};

/// Throws ConfigError when dims are not positive or rgb/mask values leave [0,1].
void validate_image(const Image& image);

}  // namespace dng
