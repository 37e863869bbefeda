#include "dng/domain.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include <Eigen/Geometry>

namespace dng {

const std::array<std::string_view, kDefaultJointCount>& joint_names() {
    static const std::array<std::string_view, kDefaultJointCount> names = {
        "pelvis",     "spine",       "chest",       "neck",      "head",
        "l_shoulder", "l_elbow",     "l_wrist",     "r_shoulder", "r_elbow",
        "r_wrist",    "l_hip",       "l_knee",      "l_ankle",   "l_foot",
        "r_hip",      "r_knee",      "r_ankle",     "r_foot",
    };
    return names;
}

MotionClip::MotionClip(std::vector<SkeletonPose> poses, double fps)
    : poses_(std::move(poses)), fps_(fps) {
    if (poses_.empty()) throw ConfigError("motion clip must contain at least one frame");
    if (!(fps_ > 0.0)) throw ConfigError("motion clip fps must be positive");
    const int j = poses_.front().joint_count();
    if (j == 0) throw ConfigError("motion clip has no joints");
    for (std::size_t t = 0; t < poses_.size(); ++t) {
        const auto& p = poses_[t];
        if (p.joint_count() != j) {
            throw ConfigError("joint count changes at frame " + std::to_string(t));
        }
        if (p.root_index < 0 || p.root_index >= j) {
            throw ConfigError("root index out of range at frame " + std::to_string(t));
        }
        for (const auto& q : p.joints) {
            if (!q.allFinite()) throw ConfigError("non-finite joint at frame " + std::to_string(t));
        }
    }
}

MotionClip MotionClip::translated(const Vec3& offset) const {
    auto poses = poses_;
    for (auto& p : poses) {
        for (auto& q : p.joints) q += offset;
    }
    return MotionClip(std::move(poses), fps_);
}

MotionDescriptor make_descriptor(const MotionClip& clip, int t, int stride, int count,
                                 HistoryPolicy policy) {
    if (stride < 1) throw ConfigError("descriptor stride must be >= 1");
    if (count < 1) throw ConfigError("descriptor count must be >= 1");
    if (t < 0 || t >= clip.frame_count()) {
        throw ConfigError("descriptor frame " + std::to_string(t) + " outside clip");
    }
    if (policy == HistoryPolicy::kStrict && t - stride * (count - 1) < 0) {
        throw InsufficientHistory("frame " + std::to_string(t) + " lacks " +
                                  std::to_string(stride * (count - 1)) + " frames of history");
    }

    MotionDescriptor d;
    d.frame_index = t;
    d.count = count;
    d.joint_count = clip.joint_count();
    d.window.resize(static_cast<std::size_t>(count) * d.joint_count * 3);

    const Vec3 root = clip.pose(t).root();
    auto out = d.window.begin();
    for (int row = 0; row < count; ++row) {
        const int tau = std::max(0, t - stride * row);
        for (const auto& q : clip.pose(tau).joints) {
            const Vec3 rel = q - root;
            *out++ = rel.x();
            *out++ = rel.y();
            *out++ = rel.z();
        }
    }
    return d;
}

std::string_view to_string(MeshViolationKind kind) {
    switch (kind) {
        case MeshViolationKind::kIndexOutOfRange: return "index-out-of-range";
        case MeshViolationKind::kUvOutOfRange: return "uv-out-of-range";
        case MeshViolationKind::kDegenerateFace: return "degenerate-face";
        case MeshViolationKind::kNonFiniteVertex: return "non-finite-vertex";
        case MeshViolationKind::kUvCountMismatch: return "uv-count-mismatch";
    }
    return "unknown";
}

std::vector<MeshViolation> validate_mesh(const TriMesh& mesh) {
    std::vector<MeshViolation> out;
    auto report = [&out](MeshViolationKind kind, int index) {
        std::ostringstream msg;
        msg << to_string(kind) << " @ " << (kind == MeshViolationKind::kNonFiniteVertex ? "vertex " : "face ")
            << index;
        out.push_back({kind, index, msg.str()});
    };

    const int v = mesh.vertex_count();
    for (int i = 0; i < v; ++i) {
        if (!mesh.vertices[static_cast<std::size_t>(i)].allFinite()) report(MeshViolationKind::kNonFiniteVertex, i);
    }
    if (mesh.uv.size() != mesh.faces.size()) {
        report(MeshViolationKind::kUvCountMismatch, static_cast<int>(std::min(mesh.uv.size(), mesh.faces.size())));
    }
    for (int f = 0; f < mesh.face_count(); ++f) {
        const auto& face = mesh.faces[static_cast<std::size_t>(f)];
        const bool in_range = std::all_of(face.begin(), face.end(), [v](int i) { return i >= 0 && i < v; });
        if (!in_range) {
            report(MeshViolationKind::kIndexOutOfRange, f);
        } else {
            const Vec3& a = mesh.vertices[static_cast<std::size_t>(face[0])];
            const Vec3& b = mesh.vertices[static_cast<std::size_t>(face[1])];
            const Vec3& c = mesh.vertices[static_cast<std::size_t>(face[2])];
            if ((b - a).cross(c - a).norm() <= 1e-12f) report(MeshViolationKind::kDegenerateFace, f);
        }
        if (static_cast<std::size_t>(f) < mesh.uv.size()) {
            const bool uv_ok = std::all_of(mesh.uv[static_cast<std::size_t>(f)].begin(),
                                           mesh.uv[static_cast<std::size_t>(f)].end(), [](const Vec2& p) {
                                               return p.x() >= 0.0f && p.x() <= 1.0f && p.y() >= 0.0f &&
                                                      p.y() <= 1.0f;
                                           });
            if (!uv_ok) report(MeshViolationKind::kUvOutOfRange, f);
        }
    }
    return out;
}

MeshSequence::MeshSequence(TriMesh topology, std::vector<std::vector<Vec3>> frames)
    : topology_(std::move(topology)), frames_(std::move(frames)) {
    for (std::size_t t = 0; t < frames_.size(); ++t) {
        if (frames_[t].size() != topology_.vertices.size()) {
            throw SchemaMismatch("mesh sequence frame " + std::to_string(t) + " has " +
                                 std::to_string(frames_[t].size()) + " vertices, topology has " +
                                 std::to_string(topology_.vertices.size()));
        }
    }
}

void Camera::validate() const {
    if (!(fx > 0.0f) || !(fy > 0.0f)) throw ConfigError("camera focal lengths must be positive");
    const Mat3 rtr = rotation.transpose() * rotation;
    if (!rotation.allFinite() || !((rtr - Mat3::Identity()).cwiseAbs().maxCoeff() < 1e-6f)) {
        throw ConfigError("camera rotation is not orthonormal");
    }
    if (!translation.allFinite()) throw ConfigError("camera translation is not finite");
}

Camera Camera::look_at(const Vec3& eye, const Vec3& target, float fov_y_rad, int width, int height,
                       int view_id) {
    const Eigen::Vector3d e = eye.cast<double>();
    const Eigen::Vector3d forward = (target.cast<double>() - e).normalized();
    Eigen::Vector3d right = forward.cross(Eigen::Vector3d::UnitY());
    if (right.norm() < 1e-9) right = Eigen::Vector3d::UnitX();
    right.normalize();
    // image y grows downward, so camera +y points to world "down"
    const Eigen::Vector3d down = forward.cross(right).normalized();
    Eigen::Matrix3d r;
    r.row(0) = right.transpose();
    r.row(1) = down.transpose();
    r.row(2) = forward.transpose();

    Camera cam;
    cam.rotation = r.cast<float>();
    cam.translation = (-r * e).cast<float>();
    cam.fy = static_cast<float>(0.5 * height / std::tan(0.5 * fov_y_rad));
    cam.fx = cam.fy;
    cam.cx = 0.5f * static_cast<float>(width);
    cam.cy = 0.5f * static_cast<float>(height);
    cam.view_id = view_id;
    return cam;
}

void validate_image(const Image& image) {
    if (image.height <= 0 || image.width <= 0 || image.channels <= 0) {
        throw ConfigError("image dimensions must be positive");
    }
    if (image.pixels.size() != static_cast<std::size_t>(image.height) * image.width * image.channels) {
        throw ConfigError("image pixel buffer size does not match dimensions");
    }
    if (image.kind == ImageKind::kRgb || image.kind == ImageKind::kMask) {
        for (float v : image.pixels) {
            if (!(v >= 0.0f && v <= 1.0f)) throw ConfigError("image value outside [0,1]");
        }
    }
}

}  // namespace dng
