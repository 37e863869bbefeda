#pragma once

// Ground-truth data generation: a procedurally animated capsule body, frustum garment
// grids, a position-based dynamics solver and a flat Lambertian renderer.

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "dng/domain.hpp"
#include "dng/rasterizer.hpp"

namespace dng {

// ---------------------------------------------------------------------------------------
// Skeleton animation

enum class MotionStyle { kSway, kStep, kSpin };

MotionStyle parse_motion_style(std::string_view name);
std::string_view to_string(MotionStyle style);

/// Seed-dependent constants of the procedural generator. Every trajectory is a closed-form
/// function of these and of time.
struct MotionParams {
    double period = 1.0;          // seconds per oscillation (one step for kStep)
    double arm_swing = 0.35;      // rad
    double leg_swing = 0.35;      // rad
    double knee_bend = 0.45;      // rad
    double lean = 0.12;           // rad, side bend of the spine
    double pelvis_twist = 0.35;   // rad, yaw oscillation
    double step_length = 0.6;     // m of root travel per step
    double spin_rate = 2.0;       // rad/s
    double spin_radius = 0.15;    // m
};

MotionParams sample_motion_params(MotionStyle style, std::uint64_t seed);

/// Skeleton rest pose (pelvis at (0, 0.95, 0), facing +z, left side on +x).
SkeletonPose rest_pose();

/// Root forward travel of the step style at time `seconds`.
double step_root_travel(const MotionParams& params, double seconds);

MotionClip animate_skeleton(MotionStyle style, int num_frames, double fps, std::uint64_t seed);
MotionClip animate_skeleton(MotionStyle style, int num_frames, double fps, const MotionParams& params);

// ---------------------------------------------------------------------------------------
// Body proxy

struct Capsule {
    int joint_a = 0;
    int joint_b = 0;
    float radius = 0.05f;
    bool is_arm = false;
};

struct BodyProxy {
    std::vector<Capsule> capsules;

    /// Throws ConfigError for non-positive radii or joint indices outside [0, joint_count).
    void validate(int joint_count) const;
    /// Capsule set for the 19-joint procedural skeleton; `girth` scales every radius.
    static BodyProxy standard(float girth = 1.0f);
};

/// Signed distance from p to the capsule surface (negative inside).
float capsule_signed_distance(const Vec3& p, const Vec3& a, const Vec3& b, float radius);

// ---------------------------------------------------------------------------------------
// Garments

enum class GarmentKind { kLongSkirt, kShortSkirt, kDress };

GarmentKind parse_garment_kind(std::string_view name);
std::string_view to_string(GarmentKind kind);

/// Rigid frame carried by the skeleton: origin at `origin`, x axis from `right_joint` to
/// `left_joint`, y axis along `up_from` -> `up_to`.
struct AttachmentFrame {
    int origin = kPelvis;
    int left_joint = kLeftHip;
    int right_joint = kRightHip;
    int up_from = kPelvis;
    int up_to = kSpine;

    /// World transform (rotation, translation) of the frame in `pose`.
    std::pair<Mat3, Vec3> transform(const SkeletonPose& pose) const;
};

struct Garment {
    GarmentKind kind = GarmentKind::kLongSkirt;
    TriMesh mesh;                 // rest shape, dressed on rest_pose()
    std::vector<int> pinned;      // vertex ids attached to `frame`
    AttachmentFrame frame;
    float uv_scale = 1.0f;        // uv units per meter of the unrolled surface
    int rings = 0;                // vertex rows from top to hem
    int segments = 0;             // vertices around
};

/// Frustum tube around the body with an unrolled (developable) uv chart. Throws ConfigError
/// when spacing <= 0 or exceeds the garment's length or circumference.
Garment build_garment_grid(GarmentKind kind, float spacing);

// ---------------------------------------------------------------------------------------
// Simulation

struct SimParams {
    Vec3 gravity{0.0f, -9.81f, 0.0f};
    int substeps = 20;
    int iterations = 24;
    double stretch_compliance = 0.0;  // XPBD compliance, m/N
    double damping = 0.02;            // fraction of velocity removed per substep
    float collision_margin = 0.004f;  // meters
    float particle_spacing = 0.09f;   // meters (grid construction)
    int settle_frames = 30;           // frames simulated at pose 0 before output starts
    double jitter = 0.0;              // rest-shape perturbation amplitude, meters
    std::uint64_t seed = 0;

    void validate() const;
};

/// Initial vertex positions: the rest garment moved rigidly by the frame-0 attachment.
std::vector<Vec3> dress_garment(const Garment& garment, const SkeletonPose& pose);

/// Position-based dynamics over the clip. Pinned vertices follow their attachment exactly;
/// collisions project vertices out of every capsule. Throws NumericalError naming the frame
/// when any coordinate becomes non-finite.
MeshSequence simulate(const Garment& garment, const MotionClip& clip, const BodyProxy& body,
                      const SimParams& params);

struct SimStats {
    double max_strain = 0.0;       // max |len/rest - 1| over edges and frames
    double mean_strain = 0.0;
    double min_capsule_distance = 0.0;
};

SimStats measure_sim(const MeshSequence& seq, const MotionClip& clip, const BodyProxy& body);

// ---------------------------------------------------------------------------------------
// Ground-truth rendering

struct Palette {
    Vec3 background{0.78f, 0.80f, 0.84f};
    Vec3 body{0.80f, 0.62f, 0.50f};
    Vec3 garment{0.25f, 0.35f, 0.65f};
    Vec3 light_tint{1.0f, 1.0f, 1.0f};
    Vec3 light_dir_camera{-0.4f, -0.6f, 0.7f};  // direction towards the light, camera frame
    float ambient = 0.35f;
    float stripe_amplitude = 0.3f;
    float stripe_frequency = 10.0f;
};

/// Capsule tessellation of the body in `pose`. Per-face flags mark arm capsules.
struct BodyMesh {
    TriMesh mesh;
    std::vector<std::uint8_t> face_is_arm;
};

BodyMesh tessellate_body(const BodyProxy& body, const SkeletonPose& pose, int segments = 16, int rings = 4);

struct BodyRender {
    Image rgb;        // undressed render over the background
    Image arm_mask;   // visible arm pixels
    std::vector<float> depth;  // camera depth of the body surface, 0 where empty
};

BodyRender render_body(const BodyProxy& body, const SkeletonPose& pose, const Camera& camera,
                       Resolution resolution, const Palette& palette, const Image* background = nullptr);

/// Lambertian render of body and garment (`garment_vertices` on `garment_topology`).
Image render_dressed(const BodyProxy& body, const SkeletonPose& pose, const TriMesh& garment_topology,
                     std::span<const Vec3> garment_vertices, const Camera& camera, Resolution resolution,
                     const Palette& palette, const Image* background = nullptr);

struct ViewFrames {
    Camera camera;
    std::vector<Image> gt;
    std::vector<Image> bg;
    std::vector<Image> arm;
};

std::vector<ViewFrames> render_ground_truth(const MeshSequence& target_seq, const BodyProxy& body,
                                            const MotionClip& clip, const std::vector<Camera>& cameras,
                                            Resolution resolution, const Palette& palette,
                                            const Image* background = nullptr);

/// Cameras on a horizontal ring around `center` with seeded random azimuths.
std::vector<Camera> ring_cameras(int count, const Vec3& center, float radius, float elevation,
                                 float fov_y_rad, Resolution resolution, std::uint64_t seed,
                                 int first_view_id = 0);

}  // namespace dng
