#include "dng/cloth_sim.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <set>

#include <Eigen/Geometry>

namespace dng {
namespace {

using Vec3d = Eigen::Vector3d;
using Mat3d = Eigen::Matrix3d;

constexpr double kPi = std::numbers::pi;

Mat3d rot_x(double a) { return Eigen::AngleAxisd(a, Vec3d::UnitX()).toRotationMatrix(); }
Mat3d rot_y(double a) { return Eigen::AngleAxisd(a, Vec3d::UnitY()).toRotationMatrix(); }
Mat3d rot_z(double a) { return Eigen::AngleAxisd(a, Vec3d::UnitZ()).toRotationMatrix(); }

const Vec3d kRestPelvis{0.0, 0.95, 0.0};

// Joint angles of one frame; all zero gives the rest pose.
struct PoseAngles {
    Vec3d root = kRestPelvis;
    double yaw = 0, twist = 0, lean = 0;
    double arm_l = 0, arm_r = 0, elbow = 0;
    double leg_l = 0, leg_r = 0, knee_l = 0, knee_r = 0;
};

SkeletonPose build_pose(const PoseAngles& a) {
    SkeletonPose pose;
    pose.root_index = kPelvis;
    pose.joints.assign(kDefaultJointCount, Vec3::Zero());
    auto set = [&pose](int j, const Vec3d& p) { pose.joints[static_cast<std::size_t>(j)] = p.cast<float>(); };

    const Mat3d upper = rot_y(a.yaw);
    const Mat3d hips = rot_y(a.yaw + a.twist);
    const Mat3d bend = upper * rot_z(a.lean);

    const Vec3d spine = a.root + upper * Vec3d(0, 0.15, 0);
    set(kPelvis, a.root);
    set(kSpine, spine);
    set(kChest, spine + bend * Vec3d(0, 0.20, 0));
    set(kNeck, spine + bend * Vec3d(0, 0.40, 0));
    set(kHead, spine + bend * Vec3d(0, 0.52, 0));

    for (int side = 0; side < 2; ++side) {
        const double sx = side == 0 ? 1.0 : -1.0;
        const double swing = side == 0 ? a.arm_l : a.arm_r;
        const Vec3d shoulder = spine + bend * Vec3d(0.20 * sx, 0.35, 0);
        const Vec3d elbow = shoulder + bend * rot_x(-swing) * Vec3d(0.06 * sx, -0.27, 0);
        const Vec3d wrist = elbow + bend * rot_x(-swing - a.elbow) * Vec3d(0.03 * sx, -0.25, 0.02);
        set(side == 0 ? kLeftShoulder : kRightShoulder, shoulder);
        set(side == 0 ? kLeftElbow : kRightElbow, elbow);
        set(side == 0 ? kLeftWrist : kRightWrist, wrist);

        const double leg = side == 0 ? a.leg_l : a.leg_r;
        const double knee_bend = side == 0 ? a.knee_l : a.knee_r;
        const Vec3d hip = a.root + hips * Vec3d(0.085 * sx, -0.03, 0);
        const Vec3d knee = hip + hips * rot_x(-leg) * Vec3d(0, -0.42, 0.01);
        const Mat3d shin = hips * rot_x(-leg + knee_bend);
        const Vec3d ankle = knee + shin * Vec3d(0, -0.42, -0.01);
        const Vec3d foot = ankle + hips * rot_x(-leg) * Vec3d(0, -0.06, 0.12);
        set(side == 0 ? kLeftHip : kRightHip, hip);
        set(side == 0 ? kLeftKnee : kRightKnee, knee);
        set(side == 0 ? kLeftAnkle : kRightAnkle, ankle);
        set(side == 0 ? kLeftFoot : kRightFoot, foot);
    }
    return pose;
}

PoseAngles angles_at(MotionStyle style, const MotionParams& mp, double s) {
    PoseAngles a;
    const double phase = 2.0 * kPi * s / mp.period;
    switch (style) {
        case MotionStyle::kSway:
            a.lean = mp.lean * std::sin(phase);
            a.twist = mp.pelvis_twist * std::sin(phase);
            a.arm_l = mp.arm_swing * std::sin(phase);
            a.arm_r = -a.arm_l;
            a.elbow = 0.5 * mp.arm_swing * (1.0 - std::cos(phase));
            break;
        case MotionStyle::kStep: {
            // one step per period; a full gait cycle spans two periods
            const double gait = std::sin(0.5 * phase);
            a.root.z() += step_root_travel(mp, s);
            a.leg_l = mp.leg_swing * gait;
            a.leg_r = -a.leg_l;
            a.knee_l = mp.knee_bend * 0.5 * (1.0 - std::cos(phase)) * std::max(0.0, gait);
            a.knee_r = mp.knee_bend * 0.5 * (1.0 - std::cos(phase)) * std::max(0.0, -gait);
            a.arm_l = -mp.arm_swing * gait;
            a.arm_r = -a.arm_l;
            a.twist = 0.3 * mp.pelvis_twist * gait;
            break;
        }
        case MotionStyle::kSpin:
            a.yaw = mp.spin_rate * s;
            a.root += mp.spin_radius * Vec3d(std::sin(a.yaw), 0.0, 1.0 - std::cos(a.yaw));
            a.lean = mp.lean * std::sin(phase);
            a.arm_l = mp.arm_swing * std::sin(phase);
            a.arm_r = a.arm_l;
            break;
    }
    return a;
}

Vec3d closest_on_segment(const Vec3d& p, const Vec3d& a, const Vec3d& b) {
    const Vec3d ab = b - a;
    const double len2 = ab.squaredNorm();
    const double t = len2 > 0.0 ? std::clamp((p - a).dot(ab) / len2, 0.0, 1.0) : 0.0;
    return a + t * ab;
}

}  // namespace

MotionStyle parse_motion_style(std::string_view name) {
    if (name == "sway") return MotionStyle::kSway;
    if (name == "step") return MotionStyle::kStep;
    if (name == "spin") return MotionStyle::kSpin;
    throw ConfigError("unknown motion style '" + std::string(name) + "'");
}

std::string_view to_string(MotionStyle style) {
    switch (style) {
        case MotionStyle::kSway: return "sway";
        case MotionStyle::kStep: return "step";
        case MotionStyle::kSpin: return "spin";
    }
    return "unknown";
}

MotionParams sample_motion_params(MotionStyle style, std::uint64_t seed) {
    std::mt19937_64 rng(seed ^ (0x9e3779b97f4a7c15ULL * (static_cast<std::uint64_t>(style) + 1)));
    std::uniform_real_distribution<double> jitter(0.8, 1.2);
    MotionParams p;
    p.period *= jitter(rng);
    p.arm_swing *= jitter(rng);
    p.leg_swing *= jitter(rng);
    p.knee_bend *= jitter(rng);
    p.lean *= jitter(rng);
    p.pelvis_twist *= jitter(rng);
    p.step_length *= jitter(rng);
    p.spin_rate *= jitter(rng);
    p.spin_radius *= jitter(rng);
    return p;
}

SkeletonPose rest_pose() { return build_pose(PoseAngles{}); }

double step_root_travel(const MotionParams& params, double seconds) {
    const double n = seconds / params.period;
    return params.step_length * (n - std::sin(2.0 * kPi * n) / (2.0 * kPi));
}

MotionClip animate_skeleton(MotionStyle style, int num_frames, double fps, const MotionParams& params) {
    if (num_frames < 1) throw ConfigError("animate_skeleton: num_frames must be >= 1");
    if (!(fps > 0.0)) throw ConfigError("animate_skeleton: fps must be positive");
    std::vector<SkeletonPose> poses;
    poses.reserve(static_cast<std::size_t>(num_frames));
    for (int t = 0; t < num_frames; ++t) poses.push_back(build_pose(angles_at(style, params, t / fps)));
    return MotionClip(std::move(poses), fps);
}

MotionClip animate_skeleton(MotionStyle style, int num_frames, double fps, std::uint64_t seed) {
    return animate_skeleton(style, num_frames, fps, sample_motion_params(style, seed));
}

void BodyProxy::validate(int joint_count) const {
    for (std::size_t i = 0; i < capsules.size(); ++i) {
        const auto& c = capsules[i];
        if (!(c.radius > 0.0f)) throw ConfigError("capsule " + std::to_string(i) + " has non-positive radius");
        if (c.joint_a < 0 || c.joint_a >= joint_count || c.joint_b < 0 || c.joint_b >= joint_count) {
            throw ConfigError("capsule " + std::to_string(i) + " references a missing joint");
        }
    }
}

BodyProxy BodyProxy::standard(float girth) {
    BodyProxy b;
    auto add = [&b, girth](int ja, int jb, float r, bool arm = false) {
        b.capsules.push_back({ja, jb, r * girth, arm});
    };
    add(kPelvis, kSpine, 0.11f);
    add(kSpine, kChest, 0.12f);
    add(kChest, kNeck, 0.11f);
    add(kNeck, kHead, 0.09f);
    add(kChest, kLeftShoulder, 0.06f);
    add(kChest, kRightShoulder, 0.06f);
    add(kLeftShoulder, kLeftElbow, 0.045f, true);
    add(kLeftElbow, kLeftWrist, 0.04f, true);
    add(kRightShoulder, kRightElbow, 0.045f, true);
    add(kRightElbow, kRightWrist, 0.04f, true);
    add(kPelvis, kLeftHip, 0.065f);
    add(kPelvis, kRightHip, 0.065f);
    add(kLeftHip, kLeftKnee, 0.07f);
    add(kLeftKnee, kLeftAnkle, 0.055f);
    add(kLeftAnkle, kLeftFoot, 0.04f);
    add(kRightHip, kRightKnee, 0.07f);
    add(kRightKnee, kRightAnkle, 0.055f);
    add(kRightAnkle, kRightFoot, 0.04f);
    return b;
}

float capsule_signed_distance(const Vec3& p, const Vec3& a, const Vec3& b, float radius) {
    const Vec3d pd = p.cast<double>();
    return static_cast<float>((pd - closest_on_segment(pd, a.cast<double>(), b.cast<double>())).norm() - radius);
}

GarmentKind parse_garment_kind(std::string_view name) {
    if (name == "long_skirt") return GarmentKind::kLongSkirt;
    if (name == "short_skirt") return GarmentKind::kShortSkirt;
    if (name == "dress") return GarmentKind::kDress;
    throw ConfigError("unknown garment kind '" + std::string(name) + "'");
}

std::string_view to_string(GarmentKind kind) {
    switch (kind) {
        case GarmentKind::kLongSkirt: return "long_skirt";
        case GarmentKind::kShortSkirt: return "short_skirt";
        case GarmentKind::kDress: return "dress";
    }
    return "unknown";
}

std::pair<Mat3, Vec3> AttachmentFrame::transform(const SkeletonPose& pose) const {
    const auto j = [&pose](int i) { return pose.joints.at(static_cast<std::size_t>(i)).cast<double>(); };
    const Vec3d x = (j(left_joint) - j(right_joint)).normalized();
    const Vec3d up = (j(up_to) - j(up_from)).normalized();
    const Vec3d z = x.cross(up).normalized();
    const Vec3d y = z.cross(x);
    Mat3d r;
    r.col(0) = x;
    r.col(1) = y;
    r.col(2) = z;
    return {r.cast<float>(), pose.joints.at(static_cast<std::size_t>(origin))};
}

Garment build_garment_grid(GarmentKind kind, float spacing) {
    if (!(spacing > 0.0f)) throw ConfigError("garment spacing must be positive");

    double top_y = 1.00, bottom_y = 0.28, r_top = 0.17, r_bot = 0.38;
    AttachmentFrame frame;
    switch (kind) {
        case GarmentKind::kLongSkirt: break;
        case GarmentKind::kShortSkirt:
            bottom_y = 0.62;
            r_bot = 0.27;
            break;
        case GarmentKind::kDress:
            top_y = 1.32;
            bottom_y = 0.42;
            r_top = 0.17;
            r_bot = 0.36;
            frame = {kChest, kLeftShoulder, kRightShoulder, kSpine, kChest};
            break;
    }
    const double height = top_y - bottom_y;
    const double slant = std::hypot(r_bot - r_top, height);
    if (spacing > slant || spacing > 2.0 * kPi * r_top / 3.0) {
        throw ConfigError("garment spacing " + std::to_string(spacing) + " m exceeds the garment dimensions");
    }
    const int rings = std::max(2, static_cast<int>(std::lround(slant / spacing)) + 1);
    const int segments = std::max(3, static_cast<int>(std::lround(kPi * (r_top + r_bot) / spacing)));

    Garment g;
    g.kind = kind;
    g.frame = frame;
    g.rings = rings;
    g.segments = segments;

    // Unrolled cone: a point at angle theta on ring j maps to polar (rho_j, k*(theta - pi)).
    const bool conical = r_bot - r_top > 1e-6;
    const double rho0 = conical ? r_top * slant / (r_bot - r_top) : 0.0;
    const double k = conical ? (r_bot - r_top) / slant : 0.0;
    auto unrolled = [&](int j, int i) -> Eigen::Vector2d {
        const double a = static_cast<double>(j) / (rings - 1);
        const double theta = 2.0 * kPi * i / segments;
        if (!conical) return {r_top * (theta - kPi), a * slant};
        const double rho = rho0 + a * slant;
        const double phi = k * (theta - kPi);
        return {rho * std::sin(phi), -rho * std::cos(phi)};
    };
    Eigen::Vector2d lo = Eigen::Vector2d::Constant(1e30), hi = Eigen::Vector2d::Constant(-1e30);
    for (int j = 0; j < rings; ++j) {
        for (int i = 0; i <= segments; ++i) {
            const auto p = unrolled(j, i);
            lo = lo.cwiseMin(p);
            hi = hi.cwiseMax(p);
        }
    }
    constexpr double kMargin = 0.01;
    const double scale = (1.0 - 2.0 * kMargin) / (hi - lo).maxCoeff();
    g.uv_scale = static_cast<float>(scale);
    auto uv_of = [&](int j, int i) -> Vec2 {
        const Eigen::Vector2d p = (unrolled(j, i) - lo) * scale + Eigen::Vector2d::Constant(kMargin);
        return p.cwiseMax(0.0).cwiseMin(1.0).cast<float>();
    };

    const Vec3d origin = build_pose(PoseAngles{}).joints[static_cast<std::size_t>(frame.origin)].cast<double>();
    g.mesh.vertices.reserve(static_cast<std::size_t>(rings) * segments);
    for (int j = 0; j < rings; ++j) {
        const double a = static_cast<double>(j) / (rings - 1);
        const double y = top_y + a * (bottom_y - top_y);
        const double r = r_top + a * (r_bot - r_top);
        for (int i = 0; i < segments; ++i) {
            const double theta = 2.0 * kPi * i / segments;
            g.mesh.vertices.push_back(Vec3d(origin.x() + r * std::sin(theta), y, origin.z() + r * std::cos(theta)).cast<float>());
        }
    }
    auto vid = [segments](int j, int i) { return j * segments + (i % segments); };
    for (int j = 0; j + 1 < rings; ++j) {
        for (int i = 0; i < segments; ++i) {
            const int a = vid(j, i), b = vid(j, i + 1), c = vid(j + 1, i + 1), d = vid(j + 1, i);
            g.mesh.faces.push_back({a, d, c});
            g.mesh.uv.push_back({uv_of(j, i), uv_of(j + 1, i), uv_of(j + 1, i + 1)});
            g.mesh.faces.push_back({a, c, b});
            g.mesh.uv.push_back({uv_of(j, i), uv_of(j + 1, i + 1), uv_of(j, i + 1)});
        }
    }
    for (int i = 0; i < segments; ++i) g.pinned.push_back(vid(0, i));
    return g;
}

void SimParams::validate() const {
    if (substeps < 1) throw ConfigError("substeps must be >= 1");
    if (iterations < 1) throw ConfigError("iterations must be >= 1");
    if (!(collision_margin >= 0.0f)) throw ConfigError("collision margin must be >= 0");
    if (!(stretch_compliance >= 0.0)) throw ConfigError("stretch compliance must be >= 0");
    if (!(damping >= 0.0 && damping < 1.0)) throw ConfigError("damping must lie in [0, 1)");
    if (settle_frames < 0) throw ConfigError("settle_frames must be >= 0");
    if (!gravity.allFinite()) throw ConfigError("gravity must be finite");
}

namespace {

// Rigid map taking the rest garment onto `pose`.
struct RigidMap {
    Mat3d rotation;
    Vec3d translation;
    Vec3d apply(const Vec3d& p) const { return rotation * p + translation; }
};

RigidMap attachment_map(const AttachmentFrame& frame, const SkeletonPose& rest, const SkeletonPose& pose) {
    const auto [r0, t0] = frame.transform(rest);
    const auto [r1, t1] = frame.transform(pose);
    const Mat3d rot = r1.cast<double>() * r0.cast<double>().transpose();
    return {rot, t1.cast<double>() - rot * t0.cast<double>()};
}

SkeletonPose lerp_pose(const SkeletonPose& a, const SkeletonPose& b, double alpha) {
    SkeletonPose out = b;
    for (std::size_t j = 0; j < out.joints.size(); ++j) {
        out.joints[j] = (a.joints[j].cast<double>() * (1.0 - alpha) + b.joints[j].cast<double>() * alpha).cast<float>();
    }
    return out;
}

struct Edge {
    int a, b;
    double rest;
};

std::vector<std::pair<int, int>> unique_edges(const TriMesh& mesh) {
    std::set<std::pair<int, int>> edges;
    for (const auto& f : mesh.faces) {
        for (int k = 0; k < 3; ++k) {
            const int a = f[static_cast<std::size_t>(k)], b = f[static_cast<std::size_t>((k + 1) % 3)];
            edges.insert({std::min(a, b), std::max(a, b)});
        }
    }
    return {edges.begin(), edges.end()};
}

struct WorldCapsule {
    Vec3d a, b;
    double radius;
};

std::vector<WorldCapsule> place_capsules(const BodyProxy& body, const SkeletonPose& pose) {
    std::vector<WorldCapsule> out;
    out.reserve(body.capsules.size());
    for (const auto& c : body.capsules) {
        out.push_back({pose.joints[static_cast<std::size_t>(c.joint_a)].cast<double>(),
                       pose.joints[static_cast<std::size_t>(c.joint_b)].cast<double>(), static_cast<double>(c.radius)});
    }
    return out;
}

void push_out_of_capsules(Vec3d& p, const std::vector<WorldCapsule>& capsules) {
    for (const auto& c : capsules) {
        const Vec3d q = closest_on_segment(p, c.a, c.b);
        const Vec3d d = p - q;
        const double dist = d.norm();
        if (dist >= c.radius) continue;
        Vec3d n;
        if (dist > 1e-12) {
            n = d / dist;
        } else {
            // on the axis: pick any direction perpendicular to it
            const Vec3d axis = (c.b - c.a).norm() > 1e-12 ? (c.b - c.a).normalized() : Vec3d::UnitY();
            n = axis.cross(std::abs(axis.x()) < 0.9 ? Vec3d::UnitX() : Vec3d::UnitZ()).normalized();
        }
        p = q + n * c.radius;
    }
}

}  // namespace

std::vector<Vec3> dress_garment(const Garment& garment, const SkeletonPose& pose) {
    const RigidMap m = attachment_map(garment.frame, rest_pose(), pose);
    std::vector<Vec3> out;
    out.reserve(garment.mesh.vertices.size());
    for (const auto& v : garment.mesh.vertices) out.push_back(m.apply(v.cast<double>()).cast<float>());
    return out;
}

MeshSequence simulate(const Garment& garment, const MotionClip& clip, const BodyProxy& body,
                      const SimParams& params) {
    params.validate();
    if (clip.frame_count() < 1) throw ConfigError("simulate: empty clip");
    body.validate(clip.joint_count());
    const int nv = garment.mesh.vertex_count();
    for (int id : garment.pinned) {
        if (id < 0 || id >= nv) throw ConfigError("pinned vertex " + std::to_string(id) + " does not exist");
    }
    const auto violations = validate_mesh(garment.mesh);
    if (!violations.empty()) throw ConfigError("simulate: invalid garment mesh: " + violations.front().message);

    const SkeletonPose rest = rest_pose();
    std::vector<Vec3d> rest_local(static_cast<std::size_t>(nv));
    for (int i = 0; i < nv; ++i) rest_local[static_cast<std::size_t>(i)] = garment.mesh.vertices[static_cast<std::size_t>(i)].cast<double>();

    // initial state: rest garment carried to frame 0, optional seeded jitter on free vertices
    std::vector<double> inv_mass(static_cast<std::size_t>(nv), 1.0);
    for (int id : garment.pinned) inv_mass[static_cast<std::size_t>(id)] = 0.0;
    const RigidMap m0 = attachment_map(garment.frame, rest, clip.pose(0));
    std::vector<Vec3d> x(static_cast<std::size_t>(nv)), v(static_cast<std::size_t>(nv), Vec3d::Zero()),
        p(static_cast<std::size_t>(nv));
    std::mt19937_64 rng(params.seed);
    std::uniform_real_distribution<double> noise(-1.0, 1.0);
    for (std::size_t i = 0; i < x.size(); ++i) {
        x[i] = m0.apply(rest_local[i]);
        if (params.jitter > 0.0 && inv_mass[i] > 0.0) {
            x[i] += params.jitter * Vec3d(noise(rng), noise(rng), noise(rng));
        }
    }

    std::vector<Edge> edges;
    for (const auto& [a, b] : unique_edges(garment.mesh)) {
        edges.push_back({a, b, (x[static_cast<std::size_t>(a)] - x[static_cast<std::size_t>(b)]).norm()});
    }
    std::vector<double> lambda(edges.size(), 0.0);

    const double dt = 1.0 / (clip.fps() * params.substeps);
    const double alpha_tilde = params.stretch_compliance / (dt * dt);
    const Vec3d gravity = params.gravity.cast<double>();

    auto advance = [&](const SkeletonPose& from, const SkeletonPose& to, int frame_label) {
        for (int s = 1; s <= params.substeps; ++s) {
            const SkeletonPose pose = lerp_pose(from, to, static_cast<double>(s) / params.substeps);
            const RigidMap pin_map = attachment_map(garment.frame, rest, pose);
            const auto capsules = place_capsules(body, pose);

            for (std::size_t i = 0; i < x.size(); ++i) {
                if (inv_mass[i] == 0.0) {
                    p[i] = pin_map.apply(rest_local[i]);
                    continue;
                }
                v[i] = (v[i] + gravity * dt) * (1.0 - params.damping);
                p[i] = x[i] + v[i] * dt;
            }
            std::fill(lambda.begin(), lambda.end(), 0.0);
            for (int it = 0; it < params.iterations; ++it) {
                for (std::size_t e = 0; e < edges.size(); ++e) {
                    const auto ia = static_cast<std::size_t>(edges[e].a), ib = static_cast<std::size_t>(edges[e].b);
                    const double wsum = inv_mass[ia] + inv_mass[ib];
                    if (wsum == 0.0) continue;
                    const Vec3d d = p[ia] - p[ib];
                    const double len = d.norm();
                    if (len < 1e-12) continue;
                    const double c = len - edges[e].rest;
                    const double dl = (-c - alpha_tilde * lambda[e]) / (wsum + alpha_tilde);
                    lambda[e] += dl;
                    const Vec3d corr = (dl / len) * d;
                    p[ia] += inv_mass[ia] * corr;
                    p[ib] -= inv_mass[ib] * corr;
                }
                for (std::size_t i = 0; i < p.size(); ++i) {
                    if (inv_mass[i] > 0.0) push_out_of_capsules(p[i], capsules);
                }
            }
            for (std::size_t i = 0; i < x.size(); ++i) {
                v[i] = (p[i] - x[i]) / dt;
                x[i] = p[i];
                if (!x[i].allFinite() || !v[i].allFinite()) {
                    throw NumericalError("cloth solver diverged at frame " + std::to_string(frame_label));
                }
            }
        }
    };

    for (int s = 0; s < params.settle_frames; ++s) advance(clip.pose(0), clip.pose(0), 0);

    std::vector<std::vector<Vec3>> frames;
    frames.reserve(static_cast<std::size_t>(clip.frame_count()));
    auto snapshot = [&x]() {
        std::vector<Vec3> out(x.size());
        std::transform(x.begin(), x.end(), out.begin(), [](const Vec3d& q) { return q.cast<float>(); });
        return out;
    };
    frames.push_back(snapshot());
    for (int t = 1; t < clip.frame_count(); ++t) {
        advance(clip.pose(t - 1), clip.pose(t), t);
        frames.push_back(snapshot());
    }
    return MeshSequence(garment.mesh, std::move(frames));
}

SimStats measure_sim(const MeshSequence& seq, const MotionClip& clip, const BodyProxy& body) {
    SimStats stats;
    stats.min_capsule_distance = std::numeric_limits<double>::infinity();
    const auto edges = unique_edges(seq.topology());
    std::vector<double> rest;
    for (const auto& [a, b] : edges) {
        rest.push_back((seq.topology().vertices[static_cast<std::size_t>(a)] - seq.topology().vertices[static_cast<std::size_t>(b)])
                           .cast<double>()
                           .norm());
    }
    double sum = 0.0;
    std::size_t count = 0;
    for (int t = 0; t < seq.frame_count(); ++t) {
        const auto& f = seq.frame(t);
        for (std::size_t e = 0; e < edges.size(); ++e) {
            const double len = (f[static_cast<std::size_t>(edges[e].first)] - f[static_cast<std::size_t>(edges[e].second)]).cast<double>().norm();
            const double strain = std::abs(len / rest[e] - 1.0);
            stats.max_strain = std::max(stats.max_strain, strain);
            sum += strain;
            ++count;
        }
        const auto& pose = clip.pose(std::min(t, clip.frame_count() - 1));
        for (const auto& c : body.capsules) {
            const Vec3& a = pose.joints[static_cast<std::size_t>(c.joint_a)];
            const Vec3& b = pose.joints[static_cast<std::size_t>(c.joint_b)];
            for (const auto& q : f) {
                stats.min_capsule_distance =
                    std::min(stats.min_capsule_distance, static_cast<double>(capsule_signed_distance(q, a, b, c.radius)));
            }
        }
    }
    stats.mean_strain = count ? sum / static_cast<double>(count) : 0.0;
    return stats;
}

// ---------------------------------------------------------------------------------------

BodyMesh tessellate_body(const BodyProxy& body, const SkeletonPose& pose, int segments, int rings) {
    BodyMesh out;
    auto& mesh = out.mesh;
    for (const auto& c : body.capsules) {
        const Vec3d a = pose.joints[static_cast<std::size_t>(c.joint_a)].cast<double>();
        const Vec3d b = pose.joints[static_cast<std::size_t>(c.joint_b)].cast<double>();
        Vec3d axis = b - a;
        const double len = axis.norm();
        axis = len > 1e-9 ? Vec3d(axis / len) : Vec3d::UnitY();
        const Vec3d u = axis.cross(std::abs(axis.x()) < 0.9 ? Vec3d::UnitX() : Vec3d::UnitZ()).normalized();
        const Vec3d w = axis.cross(u);
        const double r = c.radius;

        // latitude rings from the pole at a to the pole at b
        std::vector<std::pair<Vec3d, double>> lat;  // (ring center, ring radius)
        for (int k = 1; k <= rings; ++k) {
            const double phi = -0.5 * kPi + 0.5 * kPi * k / rings;
            lat.push_back({a + axis * (r * std::sin(phi)), r * std::cos(phi)});
        }
        for (int k = 0; k < rings; ++k) {
            const double phi = 0.5 * kPi * k / rings;
            lat.push_back({b + axis * (r * std::sin(phi)), r * std::cos(phi)});
        }
        const int base = mesh.vertex_count();
        mesh.vertices.push_back((a - axis * r).cast<float>());
        for (const auto& [center, rr] : lat) {
            for (int i = 0; i < segments; ++i) {
                const double th = 2.0 * kPi * i / segments;
                mesh.vertices.push_back((center + rr * (std::cos(th) * u + std::sin(th) * w)).cast<float>());
            }
        }
        mesh.vertices.push_back((b + axis * r).cast<float>());
        const int top = mesh.vertex_count() - 1;
        const int n_lat = static_cast<int>(lat.size());
        auto ring_v = [&](int k, int i) { return base + 1 + k * segments + (i % segments); };
        const std::size_t faces_before = mesh.faces.size();
        for (int i = 0; i < segments; ++i) mesh.faces.push_back({base, ring_v(0, i + 1), ring_v(0, i)});
        for (int k = 0; k + 1 < n_lat; ++k) {
            for (int i = 0; i < segments; ++i) {
                mesh.faces.push_back({ring_v(k, i), ring_v(k, i + 1), ring_v(k + 1, i + 1)});
                mesh.faces.push_back({ring_v(k, i), ring_v(k + 1, i + 1), ring_v(k + 1, i)});
            }
        }
        for (int i = 0; i < segments; ++i) mesh.faces.push_back({top, ring_v(n_lat - 1, i), ring_v(n_lat - 1, i + 1)});
        const std::size_t added = mesh.faces.size() - faces_before;
        out.face_is_arm.insert(out.face_is_arm.end(), added, c.is_arm ? 1 : 0);
    }
    mesh.uv.assign(mesh.faces.size(), FaceUV{Vec2::Zero(), Vec2::Zero(), Vec2::Zero()});
    return out;
}

namespace {

Image background_image(const Palette& palette, Resolution res, const Image* background) {
    if (background) {
        if (background->width != res.width || background->height != res.height || background->channels != 3) {
            throw ConfigError("background image does not match the render resolution");
        }
        Image out = *background;
        out.kind = ImageKind::kRgb;
        return out;
    }
    Image out(res.height, res.width, 3, ImageKind::kRgb);
    for (std::size_t i = 0; i < res.pixel_count(); ++i) {
        for (int c = 0; c < 3; ++c) out.pixels[i * 3 + static_cast<std::size_t>(c)] = palette.background[c];
    }
    return out;
}

float lambert(const Vec3& a, const Vec3& b, const Vec3& c, const Vec3& light_world, float ambient) {
    Vec3 n = (b - a).cross(c - a);
    const float len = n.norm();
    if (len <= 0.0f) return ambient;
    n /= len;
    return ambient + (1.0f - ambient) * std::abs(n.dot(light_world));
}

Vec3 light_in_world(const Palette& palette, const Camera& camera) {
    return (camera.rotation.transpose() * palette.light_dir_camera).normalized();
}

}  // namespace

BodyRender render_body(const BodyProxy& body, const SkeletonPose& pose, const Camera& camera,
                       Resolution resolution, const Palette& palette, const Image* background) {
    const BodyMesh bm = tessellate_body(body, pose);
    const GBuffer g = rasterize(bm.mesh, camera, resolution);
    const Vec3 light = light_in_world(palette, camera);

    BodyRender out;
    out.rgb = background_image(palette, resolution, background);
    out.arm_mask = Image(resolution.height, resolution.width, 1, ImageKind::kMask);
    out.depth.assign(resolution.pixel_count(), 0.0f);
    for (std::size_t i = 0; i < g.pixel_count(); ++i) {
        const int f = g.triangle_id[i];
        if (f < 0) continue;
        const Face& face = bm.mesh.faces[static_cast<std::size_t>(f)];
        const float shade = lambert(bm.mesh.vertices[static_cast<std::size_t>(face[0])], bm.mesh.vertices[static_cast<std::size_t>(face[1])],
                                    bm.mesh.vertices[static_cast<std::size_t>(face[2])], light, palette.ambient);
        for (int c = 0; c < 3; ++c) {
            out.rgb.pixels[i * 3 + static_cast<std::size_t>(c)] = std::clamp(palette.body[c] * palette.light_tint[c] * shade, 0.0f, 1.0f);
        }
        out.arm_mask.pixels[i] = bm.face_is_arm[static_cast<std::size_t>(f)] ? 1.0f : 0.0f;
        out.depth[i] = g.depth[i];
    }
    return out;
}

Image render_dressed(const BodyProxy& body, const SkeletonPose& pose, const TriMesh& garment_topology,
                     std::span<const Vec3> garment_vertices, const Camera& camera, Resolution resolution,
                     const Palette& palette, const Image* background) {
    const BodyMesh bm = tessellate_body(body, pose);
    TriMesh scene = bm.mesh;
    const int body_faces = scene.face_count();
    const int offset = scene.vertex_count();
    scene.vertices.insert(scene.vertices.end(), garment_vertices.begin(), garment_vertices.end());
    for (std::size_t f = 0; f < garment_topology.faces.size(); ++f) {
        const Face& src = garment_topology.faces[f];
        scene.faces.push_back({src[0] + offset, src[1] + offset, src[2] + offset});
        scene.uv.push_back(garment_topology.uv[f]);
    }

    const GBuffer g = rasterize(scene, camera, resolution);
    const Vec3 light = light_in_world(palette, camera);
    Image out = background_image(palette, resolution, background);
    for (std::size_t i = 0; i < g.pixel_count(); ++i) {
        const int f = g.triangle_id[i];
        if (f < 0) continue;
        const Face& face = scene.faces[static_cast<std::size_t>(f)];
        const float shade = lambert(scene.vertices[static_cast<std::size_t>(face[0])], scene.vertices[static_cast<std::size_t>(face[1])],
                                    scene.vertices[static_cast<std::size_t>(face[2])], light, palette.ambient);
        Vec3 base = palette.body;
        if (f >= body_faces) {
            const float stripe = 0.5f * (1.0f + std::sin(2.0f * std::numbers::pi_v<float> * palette.stripe_frequency * g.uv[i].y()));
            base = palette.garment * (1.0f - palette.stripe_amplitude * stripe);
        }
        for (int c = 0; c < 3; ++c) {
            out.pixels[i * 3 + static_cast<std::size_t>(c)] = std::clamp(base[c] * palette.light_tint[c] * shade, 0.0f, 1.0f);
        }
    }
    return out;
}

std::vector<ViewFrames> render_ground_truth(const MeshSequence& target_seq, const BodyProxy& body,
                                            const MotionClip& clip, const std::vector<Camera>& cameras,
                                            Resolution resolution, const Palette& palette, const Image* background) {
    if (cameras.empty()) throw ConfigError("render_ground_truth: no cameras");
    if (target_seq.frame_count() != clip.frame_count()) {
        throw SchemaMismatch("render_ground_truth: mesh sequence and clip lengths differ");
    }
    std::vector<ViewFrames> views;
    for (const auto& cam : cameras) {
        ViewFrames vf;
        vf.camera = cam;
        for (int t = 0; t < clip.frame_count(); ++t) {
            BodyRender br = render_body(body, clip.pose(t), cam, resolution, palette, background);
            vf.gt.push_back(render_dressed(body, clip.pose(t), target_seq.topology(), target_seq.frame(t), cam,
                                           resolution, palette, background));
            vf.bg.push_back(std::move(br.rgb));
            vf.arm.push_back(std::move(br.arm_mask));
        }
        views.push_back(std::move(vf));
    }
    return views;
}

std::vector<Camera> ring_cameras(int count, const Vec3& center, float radius, float elevation, float fov_y_rad,
                                 Resolution resolution, std::uint64_t seed, int first_view_id) {
    if (count < 1) throw ConfigError("ring_cameras: count must be >= 1");
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> azimuth(0.0, 2.0 * kPi);
    std::vector<Camera> cams;
    for (int i = 0; i < count; ++i) {
        const double az = azimuth(rng);
        const Vec3 eye = center + Vec3(static_cast<float>(radius * std::sin(az)), elevation,
                                       static_cast<float>(radius * std::cos(az)));
        cams.push_back(Camera::look_at(eye, center, fov_y_rad, resolution.width, resolution.height, first_view_id + i));
    }
    return cams;
}

}  // namespace dng
