#include "dng/dataset_io.hpp"

#include <bit>
#include <fstream>

#include "dng/image_io.hpp"

namespace dng {

namespace fs = std::filesystem;

static_assert(std::endian::native == std::endian::little, "raw arrays are little-endian");

namespace {

std::string view_dir(int p) { return "view_" + std::to_string(p); }

fs::path frame_path(const fs::path& root, int p, const char* prefix, int t) {
    const char* top = std::string_view(prefix) == "arm" ? "masks" : "frames";
    return root / top / view_dir(p) / (std::string(prefix) + "_" + std::to_string(t) + ".png");
}

template <typename F>
auto wrap_json(const std::string& what, F&& f) {
    try {
        return f();
    } catch (const json::exception& e) {
        throw ConfigError(what + ": " + e.what());
    }
}

}  // namespace

json meta_to_json(const DatasetMeta& m) {
    return {{"fps", m.fps},
            {"frame_count", m.frame_count},
            {"joint_count", m.joint_count()},
            {"joint_names", m.joint_names},
            {"resolution", {m.resolution.width, m.resolution.height}},
            {"views", m.views},
            {"descriptor_stride", m.window.stride},
            {"descriptor_count", m.window.count},
            {"sigma", m.motion.sigma},
            {"motion_maps", m.motion.maps},
            {"motion_stride", m.motion.stride},
            {"body_girth", m.body_girth},
            {"garment", m.garment},
            {"motion_style", m.motion_style},
            {"triplet_frames", m.triplet_frames},
            {"generator", m.generator}};
}

DatasetMeta meta_from_json(const json& j) {
    return wrap_json("meta.json", [&] {
        DatasetMeta m;
        m.fps = j.at("fps").get<double>();
        m.frame_count = j.at("frame_count").get<int>();
        m.joint_names = j.at("joint_names").get<std::vector<std::string>>();
        if (j.at("joint_count").get<int>() != m.joint_count()) {
            throw SchemaMismatch("meta.json: joint_count disagrees with joint_names");
        }
        const auto res = j.at("resolution").get<std::vector<int>>();
        if (res.size() != 2) throw SchemaMismatch("meta.json: resolution must be [width, height]");
        m.resolution = {res[0], res[1]};
        m.views = j.at("views").get<std::vector<int>>();
        m.window.stride = j.at("descriptor_stride").get<int>();
        m.window.count = j.at("descriptor_count").get<int>();
        m.motion.sigma = j.at("sigma").get<float>();
        m.motion.maps = j.at("motion_maps").get<int>();
        m.motion.stride = j.at("motion_stride").get<int>();
        m.body_girth = j.value("body_girth", 1.0f);
        m.garment = j.value("garment", std::string("long_skirt"));
        m.motion_style = j.value("motion_style", std::string("sway"));
        m.triplet_frames = j.at("triplet_frames").get<std::vector<int>>();
        m.generator = j.value("generator", json::object());
        return m;
    });
}

json camera_to_json(const Camera& c) {
    std::vector<float> r;
    for (int i = 0; i < 3; ++i) {
        for (int k = 0; k < 3; ++k) r.push_back(c.rotation(i, k));
    }
    return {{"fx", c.fx}, {"fy", c.fy}, {"cx", c.cx}, {"cy", c.cy}, {"rotation", r},
            {"translation", {c.translation.x(), c.translation.y(), c.translation.z()}}, {"view_id", c.view_id}};
}

Camera camera_from_json(const json& j) {
    return wrap_json("camera", [&] {
        Camera c;
        c.fx = j.at("fx").get<float>();
        c.fy = j.at("fy").get<float>();
        c.cx = j.at("cx").get<float>();
        c.cy = j.at("cy").get<float>();
        const auto r = j.at("rotation").get<std::vector<float>>();
        const auto t = j.at("translation").get<std::vector<float>>();
        if (r.size() != 9 || t.size() != 3) throw SchemaMismatch("camera: rotation needs 9 and translation 3 values");
        for (int i = 0; i < 3; ++i) {
            for (int k = 0; k < 3; ++k) c.rotation(i, k) = r[static_cast<std::size_t>(i * 3 + k)];
        }
        c.translation = Vec3(t[0], t[1], t[2]);
        c.view_id = j.value("view_id", 0);
        c.validate();
        return c;
    });
}

json topology_to_json(const TriMesh& mesh) {
    json verts = json::array(), faces = json::array(), uv = json::array();
    for (const auto& v : mesh.vertices) verts.push_back({v.x(), v.y(), v.z()});
    for (const auto& f : mesh.faces) faces.push_back({f[0], f[1], f[2]});
    for (const auto& c : mesh.uv) uv.push_back({c[0].x(), c[0].y(), c[1].x(), c[1].y(), c[2].x(), c[2].y()});
    return {{"vertices", verts}, {"faces", faces}, {"uv", uv}};
}

TriMesh topology_from_json(const json& j) {
    return wrap_json("topology", [&] {
        TriMesh m;
        for (const auto& v : j.at("vertices")) m.vertices.emplace_back(v.at(0).get<float>(), v.at(1).get<float>(), v.at(2).get<float>());
        for (const auto& f : j.at("faces")) m.faces.push_back({f.at(0).get<int>(), f.at(1).get<int>(), f.at(2).get<int>()});
        for (const auto& c : j.at("uv")) {
            const auto u = c.get<std::vector<float>>();
            if (u.size() != 6) throw SchemaMismatch("topology: each uv entry needs 6 values");
            m.uv.push_back({Vec2(u[0], u[1]), Vec2(u[2], u[3]), Vec2(u[4], u[5])});
        }
        return m;
    });
}

json clip_to_json(const MotionClip& clip) {
    json frames = json::array();
    for (const auto& pose : clip.poses()) {
        json joints = json::array();
        for (const auto& p : pose.joints) joints.push_back({p.x(), p.y(), p.z()});
        frames.push_back(joints);
    }
    const int root = clip.frame_count() > 0 ? clip.pose(0).root_index : 0;
    return {{"fps", clip.fps()}, {"root_index", root}, {"frames", frames}};
}

MotionClip clip_from_json(const json& j) {
    return wrap_json("motion clip", [&] {
        const int root = j.value("root_index", 0);
        std::vector<SkeletonPose> poses;
        for (const auto& f : j.at("frames")) {
            SkeletonPose pose;
            pose.root_index = root;
            for (const auto& p : f) pose.joints.emplace_back(p.at(0).get<float>(), p.at(1).get<float>(), p.at(2).get<float>());
            if (root < 0 || root >= pose.joint_count()) throw ConfigError("motion clip: root_index out of range");
            poses.push_back(std::move(pose));
        }
        return MotionClip(std::move(poses), j.at("fps").get<double>());
    });
}

json read_json(const fs::path& path) {
    std::ifstream is(path);
    if (!is) throw ConfigError("cannot open " + path.string());
    try {
        return json::parse(is);
    } catch (const json::exception& e) {
        throw ConfigError(path.string() + ": " + e.what());
    }
}

void write_json(const fs::path& path, const json& value) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    std::ofstream os(path);
    if (!os) throw ConfigError("cannot write " + path.string());
    os << value.dump(2) << '\n';
}

void write_f32(const fs::path& path, std::span<const float> values) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    std::ofstream os(path, std::ios::binary);
    if (!os) throw ConfigError("cannot write " + path.string());
    os.write(reinterpret_cast<const char*>(values.data()), static_cast<std::streamsize>(values.size_bytes()));
}

std::vector<float> read_f32(const fs::path& path) {
    std::ifstream is(path, std::ios::binary | std::ios::ate);
    if (!is) throw ConfigError("cannot open " + path.string());
    const auto bytes = static_cast<std::size_t>(is.tellg());
    if (bytes % sizeof(float) != 0) throw SchemaMismatch(path.string() + ": size is not a multiple of 4 bytes");
    std::vector<float> out(bytes / sizeof(float));
    is.seekg(0);
    is.read(reinterpret_cast<char*>(out.data()), static_cast<std::streamsize>(bytes));
    return out;
}

const ViewFrames& Dataset::view(int view_id) const {
    for (const auto& v : views) {
        if (v.camera.view_id == view_id) return v;
    }
    throw ConfigError("dataset has no view " + std::to_string(view_id));
}

void write_dataset(const fs::path& root, const Dataset& d) {
    write_json(root / "meta.json", meta_to_json(d.meta));

    std::vector<float> joints;
    for (const auto& pose : d.clip.poses()) {
        for (const auto& p : pose.joints) joints.insert(joints.end(), {p.x(), p.y(), p.z()});
    }
    write_f32(root / "motion" / "joints.f32", joints);

    write_json(root / "coarse" / "topology.json", topology_to_json(d.coarse.topology()));
    std::vector<float> verts;
    for (const auto& frame : d.coarse.frames()) {
        for (const auto& v : frame) verts.insert(verts.end(), {v.x(), v.y(), v.z()});
    }
    write_f32(root / "coarse" / "verts.f32", verts);

    for (const auto& v : d.views) {
        const int p = v.camera.view_id;
        write_json(root / "views" / (view_dir(p) + ".json"), camera_to_json(v.camera));
        fs::create_directories(root / "frames" / view_dir(p));
        fs::create_directories(root / "masks" / view_dir(p));
        for (std::size_t t = 0; t < v.gt.size(); ++t) {
            write_png(frame_path(root, p, "gt", static_cast<int>(t)), v.gt[t]);
            write_png(frame_path(root, p, "bg", static_cast<int>(t)), v.bg[t]);
            write_png(frame_path(root, p, "arm", static_cast<int>(t)), v.arm[t]);
        }
    }
}

Dataset load_dataset(const fs::path& root, bool with_images) {
    Dataset d;
    d.meta = meta_from_json(read_json(root / "meta.json"));
    const int T = d.meta.frame_count, J = d.meta.joint_count();

    const auto joints = read_f32(root / "motion" / "joints.f32");
    if (joints.size() != static_cast<std::size_t>(T) * J * 3) {
        throw SchemaMismatch("motion/joints.f32 holds " + std::to_string(joints.size()) + " floats, expected T*J*3 = " +
                             std::to_string(static_cast<std::size_t>(T) * J * 3));
    }
    std::vector<SkeletonPose> poses(static_cast<std::size_t>(T));
    for (int t = 0; t < T; ++t) {
        for (int j = 0; j < J; ++j) {
            const float* p = joints.data() + (static_cast<std::size_t>(t) * J + j) * 3;
            poses[static_cast<std::size_t>(t)].joints.emplace_back(p[0], p[1], p[2]);
        }
    }
    d.clip = MotionClip(std::move(poses), d.meta.fps);

    TriMesh topo = topology_from_json(read_json(root / "coarse" / "topology.json"));
    const auto verts = read_f32(root / "coarse" / "verts.f32");
    const std::size_t vc = topo.vertices.size();
    if (verts.size() != static_cast<std::size_t>(T) * vc * 3) {
        throw SchemaMismatch("coarse/verts.f32 does not match T x Vc x 3 for Vc = " + std::to_string(vc));
    }
    std::vector<std::vector<Vec3>> frames(static_cast<std::size_t>(T));
    for (int t = 0; t < T; ++t) {
        for (std::size_t v = 0; v < vc; ++v) {
            const float* p = verts.data() + (static_cast<std::size_t>(t) * vc + v) * 3;
            frames[static_cast<std::size_t>(t)].emplace_back(p[0], p[1], p[2]);
        }
    }
    d.coarse = MeshSequence(std::move(topo), std::move(frames));

    for (int p : d.meta.views) {
        ViewFrames v;
        v.camera = camera_from_json(read_json(root / "views" / (view_dir(p) + ".json")));
        if (v.camera.view_id != p) throw SchemaMismatch(view_dir(p) + ".json carries view_id " + std::to_string(v.camera.view_id));
        if (with_images) {
            for (int t = 0; t < T; ++t) {
                v.gt.push_back(read_png(frame_path(root, p, "gt", t)));
                v.bg.push_back(read_png(frame_path(root, p, "bg", t)));
                Image arm = read_png(frame_path(root, p, "arm", t));
                arm.kind = ImageKind::kMask;
                v.arm.push_back(std::move(arm));
                for (const Image* img : {&v.gt.back(), &v.bg.back(), &v.arm.back()}) {
                    if (img->width != d.meta.resolution.width || img->height != d.meta.resolution.height) {
                        throw SchemaMismatch(view_dir(p) + " frame " + std::to_string(t) + " does not match meta resolution");
                    }
                }
            }
        }
        d.views.push_back(std::move(v));
    }
    return d;
}

std::vector<std::string> validate_dataset(const fs::path& root) {
    std::vector<std::string> problems;
    Dataset d;
    try {
        d = load_dataset(root, false);
    } catch (const Error& e) {
        problems.emplace_back(e.what());
        return problems;
    }
    if (d.meta.joint_count() != d.clip.joint_count()) problems.emplace_back("joint count mismatch");
    for (const auto& v : validate_mesh(d.coarse.topology())) problems.push_back("coarse topology: " + v.message);
    for (int t : d.meta.triplet_frames) {
        if (t < 1 || t + 1 >= d.meta.frame_count) problems.push_back("triplet frame " + std::to_string(t) + " lacks neighbours");
    }
    for (int p : d.meta.views) {
        for (int t = 0; t < d.meta.frame_count; ++t) {
            for (const char* kind : {"gt", "bg", "arm"}) {
                const auto path = frame_path(root, p, kind, t);
                if (!fs::exists(path)) problems.push_back("missing " + path.lexically_relative(root).string());
            }
        }
    }
    return problems;
}

}  // namespace dng
