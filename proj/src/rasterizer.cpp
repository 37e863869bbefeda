#include "dng/rasterizer.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace dng {

std::size_t GBuffer::covered_count() const {
    return static_cast<std::size_t>(std::count(mask.begin(), mask.end(), std::uint8_t{1}));
}

namespace {

struct Projected {
    double x, y, z;  // pixel coordinates and camera depth
};

Projected project(const Camera& cam, const Vec3& p) {
    const Eigen::Vector3d c = (cam.rotation.cast<double>() * p.cast<double>()) + cam.translation.cast<double>();
    return {cam.fx * c.x() / c.z() + cam.cx, cam.fy * c.y() / c.z() + cam.cy, c.z()};
}

Vec3 surface_point(const Eigen::Vector3f& b, const Face& face, std::span<const Vec3> v) {
    return b[0] * v[static_cast<std::size_t>(face[0])] + b[1] * v[static_cast<std::size_t>(face[1])] +
           b[2] * v[static_cast<std::size_t>(face[2])];
}

double edge(const Projected& a, const Projected& b, double px, double py) {
    return (b.x - a.x) * (py - a.y) - (b.y - a.y) * (px - a.x);
}

}  // namespace

GBuffer rasterize(std::span<const Vec3> vertices, const TriMesh& topology, const Camera& camera,
                  Resolution resolution, float near_plane) {
    if (resolution.width <= 0 || resolution.height <= 0) throw ConfigError("resolution must be positive");
    if (vertices.size() != topology.vertices.size()) {
        throw SchemaMismatch("rasterize: vertex count does not match topology");
    }
    camera.validate();
    for (int f = 0; f < topology.face_count(); ++f) {
        for (int k : topology.faces[static_cast<std::size_t>(f)]) {
            if (k < 0 || k >= static_cast<int>(vertices.size())) {
                throw SchemaMismatch("rasterize: face " + std::to_string(f) + " references vertex " + std::to_string(k));
            }
        }
    }

    const std::size_t n = resolution.pixel_count();
    GBuffer g;
    g.width = resolution.width;
    g.height = resolution.height;
    g.vertex_count = static_cast<int>(vertices.size());
    g.triangle_id.assign(n, -1);
    g.bary.assign(n, Eigen::Vector3f::Zero());
    g.uv.assign(n, Vec2::Zero());
    g.world_pos.assign(n, Vec3::Zero());
    g.depth.assign(n, 0.0f);
    g.mask.assign(n, 0);
    std::vector<double> zbuf(n, std::numeric_limits<double>::infinity());

    const bool has_uv = topology.uv.size() == topology.faces.size();
    for (int f = 0; f < topology.face_count(); ++f) {
        const Face& face = topology.faces[static_cast<std::size_t>(f)];
        std::array<Projected, 3> p;
        bool behind = false;
        for (int k = 0; k < 3; ++k) {
            p[k] = project(camera, vertices[static_cast<std::size_t>(face[k])]);
            behind = behind || !(p[k].z > near_plane);
        }
        if (behind) continue;
        const double area = edge(p[0], p[1], p[2].x, p[2].y);
        if (!(std::abs(area) > 1e-12)) continue;

        const double min_x = std::min({p[0].x, p[1].x, p[2].x});
        const double max_x = std::max({p[0].x, p[1].x, p[2].x});
        const double min_y = std::min({p[0].y, p[1].y, p[2].y});
        const double max_y = std::max({p[0].y, p[1].y, p[2].y});
        const int x0 = std::max(0, static_cast<int>(std::floor(min_x - 0.5)));
        const int x1 = std::min(resolution.width - 1, static_cast<int>(std::ceil(max_x - 0.5)));
        const int y0 = std::max(0, static_cast<int>(std::floor(min_y - 0.5)));
        const int y1 = std::min(resolution.height - 1, static_cast<int>(std::ceil(max_y - 0.5)));

        for (int y = y0; y <= y1; ++y) {
            const double py = y + 0.5;
            for (int x = x0; x <= x1; ++x) {
                const double px = x + 0.5;
                // screen-space barycentrics; the sign of `area` makes both windings inside
                const double l0 = edge(p[1], p[2], px, py) / area;
                const double l1 = edge(p[2], p[0], px, py) / area;
                const double l2 = edge(p[0], p[1], px, py) / area;
                if (l0 < 0.0 || l1 < 0.0 || l2 < 0.0) continue;

                const double w0 = l0 / p[0].z, w1 = l1 / p[1].z, w2 = l2 / p[2].z;
                const double inv_z = w0 + w1 + w2;
                const double z = 1.0 / inv_z;
                const std::size_t i = g.index(y, x);
                if (!(z < zbuf[i])) continue;
                zbuf[i] = z;

                const Eigen::Vector3d b(w0 * z, w1 * z, w2 * z);
                g.triangle_id[i] = f;
                g.bary[i] = b.cast<float>();
                g.depth[i] = static_cast<float>(z);
                g.mask[i] = 1;
                g.world_pos[i] = surface_point(g.bary[i], face, vertices);
                if (has_uv) {
                    Eigen::Vector2d tc = Eigen::Vector2d::Zero();
                    for (int k = 0; k < 3; ++k) tc += b[k] * topology.uv[static_cast<std::size_t>(f)][k].cast<double>();
                    g.uv[i] = tc.cwiseMax(0.0).cwiseMin(1.0).cast<float>();
                }
            }
        }
    }
    return g;
}

std::vector<Vec3> world_positions_at(const GBuffer& gbuffer, const TriMesh& topology,
                                     std::span<const Vec3> other_vertices) {
    if (static_cast<int>(other_vertices.size()) != gbuffer.vertex_count) {
        throw SchemaMismatch("world_positions_at: expected " + std::to_string(gbuffer.vertex_count) +
                             " vertices, got " + std::to_string(other_vertices.size()));
    }
    std::vector<Vec3> out(gbuffer.pixel_count(), Vec3::Zero());
    for (std::size_t i = 0; i < out.size(); ++i) {
        const int f = gbuffer.triangle_id[i];
        if (f < 0) continue;
        out[i] = surface_point(gbuffer.bary[i], topology.faces[static_cast<std::size_t>(f)], other_vertices);
    }
    return out;
}

}  // namespace dng
