#pragma once

// Deferred G-buffer rasterization: per pixel the nearest triangle, its perspective-correct
// barycentrics, interpolated uv, world position and camera depth.

#include <span>
#include <vector>

#include "dng/domain.hpp"

namespace dng {

struct Resolution {
    int width = 128;
    int height = 128;

    bool operator==(const Resolution&) const = default;
    std::size_t pixel_count() const { return static_cast<std::size_t>(width) * height; }
};

struct GBuffer {
    int width = 0;
    int height = 0;
    int vertex_count = 0;                 // V of the rasterized mesh
    std::vector<int> triangle_id;         // H*W, -1 where empty
    std::vector<Eigen::Vector3f> bary;    // H*W
    std::vector<Vec2> uv;                 // H*W
    std::vector<Vec3> world_pos;          // H*W
    std::vector<float> depth;             // H*W, camera-space z
    std::vector<std::uint8_t> mask;       // H*W, 0 or 1

    std::size_t pixel_count() const { return triangle_id.size(); }
    std::size_t index(int y, int x) const { return static_cast<std::size_t>(y) * width + x; }
    std::size_t covered_count() const;
};

/// Rasterizes `vertices` with the faces/uv of `topology`. Back faces are kept. Triangles
/// with any vertex at or behind the near plane, or with projected area below 1e-12 px^2,
/// are skipped.
GBuffer rasterize(std::span<const Vec3> vertices, const TriMesh& topology, const Camera& camera,
                  Resolution resolution, float near_plane = 1e-3f);

inline GBuffer rasterize(const TriMesh& mesh, const Camera& camera, Resolution resolution) {
    return rasterize(mesh.vertices, mesh, camera, resolution);
}

/// Re-evaluates each covered pixel's surface point on another frame's vertices using the
/// stored (triangle_id, bary). Throws SchemaMismatch when the vertex count differs.
std::vector<Vec3> world_positions_at(const GBuffer& gbuffer, const TriMesh& topology,
                                     std::span<const Vec3> other_vertices);

}  // namespace dng
