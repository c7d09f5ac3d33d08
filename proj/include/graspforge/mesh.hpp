#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "graspforge/geometry.hpp"

namespace graspforge {

struct TriangleMesh
{
  std::vector<Vec3> vertices;
  std::vector<std::array<std::uint32_t, 3>> faces;
  // Empty, or one RGB triple in [0,1] per vertex.
  std::vector<Vec3> vertex_colors;

  bool has_colors() const
  {
    return !vertex_colors.empty() && vertex_colors.size() == vertices.size();
  }

  // Index bounds, non-degenerate faces (area > 1e-12 m^2), colour count.
  void validate() const;

  Vec3 bbox_min() const;
  Vec3 bbox_max() const;
};

// Wavefront OBJ subset: `v x y z [r g b]` and triangular `f i j k`
// (1-based, `i/t/n` forms accepted). Polygons with more than three vertices
// are rejected.
TriangleMesh read_obj(std::istream& in, const std::string& source = "<stream>");
TriangleMesh read_obj(const std::filesystem::path& path);
void write_obj(std::ostream& out, const TriangleMesh& mesh);
void write_obj(const std::filesystem::path& path, const TriangleMesh& mesh);

// Deterministic per seed; colours drawn in [0.1, 1]^3 so that shaded pixels
// stay distinguishable from a black background.
TriangleMesh colorize_mesh(const TriangleMesh& mesh, std::uint64_t seed);

// Shift so that the bounding-box centre sits at `center`.
TriangleMesh recentered(const TriangleMesh& mesh, const Vec3& center = Vec3::Zero());

// Closed primitives with outward-facing triangles.
TriangleMesh make_uv_sphere(double radius, const Vec3& center = Vec3::Zero(),
                            int stacks = 24, int slices = 48);
TriangleMesh make_box(const Vec3& size, const Vec3& center = Vec3::Zero());
TriangleMesh make_cylinder(double radius, double height,
                           const Vec3& center = Vec3::Zero(), int slices = 48);

// Named test objects: "thin-box" (0.10 x 0.10 x 0.03 m), "cube", "sphere",
// "small-sphere", "cylinder". Returns nullopt for unknown names.
std::optional<TriangleMesh> builtin_fixture(const std::string& name);
std::vector<std::string> builtin_fixture_names();

// Exact Euclidean distance from p to the closest point of the mesh surface.
double point_mesh_distance(const Vec3& p, const TriangleMesh& mesh);

}  // namespace graspforge
