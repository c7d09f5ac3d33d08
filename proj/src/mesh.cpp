#include "graspforge/mesh.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <istream>
#include <limits>
#include <ostream>
#include <random>
#include <sstream>

#include <Eigen/Geometry>

#include "graspforge/errors.hpp"

namespace graspforge {

void TriangleMesh::validate() const
{
  if (!vertex_colors.empty() && vertex_colors.size() != vertices.size())
    throw InvalidArgument("mesh: vertex colour count does not match vertex count");
  for (std::size_t f = 0; f < faces.size(); ++f) {
    const auto& tri = faces[f];
    for (auto idx : tri)
      if (idx >= vertices.size())
        throw InvalidArgument("mesh: face " + std::to_string(f) +
                              " references vertex " + std::to_string(idx) +
                              " out of range");
    const Vec3 e1 = vertices[tri[1]] - vertices[tri[0]];
    const Vec3 e2 = vertices[tri[2]] - vertices[tri[0]];
    if (0.5 * e1.cross(e2).norm() <= 1e-12)
      throw InvalidArgument("mesh: face " + std::to_string(f) + " is degenerate");
  }
}

Vec3 TriangleMesh::bbox_min() const
{
  Vec3 lo = Vec3::Constant(std::numeric_limits<double>::infinity());
  for (const auto& v : vertices)
    lo = lo.cwiseMin(v);
  return lo;
}

Vec3 TriangleMesh::bbox_max() const
{
  Vec3 hi = Vec3::Constant(-std::numeric_limits<double>::infinity());
  for (const auto& v : vertices)
    hi = hi.cwiseMax(v);
  return hi;
}

namespace {

std::uint32_t parse_face_index(const std::string& token, std::size_t vertex_count,
                               const std::string& where)
{
  const std::string head = token.substr(0, token.find('/'));
  long idx = 0;
  try {
    std::size_t used = 0;
    idx = std::stol(head, &used);
    if (used != head.size())
      throw std::invalid_argument(head);
  } catch (const std::exception&) {
    throw ParseError(where + ": bad face index '" + token + "'");
  }
  // Negative indices are relative to the end of the vertex list.
  if (idx < 0)
    idx = static_cast<long>(vertex_count) + idx + 1;
  if (idx < 1 || static_cast<std::size_t>(idx) > vertex_count)
    throw ParseError(where + ": face index " + head + " out of range");
  return static_cast<std::uint32_t>(idx - 1);
}

}  // namespace

TriangleMesh read_obj(std::istream& in, const std::string& source)
{
  TriangleMesh mesh;
  std::vector<bool> colored;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::string where = source + ":" + std::to_string(lineno);
    std::istringstream ls(line);
    std::string tag;
    if (!(ls >> tag) || tag[0] == '#')
      continue;
    if (tag == "v") {
      std::vector<double> vals;
      double x;
      while (ls >> x)
        vals.push_back(x);
      if (!ls.eof())
        throw ParseError(where + ": malformed vertex line");
      if (vals.size() != 3 && vals.size() != 6)
        throw ParseError(where + ": vertex needs 3 coordinates (+3 optional colour values)");
      mesh.vertices.emplace_back(vals[0], vals[1], vals[2]);
      colored.push_back(vals.size() == 6);
      mesh.vertex_colors.emplace_back(vals.size() == 6
                                          ? Vec3(vals[3], vals[4], vals[5])
                                          : Vec3::Zero());
    } else if (tag == "f") {
      std::vector<std::string> tokens;
      std::string tok;
      while (ls >> tok)
        tokens.push_back(tok);
      if (tokens.size() != 3)
        throw ParseError(where + ": only triangular faces are supported (got " +
                         std::to_string(tokens.size()) + " vertices)");
      std::array<std::uint32_t, 3> tri{};
      for (int k = 0; k < 3; ++k)
        tri[static_cast<std::size_t>(k)] =
            parse_face_index(tokens[static_cast<std::size_t>(k)],
                             mesh.vertices.size(), where);
      mesh.faces.push_back(tri);
    }
    // vn, vt, o, g, s, usemtl, mtllib: not needed for rendering.
  }

  const bool all_colored =
      !colored.empty() && std::all_of(colored.begin(), colored.end(),
                                      [](bool c) { return c; });
  if (!all_colored)
    mesh.vertex_colors.clear();
  for (const auto& c : mesh.vertex_colors)
    if ((c.array() < 0.0).any() || (c.array() > 1.0).any())
      throw ParseError(source + ": vertex colours must lie in [0, 1]");
  try {
    mesh.validate();
  } catch (const InvalidArgument& e) {
    throw ParseError(source + ": " + e.what());
  }
  return mesh;
}

TriangleMesh read_obj(const std::filesystem::path& path)
{
  std::ifstream in(path);
  if (!in)
    throw IoError("cannot open mesh file " + path.string());
  return read_obj(in, path.string());
}

void write_obj(std::ostream& out, const TriangleMesh& mesh)
{
  out.precision(17);
  for (std::size_t i = 0; i < mesh.vertices.size(); ++i) {
    const auto& v = mesh.vertices[i];
    out << "v " << v.x() << ' ' << v.y() << ' ' << v.z();
    if (mesh.has_colors()) {
      const auto& c = mesh.vertex_colors[i];
      out << ' ' << c.x() << ' ' << c.y() << ' ' << c.z();
    }
    out << '\n';
  }
  for (const auto& f : mesh.faces)
    out << "f " << f[0] + 1 << ' ' << f[1] + 1 << ' ' << f[2] + 1 << '\n';
}

void write_obj(const std::filesystem::path& path, const TriangleMesh& mesh)
{
  std::ofstream out(path);
  if (!out)
    throw IoError("cannot write mesh file " + path.string());
  write_obj(out, mesh);
  if (!out)
    throw IoError("failed while writing " + path.string());
}

TriangleMesh colorize_mesh(const TriangleMesh& mesh, std::uint64_t seed)
{
  TriangleMesh out = mesh;
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> channel(0.1, 1.0);
  out.vertex_colors.resize(mesh.vertices.size());
  for (auto& c : out.vertex_colors) {
    const double r = channel(rng);
    const double g = channel(rng);
    const double b = channel(rng);
    c = Vec3(r, g, b);
  }
  return out;
}

TriangleMesh recentered(const TriangleMesh& mesh, const Vec3& center)
{
  if (mesh.vertices.empty())
    return mesh;
  const Vec3 shift = center - 0.5 * (mesh.bbox_min() + mesh.bbox_max());
  TriangleMesh out = mesh;
  for (auto& v : out.vertices)
    v += shift;
  return out;
}

TriangleMesh make_uv_sphere(double radius, const Vec3& center, int stacks,
                            int slices)
{
  if (!(radius > 0.0) || stacks < 2 || slices < 3)
    throw InvalidArgument("make_uv_sphere: need radius > 0, stacks >= 2, slices >= 3");
  TriangleMesh mesh;
  const auto S = static_cast<std::uint32_t>(slices);
  mesh.vertices.push_back(center + Vec3(0, 0, radius));
  for (int i = 1; i < stacks; ++i) {
    const double polar = kPi * i / stacks;
    for (int j = 0; j < slices; ++j) {
      const double az = 2.0 * kPi * j / slices;
      mesh.vertices.push_back(center + radius * Vec3(std::sin(polar) * std::cos(az),
                                                     std::sin(polar) * std::sin(az),
                                                     std::cos(polar)));
    }
  }
  const auto south = static_cast<std::uint32_t>(mesh.vertices.size());
  mesh.vertices.push_back(center - Vec3(0, 0, radius));

  auto ring = [S](int i, std::uint32_t j) {
    return 1u + static_cast<std::uint32_t>(i - 1) * S + (j % S);
  };
  for (std::uint32_t j = 0; j < S; ++j)
    mesh.faces.push_back({0u, ring(1, j), ring(1, j + 1)});
  for (int i = 1; i + 1 < stacks; ++i) {
    for (std::uint32_t j = 0; j < S; ++j) {
      const auto a = ring(i, j), b = ring(i, j + 1);
      const auto c = ring(i + 1, j), d = ring(i + 1, j + 1);
      mesh.faces.push_back({a, c, d});
      mesh.faces.push_back({a, d, b});
    }
  }
  for (std::uint32_t j = 0; j < S; ++j)
    mesh.faces.push_back({ring(stacks - 1, j), south, ring(stacks - 1, j + 1)});
  return mesh;
}

TriangleMesh make_box(const Vec3& size, const Vec3& center)
{
  if ((size.array() <= 0.0).any())
    throw InvalidArgument("make_box: all extents must be > 0");
  TriangleMesh mesh;
  const Vec3 h = 0.5 * size;
  for (int k = 0; k < 8; ++k)
    mesh.vertices.push_back(center + Vec3((k & 1) ? h.x() : -h.x(),
                                          (k & 2) ? h.y() : -h.y(),
                                          (k & 4) ? h.z() : -h.z()));
  // Outward winding per face, two triangles each.
  const std::uint32_t quads[6][4] = {
      {0, 2, 3, 1},  // -z
      {4, 5, 7, 6},  // +z
      {0, 1, 5, 4},  // -y
      {2, 6, 7, 3},  // +y
      {0, 4, 6, 2},  // -x
      {1, 3, 7, 5},  // +x
  };
  for (const auto& q : quads) {
    mesh.faces.push_back({q[0], q[1], q[2]});
    mesh.faces.push_back({q[0], q[2], q[3]});
  }
  return mesh;
}

TriangleMesh make_cylinder(double radius, double height, const Vec3& center,
                           int slices)
{
  if (!(radius > 0.0) || !(height > 0.0) || slices < 3)
    throw InvalidArgument("make_cylinder: need radius > 0, height > 0, slices >= 3");
  TriangleMesh mesh;
  const auto S = static_cast<std::uint32_t>(slices);
  const double hz = 0.5 * height;
  for (int ring = 0; ring < 2; ++ring) {
    const double z = ring == 0 ? -hz : hz;
    for (int j = 0; j < slices; ++j) {
      const double az = 2.0 * kPi * j / slices;
      mesh.vertices.push_back(center +
                              Vec3(radius * std::cos(az), radius * std::sin(az), z));
    }
  }
  const auto bottom = static_cast<std::uint32_t>(mesh.vertices.size());
  mesh.vertices.push_back(center - Vec3(0, 0, hz));
  const auto top = bottom + 1;
  mesh.vertices.push_back(center + Vec3(0, 0, hz));

  for (std::uint32_t j = 0; j < S; ++j) {
    const std::uint32_t a = j, b = (j + 1) % S;
    mesh.faces.push_back({a, b, S + b});
    mesh.faces.push_back({a, S + b, S + a});
    mesh.faces.push_back({bottom, b, a});
    mesh.faces.push_back({top, S + a, S + b});
  }
  return mesh;
}

std::vector<std::string> builtin_fixture_names()
{
  return {"thin-box", "cube", "sphere", "small-sphere", "ball", "cylinder"};
}

std::optional<TriangleMesh> builtin_fixture(const std::string& name)
{
  if (name == "thin-box")
    return make_box(Vec3(0.10, 0.10, 0.03));
  if (name == "cube")
    return make_box(Vec3(0.04, 0.04, 0.04));
  if (name == "sphere")
    return make_uv_sphere(0.02);
  if (name == "small-sphere")
    return make_uv_sphere(0.01);
  if (name == "ball")
    return make_uv_sphere(0.05);
  if (name == "cylinder")
    return make_cylinder(0.02, 0.08);
  return std::nullopt;
}

namespace {

// Closest point on triangle abc to p (Ericson, Real-Time Collision Detection).
Vec3 closest_point_on_triangle(const Vec3& p, const Vec3& a, const Vec3& b,
                               const Vec3& c)
{
  const Vec3 ab = b - a, ac = c - a, ap = p - a;
  const double d1 = ab.dot(ap), d2 = ac.dot(ap);
  if (d1 <= 0.0 && d2 <= 0.0)
    return a;
  const Vec3 bp = p - b;
  const double d3 = ab.dot(bp), d4 = ac.dot(bp);
  if (d3 >= 0.0 && d4 <= d3)
    return b;
  const double vc = d1 * d4 - d3 * d2;
  if (vc <= 0.0 && d1 >= 0.0 && d3 <= 0.0)
    return a + (d1 / (d1 - d3)) * ab;
  const Vec3 cp = p - c;
  const double d5 = ab.dot(cp), d6 = ac.dot(cp);
  if (d6 >= 0.0 && d5 <= d6)
    return c;
  const double vb = d5 * d2 - d1 * d6;
  if (vb <= 0.0 && d2 >= 0.0 && d6 <= 0.0)
    return a + (d2 / (d2 - d6)) * ac;
  const double va = d3 * d6 - d5 * d4;
  if (va <= 0.0 && (d4 - d3) >= 0.0 && (d5 - d6) >= 0.0)
    return b + ((d4 - d3) / ((d4 - d3) + (d5 - d6))) * (c - b);
  const double denom = 1.0 / (va + vb + vc);
  return a + ab * (vb * denom) + ac * (vc * denom);
}

}  // namespace

double point_mesh_distance(const Vec3& p, const TriangleMesh& mesh)
{
  double best = std::numeric_limits<double>::infinity();
  for (const auto& f : mesh.faces) {
    const Vec3 q = closest_point_on_triangle(p, mesh.vertices[f[0]],
                                             mesh.vertices[f[1]],
                                             mesh.vertices[f[2]]);
    best = std::min(best, (p - q).norm());
  }
  return best;
}

}  // namespace graspforge
