#include "graspforge/render.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <Eigen/Geometry>

#include "graspforge/errors.hpp"

namespace graspforge {

namespace {

struct Hit
{
  double t = std::numeric_limits<double>::infinity();  // = camera-frame z
  std::uint32_t face = 0;
  double bu = 0.0;
  double bv = 0.0;
  bool valid() const { return std::isfinite(t); }
};

constexpr double kBaryEps = 1e-12;

// Moller-Trumbore against a ray from the camera centre with direction
// (x, y, 1); the returned parameter therefore equals the optical-axis depth.
bool intersect(const Vec3& dir, const Vec3& v0, const Vec3& e1, const Vec3& e2,
               double& t, double& bu, double& bv)
{
  const Vec3 p = dir.cross(e2);
  const double det = e1.dot(p);
  if (std::abs(det) < 1e-300)
    return false;
  const double inv = 1.0 / det;
  const Vec3 s = -v0;
  bu = s.dot(p) * inv;
  if (bu < -kBaryEps || bu > 1.0 + kBaryEps)
    return false;
  const Vec3 q = s.cross(e1);
  bv = dir.dot(q) * inv;
  if (bv < -kBaryEps || bu + bv > 1.0 + kBaryEps)
    return false;
  t = e2.dot(q) * inv;
  return t > 0.0;
}

Image<Hit> cast_rays(const TriangleMesh& mesh, const CameraView& view)
{
  if (mesh.faces.empty() || mesh.vertices.empty())
    throw EmptyMesh("render: mesh has no triangles");
  const auto& k = view.intrinsics();
  std::vector<Vec3> cam(mesh.vertices.size());
  for (std::size_t i = 0; i < cam.size(); ++i)
    cam[i] = view.pose().to_camera(mesh.vertices[i]);

  Image<Hit> hits(k.width, k.height);
  for (std::uint32_t f = 0; f < mesh.faces.size(); ++f) {
    const auto& tri = mesh.faces[f];
    const Vec3& a = cam[tri[0]];
    const Vec3& b = cam[tri[1]];
    const Vec3& c = cam[tri[2]];
    if (a.z() <= 0.0 && b.z() <= 0.0 && c.z() <= 0.0)
      continue;

    int u0 = 0, u1 = k.width - 1, v0 = 0, v1 = k.height - 1;
    if (a.z() > 0.0 && b.z() > 0.0 && c.z() > 0.0) {
      // Conservative pixel bounding box of the projected triangle.
      double umin = 1e300, umax = -1e300, vmin = 1e300, vmax = -1e300;
      for (const Vec3* p : {&a, &b, &c}) {
        const double u = k.cx + k.fx * p->x() / p->z();
        const double v = k.cy + k.fy * p->y() / p->z();
        umin = std::min(umin, u);
        umax = std::max(umax, u);
        vmin = std::min(vmin, v);
        vmax = std::max(vmax, v);
      }
      if (umax < -1.0 || vmax < -1.0 || umin > k.width || vmin > k.height)
        continue;
      u0 = std::max(u0, static_cast<int>(std::floor(umin)) - 1);
      u1 = std::min(u1, static_cast<int>(std::ceil(umax)) + 1);
      v0 = std::max(v0, static_cast<int>(std::floor(vmin)) - 1);
      v1 = std::min(v1, static_cast<int>(std::ceil(vmax)) + 1);
    }

    const Vec3 e1 = b - a;
    const Vec3 e2 = c - a;
    for (int v = v0; v <= v1; ++v) {
      for (int u = u0; u <= u1; ++u) {
        const Vec3 dir((u - k.cx) / k.fx, (v - k.cy) / k.fy, 1.0);
        double t, bu, bv;
        if (!intersect(dir, a, e1, e2, t, bu, bv))
          continue;
        Hit& h = hits.at(u, v);
        if (t < h.t)
          h = Hit{t, f, bu, bv};
      }
    }
  }

  for (const auto& h : hits.pixels())
    if (h.valid() && h.t < k.z_near)
      throw NearClipViolation("render: surface closer than z_near (" +
                              std::to_string(h.t) + " m)");
  return hits;
}

std::uint8_t to_byte(double x)
{
  return static_cast<std::uint8_t>(std::lround(std::clamp(x, 0.0, 1.0) * 255.0));
}

}  // namespace

DepthImage render_depth(const TriangleMesh& mesh, const CameraView& view)
{
  const auto hits = cast_rays(mesh, view);
  const double z_far = view.intrinsics().z_far;
  DepthImage depth(hits.width(), hits.height(), 0.0);
  for (int v = 0; v < hits.height(); ++v)
    for (int u = 0; u < hits.width(); ++u) {
      const Hit& h = hits.at(u, v);
      if (h.valid() && h.t <= z_far)
        depth.at(u, v) = h.t;
    }
  return depth;
}

Vec3 headlight(const CameraView& view) { return -view.pose().optical_axis(); }

RgbImage render_rgb(const TriangleMesh& mesh, const CameraView& view,
                    const Vec3& light_dir, Rgb8 background)
{
  if (!mesh.has_colors())
    throw MissingColors("render_rgb: mesh has no vertex colours");
  const auto hits = cast_rays(mesh, view);
  const auto& pose = view.pose();
  const auto& k = view.intrinsics();
  const Vec3 light_cam = (pose.rotation * light_dir).normalized();

  RgbImage img(hits.width(), hits.height(), background);
  for (int v = 0; v < hits.height(); ++v) {
    for (int u = 0; u < hits.width(); ++u) {
      const Hit& h = hits.at(u, v);
      if (!h.valid() || h.t > k.z_far)
        continue;
      const auto& tri = mesh.faces[h.face];
      const Vec3 a = pose.to_camera(mesh.vertices[tri[0]]);
      const Vec3 b = pose.to_camera(mesh.vertices[tri[1]]);
      const Vec3 c = pose.to_camera(mesh.vertices[tri[2]]);
      Vec3 n = (b - a).cross(c - a).normalized();
      const Vec3 dir((u - k.cx) / k.fx, (v - k.cy) / k.fy, 1.0);
      if (n.dot(dir) > 0.0)
        n = -n;
      const double shade = std::max(0.1, n.dot(light_cam));
      const Vec3 color = (1.0 - h.bu - h.bv) * mesh.vertex_colors[tri[0]] +
                         h.bu * mesh.vertex_colors[tri[1]] +
                         h.bv * mesh.vertex_colors[tri[2]];
      Rgb8 px{to_byte(color.x() * shade), to_byte(color.y() * shade),
              to_byte(color.z() * shade)};
      if (px == background)
        px.r = px.r < 255 ? static_cast<std::uint8_t>(px.r + 1)
                          : static_cast<std::uint8_t>(px.r - 1);
      img.at(u, v) = px;
    }
  }
  return img;
}

Mask extract_silhouette(const RgbImage& image, Rgb8 background)
{
  Mask mask(image.width(), image.height(), 0);
  auto src = image.pixels();
  auto dst = mask.pixels();
  for (std::size_t i = 0; i < src.size(); ++i)
    dst[i] = src[i] == background ? 0 : 1;
  return mask;
}

Mask extract_silhouette(const DepthImage& depth)
{
  Mask mask(depth.width(), depth.height(), 0);
  auto src = depth.pixels();
  auto dst = mask.pixels();
  for (std::size_t i = 0; i < src.size(); ++i)
    dst[i] = is_valid_depth(src[i]) ? 1 : 0;
  return mask;
}

namespace {

void check_range(double z_near, double z_far, int bit_depth)
{
  if (bit_depth != 8 && bit_depth != 16)
    throw InvalidArgument("depth quantization: bit_depth must be 8 or 16");
  if (!(z_near > 0.0) || !(z_far > z_near))
    throw InvalidArgument("depth quantization: need 0 < z_near < z_far");
}

}  // namespace

QuantizedDepthImage quantize_depth(const DepthImage& depth, double z_near,
                                   double z_far, int bit_depth)
{
  check_range(z_near, z_far, bit_depth);
  QuantizedDepthImage q;
  q.width = depth.width();
  q.height = depth.height();
  q.z_near = z_near;
  q.z_far = z_far;
  q.bit_depth = bit_depth;
  q.codes.assign(depth.size(), q.max_code());
  q.valid.assign(depth.size(), 0);

  const double levels = static_cast<double>(q.max_code());
  auto src = depth.pixels();
  for (std::size_t i = 0; i < src.size(); ++i) {
    const double d = src[i];
    if (!is_valid_depth(d))
      continue;
    if (d < z_near || d > z_far)
      throw DepthOutOfRange("quantize_depth: depth " + std::to_string(d) +
                            " m outside [z_near, z_far]");
    const double scaled = (d - z_near) / (z_far - z_near) * levels;
    q.codes[i] = static_cast<std::uint16_t>(std::floor(scaled + 0.5));
    q.valid[i] = 1;
  }
  return q;
}

DepthImage dequantize_depth(const QuantizedDepthImage& q)
{
  check_range(q.z_near, q.z_far, q.bit_depth);
  if (q.codes.size() != static_cast<std::size_t>(q.width) * q.height ||
      q.valid.size() != q.codes.size())
    throw DimensionMismatch("dequantize_depth: buffer sizes do not match dimensions");
  DepthImage depth(q.width, q.height, 0.0);
  const std::uint16_t top = q.max_code();
  auto dst = depth.pixels();
  for (std::size_t i = 0; i < dst.size(); ++i) {
    if (!q.valid[i])
      continue;
    const std::uint16_t c = q.codes[i];
    if (c > top)
      throw DepthOutOfRange("dequantize_depth: code exceeds bit depth");
    dst[i] = c == top ? q.z_far
                      : q.z_near + (static_cast<double>(c) / top) * (q.z_far - q.z_near);
  }
  return depth;
}

QuantizedDepthImage slice_predicted_channels(const RgbImage& image,
                                             double z_near, double z_far,
                                             const Mask* valid)
{
  check_range(z_near, z_far, 8);
  if (valid && !valid->same_shape(image))
    throw DimensionMismatch("slice_predicted_channels: mask size differs from image");
  QuantizedDepthImage q;
  q.width = image.width();
  q.height = image.height();
  q.z_near = z_near;
  q.z_far = z_far;
  q.bit_depth = 8;
  q.codes.resize(image.size());
  q.valid.resize(image.size());
  auto src = image.pixels();
  for (std::size_t i = 0; i < src.size(); ++i) {
    const Rgb8 p = src[i];
    if (p.r != p.g || p.r != p.b)
      throw ChannelMismatch("slice_predicted_channels: channels differ at pixel (" +
                            std::to_string(i % static_cast<std::size_t>(image.width())) +
                            ", " +
                            std::to_string(i / static_cast<std::size_t>(image.width())) +
                            ")");
    q.codes[i] = p.r;
    q.valid[i] = valid ? valid->pixels()[i] : 1;
  }
  return q;
}

}  // namespace graspforge
