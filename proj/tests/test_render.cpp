#include <doctest.h>

#include <cmath>
#include <random>

#include "graspforge/errors.hpp"
#include "graspforge/mesh.hpp"
#include "graspforge/render.hpp"

using namespace graspforge;

namespace {

// Slab-method ray/box oracle; returns the camera depth of the entry point.
std::optional<double> box_depth_oracle(const Vec3& half, const CameraView& view, int u, int v)
{
  const auto& k = view.intrinsics();
  const Vec3 dir_cam((u - k.cx) / k.fx, (v - k.cy) / k.fy, 1.0);
  const Vec3 o = view.pose().camera_center();
  const Vec3 d = view.pose().rotation.transpose() * dir_cam;
  double t0 = 0.0, t1 = 1e300;
  for (int a = 0; a < 3; ++a) {
    if (std::abs(d[a]) < 1e-15) {
      if (std::abs(o[a]) > half[a])
        return std::nullopt;
      continue;
    }
    double lo = (-half[a] - o[a]) / d[a], hi = (half[a] - o[a]) / d[a];
    if (lo > hi)
      std::swap(lo, hi);
    t0 = std::max(t0, lo);
    t1 = std::min(t1, hi);
  }
  if (t0 > t1)
    return std::nullopt;
  return t0;  // dir_cam.z == 1, so the ray parameter is the depth
}

CameraView view_from(const Vec3& eye, const CameraIntrinsics& k = {})
{
  return CameraView(k, look_at(eye, Vec3::Zero(), Vec3::UnitZ()));
}

}  // namespace

TEST_CASE("box depth matches the slab oracle")
{
  const Vec3 size(0.10, 0.06, 0.04);
  const auto mesh = make_box(size);
  const CameraView view = view_from(Vec3(0.25, -0.35, 0.3));
  const auto depth = render_depth(mesh, view);
  int hits = 0;
  for (int v = 0; v < depth.height(); ++v)
    for (int u = 0; u < depth.width(); ++u) {
      const auto expect = box_depth_oracle(size / 2, view, u, v);
      const double got = depth.at(u, v);
      CHECK(expect.has_value() == (got > 0.0));
      if (expect && got > 0.0) {
        CHECK(got == doctest::Approx(*expect).epsilon(1e-9));
        ++hits;
      }
    }
  CHECK(hits > 300);
}

TEST_CASE("sphere depth is bracketed by the analytic sphere")
{
  const double r = 0.02;
  const auto mesh = make_uv_sphere(r);
  const CameraView view = view_from(Vec3(0.3, 0.2, 0.4));
  const auto depth = render_depth(mesh, view);
  const auto& k = view.intrinsics();
  const Vec3 c = view.pose().to_camera(Vec3::Zero());
  // Facets lie between the circumscribed sphere and a slightly smaller one.
  const double r_in = r * std::cos(kPi / 24.0);
  for (int v = 0; v < depth.height(); ++v)
    for (int u = 0; u < depth.width(); ++u) {
      if (depth.at(u, v) <= 0.0)
        continue;
      const Vec3 d((u - k.cx) / k.fx, (v - k.cy) / k.fy, 1.0);
      // |t d - c|^2 = r^2
      const double a = d.squaredNorm(), b = -2 * d.dot(c), cc = c.squaredNorm() - r * r;
      const double disc = b * b - 4 * a * cc;
      REQUIRE(disc >= 0.0);
      const double t_outer = (-b - std::sqrt(disc)) / (2 * a);
      CHECK(depth.at(u, v) >= t_outer - 1e-12);
      const double p = (depth.at(u, v) * d - c).norm();
      CHECK(p >= r_in - 1e-12);
      CHECK(p <= r + 1e-12);
    }
}

TEST_CASE("centre pixel of the sphere from above")
{
  CameraIntrinsics k;
  k.width = k.height = 129;
  k.cx = k.cy = 64.0;
  const CameraView view(k, look_at(Vec3(0, 0, 0.57), Vec3::Zero(), Vec3::UnitY()));
  const auto depth = render_depth(make_uv_sphere(0.02), view);
  CHECK(std::abs(depth.at(64, 64) - 0.55) < 1e-6);
}

TEST_CASE("rendered points lie on the mesh")
{
  const auto mesh = make_cylinder(0.02, 0.08);
  const CameraView view = view_from(Vec3(-0.3, 0.3, 0.3));
  const auto depth = render_depth(mesh, view);
  for (int v = 0; v < depth.height(); v += 3)
    for (int u = 0; u < depth.width(); u += 3)
      if (depth.at(u, v) > 0.0)
        CHECK(point_mesh_distance(unproject_pixel(u, v, depth.at(u, v), view), mesh) < 1e-9);
}

TEST_CASE("render errors and clipping")
{
  CHECK_THROWS_AS(render_depth(TriangleMesh{}, view_from(Vec3(0, 0.5, 0.5))), EmptyMesh);
  // Surface closer than z_near.
  CHECK_THROWS_AS(render_depth(make_box(Vec3(0.1, 0.1, 0.1)), view_from(Vec3(0, 0.2, 0.2))),
                  NearClipViolation);
  // Everything beyond z_far stays invalid.
  CameraIntrinsics k;
  k.z_far = 0.5;
  const auto far = render_depth(make_uv_sphere(0.02), view_from(Vec3(0, 0.5, 0.5), k));
  for (double d : far.pixels())
    CHECK(d == 0.0);
  CHECK_THROWS_AS(render_rgb(make_uv_sphere(0.02), view_from(Vec3(0, 0.5, 0.5)), Vec3::UnitZ()),
                  MissingColors);
}

TEST_CASE("RGB silhouette equals the depth mask")
{
  const auto mesh = colorize_mesh(make_cylinder(0.02, 0.08), 4);
  for (const CameraView& view : {view_from(Vec3(0.3, 0.1, 0.4)), topdown_camera(0.6, Vec3::Zero()),
                                 view_from(Vec3(-0.5, 0.2, 0.1))}) {
    const auto depth = render_depth(mesh, view);
    const Rgb8 bg{0, 0, 0};
    const auto rgb = render_rgb(mesh, view, headlight(view), bg);
    CHECK(extract_silhouette(rgb, bg) == extract_silhouette(depth));
  }
}

TEST_CASE("rendering is deterministic")
{
  const auto mesh = colorize_mesh(make_uv_sphere(0.03), 1);
  const CameraView view = view_from(Vec3(0.2, 0.3, 0.4));
  CHECK(render_depth(mesh, view) == render_depth(mesh, view));
  CHECK(render_rgb(mesh, view, headlight(view)) == render_rgb(mesh, view, headlight(view)));
}

TEST_CASE("quantization round trip within half a step")
{
  const double zn = 0.25, zf = 1.5;
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> u(zn, zf);
  DepthImage depth(40, 30, 0.0);
  for (std::size_t i = 0; i < depth.size(); ++i)
    depth.pixels()[i] = i % 7 == 0 ? 0.0 : u(rng);
  depth.pixels()[1] = zn;
  depth.pixels()[2] = zf;
  for (int bits : {8, 16}) {
    const auto q = quantize_depth(depth, zn, zf, bits);
    const auto back = dequantize_depth(q);
    const double half = 0.5 * (zf - zn) / ((1 << bits) - 1);
    for (std::size_t i = 0; i < depth.size(); ++i) {
      const double d = depth.pixels()[i];
      if (d == 0.0) {
        CHECK(q.codes[i] == q.max_code());
        CHECK(q.valid[i] == 0);
        CHECK(back.pixels()[i] == 0.0);
      } else {
        CHECK(std::abs(back.pixels()[i] - d) <= half * (1 + 1e-9));
      }
    }
    CHECK(back.pixels()[1] == zn);
    CHECK(back.pixels()[2] == zf);
  }
}

TEST_CASE("quantization errors")
{
  DepthImage depth(2, 1, 0.3);
  CHECK_THROWS_AS(quantize_depth(depth, 0.25, 1.5, 12), InvalidArgument);
  depth.at(1, 0) = 2.0;
  CHECK_THROWS_AS(quantize_depth(depth, 0.25, 1.5), DepthOutOfRange);
  auto q = quantize_depth(DepthImage(2, 1, 0.3), 0.25, 1.5, 8);
  q.codes[0] = 300;
  CHECK_THROWS_AS(dequantize_depth(q), DepthOutOfRange);
}

TEST_CASE("predicted channels")
{
  RgbImage img(2, 2, Rgb8{10, 10, 10});
  Mask valid(2, 2, 1);
  valid.at(1, 1) = 0;
  const auto q = slice_predicted_channels(img, 0.25, 1.5, &valid);
  CHECK(q.bit_depth == 8);
  CHECK(q.codes[0] == 10);
  CHECK(q.valid[3] == 0);
  img.at(0, 1) = Rgb8{10, 11, 10};
  CHECK_THROWS_WITH_AS(slice_predicted_channels(img, 0.25, 1.5), doctest::Contains("(0, 1)"),
                       ChannelMismatch);
}
