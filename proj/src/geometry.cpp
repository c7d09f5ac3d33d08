#include "graspforge/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <string>

#include <Eigen/Geometry>
#include <nlohmann/json.hpp>

#include "graspforge/errors.hpp"

namespace graspforge {

void CameraIntrinsics::validate() const
{
  if (width <= 0 || height <= 0)
    throw InvalidArgument("camera intrinsics: width and height must be > 0");
  if (!(fx > 0.0) || !(fy > 0.0))
    throw InvalidArgument("camera intrinsics: focal lengths must be > 0");
  if (!(z_near > 0.0) || !(z_far > z_near))
    throw InvalidArgument("camera intrinsics: need 0 < z_near < z_far");
  if (!(cx >= 0.0 && cx < width) || !(cy >= 0.0 && cy < height))
    throw InvalidArgument(
        "camera intrinsics: principal point outside the image");
}

void CameraPose::validate() const
{
  const Mat3 gram = rotation.transpose() * rotation - Mat3::Identity();
  if (!rotation.allFinite() || !translation.allFinite())
    throw InvalidArgument("camera pose: non-finite entries");
  if (gram.cwiseAbs().maxCoeff() >= 1e-9)
    throw InvalidArgument("camera pose: rotation is not orthonormal");
  if (std::abs(rotation.determinant() - 1.0) > 1e-9)
    throw InvalidArgument("camera pose: rotation is not proper (det != 1)");
}

double elevation_of(const CameraPose& pose)
{
  const Vec3 axis = pose.optical_axis();
  const double elev = std::atan2(-axis.z(), std::hypot(axis.x(), axis.y()));
  return std::clamp(elev, 0.0, kPi / 2.0);
}

CameraView::CameraView(const CameraIntrinsics& intrinsics,
                       const CameraPose& pose)
    : intrinsics_(intrinsics), pose_(pose), elevation_(elevation_of(pose))
{
  intrinsics_.validate();
  pose_.validate();
}

CameraPose look_at(const Vec3& eye, const Vec3& target, const Vec3& up)
{
  const Vec3 forward = target - eye;
  if (forward.norm() <= 1e-9)
    throw DegenerateFrame("look_at: eye and target coincide");
  const Vec3 z = forward.normalized();
  const Vec3 right = z.cross(up);
  if (right.norm() <= 1e-9 * std::max(1.0, up.norm()))
    throw DegenerateFrame("look_at: up vector is parallel to the view direction");
  const Vec3 x = right.normalized();
  const Vec3 y = z.cross(x);

  CameraPose pose;
  pose.rotation.row(0) = x.transpose();
  pose.rotation.row(1) = y.transpose();
  pose.rotation.row(2) = z.transpose();
  pose.translation = -(pose.rotation * eye);
  return pose;
}

namespace {

CameraView view_on_sphere(double azimuth, double elevation, double radius,
                          const Vec3& center,
                          const CameraIntrinsics& intrinsics)
{
  const double ce = std::cos(elevation);
  const Vec3 dir(ce * std::cos(azimuth), ce * std::sin(azimuth),
                 std::sin(elevation));
  const Vec3 eye = center + radius * dir;
  // Near the zenith the table normal no longer defines "up" in the image.
  const Vec3 up = ce < 1e-6 ? Vec3(0, 1, 0) : Vec3(0, 0, 1);
  return CameraView(intrinsics, look_at(eye, center, up));
}

}  // namespace

CameraView topdown_camera(double radius, const Vec3& center,
                          const CameraIntrinsics& intrinsics)
{
  if (!(radius > 0.0))
    throw InvalidArgument("camera radius must be > 0");
  const Vec3 eye = center + Vec3(0, 0, radius);
  return CameraView(intrinsics, look_at(eye, center, Vec3(0, 1, 0)));
}

std::vector<CameraView>
sample_hemisphere_cameras(std::size_t n, double radius, const Vec3& center,
                          std::uint64_t seed, bool include_topdown,
                          const HemisphereSampling& sampling)
{
  if (n == 0)
    throw InvalidCount("sample_hemisphere_cameras: n must be >= 1");
  if (!(radius > 0.0))
    throw InvalidArgument("sample_hemisphere_cameras: radius must be > 0");
  if (!(sampling.min_elevation >= 0.0 && sampling.min_elevation <= kPi / 2))
    throw InvalidArgument("sample_hemisphere_cameras: min_elevation outside [0, pi/2]");

  std::vector<CameraView> views;
  views.reserve(n);
  if (include_topdown)
    views.push_back(topdown_camera(radius, center, sampling.intrinsics));

  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> azimuth(0.0, 2.0 * kPi);
  std::uniform_real_distribution<double> elevation(sampling.min_elevation,
                                                   kPi / 2.0);
  while (views.size() < n) {
    const double az = azimuth(rng);
    const double el = elevation(rng);
    views.push_back(view_on_sphere(az, el, radius, center, sampling.intrinsics));
  }
  return views;
}

std::vector<CameraView> ring_cameras(std::size_t n, double radius,
                                     const Vec3& center, double elevation,
                                     bool include_topdown,
                                     const CameraIntrinsics& intrinsics)
{
  if (n == 0)
    throw InvalidCount("ring_cameras: n must be >= 1");
  if (!(radius > 0.0))
    throw InvalidArgument("ring_cameras: radius must be > 0");

  std::vector<CameraView> views;
  views.reserve(n);
  if (include_topdown)
    views.push_back(topdown_camera(radius, center, intrinsics));
  const std::size_t ring = n - views.size();
  for (std::size_t k = 0; k < ring; ++k) {
    const double az = 2.0 * kPi * static_cast<double>(k) /
                      static_cast<double>(ring);
    views.push_back(view_on_sphere(az, elevation, radius, center, intrinsics));
  }
  return views;
}

PixelProjection project_point(const Vec3& p_world, const CameraView& view)
{
  const Vec3 pc = view.pose().to_camera(p_world);
  if (!(pc.z() > 0.0))
    throw BehindCamera("project_point: point is behind the camera");
  const auto& k = view.intrinsics();
  return {k.cx + k.fx * pc.x() / pc.z(), k.cy + k.fy * pc.y() / pc.z(), pc.z()};
}

Vec3 unproject_to_camera(double u, double v, double depth,
                         const CameraIntrinsics& k)
{
  if (!(depth > 0.0))
    throw NonPositiveDepth("unproject_pixel: depth must be > 0");
  return {(u - k.cx) * depth / k.fx, (v - k.cy) * depth / k.fy, depth};
}

Vec3 unproject_pixel(double u, double v, double depth, const CameraView& view)
{
  return view.pose().to_world(unproject_to_camera(u, v, depth, view.intrinsics()));
}

nlohmann::json camera_to_json(const CameraView& view)
{
  const auto& k = view.intrinsics();
  const auto& pose = view.pose();
  nlohmann::json rot = nlohmann::json::array();
  for (int r = 0; r < 3; ++r)
    for (int c = 0; c < 3; ++c)
      rot.push_back(pose.rotation(r, c));
  return {{"width", k.width},       {"height", k.height},
          {"fx", k.fx},             {"fy", k.fy},
          {"cx", k.cx},             {"cy", k.cy},
          {"z_near", k.z_near},     {"z_far", k.z_far},
          {"rotation", rot},
          {"translation",
           {pose.translation.x(), pose.translation.y(), pose.translation.z()}}};
}

namespace {

const nlohmann::json& require(const nlohmann::json& j, const char* field)
{
  if (!j.is_object() || !j.contains(field))
    throw ParseError(std::string("camera JSON: missing field '") + field + "'");
  return j.at(field);
}

double number(const nlohmann::json& j, const char* field)
{
  const auto& v = require(j, field);
  if (!v.is_number())
    throw ParseError(std::string("camera JSON: field '") + field +
                     "' must be a number");
  return v.get<double>();
}

int integer(const nlohmann::json& j, const char* field)
{
  const auto& v = require(j, field);
  if (!v.is_number_integer())
    throw ParseError(std::string("camera JSON: field '") + field +
                     "' must be an integer");
  return v.get<int>();
}

std::vector<double> numbers(const nlohmann::json& j, const char* field,
                            std::size_t count)
{
  const auto& v = require(j, field);
  if (!v.is_array() || v.size() != count)
    throw ParseError(std::string("camera JSON: field '") + field +
                     "' must be an array of " + std::to_string(count) +
                     " numbers");
  std::vector<double> out;
  for (const auto& e : v) {
    if (!e.is_number())
      throw ParseError(std::string("camera JSON: field '") + field +
                       "' contains a non-number");
    out.push_back(e.get<double>());
  }
  return out;
}

}  // namespace

CameraView camera_from_json(const nlohmann::json& j)
{
  CameraIntrinsics k;
  k.width = integer(j, "width");
  k.height = integer(j, "height");
  k.fx = number(j, "fx");
  k.fy = number(j, "fy");
  k.cx = number(j, "cx");
  k.cy = number(j, "cy");
  k.z_near = number(j, "z_near");
  k.z_far = number(j, "z_far");

  CameraPose pose;
  const auto rot = numbers(j, "rotation", 9);
  for (int r = 0; r < 3; ++r)
    for (int c = 0; c < 3; ++c)
      pose.rotation(r, c) = rot[static_cast<std::size_t>(3 * r + c)];
  const auto t = numbers(j, "translation", 3);
  pose.translation = Vec3(t[0], t[1], t[2]);
  return CameraView(k, pose);
}

}  // namespace graspforge
