#pragma once

#include <cstdint>
#include <vector>

#include <Eigen/Core>

#include <nlohmann/json_fwd.hpp>

namespace graspforge {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;

inline constexpr double kPi = 3.14159265358979323846;

struct CameraIntrinsics
{
  int width = 128;
  int height = 128;
  double fx = 160.0;
  double fy = 160.0;
  double cx = 63.5;
  double cy = 63.5;
  double z_near = 0.25;
  double z_far = 1.5;

  // Throws InvalidArgument when any invariant is violated.
  void validate() const;

  friend bool operator==(const CameraIntrinsics&,
                         const CameraIntrinsics&) = default;
};

// World-to-camera rigid transform: x_cam = rotation * x_world + translation.
// The camera frame is +z forward (optical axis), +x right, +y down.
struct CameraPose
{
  Mat3 rotation = Mat3::Identity();
  Vec3 translation = Vec3::Zero();

  Vec3 to_camera(const Vec3& p_world) const
  {
    return rotation * p_world + translation;
  }
  Vec3 to_world(const Vec3& p_cam) const
  {
    return rotation.transpose() * (p_cam - translation);
  }
  Vec3 camera_center() const { return -(rotation.transpose() * translation); }
  Vec3 optical_axis() const { return rotation.row(2).transpose(); }

  void validate() const;

  friend bool operator==(const CameraPose& a, const CameraPose& b)
  {
    return a.rotation == b.rotation && a.translation == b.translation;
  }
};

// One synthetic camera. Elevation is the angle between the optical axis and
// the table plane z = 0, cached at construction; pi/2 means top-down.
class CameraView
{
public:
  CameraView(const CameraIntrinsics& intrinsics, const CameraPose& pose);

  const CameraIntrinsics& intrinsics() const { return intrinsics_; }
  const CameraPose& pose() const { return pose_; }
  double elevation() const { return elevation_; }

  friend bool operator==(const CameraView& a, const CameraView& b)
  {
    return a.intrinsics_ == b.intrinsics_ && a.pose_ == b.pose_;
  }

private:
  CameraIntrinsics intrinsics_;
  CameraPose pose_;
  double elevation_;
};

struct PixelProjection
{
  double u;
  double v;
  double depth;  // optical-axis distance z_c
};

CameraPose look_at(const Vec3& eye, const Vec3& target, const Vec3& up);

// Angle of the optical axis below the horizon, clamped to [0, pi/2].
double elevation_of(const CameraPose& pose);

struct HemisphereSampling
{
  double min_elevation = 15.0 * kPi / 180.0;
  CameraIntrinsics intrinsics{};
};

std::vector<CameraView>
sample_hemisphere_cameras(std::size_t n, double radius, const Vec3& center,
                          std::uint64_t seed, bool include_topdown,
                          const HemisphereSampling& sampling = {});

// Cameras on a horizontal ring around `center` at fixed elevation, evenly
// spaced in azimuth starting at +x. With include_topdown the first view is the
// top-down camera and the remaining n-1 views form the ring.
std::vector<CameraView> ring_cameras(std::size_t n, double radius,
                                     const Vec3& center, double elevation,
                                     bool include_topdown,
                                     const CameraIntrinsics& intrinsics = {});

CameraView topdown_camera(double radius, const Vec3& center,
                          const CameraIntrinsics& intrinsics = {});

PixelProjection project_point(const Vec3& p_world, const CameraView& view);

Vec3 unproject_pixel(double u, double v, double depth, const CameraView& view);

// Same as unproject_pixel but stays in the camera frame.
Vec3 unproject_to_camera(double u, double v, double depth,
                         const CameraIntrinsics& intrinsics);

nlohmann::json camera_to_json(const CameraView& view);
CameraView camera_from_json(const nlohmann::json& j);

}  // namespace graspforge
