#include "graspforge/reconstruct.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>

#include "graspforge/errors.hpp"
#include "graspforge/render.hpp"

namespace graspforge {

VoxelGrid::VoxelGrid(const Vec3& origin, double voxel_size,
                     std::array<std::uint32_t, 3> dims, float fill)
    : origin_(origin), voxel_size_(voxel_size), dims_(dims)
{
  if (!(voxel_size > 0.0) || !origin.allFinite())
    throw InvalidArgument("voxel grid: voxel_size must be > 0 and origin finite");
  if (dims[0] < 1 || dims[1] < 1 || dims[2] < 1)
    throw InvalidArgument("voxel grid: every dimension must be >= 1");
  if (!(fill >= 0.0f && fill <= 1.0f))
    throw InvalidArgument("voxel grid: occupancy must lie in [0, 1]");
  values_.assign(static_cast<std::size_t>(dims[0]) * dims[1] * dims[2], fill);
}

double VoxelGrid::voxel_diagonal() const { return std::sqrt(3.0) * voxel_size_; }

Vec3 VoxelGrid::voxel_center(std::size_t flat) const
{
  const std::size_t i = flat % dims_[0];
  const std::size_t j = (flat / dims_[0]) % dims_[1];
  const std::size_t k = flat / (static_cast<std::size_t>(dims_[0]) * dims_[1]);
  return origin_ + voxel_size_ * Vec3(static_cast<double>(i) + 0.5,
                                      static_cast<double>(j) + 0.5,
                                      static_cast<double>(k) + 0.5);
}

float VoxelGrid::occupancy_at(const Vec3& p) const
{
  const Vec3 rel = (p - origin_) / voxel_size_;
  std::array<std::uint32_t, 3> idx{};
  for (int a = 0; a < 3; ++a) {
    const double f = std::floor(rel[a]);
    if (!(f >= 0.0) || f >= static_cast<double>(dims_[static_cast<std::size_t>(a)]))
      return 0.0f;
    idx[static_cast<std::size_t>(a)] = static_cast<std::uint32_t>(f);
  }
  return values_[index(idx[0], idx[1], idx[2])];
}

std::size_t VoxelGrid::occupied_count(float threshold) const
{
  return static_cast<std::size_t>(std::count_if(
      values_.begin(), values_.end(), [threshold](float v) { return v >= threshold; }));
}

VoxelGrid init_grid(const Vec3& center, double side, std::uint32_t resolution)
{
  if (!(side > 0.0))
    throw InvalidArgument("init_grid: side must be > 0");
  if (resolution < 1)
    throw InvalidArgument("init_grid: resolution must be >= 1");
  return VoxelGrid(center - Vec3::Constant(0.5 * side), side / resolution,
                   {resolution, resolution, resolution}, 1.0f);
}

namespace {

// Pixels that the voxel can cover: those whose centres lie within the
// projected radius of its bounding sphere, padded by half a pixel, of the
// projected centre.
struct Footprint
{
  int u0, u1, v0, v1;
  double depth;  // camera depth of the voxel centre
};

// False when the centre is behind the camera or the footprint is not wholly
// inside the image; such voxels are unobserved.
bool voxel_footprint(const VoxelGrid& grid, std::size_t flat, const CameraView& view,
                     Footprint& out)
{
  const Vec3 pc = view.pose().to_camera(grid.voxel_center(flat));
  if (!(pc.z() > 0.0))
    return false;
  const auto& k = view.intrinsics();
  const double u = k.cx + k.fx * pc.x() / pc.z();
  const double v = k.cy + k.fy * pc.y() / pc.z();
  const double half = 0.5 * grid.voxel_diagonal() / pc.z();
  const double ru = half * k.fx + 0.5, rv = half * k.fy + 0.5;
  const double u0 = std::ceil(u - ru), u1 = std::floor(u + ru);
  const double v0 = std::ceil(v - rv), v1 = std::floor(v + rv);
  if (u0 < 0.0 || v0 < 0.0 || u1 >= k.width || v1 >= k.height)
    return false;
  out = {static_cast<int>(u0), static_cast<int>(u1), static_cast<int>(v0),
         static_cast<int>(v1), pc.z()};
  return true;
}

}  // namespace

void carve_silhouette(VoxelGrid& grid, const Mask& mask, const CameraView& view)
{
  const auto& k = view.intrinsics();
  if (!mask.same_shape(k.width, k.height))
    throw DimensionMismatch("carve_silhouette: mask size differs from camera intrinsics");
  for (std::size_t flat = 0; flat < grid.voxel_count(); ++flat) {
    Footprint fp;
    if (!voxel_footprint(grid, flat, view, fp))
      continue;
    if (fp.depth < k.z_near || fp.depth > k.z_far)
      continue;
    bool seen = false;
    for (int v = fp.v0; v <= fp.v1 && !seen; ++v)
      for (int u = fp.u0; u <= fp.u1 && !seen; ++u)
        seen = mask.at(u, v) != 0;
    if (!seen)
      grid[flat] = 0.0f;
  }
}

void carve_depth(VoxelGrid& grid, const DepthImage& depth, const CameraView& view)
{
  const auto& k = view.intrinsics();
  if (!depth.same_shape(k.width, k.height))
    throw DimensionMismatch("carve_depth: depth size differs from camera intrinsics");
  const double margin = grid.voxel_diagonal();
  for (std::size_t flat = 0; flat < grid.voxel_count(); ++flat) {
    Footprint fp;
    if (!voxel_footprint(grid, flat, view, fp))
      continue;
    // Free only if every covered ray that hits something hits it behind the
    // voxel, and at least one does.
    bool free = false, blocked = false;
    for (int v = fp.v0; v <= fp.v1 && !blocked; ++v)
      for (int u = fp.u0; u <= fp.u1 && !blocked; ++u) {
        const double observed = depth.at(u, v);
        if (!is_valid_depth(observed))
          continue;
        if (fp.depth < observed - margin)
          free = true;
        else
          blocked = true;
      }
    if (free && !blocked)
      grid[flat] = 0.0f;
  }
}

DepthImage render_depth_from_grid(const VoxelGrid& grid, const CameraView& view,
                                  double threshold)
{
  if (!(threshold > 0.0 && threshold <= 1.0))
    throw InvalidArgument("render_depth_from_grid: threshold must lie in (0, 1]");
  const auto& k = view.intrinsics();
  const auto& pose = view.pose();
  const Vec3 eye = pose.camera_center();
  const Mat3 to_world = pose.rotation.transpose();
  const double step = 0.5 * grid.voxel_size();
  const Vec3 lo = grid.origin();
  Vec3 hi = lo;
  for (int a = 0; a < 3; ++a)
    hi[a] += grid.voxel_size() * grid.dims()[static_cast<std::size_t>(a)];
  const auto thr = static_cast<float>(threshold);

  DepthImage out(k.width, k.height, 0.0);
  for (int v = 0; v < k.height; ++v) {
    for (int u = 0; u < k.width; ++u) {
      const Vec3 ray_cam = Vec3((u - k.cx) / k.fx, (v - k.cy) / k.fy, 1.0).normalized();
      const Vec3 ray = to_world * ray_cam;
      const double t_begin = k.z_near / ray_cam.z();
      const double t_end = k.z_far / ray_cam.z();

      // Restrict the march to the grid's bounding box; samples outside it
      // read occupancy 0 anyway.
      double t0 = t_begin, t1 = t_end;
      bool hits_box = true;
      for (int a = 0; a < 3 && hits_box; ++a) {
        if (std::abs(ray[a]) < 1e-300) {
          if (eye[a] < lo[a] || eye[a] >= hi[a])
            hits_box = false;
          continue;
        }
        double ta = (lo[a] - eye[a]) / ray[a];
        double tb = (hi[a] - eye[a]) / ray[a];
        if (ta > tb)
          std::swap(ta, tb);
        t0 = std::max(t0, ta);
        t1 = std::min(t1, tb);
        if (t0 > t1)
          hits_box = false;
      }
      if (!hits_box)
        continue;

      const auto k_first = static_cast<long>(
          std::max(0.0, std::ceil((t0 - t_begin) / step) - 1.0));
      const auto k_last = static_cast<long>(
          std::min(std::floor((t_end - t_begin) / step),
                   std::floor((t1 - t_begin) / step) + 1.0));
      for (long s = k_first; s <= k_last; ++s) {
        const double t = t_begin + static_cast<double>(s) * step;
        if (grid.occupancy_at(eye + t * ray) >= thr) {
          out.at(u, v) = t * ray_cam.z();
          break;
        }
      }
    }
  }
  return out;
}

VoxelGrid reconstruct_grid(const std::vector<RgbImage>& images,
                           const std::vector<CameraView>& views,
                           const ReconstructionConfig& config,
                           const std::vector<DepthImage>& depths)
{
  if (images.empty() || views.empty())
    throw EmptyInput("reconstruct: no input views");
  if (images.size() != views.size())
    throw DimensionMismatch("reconstruct: image and view counts differ");
  if (!depths.empty() && depths.size() != views.size())
    throw DimensionMismatch("reconstruct: depth and view counts differ");

  VoxelGrid grid = init_grid(config.grid_center, config.grid_side,
                             config.grid_resolution);
  for (std::size_t i = 0; i < views.size(); ++i) {
    const auto& k = views[i].intrinsics();
    if (!images[i].same_shape(k.width, k.height))
      throw DimensionMismatch("reconstruct: image " + std::to_string(i) +
                              " size differs from its camera");
    carve_silhouette(grid, extract_silhouette(images[i], config.background), views[i]);
    if (!depths.empty())
      carve_depth(grid, depths[i], views[i]);
  }
  return grid;
}

std::vector<DepthImage> predict_depth_maps(const std::vector<RgbImage>& images,
                                           const std::vector<CameraView>& views,
                                           const ReconstructionConfig& config,
                                           const std::vector<CameraView>& targets,
                                           const std::vector<DepthImage>& depths)
{
  const VoxelGrid grid = reconstruct_grid(images, views, config, depths);
  std::vector<DepthImage> out;
  out.reserve(targets.size());
  for (const auto& view : targets)
    out.push_back(render_depth_from_grid(grid, view, config.threshold));
  return out;
}

std::vector<DepthImage> predict_depth_maps(const std::vector<RgbImage>& images,
                                           const std::vector<CameraView>& views,
                                           const ReconstructionConfig& config)
{
  return predict_depth_maps(images, views, config, views);
}

double reconstruction_error(const DepthImage& pred, const DepthImage& gt,
                            double z_near, double z_far)
{
  if (!pred.same_shape(gt))
    throw DimensionMismatch("reconstruction_error: image sizes differ");
  if (!(z_far > z_near))
    throw InvalidArgument("reconstruction_error: need z_near < z_far");
  if (pred.empty())
    return 0.0;
  const double range = z_far - z_near;
  double sum = 0.0;
  auto p = pred.pixels();
  auto g = gt.pixels();
  for (std::size_t i = 0; i < p.size(); ++i) {
    const bool pv = is_valid_depth(p[i]);
    const bool gv = is_valid_depth(g[i]);
    if (pv && gv)
      sum += std::abs((p[i] - z_near) / range - (g[i] - z_near) / range);
    else if (pv != gv)
      sum += 1.0;
  }
  return sum / static_cast<double>(p.size());
}

namespace {

static_assert(std::endian::native == std::endian::little ||
                  std::endian::native == std::endian::big,
              "mixed-endian platforms are not supported");

template <typename T>
void put_le(std::string& buf, T value)
{
  char bytes[sizeof(T)];
  std::memcpy(bytes, &value, sizeof(T));
  if constexpr (std::endian::native == std::endian::big)
    std::reverse(bytes, bytes + sizeof(T));
  buf.append(bytes, sizeof(T));
}

template <typename T>
T get_le(const std::string& buf, std::size_t& pos, const std::filesystem::path& path)
{
  if (pos + sizeof(T) > buf.size())
    throw ParseError(path.string() + ": truncated voxel grid file");
  char bytes[sizeof(T)];
  std::memcpy(bytes, buf.data() + pos, sizeof(T));
  if constexpr (std::endian::native == std::endian::big)
    std::reverse(bytes, bytes + sizeof(T));
  pos += sizeof(T);
  T value;
  std::memcpy(&value, bytes, sizeof(T));
  return value;
}

}  // namespace

void write_voxel_grid(const std::filesystem::path& path, const VoxelGrid& grid)
{
  std::string buf;
  buf.reserve(48 + grid.voxel_count() * 4);
  for (int a = 0; a < 3; ++a)
    put_le<double>(buf, grid.origin()[a]);
  put_le<double>(buf, grid.voxel_size());
  for (auto d : grid.dims())
    put_le<std::uint32_t>(buf, d);
  for (float v : grid.values())
    put_le<float>(buf, v);

  std::ofstream out(path, std::ios::binary);
  if (!out)
    throw IoError("cannot write " + path.string());
  out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
  if (!out)
    throw IoError("failed while writing " + path.string());
}

VoxelGrid read_voxel_grid(const std::filesystem::path& path)
{
  std::ifstream in(path, std::ios::binary);
  if (!in)
    throw IoError("cannot open " + path.string());
  const std::string buf((std::istreambuf_iterator<char>(in)),
                        std::istreambuf_iterator<char>());
  std::size_t pos = 0;
  Vec3 origin;
  for (int a = 0; a < 3; ++a)
    origin[a] = get_le<double>(buf, pos, path);
  const double voxel_size = get_le<double>(buf, pos, path);
  std::array<std::uint32_t, 3> dims{};
  for (auto& d : dims)
    d = get_le<std::uint32_t>(buf, pos, path);

  VoxelGrid grid = [&] {
    try {
      return VoxelGrid(origin, voxel_size, dims, 0.0f);
    } catch (const InvalidArgument& e) {
      throw ParseError(path.string() + ": " + e.what());
    }
  }();
  if (buf.size() - pos != grid.voxel_count() * sizeof(float))
    throw ParseError(path.string() + ": payload size does not match dims");
  for (std::size_t i = 0; i < grid.voxel_count(); ++i) {
    const float v = get_le<float>(buf, pos, path);
    if (!(v >= 0.0f && v <= 1.0f))
      throw ParseError(path.string() + ": occupancy outside [0, 1]");
    grid[i] = v;
  }
  return grid;
}

}  // namespace graspforge
