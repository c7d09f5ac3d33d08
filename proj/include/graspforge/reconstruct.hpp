#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "graspforge/geometry.hpp"
#include "graspforge/image.hpp"

namespace graspforge {

// Axis-aligned occupancy grid. Voxel (i, j, k) spans
// [origin + (i, j, k) * voxel_size, origin + (i+1, j+1, k+1) * voxel_size);
// storage is x-fastest.
class VoxelGrid
{
public:
  VoxelGrid(const Vec3& origin, double voxel_size, std::array<std::uint32_t, 3> dims,
            float fill = 1.0f);

  const Vec3& origin() const { return origin_; }
  double voxel_size() const { return voxel_size_; }
  const std::array<std::uint32_t, 3>& dims() const { return dims_; }
  std::size_t voxel_count() const { return values_.size(); }
  double voxel_diagonal() const;

  std::size_t index(std::uint32_t i, std::uint32_t j, std::uint32_t k) const
  {
    return (static_cast<std::size_t>(k) * dims_[1] + j) * dims_[0] + i;
  }
  Vec3 voxel_center(std::size_t flat) const;

  float& operator[](std::size_t flat) { return values_[flat]; }
  float operator[](std::size_t flat) const { return values_[flat]; }
  std::span<float> values() { return values_; }
  std::span<const float> values() const { return values_; }

  // Occupancy of the voxel containing p; 0 outside the grid.
  float occupancy_at(const Vec3& p) const;

  std::size_t occupied_count(float threshold = 0.5f) const;

  friend bool operator==(const VoxelGrid&, const VoxelGrid&) = default;

private:
  Vec3 origin_;
  double voxel_size_;
  std::array<std::uint32_t, 3> dims_;
  std::vector<float> values_;
};

// Cube of side `side` centred on `center`, every voxel hypothetically occupied.
VoxelGrid init_grid(const Vec3& center, double side, std::uint32_t resolution);

// A voxel's footprint in a view is the set of pixels whose centres lie within
// the projected radius of the voxel's bounding sphere, plus half a pixel, of
// its projected centre. Voxels behind the camera or whose footprint leaves the
// image are unobserved and left unchanged.

// Silhouette carving: a voxel whose centre lies in the view's depth range and
// whose footprint is entirely background is set to 0.
void carve_silhouette(VoxelGrid& grid, const Mask& mask, const CameraView& view);

// Free-space carving: a voxel is set to 0 when at least one footprint pixel
// observes a surface more than one voxel diagonal behind the voxel centre and
// no footprint pixel observes one closer than that.
void carve_depth(VoxelGrid& grid, const DepthImage& depth, const CameraView& view);

// Marches each pixel ray from z_near to z_far in steps of voxel_size / 2 and
// reports the optical-axis depth of the first sample whose nearest-voxel
// occupancy is >= threshold.
DepthImage render_depth_from_grid(const VoxelGrid& grid, const CameraView& view,
                                  double threshold = 0.5);

struct ReconstructionConfig
{
  Vec3 grid_center = Vec3::Zero();
  double grid_side = 0.3;
  std::uint32_t grid_resolution = 64;
  double threshold = 0.5;
  Rgb8 background{};
};

// Carves a fresh grid with every view's silhouette (taken from the RGB image
// against config.background) and, when `depths` is non-empty, the matching
// free-space evidence.
VoxelGrid reconstruct_grid(const std::vector<RgbImage>& images,
                           const std::vector<CameraView>& views,
                           const ReconstructionConfig& config,
                           const std::vector<DepthImage>& depths = {});

// Reconstructs from (images, views[, depths]) and renders a predicted depth
// map at each of `targets`, in order.
std::vector<DepthImage> predict_depth_maps(const std::vector<RgbImage>& images,
                                           const std::vector<CameraView>& views,
                                           const ReconstructionConfig& config,
                                           const std::vector<CameraView>& targets,
                                           const std::vector<DepthImage>& depths = {});

// Predicted depth maps at the input views themselves.
std::vector<DepthImage> predict_depth_maps(const std::vector<RgbImage>& images,
                                           const std::vector<CameraView>& views,
                                           const ReconstructionConfig& config);

// Mean over pixels of |pred_n - gt_n| with depths normalised by
// (d - z_near) / (z_far - z_near). A pixel valid in exactly one image costs
// 1; a pixel invalid in both costs 0.
double reconstruction_error(const DepthImage& pred, const DepthImage& gt,
                            double z_near, double z_far);

// Binary layout (little-endian): origin[3] f64, voxel_size f64, dims[3] u32,
// then occupancy as f32 in x-fastest order.
void write_voxel_grid(const std::filesystem::path& path, const VoxelGrid& grid);
VoxelGrid read_voxel_grid(const std::filesystem::path& path);

}  // namespace graspforge
