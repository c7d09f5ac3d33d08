#pragma once

#include <cstdint>
#include <vector>

#include "graspforge/geometry.hpp"
#include "graspforge/image.hpp"
#include "graspforge/reconstruct.hpp"

namespace graspforge {

// Learned linear-logistic fusion of per-view free-space evidence:
//   occupancy_v = sigmoid(sum_i w_i * e_{i,v} + b)
// trained by gradient descent on the mean squared error against a reference
// occupancy grid.
struct FusionWeights
{
  std::vector<double> w;
  double b = 0.0;

  std::size_t parameter_count() const { return w.size() + 1; }
  friend bool operator==(const FusionWeights&, const FusionWeights&) = default;
};

// evidence[i][v] in [0, 1]: how strongly view i observes voxel v as free.
using FreeSpaceEvidence = std::vector<std::vector<double>>;

// 1 where carve_silhouette with this (mask, view) would empty the voxel.
std::vector<double> silhouette_evidence(const VoxelGrid& grid, const Mask& mask,
                                        const CameraView& view);

std::vector<double> fused_occupancy(const FusionWeights& weights,
                                    const FreeSpaceEvidence& evidence);

double fusion_loss(const FusionWeights& weights, const FreeSpaceEvidence& evidence,
                   const VoxelGrid& target);

// d loss / d(w_0 .. w_{n-1}, b), in that order.
std::vector<double> fusion_gradient(const FusionWeights& weights,
                                    const FreeSpaceEvidence& evidence,
                                    const VoxelGrid& target);

struct FusionTraining
{
  FusionWeights weights;
  // losses[0] is the loss at initialisation, losses[t] after t updates.
  std::vector<double> losses;
};

// Full-batch gradient descent. Weights start at zero; with init_scale > 0 they
// start from N(0, init_scale^2) draws seeded by `seed`.
FusionTraining train_fusion_weights(const FreeSpaceEvidence& evidence,
                                    const VoxelGrid& target, double lr,
                                    std::size_t iters, std::uint64_t seed,
                                    double init_scale = 0.0);

struct GradientCheck
{
  std::vector<double> analytic;
  std::vector<double> numeric;
  double max_relative_error = 0.0;
};

// Central differences with the given step. The relative error of parameter p
// is |a_p - n_p| / max(|a_p|, |n_p|, 1e-6).
GradientCheck fusion_gradient_check(const FusionWeights& weights,
                                    const FreeSpaceEvidence& evidence,
                                    const VoxelGrid& target, double step = 1e-5);

// Grid shaped like `shape` holding the fused occupancy.
VoxelGrid apply_fusion(const FusionWeights& weights,
                       const FreeSpaceEvidence& evidence, const VoxelGrid& shape);

}  // namespace graspforge
