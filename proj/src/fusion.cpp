#include "graspforge/fusion.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "graspforge/errors.hpp"

namespace graspforge {

namespace {

double sigmoid(double z)
{
  if (z >= 0.0)
    return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

void check_shapes(const FusionWeights& weights, const FreeSpaceEvidence& evidence,
                  std::size_t voxels)
{
  if (evidence.size() != weights.w.size())
    throw DimensionMismatch("fusion: one weight per evidence view required");
  for (const auto& e : evidence)
    if (e.size() != voxels)
      throw DimensionMismatch("fusion: evidence length differs from voxel count");
  for (double w : weights.w)
    if (!std::isfinite(w))
      throw InvalidArgument("fusion: non-finite weight");
  if (!std::isfinite(weights.b))
    throw InvalidArgument("fusion: non-finite bias");
}

std::size_t voxel_count(const FreeSpaceEvidence& evidence)
{
  if (evidence.empty())
    throw EmptyInput("fusion: no evidence views");
  return evidence.front().size();
}

}  // namespace

std::vector<double> silhouette_evidence(const VoxelGrid& grid, const Mask& mask,
                                        const CameraView& view)
{
  VoxelGrid probe(grid.origin(), grid.voxel_size(), grid.dims(), 1.0f);
  carve_silhouette(probe, mask, view);
  std::vector<double> e(probe.voxel_count());
  for (std::size_t v = 0; v < e.size(); ++v)
    e[v] = probe[v] == 0.0f ? 1.0 : 0.0;
  return e;
}

std::vector<double> fused_occupancy(const FusionWeights& weights,
                                    const FreeSpaceEvidence& evidence)
{
  const std::size_t n = voxel_count(evidence);
  check_shapes(weights, evidence, n);
  std::vector<double> z(n, weights.b);
  for (std::size_t i = 0; i < evidence.size(); ++i)
    for (std::size_t v = 0; v < n; ++v)
      z[v] += weights.w[i] * evidence[i][v];
  for (double& x : z)
    x = sigmoid(x);
  return z;
}

double fusion_loss(const FusionWeights& weights, const FreeSpaceEvidence& evidence,
                   const VoxelGrid& target)
{
  const auto occ = fused_occupancy(weights, evidence);
  if (occ.size() != target.voxel_count())
    throw DimensionMismatch("fusion: target grid size differs from evidence");
  double sum = 0.0;
  for (std::size_t v = 0; v < occ.size(); ++v) {
    const double r = occ[v] - target[v];
    sum += r * r;
  }
  return sum / static_cast<double>(occ.size());
}

std::vector<double> fusion_gradient(const FusionWeights& weights,
                                    const FreeSpaceEvidence& evidence,
                                    const VoxelGrid& target)
{
  const auto occ = fused_occupancy(weights, evidence);
  if (occ.size() != target.voxel_count())
    throw DimensionMismatch("fusion: target grid size differs from evidence");
  const double scale = 2.0 / static_cast<double>(occ.size());
  // dL/dz_v = 2/N (o_v - g_v) o_v (1 - o_v)
  std::vector<double> dz(occ.size());
  for (std::size_t v = 0; v < occ.size(); ++v)
    dz[v] = scale * (occ[v] - target[v]) * occ[v] * (1.0 - occ[v]);

  std::vector<double> grad(weights.parameter_count(), 0.0);
  for (std::size_t i = 0; i < evidence.size(); ++i)
    for (std::size_t v = 0; v < dz.size(); ++v)
      grad[i] += dz[v] * evidence[i][v];
  for (double d : dz)
    grad.back() += d;
  return grad;
}

FusionTraining train_fusion_weights(const FreeSpaceEvidence& evidence,
                                    const VoxelGrid& target, double lr,
                                    std::size_t iters, std::uint64_t seed,
                                    double init_scale)
{
  if (iters < 1)
    throw InvalidArgument("train_fusion_weights: iters must be >= 1");
  if (!(lr > 0.0))
    throw InvalidArgument("train_fusion_weights: lr must be > 0");

  FusionTraining out;
  out.weights.w.assign(evidence.size(), 0.0);
  if (init_scale > 0.0) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> noise(0.0, init_scale);
    for (double& w : out.weights.w)
      w = noise(rng);
    out.weights.b = noise(rng);
  }

  out.losses.reserve(iters + 1);
  out.losses.push_back(fusion_loss(out.weights, evidence, target));
  for (std::size_t t = 0; t < iters; ++t) {
    const auto grad = fusion_gradient(out.weights, evidence, target);
    for (std::size_t i = 0; i < out.weights.w.size(); ++i)
      out.weights.w[i] -= lr * grad[i];
    out.weights.b -= lr * grad.back();
    out.losses.push_back(fusion_loss(out.weights, evidence, target));
  }
  return out;
}

GradientCheck fusion_gradient_check(const FusionWeights& weights,
                                    const FreeSpaceEvidence& evidence,
                                    const VoxelGrid& target, double step)
{
  if (!(step > 0.0))
    throw InvalidArgument("fusion_gradient_check: step must be > 0");
  GradientCheck check;
  check.analytic = fusion_gradient(weights, evidence, target);
  check.numeric.resize(check.analytic.size());

  FusionWeights probe = weights;
  auto param = [&probe](std::size_t p) -> double& {
    return p < probe.w.size() ? probe.w[p] : probe.b;
  };
  for (std::size_t p = 0; p < check.analytic.size(); ++p) {
    const double saved = param(p);
    param(p) = saved + step;
    const double up = fusion_loss(probe, evidence, target);
    param(p) = saved - step;
    const double down = fusion_loss(probe, evidence, target);
    param(p) = saved;
    check.numeric[p] = (up - down) / (2.0 * step);

    const double a = check.analytic[p];
    const double n = check.numeric[p];
    const double denom = std::max({std::abs(a), std::abs(n), 1e-6});
    check.max_relative_error =
        std::max(check.max_relative_error, std::abs(a - n) / denom);
  }
  return check;
}

VoxelGrid apply_fusion(const FusionWeights& weights,
                       const FreeSpaceEvidence& evidence, const VoxelGrid& shape)
{
  const auto occ = fused_occupancy(weights, evidence);
  if (occ.size() != shape.voxel_count())
    throw DimensionMismatch("apply_fusion: grid size differs from evidence");
  VoxelGrid out(shape.origin(), shape.voxel_size(), shape.dims(), 0.0f);
  for (std::size_t v = 0; v < occ.size(); ++v)
    out[v] = static_cast<float>(occ[v]);
  return out;
}

}  // namespace graspforge
