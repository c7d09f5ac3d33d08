#pragma once

#include <optional>

#include "graspforge/geometry.hpp"
#include "graspforge/image.hpp"
#include "graspforge/mesh.hpp"

namespace graspforge {

// Nearest positive ray/triangle hit through every pixel centre. Hits beyond
// z_far are left invalid (0.0); a nearest hit closer than z_near throws
// NearClipViolation.
DepthImage render_depth(const TriangleMesh& mesh, const CameraView& view);

// Lambertian shading of vertex-interpolated colour with a 0.1 ambient floor.
// `light_dir` points from the surface toward the light (world frame). A hit
// pixel never reproduces `background` exactly, so silhouettes extracted from
// the RGB image match the depth-valid mask.
RgbImage render_rgb(const TriangleMesh& mesh, const CameraView& view,
                    const Vec3& light_dir, Rgb8 background = {});

// Light placed at the camera.
Vec3 headlight(const CameraView& view);

Mask extract_silhouette(const RgbImage& image, Rgb8 background);
Mask extract_silhouette(const DepthImage& depth);

// Linear code = round_half_up((d - z_near) / (z_far - z_near) * (2^b - 1)).
// Invalid pixels receive the maximum code and a cleared valid bit.
QuantizedDepthImage quantize_depth(const DepthImage& depth, double z_near,
                                   double z_far, int bit_depth = 16);
DepthImage dequantize_depth(const QuantizedDepthImage& q);

// A predicted depth image delivered as three identical 8-bit channels.
// Pixels outside `valid` (when given) are marked invalid.
QuantizedDepthImage slice_predicted_channels(const RgbImage& image,
                                             double z_near, double z_far,
                                             const Mask* valid = nullptr);

}  // namespace graspforge
