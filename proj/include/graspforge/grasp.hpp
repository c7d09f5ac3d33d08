#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <vector>

#include "graspforge/geometry.hpp"
#include "graspforge/image.hpp"

namespace graspforge {

struct GripperSpec
{
  double max_width = 0.05;
  double finger_radius = 0.005;
  double friction_mu = 0.5;

  void validate() const;
  double friction_angle() const;  // atan(mu)
};

// Neighbouring pixels whose depths differ by more than this belong to
// different surfaces.
inline constexpr double kEdgeDepthJump = 0.01;

struct Contact
{
  int u = 0;
  int v = 0;
  double depth = 0.0;
  friend bool operator==(const Contact&, const Contact&) = default;
};

// Parallel-jaw grasp in one depth image. Geometry is in the camera frame; the
// jaws approach along the optical axis and close along `axis` (a -> b).
struct GraspCandidate
{
  Contact contact_a;
  Contact contact_b;
  Vec3 axis = Vec3::UnitX();
  double width = 0.0;
  double center_u = 0.0;
  double center_v = 0.0;
  double center_depth = 0.0;

  friend bool operator==(const GraspCandidate& x, const GraspCandidate& y)
  {
    return x.contact_a == y.contact_a && x.contact_b == y.contact_b &&
           x.axis == y.axis && x.width == y.width && x.center_u == y.center_u &&
           x.center_v == y.center_v && x.center_depth == y.center_depth;
  }
};

GraspCandidate make_candidate(const Contact& a, const Contact& b,
                              const CameraIntrinsics& intrinsics);

// Grasp in world coordinates: centre p, angle phi of the jaw axis in the table
// plane, and theta, the elevation of the approach (optical) axis above the
// table plane.
struct Grasp
{
  Vec3 p = Vec3::Zero();
  double phi = 0.0;
  double theta = 0.0;
  double quality = 0.0;
  std::size_t source_view = 0;
  double width = 0.0;
};

// Per-pixel surface normals (camera frame) from central differences of the
// unprojected 4-neighbours, oriented toward the camera (n_z < 0). Pixels with
// an invalid or missing neighbour hold the zero vector.
Image<Vec3> estimate_normals(const DepthImage& depth, const CameraView& view);

// Normal used for contact reasoning at one pixel. On an occluding edge
// (a neighbour is background or farther by more than kEdgeDepthJump) this is
// the outward silhouette normal from a Sobel gradient, lying parallel to the
// image plane; pixels occluded by a nearer neighbour have none; elsewhere it
// is the central-difference surface normal.
std::optional<Vec3> contact_normal(const DepthImage& depth,
                                   const CameraIntrinsics& intrinsics, int u, int v);

// Angle between two unit vectors, robust near 0 and pi.
double angle_between(const Vec3& a, const Vec3& b);

bool check_force_closure(const Vec3& n_a, const Vec3& n_b, const Vec3& axis,
                         double mu);

// q_angle * q_width with q_angle = 1 - max(alpha) / atan(mu) and
// q_width = 1 - width / max_width; 0 outside the friction cone or jaw range.
double grasp_quality(double alpha_a, double alpha_b, double width,
                     const GripperSpec& gripper);

// Whether either finger cylinder, descending along the optical axis to its
// contact depth just outside its contact, passes through an observed surface.
bool jaw_collides(const GraspCandidate& c, const DepthImage& depth,
                  const CameraView& view, const GripperSpec& gripper);

double score_grasp(const GraspCandidate& c, const DepthImage& depth,
                   const CameraView& view, const GripperSpec& gripper);

// All antipodal pixel pairs within the jaw width (or a seeded subset of n of
// them, returned in row-major order of contact_a). May be empty.
std::vector<GraspCandidate>
sample_antipodal_candidates(const DepthImage& depth, const CameraView& view,
                            const GripperSpec& gripper, std::size_t n,
                            std::uint64_t seed);

struct CemConfig
{
  std::size_t iters = 3;
  std::size_t population = 100;
  double elite_frac = 0.1;
};

struct ScoredCandidate
{
  GraspCandidate candidate;
  double quality = 0.0;
};

using CandidateFilter = std::function<bool(const GraspCandidate&)>;

// Re-derives the contacts of a grasp centred at (u, v) with in-image axis
// angle `angle` by walking the line through the centre to the ends of the
// surface it starts on.
std::optional<GraspCandidate> candidate_from_line(const DepthImage& depth,
                                                  const CameraIntrinsics& intrinsics,
                                                  double u, double v, double angle);

// Cross-entropy refinement over (u, v, in-plane angle, depth). Returns the best
// candidate seen; the initial pool's argmax (lowest index on ties) is the
// starting incumbent. Candidates rejected by `admissible` score 0.
ScoredCandidate cem_refine(const DepthImage& depth, const CameraView& view,
                           const GripperSpec& gripper,
                           const std::vector<GraspCandidate>& pool,
                           const CemConfig& cem, std::uint64_t seed,
                           const CandidateFilter& admissible = {});

struct PlannerConfig
{
  GripperSpec gripper{};
  CemConfig cem{};
  std::size_t num_candidates = 200;
  std::uint64_t seed = 0;
  Vec3 table_normal = Vec3::UnitZ();
};

Grasp grasp_to_world(const GraspCandidate& c, double quality, const CameraView& view,
                     const Vec3& table_normal, std::size_t source_view = 0);

// True when the candidate's jaw axis has a direction in the table plane, i.e.
// it can be expressed as (p, phi, theta).
bool has_table_angle(const GraspCandidate& c, const CameraView& view,
                     const Vec3& table_normal);

// nullopt is the "no grasp found" outcome: no admissible antipodal candidate,
// or none with positive quality.
std::optional<Grasp> plan_grasp_single_view(const DepthImage& depth,
                                            const CameraView& view,
                                            const PlannerConfig& config,
                                            std::size_t view_index = 0);

struct MultiViewPlan
{
  std::optional<Grasp> best;
  std::vector<std::optional<Grasp>> per_view;
};

// Highest-quality grasp over all views; ties go to the lowest view index.
MultiViewPlan plan_grasp_multiview(const std::vector<DepthImage>& depths,
                                   const std::vector<CameraView>& views,
                                   const PlannerConfig& config);

}  // namespace graspforge
