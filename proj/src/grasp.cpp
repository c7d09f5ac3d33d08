#include "graspforge/grasp.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include <Eigen/Geometry>

#include "graspforge/errors.hpp"
#include "graspforge/seeding.hpp"

namespace graspforge {

void GripperSpec::validate() const
{
  if (!(max_width > 0.0))
    throw InvalidArgument("gripper: max_width must be > 0");
  if (!(finger_radius >= 0.0))
    throw InvalidArgument("gripper: finger_radius must be >= 0");
  if (!(friction_mu >= 0.0))
    throw InvalidArgument("gripper: friction_mu must be >= 0");
}

double GripperSpec::friction_angle() const { return std::atan(friction_mu); }

GraspCandidate make_candidate(const Contact& a, const Contact& b,
                              const CameraIntrinsics& k)
{
  const Vec3 pa = unproject_to_camera(a.u, a.v, a.depth, k);
  const Vec3 pb = unproject_to_camera(b.u, b.v, b.depth, k);
  const Vec3 d = pb - pa;
  const double width = d.norm();
  if (!(width > 0.0))
    throw InvalidArgument("grasp candidate: contacts coincide");
  const Vec3 mid = 0.5 * (pa + pb);
  GraspCandidate c;
  c.contact_a = a;
  c.contact_b = b;
  c.axis = d / width;
  c.width = width;
  c.center_u = k.cx + k.fx * mid.x() / mid.z();
  c.center_v = k.cy + k.fy * mid.y() / mid.z();
  c.center_depth = mid.z();
  return c;
}

namespace {

bool valid_at(const DepthImage& depth, int u, int v)
{
  return depth.contains(u, v) && is_valid_depth(depth.at(u, v));
}

std::optional<Vec3> surface_normal(const DepthImage& depth,
                                   const CameraIntrinsics& k, int u, int v)
{
  if (!valid_at(depth, u, v) || !valid_at(depth, u - 1, v) ||
      !valid_at(depth, u + 1, v) || !valid_at(depth, u, v - 1) ||
      !valid_at(depth, u, v + 1))
    return std::nullopt;
  auto point = [&](int x, int y) { return unproject_to_camera(x, y, depth.at(x, y), k); };
  const Vec3 du = point(u + 1, v) - point(u - 1, v);
  const Vec3 dv = point(u, v + 1) - point(u, v - 1);
  Vec3 n = du.cross(dv);
  const double len = n.norm();
  if (!(len > 0.0))
    return std::nullopt;
  n /= len;
  if (n.z() > 0.0)
    n = -n;
  return n;
}

}  // namespace

Image<Vec3> estimate_normals(const DepthImage& depth, const CameraView& view)
{
  const auto& k = view.intrinsics();
  if (!depth.same_shape(k.width, k.height))
    throw DimensionMismatch("estimate_normals: depth size differs from camera");
  Image<Vec3> normals(depth.width(), depth.height(), Vec3::Zero());
  for (int v = 0; v < depth.height(); ++v)
    for (int u = 0; u < depth.width(); ++u)
      if (auto n = surface_normal(depth, k, u, v))
        normals.at(u, v) = *n;
  return normals;
}

std::optional<Vec3> contact_normal(const DepthImage& depth,
                                   const CameraIntrinsics& k, int u, int v)
{
  if (!valid_at(depth, u, v))
    return std::nullopt;
  const double d = depth.at(u, v);

  static constexpr int kNeighbours4[4][2] = {{1, 0}, {-1, 0}, {0, 1}, {0, -1}};
  for (const auto& o : kNeighbours4) {
    const int x = u + o[0], y = v + o[1];
    if (valid_at(depth, x, y) && depth.at(x, y) < d - kEdgeDepthJump)
      return std::nullopt;  // occluded by a nearer surface
  }

  // Same-surface indicator over the 3x3 neighbourhood.
  int same[3][3];
  bool edge = false;
  for (int dy = -1; dy <= 1; ++dy) {
    for (int dx = -1; dx <= 1; ++dx) {
      const int x = u + dx, y = v + dy;
      const bool s = valid_at(depth, x, y) && depth.at(x, y) <= d + kEdgeDepthJump;
      same[dy + 1][dx + 1] = s ? 1 : 0;
      edge = edge || !s;
    }
  }
  if (!edge)
    return surface_normal(depth, k, u, v);

  const double gx = (same[0][2] + 2 * same[1][2] + same[2][2]) -
                    (same[0][0] + 2 * same[1][0] + same[2][0]);
  const double gy = (same[2][0] + 2 * same[2][1] + same[2][2]) -
                    (same[0][0] + 2 * same[0][1] + same[0][2]);
  // Outward is down the occupancy gradient; image directions scale by 1/f.
  const Vec3 n(-gx / k.fx, -gy / k.fy, 0.0);
  const double len = n.norm();
  if (!(len > 0.0))
    return std::nullopt;
  return n / len;
}

double angle_between(const Vec3& a, const Vec3& b)
{
  return std::atan2(a.cross(b).norm(), a.dot(b));
}

bool check_force_closure(const Vec3& n_a, const Vec3& n_b, const Vec3& axis,
                         double mu)
{
  for (const Vec3* x : {&n_a, &n_b, &axis})
    if (std::abs(x->norm() - 1.0) > 1e-9)
      throw NonUnitInput("check_force_closure: inputs must be unit vectors");
  if (!(mu >= 0.0))
    throw InvalidArgument("check_force_closure: mu must be >= 0");
  const double cone = std::atan(mu);
  return angle_between(n_a, -axis) <= cone && angle_between(n_b, axis) <= cone;
}

double grasp_quality(double alpha_a, double alpha_b, double width,
                     const GripperSpec& gripper)
{
  const double cone = gripper.friction_angle();
  const double worst = std::max(alpha_a, alpha_b);
  if (!(width > 0.0) || width > gripper.max_width || worst > cone)
    return 0.0;
  const double q_angle = cone > 0.0 ? 1.0 - worst / cone : 1.0;
  const double q_width = 1.0 - width / gripper.max_width;
  return std::clamp(q_angle * q_width, 0.0, 1.0);
}

bool jaw_collides(const GraspCandidate& c, const DepthImage& depth,
                  const CameraView& view, const GripperSpec& gripper)
{
  const auto& k = view.intrinsics();
  const double r = gripper.finger_radius;
  if (!(r > 0.0))
    return false;
  const Vec3 pa = unproject_to_camera(c.contact_a.u, c.contact_a.v, c.contact_a.depth, k);
  const Vec3 pb = unproject_to_camera(c.contact_b.u, c.contact_b.v, c.contact_b.depth, k);

  struct Finger
  {
    Vec3 center;
    double tip_depth;
  };
  const Finger fingers[2] = {{pa - r * c.axis, pa.z()}, {pb + r * c.axis, pb.z()}};
  const double z_lo = k.z_near;

  for (const auto& f : fingers) {
    // Pixels whose observed points could fall inside the cylinder
    // |xy - center.xy| < r, z_lo <= z < tip_depth.
    double umin = 1e300, umax = -1e300, vmin = 1e300, vmax = -1e300;
    for (double x : {f.center.x() - r, f.center.x() + r})
      for (double z : {z_lo, std::max(z_lo, f.tip_depth)}) {
        umin = std::min(umin, k.cx + k.fx * x / z);
        umax = std::max(umax, k.cx + k.fx * x / z);
      }
    for (double y : {f.center.y() - r, f.center.y() + r})
      for (double z : {z_lo, std::max(z_lo, f.tip_depth)}) {
        vmin = std::min(vmin, k.cy + k.fy * y / z);
        vmax = std::max(vmax, k.cy + k.fy * y / z);
      }
    const int u0 = std::max(0, static_cast<int>(std::floor(umin)));
    const int u1 = std::min(depth.width() - 1, static_cast<int>(std::ceil(umax)));
    const int v0 = std::max(0, static_cast<int>(std::floor(vmin)));
    const int v1 = std::min(depth.height() - 1, static_cast<int>(std::ceil(vmax)));
    for (int v = v0; v <= v1; ++v) {
      for (int u = u0; u <= u1; ++u) {
        const double d = depth.at(u, v);
        if (!is_valid_depth(d) || d >= f.tip_depth - 1e-9)
          continue;
        const Vec3 s = unproject_to_camera(u, v, d, k);
        const double dx = s.x() - f.center.x();
        const double dy = s.y() - f.center.y();
        if (dx * dx + dy * dy < r * r * (1.0 - 1e-9))
          return true;
      }
    }
  }
  return false;
}

double score_grasp(const GraspCandidate& c, const DepthImage& depth,
                   const CameraView& view, const GripperSpec& gripper)
{
  const auto& k = view.intrinsics();
  if (!depth.same_shape(k.width, k.height))
    throw DimensionMismatch("score_grasp: depth size differs from camera");
  if (!(c.width > 0.0) || c.width > gripper.max_width)
    return 0.0;
  const auto na = contact_normal(depth, k, c.contact_a.u, c.contact_a.v);
  const auto nb = contact_normal(depth, k, c.contact_b.u, c.contact_b.v);
  if (!na || !nb)
    return 0.0;
  if (!check_force_closure(*na, *nb, c.axis, gripper.friction_mu))
    return 0.0;
  if (jaw_collides(c, depth, view, gripper))
    return 0.0;
  return grasp_quality(angle_between(*na, -c.axis), angle_between(*nb, c.axis),
                       c.width, gripper);
}

std::vector<GraspCandidate>
sample_antipodal_candidates(const DepthImage& depth, const CameraView& view,
                            const GripperSpec& gripper, std::size_t n,
                            std::uint64_t seed)
{
  if (n == 0)
    throw InvalidCount("sample_antipodal_candidates: n must be >= 1");
  gripper.validate();
  const auto& k = view.intrinsics();
  if (!depth.same_shape(k.width, k.height))
    throw DimensionMismatch("sample_antipodal_candidates: depth size differs from camera");

  struct Capable
  {
    int u, v;
    Vec3 point;
    Vec3 normal;
  };
  std::vector<Capable> capable;
  Image<int> slot(depth.width(), depth.height(), -1);
  double z_min = 1e300;
  for (int v = 0; v < depth.height(); ++v) {
    for (int u = 0; u < depth.width(); ++u) {
      const auto nrm = contact_normal(depth, k, u, v);
      if (!nrm)
        continue;
      slot.at(u, v) = static_cast<int>(capable.size());
      capable.push_back({u, v, unproject_to_camera(u, v, depth.at(u, v), k), *nrm});
      z_min = std::min(z_min, depth.at(u, v));
    }
  }
  std::vector<GraspCandidate> all;
  if (capable.empty())
    return all;

  // Two points at depth >= z_min and at most max_width apart project at most
  // f * w * sqrt(1 + t^2) / z_min pixels apart per image axis, where t bounds
  // |x/z| over the image.
  const double tx = std::max(k.cx, k.width - 1 - k.cx) / k.fx;
  const double ty = std::max(k.cy, k.height - 1 - k.cy) / k.fy;
  const int reach_u = static_cast<int>(
      std::ceil(k.fx * gripper.max_width * std::sqrt(1.0 + tx * tx) / z_min));
  const int reach_v = static_cast<int>(
      std::ceil(k.fy * gripper.max_width * std::sqrt(1.0 + ty * ty) / z_min));
  const double cone = gripper.friction_angle();

  for (std::size_t i = 0; i < capable.size(); ++i) {
    const Capable& a = capable[i];
    for (int v = std::max(0, a.v - reach_v);
         v <= std::min(depth.height() - 1, a.v + reach_v); ++v) {
      for (int u = std::max(0, a.u - reach_u);
           u <= std::min(depth.width() - 1, a.u + reach_u); ++u) {
        const int j = slot.at(u, v);
        if (j <= static_cast<int>(i))
          continue;
        const Capable& b = capable[static_cast<std::size_t>(j)];
        const Vec3 d = b.point - a.point;
        const double width = d.norm();
        if (!(width > 0.0) || width > gripper.max_width)
          continue;
        const Vec3 axis = d / width;
        if (angle_between(a.normal, -axis) > cone || angle_between(b.normal, axis) > cone)
          continue;
        all.push_back(make_candidate({a.u, a.v, depth.at(a.u, a.v)},
                                     {b.u, b.v, depth.at(b.u, b.v)}, k));
      }
    }
  }

  if (all.size() <= n)
    return all;
  std::vector<std::size_t> order(all.size());
  std::iota(order.begin(), order.end(), 0);
  std::mt19937_64 rng(seed);
  std::shuffle(order.begin(), order.end(), rng);
  order.resize(n);
  std::sort(order.begin(), order.end());
  std::vector<GraspCandidate> picked;
  picked.reserve(n);
  for (auto idx : order)
    picked.push_back(all[idx]);
  return picked;
}

std::optional<GraspCandidate> candidate_from_line(const DepthImage& depth,
                                                  const CameraIntrinsics& k,
                                                  double u, double v, double angle)
{
  if (!std::isfinite(u) || !std::isfinite(v) || !std::isfinite(angle))
    return std::nullopt;
  const double su = std::floor(u + 0.5), sv = std::floor(v + 0.5);
  if (su < 0 || sv < 0 || su >= depth.width() || sv >= depth.height())
    return std::nullopt;
  const int u0 = static_cast<int>(su), v0 = static_cast<int>(sv);
  if (!is_valid_depth(depth.at(u0, v0)))
    return std::nullopt;

  const double cu = std::cos(angle), cv = std::sin(angle);
  const int max_steps = 2 * (depth.width() + depth.height());
  auto walk = [&](double sign) {
    int pu = u0, pv = v0;
    for (int s = 1; s <= max_steps; ++s) {
      const double qu = std::floor(u + sign * 0.5 * s * cu + 0.5);
      const double qv = std::floor(v + sign * 0.5 * s * cv + 0.5);
      if (qu < 0 || qv < 0 || qu >= depth.width() || qv >= depth.height())
        break;
      const int iu = static_cast<int>(qu), iv = static_cast<int>(qv);
      if (iu == pu && iv == pv)
        continue;
      const double d = depth.at(iu, iv);
      if (!is_valid_depth(d) || std::abs(d - depth.at(pu, pv)) > kEdgeDepthJump)
        break;
      pu = iu;
      pv = iv;
    }
    return Contact{pu, pv, depth.at(pu, pv)};
  };
  const Contact a = walk(-1.0);
  const Contact b = walk(+1.0);
  if (a.u == b.u && a.v == b.v)
    return std::nullopt;
  return make_candidate(a, b, k);
}

namespace {

struct CemSample
{
  double u, v, angle, depth;
};

double wrap_pi(double a)
{
  a = std::fmod(a, kPi);
  if (a < 0.0)
    a += kPi;
  return a >= kPi ? 0.0 : a;
}

CemSample parameters_of(const GraspCandidate& c)
{
  const double angle = std::atan2(c.contact_b.v - c.contact_a.v,
                                  c.contact_b.u - c.contact_a.u);
  return {c.center_u, c.center_v, wrap_pi(angle), c.center_depth};
}

std::size_t elite_count(double frac, std::size_t n)
{
  const auto e = static_cast<std::size_t>(std::llround(frac * static_cast<double>(n)));
  return std::clamp<std::size_t>(e, 1, std::max<std::size_t>(n, 1));
}

}  // namespace

ScoredCandidate cem_refine(const DepthImage& depth, const CameraView& view,
                           const GripperSpec& gripper,
                           const std::vector<GraspCandidate>& pool,
                           const CemConfig& cem, std::uint64_t seed,
                           const CandidateFilter& admissible)
{
  if (pool.empty())
    throw EmptyPool("cem_refine: candidate pool is empty");
  if (!(cem.elite_frac > 0.0 && cem.elite_frac <= 1.0))
    throw InvalidArgument("cem_refine: elite_frac must lie in (0, 1]");

  auto evaluate = [&](const GraspCandidate& c) {
    if (admissible && !admissible(c))
      return 0.0;
    return score_grasp(c, depth, view, gripper);
  };

  std::vector<ScoredCandidate> scored;
  scored.reserve(pool.size());
  for (const auto& c : pool)
    scored.push_back({c, evaluate(c)});

  ScoredCandidate best = scored.front();
  for (const auto& s : scored)
    if (s.quality > best.quality)
      best = s;
  if (cem.iters == 0 || cem.population == 0)
    return best;

  auto by_quality = [](const ScoredCandidate& a, const ScoredCandidate& b) {
    return a.quality > b.quality;
  };
  std::stable_sort(scored.begin(), scored.end(), by_quality);
  std::vector<CemSample> elites;
  for (std::size_t i = 0; i < elite_count(cem.elite_frac, scored.size()); ++i)
    elites.push_back(parameters_of(scored[i].candidate));

  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  const auto& k = view.intrinsics();

  for (std::size_t it = 0; it < cem.iters; ++it) {
    // Diagonal Gaussian; angles are unwrapped around the leading elite since
    // the jaw axis is only defined modulo pi.
    const double ref = elites.front().angle;
    CemSample mean{0, 0, 0, 0};
    std::vector<CemSample> unwrapped = elites;
    for (auto& e : unwrapped) {
      double da = e.angle - ref;
      da -= kPi * std::round(da / kPi);
      e.angle = ref + da;
      mean.u += e.u;
      mean.v += e.v;
      mean.angle += e.angle;
      mean.depth += e.depth;
    }
    const double m = static_cast<double>(unwrapped.size());
    mean = {mean.u / m, mean.v / m, mean.angle / m, mean.depth / m};
    CemSample var{0, 0, 0, 0};
    for (const auto& e : unwrapped) {
      var.u += (e.u - mean.u) * (e.u - mean.u);
      var.v += (e.v - mean.v) * (e.v - mean.v);
      var.angle += (e.angle - mean.angle) * (e.angle - mean.angle);
      var.depth += (e.depth - mean.depth) * (e.depth - mean.depth);
    }
    const CemSample sd{std::max(0.5, std::sqrt(var.u / m)),
                       std::max(0.5, std::sqrt(var.v / m)),
                       std::max(0.02, std::sqrt(var.angle / m)),
                       std::max(1e-4, std::sqrt(var.depth / m))};

    std::vector<ScoredCandidate> population;
    population.reserve(cem.population);
    for (std::size_t s = 0; s < cem.population; ++s) {
      const CemSample x{mean.u + sd.u * gauss(rng), mean.v + sd.v * gauss(rng),
                        wrap_pi(mean.angle + sd.angle * gauss(rng)),
                        mean.depth + sd.depth * gauss(rng)};
      // Contacts snap to the observed surface along the sampled line, which
      // fixes the depth coordinate; x.depth only shapes the distribution.
      auto c = candidate_from_line(depth, k, x.u, x.v, x.angle);
      if (!c)
        continue;
      const double q = evaluate(*c);
      if (q > best.quality)
        best = {*c, q};
      if (q > 0.0)
        population.push_back({*c, q});
    }
    if (population.empty())
      continue;
    std::stable_sort(population.begin(), population.end(), by_quality);
    elites.clear();
    for (std::size_t i = 0; i < elite_count(cem.elite_frac, population.size()); ++i)
      elites.push_back(parameters_of(population[i].candidate));
  }
  return best;
}

namespace {

constexpr double kDegenerateTol = 1e-9;

Vec3 unit_table_normal(const Vec3& n)
{
  if (std::abs(n.norm() - 1.0) > 1e-9)
    throw NonUnitInput("table normal must be a unit vector");
  return n;
}

}  // namespace

bool has_table_angle(const GraspCandidate& c, const CameraView& view,
                     const Vec3& table_normal)
{
  const Vec3 n = unit_table_normal(table_normal);
  const Vec3 a = view.pose().rotation.transpose() * c.axis;
  return (a - a.dot(n) * n).norm() >= kDegenerateTol;
}

Grasp grasp_to_world(const GraspCandidate& c, double quality, const CameraView& view,
                     const Vec3& table_normal, std::size_t source_view)
{
  const Vec3 n = unit_table_normal(table_normal);
  const Vec3 axis_world = view.pose().rotation.transpose() * c.axis;
  const Vec3 in_plane = axis_world - axis_world.dot(n) * n;
  if (in_plane.norm() < kDegenerateTol)
    throw DegenerateProjection("grasp_to_world: jaw axis is parallel to the table normal");

  Vec3 x_ref = Vec3::UnitX() - n.x() * n;
  if (x_ref.norm() < 1e-6)
    x_ref = Vec3::UnitY() - n.y() * n;
  x_ref.normalize();
  const Vec3 y_ref = n.cross(x_ref);

  Grasp g;
  g.p = unproject_pixel(c.center_u, c.center_v, c.center_depth, view);
  g.phi = wrap_pi(std::atan2(in_plane.dot(y_ref), in_plane.dot(x_ref)));
  const Vec3 optical = view.pose().optical_axis();
  const double down = -optical.dot(n);
  const double across = (optical + down * n).norm();
  g.theta = std::clamp(std::atan2(down, across), 0.0, kPi / 2.0);
  g.quality = std::clamp(quality, 0.0, 1.0);
  g.source_view = source_view;
  g.width = c.width;
  return g;
}

std::optional<Grasp> plan_grasp_single_view(const DepthImage& depth,
                                            const CameraView& view,
                                            const PlannerConfig& config,
                                            std::size_t view_index)
{
  config.gripper.validate();
  const std::uint64_t task_seed = derive_seed(config.seed, view_index);
  auto pool = sample_antipodal_candidates(depth, view, config.gripper,
                                          std::max<std::size_t>(1, config.num_candidates),
                                          derive_seed(task_seed, "pool"));
  const CandidateFilter admissible = [&](const GraspCandidate& c) {
    return has_table_angle(c, view, config.table_normal);
  };
  std::erase_if(pool, [&](const GraspCandidate& c) { return !admissible(c); });
  if (pool.empty())
    return std::nullopt;

  const auto best = cem_refine(depth, view, config.gripper, pool, config.cem,
                               derive_seed(task_seed, "cem"), admissible);
  if (!(best.quality > 0.0))
    return std::nullopt;
  return grasp_to_world(best.candidate, best.quality, view, config.table_normal,
                        view_index);
}

MultiViewPlan plan_grasp_multiview(const std::vector<DepthImage>& depths,
                                   const std::vector<CameraView>& views,
                                   const PlannerConfig& config)
{
  if (depths.empty() || views.empty())
    throw EmptyInput("plan_grasp_multiview: no views");
  if (depths.size() != views.size())
    throw DimensionMismatch("plan_grasp_multiview: depth and view counts differ");

  MultiViewPlan plan;
  plan.per_view.reserve(views.size());
  for (std::size_t i = 0; i < views.size(); ++i) {
    plan.per_view.push_back(plan_grasp_single_view(depths[i], views[i], config, i));
    const auto& g = plan.per_view.back();
    if (g && (!plan.best || g->quality > plan.best->quality))
      plan.best = g;
  }
  return plan;
}

}  // namespace graspforge
