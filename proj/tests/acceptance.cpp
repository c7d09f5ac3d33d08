// Acceptance run: one PASS/FAIL line per criterion, nonzero exit on any failure.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <numeric>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Geometry>

#include "cli.hpp"
#include "graspforge/dataset.hpp"
#include "graspforge/eval.hpp"
#include "graspforge/fusion.hpp"
#include "graspforge/grasp.hpp"
#include "graspforge/mesh.hpp"
#include "graspforge/reconstruct.hpp"
#include "graspforge/render.hpp"

using namespace graspforge;
namespace fs = std::filesystem;

namespace {

struct Outcome
{
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, double a, double b = 0.0, double c = 0.0)
{
  char buf[256];
  std::snprintf(buf, sizeof buf, f, a, b, c);
  return buf;
}

fs::path scratch(const std::string& name)
{
  const auto p = fs::temp_directory_path() / ("graspforge_acceptance_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

// Closest point on a triangle (Ericson, Real-Time Collision Detection).
Vec3 closest_on_triangle(const Vec3& p, const Vec3& a, const Vec3& b, const Vec3& c)
{
  const Vec3 ab = b - a, ac = c - a, ap = p - a;
  const double d1 = ab.dot(ap), d2 = ac.dot(ap);
  if (d1 <= 0 && d2 <= 0)
    return a;
  const Vec3 bp = p - b;
  const double d3 = ab.dot(bp), d4 = ac.dot(bp);
  if (d3 >= 0 && d4 <= d3)
    return b;
  const double vc = d1 * d4 - d3 * d2;
  if (vc <= 0 && d1 >= 0 && d3 <= 0)
    return a + d1 / (d1 - d3) * ab;
  const Vec3 cp = p - c;
  const double d5 = ab.dot(cp), d6 = ac.dot(cp);
  if (d6 >= 0 && d5 <= d6)
    return c;
  const double vb = d5 * d2 - d1 * d6;
  if (vb <= 0 && d2 >= 0 && d6 <= 0)
    return a + d2 / (d2 - d6) * ac;
  const double va = d3 * d6 - d5 * d4;
  if (va <= 0 && (d4 - d3) >= 0 && (d5 - d6) >= 0)
    return b + (d4 - d3) / ((d4 - d3) + (d5 - d6)) * (c - b);
  const double denom = 1.0 / (va + vb + vc);
  return a + ab * (vb * denom) + ac * (vc * denom);
}

double brute_distance(const Vec3& p, const TriangleMesh& mesh)
{
  double best = INFINITY;
  for (const auto& f : mesh.faces)
    best = std::min(best, (p - closest_on_triangle(p, mesh.vertices[f[0]], mesh.vertices[f[1]],
                                                   mesh.vertices[f[2]]))
                              .norm());
  return best;
}

// Inside a convex mesh: behind every face plane, oriented away from the centroid.
bool inside_convex(const Vec3& p, const TriangleMesh& mesh)
{
  Vec3 centroid = Vec3::Zero();
  for (const auto& v : mesh.vertices)
    centroid += v;
  centroid /= static_cast<double>(mesh.vertices.size());
  for (const auto& f : mesh.faces) {
    const Vec3& a = mesh.vertices[f[0]];
    Vec3 n = (mesh.vertices[f[1]] - a).cross(mesh.vertices[f[2]] - a);
    if (n.norm() < 1e-15)
      continue;
    if (n.dot(centroid - a) > 0)
      n = -n;
    if (n.dot(p - a) > 0)
      return false;
  }
  return true;
}

bool subset_of(const VoxelGrid& a, const VoxelGrid& b)
{
  for (std::size_t i = 0; i < a.voxel_count(); ++i)
    if (a[i] >= 0.5f && b[i] < 0.5f)
      return false;
  return true;
}

std::vector<std::vector<std::string>> read_csv(const fs::path& p)
{
  std::ifstream in(p);
  std::vector<std::vector<std::string>> rows;
  std::string line;
  while (std::getline(in, line)) {
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ','))
      cells.push_back(cell);
    rows.push_back(cells);
  }
  return rows;
}

// AC 1
Outcome geometry_round_trip()
{
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  const auto cams = sample_hemisphere_cameras(10, 0.6, Vec3(0.1, -0.2, 0.0), 5, true);
  double worst = 0.0;
  bool ok = true;
  for (int i = 0; i < 1000; ++i) {
    const auto& view = cams[i % cams.size()];
    const auto& k = view.intrinsics();
    const double z = k.z_near + (k.z_far - k.z_near) * u01(rng);
    const double x = (u01(rng) * k.width - 0.5 - k.cx) * z / k.fx;
    const double y = (u01(rng) * k.height - 0.5 - k.cy) * z / k.fy;
    const Vec3 p = view.pose().to_world(Vec3(x, y, z));
    const auto proj = project_point(p, view);
    const Vec3 back = unproject_pixel(proj.u, proj.v, proj.depth, view);
    const double err = (back - p).norm();
    worst = std::max(worst, err / (1.0 + p.norm()));
    ok = ok && err < 1e-9 * (1.0 + p.norm());
  }
  return {ok, fmt("max relative error %.3g over 1000 points", worst)};
}

// AC 2
Outcome render_correctness()
{
  CameraIntrinsics k;
  k.width = k.height = 129;
  k.cx = k.cy = 64.0;
  const auto sphere = *builtin_fixture("sphere");
  const double radius = 0.02, dist = 0.6;
  const CameraView top(k, look_at(Vec3(0, 0, dist), Vec3::Zero(), Vec3::UnitY()));
  const double centre = render_depth(sphere, top).at(64, 64);
  const double centre_err = std::abs(centre - (dist - radius));

  std::mt19937_64 rng(2);
  const auto cams = sample_hemisphere_cameras(4, dist, Vec3::Zero(), 3, false);
  std::vector<Vec3> points;
  for (const auto& c : cams) {
    const auto d = render_depth(sphere, c);
    for (int v = 0; v < d.height(); ++v)
      for (int u = 0; u < d.width(); ++u)
        if (d.at(u, v) > 0.0)
          points.push_back(unproject_pixel(u, v, d.at(u, v), c));
  }
  std::shuffle(points.begin(), points.end(), rng);
  points.resize(std::min<std::size_t>(100, points.size()));
  double worst = 0.0;
  for (const auto& p : points)
    worst = std::max(worst, brute_distance(p, sphere));
  const bool ok = centre_err <= 1e-6 && points.size() == 100 && worst <= 1e-6;
  return {ok, fmt("centre |err| %.3g m, max surface distance %.3g m over %.0f pixels",
                  centre_err, worst, static_cast<double>(points.size()))};
}

// AC 3
Outcome quantization()
{
  bool ok = true;
  double worst = 0.0;
  std::size_t pixels = 0;
  for (const auto& name : builtin_fixture_names()) {
    const auto mesh = *builtin_fixture(name);
    for (const auto& view : sample_hemisphere_cameras(4, 0.6, Vec3::Zero(), 7, true)) {
      const auto depth = render_depth(mesh, view);
      const auto& k = view.intrinsics();
      for (int bits : {8, 16}) {
        const double half = 0.5 * (k.z_far - k.z_near) / ((1 << bits) - 1);
        const auto back = dequantize_depth(quantize_depth(depth, k.z_near, k.z_far, bits));
        for (std::size_t i = 0; i < depth.size(); ++i) {
          const double d = depth.pixels()[i], b = back.pixels()[i];
          ++pixels;
          if ((d > 0.0) != (b > 0.0)) {
            ok = false;
            continue;
          }
          if (d > 0.0) {
            worst = std::max(worst, std::abs(b - d) / half);
            ok = ok && std::abs(b - d) <= half * (1 + 1e-12);
          }
        }
      }
    }
  }
  DepthImage ends(2, 1, 0.0);
  ends.at(0, 0) = 0.25;
  ends.at(1, 0) = 1.5;
  for (int bits : {8, 16}) {
    const auto back = dequantize_depth(quantize_depth(ends, 0.25, 1.5, bits));
    ok = ok && back.at(0, 0) == 0.25 && back.at(1, 0) == 1.5;
  }
  return {ok, fmt("max error %.4f half-steps over %.0f pixels, endpoints exact", worst,
                  static_cast<double>(pixels))};
}

// AC 4
Outcome carving_order()
{
  bool ok = true;
  int checks = 0;
  for (const char* name : {"cube", "sphere", "cylinder"}) {
    const auto mesh = *builtin_fixture(name);
    const auto views = sample_hemisphere_cameras(10, 0.6, Vec3::Zero(), 31, true);
    std::vector<Mask> masks;
    std::vector<DepthImage> depths;
    for (const auto& v : views) {
      depths.push_back(render_depth(mesh, v));
      masks.push_back(extract_silhouette(depths.back()));
    }
    auto carve = [&](const std::vector<std::size_t>& ids) {
      VoxelGrid g = init_grid(Vec3::Zero(), 0.3, 48);
      for (auto i : ids) {
        carve_silhouette(g, masks[i], views[i]);
        carve_depth(g, depths[i], views[i]);
      }
      return g;
    };
    std::mt19937_64 rng(8);
    for (int trial = 0; trial < 3; ++trial) {
      std::vector<std::size_t> all(views.size());
      std::iota(all.begin(), all.end(), 0);
      std::shuffle(all.begin(), all.end(), rng);
      const std::size_t small = 1 + 2 * trial, large = small + 3 + trial;
      std::vector<std::size_t> v(all.begin(), all.begin() + static_cast<long>(small));
      std::vector<std::size_t> vp(all.begin(), all.begin() + static_cast<long>(large));
      const VoxelGrid a = carve(v), b = carve(vp);
      std::vector<std::size_t> permuted = vp;
      std::shuffle(permuted.begin(), permuted.end(), rng);
      ok = ok && subset_of(b, a) && carve(permuted) == b;
      ++checks;
    }
  }
  return {ok, fmt("%.0f subset/permutation checks on 3 fixtures at 48^3", checks)};
}

// AC 5
Outcome hull_conservativeness()
{
  const auto mesh = *builtin_fixture("ball");
  const auto views = sample_hemisphere_cameras(20, 0.6, Vec3::Zero(), 12, true);
  VoxelGrid g = init_grid(Vec3::Zero(), 0.3, 64);
  for (const auto& v : views)
    carve_silhouette(g, extract_silhouette(render_depth(mesh, v)), v);
  const double diag = g.voxel_diagonal();

  std::size_t interior = 0, lost = 0;
  for (std::size_t i = 0; i < g.voxel_count(); ++i) {
    const Vec3 c = g.voxel_center(i);
    if (c.norm() > 0.06 || !inside_convex(c, mesh) || brute_distance(c, mesh) < diag)
      continue;
    ++interior;
    lost += g[i] < 0.5f ? 1 : 0;
  }

  std::size_t valid = 0, within = 0;
  for (const auto& v : sample_hemisphere_cameras(10, 0.6, Vec3::Zero(), 13, true)) {
    const auto gt = render_depth(mesh, v);
    const auto pred = render_depth_from_grid(g, v);
    for (std::size_t i = 0; i < gt.size(); ++i) {
      const double p = pred.pixels()[i], t = gt.pixels()[i];
      if (p > 0.0 && t > 0.0) {
        ++valid;
        within += p <= t + diag ? 1 : 0;
      }
    }
  }
  const double frac = valid ? static_cast<double>(within) / static_cast<double>(valid) : 0.0;
  const bool ok = interior > 0 && lost == 0 && valid > 0 && frac >= 0.999;
  return {ok, fmt("%.0f interior voxels, %.0f carved; predicted <= gt + diag at %.5f of pixels",
                  static_cast<double>(interior), static_cast<double>(lost), frac)};
}

// AC 6
Outcome table1_analog()
{
  const auto start = std::chrono::steady_clock::now();
  const auto dir = scratch("table1");
  std::vector<SceneDataset> datasets;
  std::uint64_t seed = 100;
  for (const char* name : {"cube", "sphere", "cylinder"}) {
    DatasetConfig cfg;
    cfg.object_id = name;
    datasets.push_back(generate_object_dataset(*builtin_fixture(name), dir, seed++, cfg));
  }
  const std::vector<std::size_t> shots{1, 3, 9};
  Table1Options opts;  // 64^3 grid, 128x128 images
  const auto report = run_table1_eval(datasets, shots, 7, opts);
  write_table1_csv(report, shots, dir / "table1.csv");
  const double secs =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

  const auto csv = read_csv(dir / "table1.csv");
  bool shape = csv.size() == 3;
  for (const auto& row : csv)
    shape = shape && row.size() == 4;
  if (!shape)
    return {false, "table1.csv is not 2x3"};
  std::vector<double> above;
  for (std::size_t s = 0; s < 3; ++s)
    above.push_back(std::stod(csv[1][s + 1]));

  const auto& k = CameraIntrinsics{};
  const double tol = init_grid(Vec3::Zero(), opts.reconstruction.grid_side,
                               opts.reconstruction.grid_resolution)
                         .voxel_diagonal() /
                     (k.z_far - k.z_near);
  const bool trend = above[1] <= above[0] + tol && above[2] <= above[1] + tol;
  const bool one_shot = std::abs(above[0] - above[2]) < tol;
  const bool ok = trend && one_shot && secs < 60.0;
  return {ok, fmt("Above 1/3/9-shot = %.5f / %.5f / %.5f", above[0], above[1], above[2]) +
                  fmt(", tolerance %.5f, %.1f s", tol, secs)};
}

// AC 7
Outcome table2_analog()
{
  const PlannerConfig planner;
  bool ok = planner.gripper.max_width == 0.05;
  std::string detail;
  for (const auto& name : builtin_fixture_names()) {
    const auto row = evaluate_table2_object(name, *builtin_fixture(name), planner);
    auto q = [](const std::optional<double>& x) { return x ? fmt("%.4f", *x) : "N/A"; };
    detail += name + " " + q(row.topdown_q) + "/" + q(row.multiview_q) + "; ";
    if (name == "thin-box")
      ok = ok && !row.topdown_q && row.multiview_q && *row.multiview_q > 0.0;
    if (row.topdown_q)
      ok = ok && row.multiview_q && *row.multiview_q >= *row.topdown_q;
  }
  return {ok, "topdown/multiview Q: " + detail};
}

// AC 8
DepthImage random_blob(std::mt19937_64& rng)
{
  std::uniform_real_distribution<double> u(0.0, 1.0);
  DepthImage d(8, 8, 0.0);
  const double cu = 2.0 + 3.5 * u(rng), cv = 2.0 + 3.5 * u(rng);
  const double ru = 1.2 + 2.5 * u(rng), rv = 1.2 + 2.5 * u(rng);
  const double base = 0.45 + 0.1 * u(rng), slope = 0.004 * (u(rng) - 0.5);
  for (int v = 0; v < 8; ++v)
    for (int x = 0; x < 8; ++x) {
      const double a = (x - cu) / ru, b = (v - cv) / rv;
      if (a * a + b * b <= 1.0)
        d.at(x, v) = base + slope * x + 0.0005 * u(rng);
    }
  return d;
}

Outcome grasp_oracle()
{
  CameraIntrinsics k;
  k.width = k.height = 8;
  k.fx = k.fy = 100.0;
  k.cx = k.cy = 3.5;
  const CameraView view(k, look_at(Vec3(0, 0, 0.5), Vec3::Zero(), Vec3::UnitY()));
  GripperSpec g;
  g.finger_radius = 0.001;

  std::mt19937_64 rng(23);
  bool ok = true;
  int positive = 0;
  for (int trial = 0; trial < 50; ++trial) {
    const DepthImage d = random_blob(rng);
    double brute = 0.0;
    for (int a = 0; a < 64; ++a)
      for (int b = 0; b < 64; ++b) {
        const int ua = a % 8, va = a / 8, ub = b % 8, vb = b / 8;
        if (a == b || d.at(ua, va) <= 0.0 || d.at(ub, vb) <= 0.0)
          continue;
        const auto c = make_candidate({ua, va, d.at(ua, va)}, {ub, vb, d.at(ub, vb)}, k);
        brute = std::max(brute, score_grasp(c, d, view, g));
      }
    const auto pool = sample_antipodal_candidates(d, view, g, 100000, 1);
    const double planner = pool.empty() ? 0.0 : cem_refine(d, view, g, pool, {0, 100, 0.1}, 1).quality;
    ok = ok && planner == brute;
    positive += brute > 0.0 ? 1 : 0;
  }

  const Vec3 axis = Vec3::UnitX();
  auto tilt = [&](double deg) {
    return Vec3(Eigen::AngleAxisd(deg * kPi / 180.0, Vec3::UnitZ()) * (-axis));
  };
  const double cone = std::atan(0.5) * 180.0 / kPi;
  const bool closure = check_force_closure(tilt(0), axis, axis, 0.5) &&
                       check_force_closure(tilt(20), axis, axis, 0.5) &&
                       !check_force_closure(tilt(90), axis, axis, 0.5) &&
                       check_force_closure(tilt(cone - 1e-6), axis, axis, 0.5) &&
                       !check_force_closure(tilt(cone + 1e-6), axis, axis, 0.5);
  return {ok && closure && positive > 0,
          fmt("50 blobs (%.0f with a grasp) match enumeration; cone threshold %.4f deg",
              positive, cone)};
}

// AC 9
TriangleMesh random_fixture(std::mt19937_64& rng)
{
  std::uniform_real_distribution<double> u(0.0, 1.0);
  switch (rng() % 3) {
  case 0:
    return make_box(Vec3(0.01 + 0.06 * u(rng), 0.01 + 0.06 * u(rng), 0.01 + 0.06 * u(rng)));
  case 1:
    return make_uv_sphere(0.006 + 0.03 * u(rng));
  default:
    return make_cylinder(0.006 + 0.025 * u(rng), 0.02 + 0.08 * u(rng));
  }
}

Outcome cem_checks()
{
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const GripperSpec g;
  const CemConfig cem;
  bool ok = true;
  int fixtures = 0, with_pool = 0;
  for (; fixtures < 100; ++fixtures) {
    const auto mesh = random_fixture(rng);
    const double az = 2 * kPi * u(rng), el = 0.2 + 1.2 * u(rng);
    const Vec3 eye = 0.4 * Vec3(std::cos(el) * std::cos(az), std::cos(el) * std::sin(az),
                                std::sin(el));
    const CameraView view({}, look_at(eye, Vec3::Zero(), Vec3::UnitZ()));
    const auto depth = render_depth(mesh, view);
    const auto pool = sample_antipodal_candidates(depth, view, g, 200, fixtures);
    if (pool.empty())
      continue;
    ++with_pool;
    double pool_max = 0.0;
    for (const auto& c : pool)
      pool_max = std::max(pool_max, score_grasp(c, depth, view, g));
    const std::uint64_t seed = 1000 + fixtures;
    const auto a = cem_refine(depth, view, g, pool, cem, seed);
    for (int run = 0; run < 2; ++run) {
      const auto b = cem_refine(depth, view, g, pool, cem, seed);
      ok = ok && a.candidate == b.candidate && a.quality == b.quality;
    }
    ok = ok && a.quality >= pool_max;
  }
  return {ok && with_pool > 50,
          fmt("%.0f of %.0f random fixtures had candidates; 3 identical runs each, Q >= pool max",
              with_pool, fixtures)};
}

// AC 10
Outcome fusion_checks()
{
  std::mt19937_64 rng(31);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::normal_distribution<double> n(0.0, 1.5);
  auto toy = [&](std::size_t views, std::uint32_t res) {
    std::pair<FreeSpaceEvidence, VoxelGrid> t{{}, init_grid(Vec3::Zero(), 1.0, res)};
    auto& [ev, target] = t;
    for (std::size_t i = 0; i < target.voxel_count(); ++i)
      target[i] = u(rng) < 0.4 ? 1.0f : 0.0f;
    for (std::size_t v = 0; v < views; ++v) {
      std::vector<double> e(target.voxel_count());
      for (std::size_t i = 0; i < e.size(); ++i)
        e[i] = target[i] == 0.0f ? (u(rng) < 0.8 ? 1.0 : u(rng)) : 0.3 * u(rng);
      ev.push_back(std::move(e));
    }
    return t;
  };

  double worst = 0.0;
  for (int s = 0; s < 10; ++s) {
    const auto [ev, target] = toy(1 + s % 4, 5);
    FusionWeights w;
    for (std::size_t i = 0; i < ev.size(); ++i)
      w.w.push_back(n(rng));
    w.b = n(rng);
    worst = std::max(worst, fusion_gradient_check(w, ev, target, 1e-5).max_relative_error);
  }
  const auto [ev, target] = toy(3, 6);
  const auto run = train_fusion_weights(ev, target, 0.05, 100, 1);
  bool decreasing = run.losses.size() == 101;
  for (std::size_t i = 1; i < run.losses.size(); ++i)
    decreasing = decreasing && run.losses[i] < run.losses[i - 1];
  return {worst < 1e-4 && decreasing,
          fmt("max gradient relative error %.3g; loss %.5f -> %.5f over 100 steps", worst,
              run.losses.front(), run.losses.back())};
}

// AC 11
Outcome end_to_end()
{
  const auto start = std::chrono::steady_clock::now();
  const auto dir = scratch("e2e");
  std::ostringstream out, err;
  const int gen = cli::run({"gen-data", "--fixture", "cylinder", "--out", dir.string(), "--seed",
                            "11", "--views-train", "20", "--views-test", "10"},
                           out, err);
  const std::string manifest = (dir / "cylinder" / "manifest.json").string();
  const int rec = cli::run({"reconstruct", "--manifest", manifest, "--views", "6", "--grid-res",
                            "64", "--out", (dir / "grid.bin").string()},
                           out, err);
  const int plan = cli::run({"plan", "--manifest", manifest, "--views", "6", "--mode",
                             "predicted", "--out", (dir / "plan.csv").string()},
                            out, err);
  const double secs =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  const bool ok = gen == cli::kExitOk && rec == cli::kExitOk && plan == cli::kExitOk &&
                  secs < 120.0;
  return {ok, fmt("exit codes %.0f/%.0f/%.0f", gen, rec, plan) + fmt(", %.1f s", secs) +
                  (err.str().empty() ? "" : "; " + err.str())};
}

}  // namespace

int main()
{
  const std::vector<std::function<Outcome()>> criteria{
      geometry_round_trip, render_correctness, quantization,   carving_order,
      hull_conservativeness, table1_analog,    table2_analog,  grasp_oracle,
      cem_checks,          fusion_checks,      end_to_end};
  // Runtime bounds in seconds; 0 means none.
  const double budget[] = {1, 10, 0, 0, 0, 60, 0, 0, 0, 0, 120};

  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = criteria[i]();
    } catch (const std::exception& e) {
      o = {false, std::string("threw: ") + e.what()};
    }
    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (budget[i] > 0 && secs >= budget[i]) {
      o.pass = false;
      o.detail += fmt(" (over the %.0f s budget)", budget[i]);
    }
    failed += o.pass ? 0 : 1;
    std::printf("AC %zu: %s [%.2f s] %s\n", i + 1, o.pass ? "PASS" : "FAIL", secs,
                o.detail.c_str());
    std::fflush(stdout);
  }
  std::printf("%d of %zu criteria failed\n", failed, criteria.size());
  return failed == 0 ? 0 : 1;
}
