#include "graspforge/eval.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>

#include "graspforge/errors.hpp"
#include "graspforge/image_io.hpp"
#include "graspforge/render.hpp"
#include "graspforge/seeding.hpp"

namespace graspforge {

namespace fs = std::filesystem;

namespace {

using Clock = std::chrono::steady_clock;

double elapsed_ms(Clock::time_point since)
{
  return std::chrono::duration<double, std::milli>(Clock::now() - since).count();
}

std::string format_value(double v)
{
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.9g", v);
  return buf;
}

std::ofstream open_csv(const fs::path& path)
{
  if (path.has_parent_path())
    fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out)
    throw IoError("cannot write " + path.string());
  return out;
}

}  // namespace

void EvalReport::validate() const
{
  std::set<std::pair<std::string, std::string>> seen;
  for (const auto& r : rows) {
    if (!std::isfinite(r.value))
      throw ValidationError("report row " + r.label + "/" + r.metric + " is not finite");
    if (!seen.emplace(r.label, r.metric).second)
      throw ValidationError("report row " + r.label + "/" + r.metric + " is repeated");
  }
}

std::optional<double> EvalReport::value(const std::string& label,
                                        const std::string& metric) const
{
  for (const auto& r : rows)
    if (r.label == label && r.metric == metric)
      return r.value;
  return std::nullopt;
}

std::string shot_label(std::size_t k) { return std::to_string(k) + "-shot"; }

Image<std::uint8_t> depth_difference_image(const DepthImage& pred, const DepthImage& gt,
                                           double z_near, double z_far)
{
  if (!pred.same_shape(gt))
    throw DimensionMismatch("depth_difference_image: image sizes differ");
  Image<std::uint8_t> out(gt.width(), gt.height(), 0);
  const double range = z_far - z_near;
  for (std::size_t i = 0; i < gt.size(); ++i) {
    const double p = pred.pixels()[i];
    const double g = gt.pixels()[i];
    const bool pv = is_valid_depth(p), gv = is_valid_depth(g);
    std::uint8_t level = 0;
    if (pv != gv)
      level = 255;
    else if (pv)
      level = static_cast<std::uint8_t>(
          std::lround(255.0 * std::min(1.0, 10.0 * std::abs(p - g) / range)));
    out.pixels()[i] = level;
  }
  return out;
}

EvalReport run_table1_eval(const std::vector<SceneDataset>& datasets,
                           const std::vector<std::size_t>& shots, std::uint64_t seed,
                           const Table1Options& options)
{
  if (datasets.empty())
    throw EmptyInput("run_table1_eval: no datasets");
  if (shots.empty())
    throw EmptyInput("run_table1_eval: no shot counts");

  EvalReport report;
  std::vector<double> above(shots.size(), 0.0), mean(shots.size(), 0.0);
  double load_ms = 0.0, predict_ms = 0.0;

  for (const auto& ds : datasets) {
    auto start = Clock::now();
    const auto test = load_views(ds, ds.test_views);
    load_ms += elapsed_ms(start);

    std::vector<CameraView> cams;
    std::optional<std::size_t> top;
    for (std::size_t i = 0; i < test.size(); ++i) {
      cams.push_back(test[i].camera);
      if (is_topdown(test[i].camera) && !top)
        top = i;
    }
    if (!top)
      throw InsufficientViews(ds.object_id + ": no top-down test view");

    for (std::size_t s = 0; s < shots.size(); ++s) {
      start = Clock::now();
      const std::size_t k = shots[s];
      const auto picked =
          select_input_views(cams, k, derive_seed(derive_seed(seed, ds.object_id), k), true);
      std::vector<RgbImage> images;
      std::vector<CameraView> views;
      std::vector<DepthImage> depths;
      for (auto i : picked) {
        images.push_back(test[i].rgb);
        views.push_back(test[i].camera);
        depths.push_back(test[i].depth);
      }

      std::vector<DepthImage> pred;
      if (options.debug_pred_equals_gt) {
        for (const auto& v : test)
          pred.push_back(v.depth);
      } else {
        pred = predict_depth_maps(images, views, options.reconstruction, cams, depths);
      }
      predict_ms += elapsed_ms(start);

      double sum = 0.0;
      for (std::size_t i = 0; i < test.size(); ++i) {
        const auto& k_i = test[i].camera.intrinsics();
        const double err = reconstruction_error(pred[i], test[i].depth, k_i.z_near, k_i.z_far);
        sum += err;
        if (i == *top)
          above[s] += err;
        if (options.diagnostics_dir) {
          char name[96];
          std::snprintf(name, sizeof name, "%s_%zushot_view%03zu.pgm",
                        ds.object_id.c_str(), k, i);
          fs::create_directories(*options.diagnostics_dir);
          write_pgm8(*options.diagnostics_dir / name,
                     depth_difference_image(pred[i], test[i].depth, k_i.z_near, k_i.z_far));
        }
      }
      mean[s] += sum / static_cast<double>(test.size());
    }
  }

  const double n = static_cast<double>(datasets.size());
  for (std::size_t s = 0; s < shots.size(); ++s)
    report.rows.push_back({"Above", shot_label(shots[s]), above[s] / n});
  for (std::size_t s = 0; s < shots.size(); ++s)
    report.rows.push_back({"Dataset", shot_label(shots[s]), mean[s] / n});
  report.runtime_ms = {{"load", load_ms}, {"predict", predict_ms}};
  report.validate();
  return report;
}

void write_table1_csv(const EvalReport& report, const std::vector<std::size_t>& shots,
                      const fs::path& path)
{
  auto out = open_csv(path);
  out << "row";
  for (auto k : shots)
    out << ',' << shot_label(k);
  out << '\n';
  for (const char* row : {"Above", "Dataset"}) {
    out << row;
    for (auto k : shots) {
      const auto v = report.value(row, shot_label(k));
      if (!v)
        throw ValidationError(std::string("table 1 report lacks ") + row + "/" +
                              shot_label(k));
      out << ',' << format_value(*v);
    }
    out << '\n';
  }
  if (!out)
    throw IoError("failed while writing " + path.string());
}

std::vector<CameraView> table2_cameras(const Table2Options& options)
{
  // Elevation 0: the ring lies on the circumference at table height.
  return ring_cameras(options.multiview_count, options.radius, Vec3::Zero(), 0.0, true,
                      options.intrinsics);
}

Table2Row evaluate_table2_object(const std::string& name, const TriangleMesh& mesh,
                                 const PlannerConfig& planner,
                                 const Table2Options& options)
{
  const TriangleMesh centred = recentered(mesh);
  const auto cams = table2_cameras(options);
  std::vector<DepthImage> depths;
  for (const auto& c : cams)
    depths.push_back(render_depth(centred, c));

  Table2Row row;
  row.object = name;
  if (auto g = plan_grasp_single_view(depths.front(), cams.front(), planner, 0))
    row.topdown_q = g->quality;
  if (auto best = plan_grasp_multiview(depths, cams, planner).best)
    row.multiview_q = best->quality;

  if (!row.topdown_q && !row.multiview_q)
    row.winner = "none";
  else if (!row.topdown_q || (row.multiview_q && *row.multiview_q > *row.topdown_q))
    row.winner = "multiview";
  else if (!row.multiview_q || *row.topdown_q > *row.multiview_q)
    row.winner = "topdown";
  else
    row.winner = "tie";
  return row;
}

std::vector<Table2Row>
run_table2_eval(const std::vector<std::pair<std::string, TriangleMesh>>& objects,
                const PlannerConfig& planner, const Table2Options& options)
{
  std::vector<Table2Row> rows;
  for (const auto& [name, mesh] : objects)
    rows.push_back(evaluate_table2_object(name, mesh, planner, options));
  return rows;
}

EvalReport table2_report(const std::vector<Table2Row>& rows)
{
  EvalReport report;
  for (const auto& r : rows) {
    if (r.topdown_q)
      report.rows.push_back({r.object, "topdown_Q", *r.topdown_q});
    if (r.multiview_q)
      report.rows.push_back({r.object, "multiview_Q", *r.multiview_q});
  }
  report.validate();
  return report;
}

void write_table2_csv(const std::vector<Table2Row>& rows, const fs::path& path)
{
  auto out = open_csv(path);
  auto cell = [](const std::optional<double>& q) {
    return q ? format_value(*q) : std::string("N/A");
  };
  out << "object,topdown_Q,multiview_Q,winner\n";
  for (const auto& r : rows)
    out << r.object << ',' << cell(r.topdown_q) << ',' << cell(r.multiview_q) << ','
        << r.winner << '\n';
  if (!out)
    throw IoError("failed while writing " + path.string());
}

}  // namespace graspforge
