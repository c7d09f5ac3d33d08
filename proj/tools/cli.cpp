#include "cli.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <ostream>
#include <set>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "graspforge/dataset.hpp"
#include "graspforge/errors.hpp"
#include "graspforge/mesh.hpp"
#include "graspforge/seeding.hpp"

namespace graspforge::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

class FieldReader
{
public:
  FieldReader(const json& j, std::string path) : j_(j), path_(std::move(path))
  {
    if (!j_.is_object())
      throw ParseError("config: '" + display() + "' must be an object");
  }

  void allow(std::initializer_list<const char*> keys) const
  {
    std::set<std::string> known(keys.begin(), keys.end());
    for (const auto& [key, _] : j_.items())
      if (!known.count(key))
        throw ParseError("config: unknown field '" + qualified(key) + "'");
  }

  void number(const char* key, double& out) const
  {
    if (!j_.contains(key))
      return;
    const auto& v = j_.at(key);
    if (!v.is_number() || !std::isfinite(v.get<double>()))
      throw ParseError("config: field '" + qualified(key) + "' must be a finite number");
    out = v.get<double>();
  }

  template <typename U>
  void count(const char* key, U& out) const
  {
    if (!j_.contains(key))
      return;
    const auto& v = j_.at(key);
    if (!v.is_number_unsigned())
      throw ParseError("config: field '" + qualified(key) +
                       "' must be a non-negative integer");
    out = static_cast<U>(v.get<std::uint64_t>());
  }

  const json* child(const char* key) const
  {
    return j_.contains(key) ? &j_.at(key) : nullptr;
  }

  std::string qualified(const std::string& key) const
  {
    return path_.empty() ? key : path_ + "." + key;
  }

private:
  std::string display() const { return path_.empty() ? "<root>" : path_; }

  const json& j_;
  std::string path_;
};

std::string format_value(double v)
{
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.9g", v);
  return buf;
}

TriangleMesh load_mesh_or_fixture(const std::string& mesh, const std::string& fixture)
{
  if (!fixture.empty()) {
    auto m = builtin_fixture(fixture);
    if (!m)
      throw InvalidArgument("unknown fixture '" + fixture + "'");
    return *m;
  }
  if (!fs::is_regular_file(mesh))
    throw IoError("mesh file not found: " + mesh);
  return read_obj(fs::path(mesh));
}

void apply_grid_flags(ReconstructionConfig& r, std::uint32_t res, double side)
{
  if (res > 0)
    r.grid_resolution = res;
  if (side > 0.0)
    r.grid_side = side;
}

}  // namespace

RunConfig parse_run_config(const json& j)
{
  RunConfig cfg;
  FieldReader root(j, "");
  root.allow({"seed", "num_candidates", "gripper", "cem", "table_normal", "reconstruction"});
  root.count("num_candidates", cfg.planner.num_candidates);
  cfg.has_seed = root.child("seed") != nullptr;
  root.count("seed", cfg.planner.seed);

  if (const json* g = root.child("gripper")) {
    FieldReader r(*g, "gripper");
    r.allow({"max_width", "finger_radius", "friction_mu"});
    r.number("max_width", cfg.planner.gripper.max_width);
    r.number("finger_radius", cfg.planner.gripper.finger_radius);
    r.number("friction_mu", cfg.planner.gripper.friction_mu);
    try {
      cfg.planner.gripper.validate();
    } catch (const InvalidArgument& e) {
      throw ParseError(std::string("config: ") + e.what());
    }
  }
  if (const json* c = root.child("cem")) {
    FieldReader r(*c, "cem");
    r.allow({"iters", "population", "elite_frac"});
    r.count("iters", cfg.planner.cem.iters);
    r.count("population", cfg.planner.cem.population);
    r.number("elite_frac", cfg.planner.cem.elite_frac);
    if (!(cfg.planner.cem.elite_frac > 0.0 && cfg.planner.cem.elite_frac <= 1.0))
      throw ParseError("config: field 'cem.elite_frac' must lie in (0, 1]");
  }
  if (const json* n = root.child("table_normal")) {
    if (!n->is_array() || n->size() != 3)
      throw ParseError("config: field 'table_normal' must be an array of 3 numbers");
    Vec3 v;
    for (int i = 0; i < 3; ++i) {
      if (!(*n)[static_cast<std::size_t>(i)].is_number())
        throw ParseError("config: field 'table_normal' must be an array of 3 numbers");
      v[i] = (*n)[static_cast<std::size_t>(i)].get<double>();
    }
    if (!(v.norm() > 0.0))
      throw ParseError("config: field 'table_normal' must be non-zero");
    cfg.planner.table_normal = v.normalized();
  }
  if (const json* rj = root.child("reconstruction")) {
    FieldReader r(*rj, "reconstruction");
    r.allow({"grid_resolution", "grid_side", "threshold"});
    r.count("grid_resolution", cfg.reconstruction.grid_resolution);
    r.number("grid_side", cfg.reconstruction.grid_side);
    r.number("threshold", cfg.reconstruction.threshold);
    if (cfg.reconstruction.grid_resolution == 0 || !(cfg.reconstruction.grid_side > 0.0))
      throw ParseError("config: reconstruction grid must be non-empty");
  }
  return cfg;
}

RunConfig load_run_config(const fs::path& path)
{
  std::ifstream in(path, std::ios::binary);
  if (!in)
    throw IoError("cannot open config " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
  try {
    return parse_run_config(j);
  } catch (const ParseError& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
}

std::uint64_t default_seed()
{
  const char* s = std::getenv("GRASPFORGE_SEED");
  if (!s || !*s)
    return 0;
  char* end = nullptr;
  const unsigned long long v = std::strtoull(s, &end, 10);
  return (end && *end == '\0') ? v : 0;
}

void write_plan_csv(const std::string& object, const std::vector<PlanRow>& rows,
                    const std::optional<Grasp>& best, std::size_t best_view_index,
                    const fs::path& path)
{
  if (path.has_parent_path())
    fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out)
    throw IoError("cannot write " + path.string());
  auto line = [&](const std::string& view, double elev_deg, const std::optional<Grasp>& g) {
    out << object << ',' << view << ',' << format_value(elev_deg) << ','
        << (g ? 1 : 0);
    if (g)
      out << ',' << format_value(g->quality) << ',' << format_value(g->p.x()) << ','
          << format_value(g->p.y()) << ',' << format_value(g->p.z()) << ','
          << format_value(g->phi) << ',' << format_value(g->theta) << ','
          << format_value(g->width);
    else
      out << ",,,,,,,";
    out << '\n';
  };
  out << "object,view_index,elevation_deg,found,Q,px,py,pz,phi_rad,theta_rad,width_m\n";
  double best_elev = 0.0;
  for (const auto& r : rows) {
    line(std::to_string(r.view_index), r.elevation_deg, r.grasp);
    if (r.view_index == best_view_index)
      best_elev = r.elevation_deg;
  }
  // The winning grasp, repeated under view_index "best".
  line("best", best ? best_elev : 0.0, best);
  if (!out)
    throw IoError("failed while writing " + path.string());
}

namespace {

int cmd_gen_data(const std::string& mesh, const std::string& fixture, const fs::path& out_dir,
                 std::uint64_t seed, DatasetConfig config, std::ostream& out)
{
  const TriangleMesh m = load_mesh_or_fixture(mesh, fixture);
  if (config.object_id.empty())
    config.object_id = fixture.empty() ? fs::path(mesh).stem().string() : fixture;
  const auto ds = generate_object_dataset(m, out_dir, seed, config);
  out << ds.resolve("manifest.json").string() << '\n';
  return kExitOk;
}

int cmd_reconstruct(const fs::path& manifest, std::size_t k, std::uint64_t seed,
                    const RunConfig& cfg, const fs::path& out_path, std::ostream& out)
{
  const auto ds = read_manifest(manifest);
  const auto test = load_views(ds, ds.test_views);
  std::vector<CameraView> cams;
  for (const auto& v : test)
    cams.push_back(v.camera);
  const auto picked = select_input_views(cams, k, derive_seed(seed, "reconstruct"), true);
  std::vector<RgbImage> images;
  std::vector<CameraView> views;
  std::vector<DepthImage> depths;
  for (auto i : picked) {
    images.push_back(test[i].rgb);
    views.push_back(test[i].camera);
    depths.push_back(test[i].depth);
  }
  const auto grid = reconstruct_grid(images, views, cfg.reconstruction, depths);
  write_voxel_grid(out_path, grid);
  out << "occupied " << grid.occupied_count(static_cast<float>(cfg.reconstruction.threshold))
      << " of " << grid.voxel_count() << " voxels\n";
  return kExitOk;
}

int cmd_table1(const std::vector<std::string>& manifests, const std::vector<std::size_t>& shots,
               std::uint64_t seed, const Table1Options& options, const fs::path& out_path,
               std::ostream& out)
{
  std::vector<SceneDataset> datasets;
  for (const auto& m : manifests)
    datasets.push_back(read_manifest(m));
  const auto report = run_table1_eval(datasets, shots, seed, options);
  write_table1_csv(report, shots, out_path);
  for (const auto& [stage, ms] : report.runtime_ms)
    out << stage << "_ms " << format_value(ms) << '\n';
  return kExitOk;
}

int cmd_table2(std::vector<std::string> fixtures, const std::vector<std::string>& meshes,
               const PlannerConfig& planner, const fs::path& out_path, std::ostream& out)
{
  std::vector<std::pair<std::string, TriangleMesh>> objects;
  if (fixtures.empty() && meshes.empty())
    fixtures = builtin_fixture_names();
  for (const auto& f : fixtures)
    objects.emplace_back(f, load_mesh_or_fixture("", f));
  for (const auto& m : meshes)
    objects.emplace_back(fs::path(m).stem().string(), load_mesh_or_fixture(m, ""));
  const auto rows = run_table2_eval(objects, planner);
  table2_report(rows);
  write_table2_csv(rows, out_path);
  for (const auto& r : rows)
    out << r.object << ' ' << r.winner << '\n';
  return kExitOk;
}

int cmd_plan(const fs::path& manifest, std::size_t k, const std::string& mode,
             const RunConfig& cfg, const fs::path& out_path, std::ostream& out)
{
  const auto ds = read_manifest(manifest);
  const auto test = load_views(ds, ds.test_views);
  std::vector<CameraView> cams;
  for (const auto& v : test)
    cams.push_back(v.camera);
  const auto picked = select_input_views(cams, k, derive_seed(cfg.planner.seed, "plan"), true);

  std::vector<RgbImage> images;
  std::vector<CameraView> views;
  std::vector<DepthImage> depths;
  for (auto i : picked) {
    images.push_back(test[i].rgb);
    views.push_back(test[i].camera);
    depths.push_back(test[i].depth);
  }
  if (mode == "predicted")
    depths = predict_depth_maps(images, views, cfg.reconstruction, views, depths);

  const auto plan = plan_grasp_multiview(depths, views, cfg.planner);
  std::vector<PlanRow> rows;
  for (std::size_t i = 0; i < picked.size(); ++i)
    rows.push_back({picked[i], views[i].elevation() * 180.0 / kPi, plan.per_view[i]});
  const std::size_t best_index = plan.best ? picked[plan.best->source_view] : 0;
  write_plan_csv(ds.object_id, rows, plan.best, best_index, out_path);

  if (!plan.best) {
    out << "no grasp found in any view\n";
    return kExitNoGrasp;
  }
  out << "best Q " << format_value(plan.best->quality) << " from view " << best_index << '\n';
  return kExitOk;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err)
{
  CLI::App app{"Multi-view grasp planning toolkit"};
  app.require_subcommand(1);
  std::uint64_t seed = default_seed();
  std::vector<CLI::Option*> seed_flags;
  std::string config_path;

  auto* gen = app.add_subcommand("gen-data", "Render a synthetic multi-view dataset");
  std::string mesh, fixture, out_dir;
  DatasetConfig dcfg;
  dcfg.object_id.clear();
  gen->add_option("--mesh", mesh, "OBJ mesh");
  gen->add_option("--fixture", fixture, "Built-in fixture name");
  gen->add_option("--out", out_dir, "Output root")->required();
  seed_flags.push_back(gen->add_option("--seed", seed));
  gen->add_option("--views-train", dcfg.views_train)->capture_default_str();
  gen->add_option("--views-test", dcfg.views_test)->capture_default_str();
  gen->add_option("--object-id", dcfg.object_id, "Defaults to the mesh stem");
  gen->add_option("--radius", dcfg.radius)->capture_default_str();

  auto* rec = app.add_subcommand("reconstruct", "Carve a voxel grid from dataset views");
  std::string manifest, out_file;
  std::size_t views = 1;
  std::uint32_t grid_res = 0;
  double grid_side = 0.0;
  rec->add_option("--manifest", manifest)->required();
  rec->add_option("--views", views, "Input views (top-down first)")->capture_default_str();
  rec->add_option("--grid-res", grid_res);
  rec->add_option("--grid-side", grid_side);
  rec->add_option("--config", config_path);
  seed_flags.push_back(rec->add_option("--seed", seed));
  rec->add_option("--out", out_file)->required();

  auto* t1 = app.add_subcommand("table1", "Depth prediction error vs. number of shots");
  std::vector<std::string> manifests;
  std::vector<std::size_t> shots{1, 3, 9};
  std::string diag_dir;
  bool pred_is_gt = false;
  t1->add_option("--manifest", manifests)->required();
  t1->add_option("--shots", shots)->delimiter(',')->capture_default_str();
  t1->add_option("--diag-dir", diag_dir, "Write depth difference PGMs here");
  t1->add_flag("--debug-pred-equals-gt", pred_is_gt);
  t1->add_option("--grid-res", grid_res);
  t1->add_option("--grid-side", grid_side);
  t1->add_option("--config", config_path);
  seed_flags.push_back(t1->add_option("--seed", seed));
  t1->add_option("--out", out_file)->required();

  auto* t2 = app.add_subcommand("table2", "Top-down vs. multi-view grasp quality");
  std::vector<std::string> fixtures, meshes;
  t2->add_option("--fixture", fixtures, "Built-in fixtures (default: all)");
  t2->add_option("--mesh", meshes, "OBJ meshes");
  t2->add_option("--config", config_path);
  seed_flags.push_back(t2->add_option("--seed", seed));
  t2->add_option("--out", out_file)->required();

  auto* plan = app.add_subcommand("plan", "Plan a grasp from dataset views");
  std::string mode = "gt";
  plan->add_option("--manifest", manifest)->required();
  plan->add_option("--views", views)->capture_default_str();
  plan->add_option("--mode", mode)->check(CLI::IsMember({"gt", "predicted"}))->capture_default_str();
  plan->add_option("--config", config_path);
  seed_flags.push_back(plan->add_option("--seed", seed));
  plan->add_option("--out", out_file)->required();

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitError;
  }

  try {
    RunConfig cfg = config_path.empty() ? RunConfig{} : load_run_config(config_path);
    // Precedence: --seed, then the config file, then GRASPFORGE_SEED.
    const bool seed_flag = std::any_of(seed_flags.begin(), seed_flags.end(),
                                       [](const CLI::Option* o) { return o->count() > 0; });
    if (seed_flag || !cfg.has_seed)
      cfg.planner.seed = seed;
    seed = cfg.planner.seed;
    apply_grid_flags(cfg.reconstruction, grid_res, grid_side);

    if (*gen) {
      if (mesh.empty() == fixture.empty())
        throw InvalidArgument("gen-data: give exactly one of --mesh or --fixture");
      return cmd_gen_data(mesh, fixture, out_dir, seed, dcfg, out);
    }
    if (*rec)
      return cmd_reconstruct(manifest, views, seed, cfg, out_file, out);
    if (*t1) {
      Table1Options opts;
      opts.reconstruction = cfg.reconstruction;
      opts.debug_pred_equals_gt = pred_is_gt;
      if (!diag_dir.empty())
        opts.diagnostics_dir = diag_dir;
      return cmd_table1(manifests, shots, seed, opts, out_file, out);
    }
    if (*t2)
      return cmd_table2(fixtures, meshes, cfg.planner, out_file, out);
    if (*plan)
      return cmd_plan(manifest, views, mode, cfg, out_file, out);
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return kExitError;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitError;
  }
  return kExitError;
}

}  // namespace graspforge::cli
