#include "graspforge/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <random>

#include <nlohmann/json.hpp>

#include "graspforge/errors.hpp"
#include "graspforge/image_io.hpp"
#include "graspforge/render.hpp"
#include "graspforge/seeding.hpp"

namespace graspforge {

namespace fs = std::filesystem;

namespace {

std::string view_stem(std::size_t i)
{
  char buf[32];
  std::snprintf(buf, sizeof buf, "view_%03zu", i);
  return buf;
}

void write_json(const fs::path& path, const nlohmann::json& j)
{
  std::ofstream out(path, std::ios::binary);
  if (!out)
    throw IoError("cannot write " + path.string());
  out << j.dump(2) << '\n';
  if (!out)
    throw IoError("failed while writing " + path.string());
}

nlohmann::json read_json(const fs::path& path)
{
  std::ifstream in(path, std::ios::binary);
  if (!in)
    throw IoError("cannot open " + path.string());
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
}

std::vector<ViewEntry> render_split(const TriangleMesh& mesh,
                                    const std::vector<CameraView>& cameras,
                                    const fs::path& root, const std::string& split,
                                    const DatasetConfig& config)
{
  fs::create_directories(root / split);
  std::vector<ViewEntry> entries;
  for (std::size_t i = 0; i < cameras.size(); ++i) {
    const auto& cam = cameras[i];
    const std::string stem = split + "/" + view_stem(i);
    ViewEntry e{stem + ".json", stem + ".ppm", stem + ".depth.pgm", stem + ".mask.pgm"};

    const DepthImage depth = render_depth(mesh, cam);
    const RgbImage rgb = render_rgb(mesh, cam, headlight(cam), config.background);
    const auto& k = cam.intrinsics();

    write_json(root / e.camera, camera_to_json(cam));
    write_ppm(root / e.rgb, rgb);
    write_quantized_depth(root / e.depth, root / e.mask,
                          quantize_depth(depth, k.z_near, k.z_far, config.bit_depth));
    entries.push_back(std::move(e));
  }
  return entries;
}

nlohmann::json entries_to_json(const std::vector<ViewEntry>& entries)
{
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& e : entries)
    arr.push_back({{"camera", e.camera.generic_string()},
                   {"rgb", e.rgb.generic_string()},
                   {"depth", e.depth.generic_string()},
                   {"mask", e.mask.generic_string()}});
  return arr;
}

std::string field_string(const nlohmann::json& j, const std::string& field,
                         const std::string& where)
{
  if (!j.is_object() || !j.contains(field))
    throw ParseError(where + ": missing field '" + field + "'");
  if (!j.at(field).is_string())
    throw ParseError(where + ": field '" + field + "' must be a string");
  return j.at(field).get<std::string>();
}

std::vector<ViewEntry> entries_from_json(const nlohmann::json& j, const std::string& field,
                                         const std::string& where)
{
  if (!j.contains(field))
    throw ParseError(where + ": missing field '" + field + "'");
  const auto& arr = j.at(field);
  if (!arr.is_array())
    throw ParseError(where + ": field '" + field + "' must be an array");
  std::vector<ViewEntry> out;
  for (std::size_t i = 0; i < arr.size(); ++i) {
    const std::string at = where + ": " + field + "[" + std::to_string(i) + "]";
    out.push_back({field_string(arr[i], "camera", at), field_string(arr[i], "rgb", at),
                   field_string(arr[i], "depth", at), field_string(arr[i], "mask", at)});
  }
  return out;
}

void require_file(const fs::path& p)
{
  if (!fs::is_regular_file(p))
    throw ValidationError("referenced file does not exist: " + p.string());
}

}  // namespace

SceneDataset generate_object_dataset(const TriangleMesh& mesh, const fs::path& out_dir,
                                     std::uint64_t seed, const DatasetConfig& config)
{
  if (mesh.vertices.empty() || mesh.faces.empty())
    throw EmptyMesh("generate_object_dataset: mesh has no triangles");
  mesh.validate();
  if (config.views_train == 0 || config.views_test == 0)
    throw InvalidCount("generate_object_dataset: both splits need at least one view");
  if (config.object_id.empty() || config.object_id.find('/') != std::string::npos)
    throw InvalidArgument("generate_object_dataset: bad object id '" + config.object_id + "'");

  SceneDataset ds;
  ds.root = out_dir / config.object_id;
  ds.object_id = config.object_id;
  ds.mesh_path = "mesh.obj";
  fs::create_directories(ds.root);

  const TriangleMesh centred = recentered(mesh);
  const TriangleMesh train_mesh = colorize_mesh(centred, derive_seed(seed, "train-colors"));
  const TriangleMesh test_mesh = colorize_mesh(centred, derive_seed(seed, "test-colors"));
  write_obj(ds.resolve(ds.mesh_path), train_mesh);

  const Vec3 center = Vec3::Zero();
  const auto train_cams = sample_hemisphere_cameras(
      config.views_train, config.radius, center, derive_seed(seed, "train"), false,
      config.sampling);
  const auto test_cams = sample_hemisphere_cameras(
      config.views_test, config.radius, center, derive_seed(seed, "test"), true,
      config.sampling);

  ds.train_views = render_split(train_mesh, train_cams, ds.root, "train", config);
  ds.test_views = render_split(test_mesh, test_cams, ds.root, "test", config);
  write_manifest(ds, ds.resolve("manifest.json"));
  return ds;
}

void write_manifest(const SceneDataset& dataset, const fs::path& path)
{
  const nlohmann::json j = {{"object_id", dataset.object_id},
                            {"mesh", dataset.mesh_path.generic_string()},
                            {"train", entries_to_json(dataset.train_views)},
                            {"test", entries_to_json(dataset.test_views)}};
  if (path.has_parent_path())
    fs::create_directories(path.parent_path());
  write_json(path, j);
}

SceneDataset read_manifest(const fs::path& path)
{
  const auto j = read_json(path);
  const std::string where = path.string();
  if (!j.is_object())
    throw ParseError(where + ": manifest must be a JSON object");

  SceneDataset ds;
  ds.root = path.parent_path();
  ds.object_id = field_string(j, "object_id", where);
  ds.mesh_path = field_string(j, "mesh", where);
  ds.train_views = entries_from_json(j, "train", where);
  ds.test_views = entries_from_json(j, "test", where);

  require_file(ds.resolve(ds.mesh_path));
  std::size_t topdown = 0;
  for (const auto* split : {&ds.train_views, &ds.test_views}) {
    for (const auto& e : *split) {
      const LoadedView v = load_view(ds, e);
      if (split == &ds.test_views && is_topdown(v.camera))
        ++topdown;
    }
  }
  if (topdown != 1)
    throw ValidationError(where + ": expected exactly one top-down test view, found " +
                          std::to_string(topdown));
  return ds;
}

LoadedView load_view(const SceneDataset& dataset, const ViewEntry& entry)
{
  for (const auto* p : {&entry.camera, &entry.rgb, &entry.depth, &entry.mask})
    require_file(dataset.resolve(*p));
  require_file(sidecar_path(dataset.resolve(entry.depth)));

  const auto cam_path = dataset.resolve(entry.camera);
  CameraView camera = [&] {
    try {
      return camera_from_json(read_json(cam_path));
    } catch (const ParseError& e) {
      throw ParseError(cam_path.string() + ": " + e.what());
    }
  }();
  const auto& k = camera.intrinsics();

  RgbImage rgb = read_ppm(dataset.resolve(entry.rgb));
  const auto q = read_quantized_depth(dataset.resolve(entry.depth),
                                      dataset.resolve(entry.mask));
  Mask mask = read_mask(dataset.resolve(entry.mask));
  if (!rgb.same_shape(k.width, k.height))
    throw ValidationError(dataset.resolve(entry.rgb).string() +
                          ": image size differs from camera intrinsics");
  if (q.width != k.width || q.height != k.height)
    throw ValidationError(dataset.resolve(entry.depth).string() +
                          ": image size differs from camera intrinsics");
  return {std::move(camera), std::move(rgb), dequantize_depth(q), std::move(mask)};
}

std::vector<LoadedView> load_views(const SceneDataset& dataset,
                                   const std::vector<ViewEntry>& entries)
{
  std::vector<LoadedView> out;
  out.reserve(entries.size());
  for (const auto& e : entries)
    out.push_back(load_view(dataset, e));
  return out;
}

bool is_topdown(const CameraView& view)
{
  return std::abs(view.elevation() - kPi / 2.0) <= 1e-9;
}

std::vector<std::size_t> select_input_views(const std::vector<CameraView>& views,
                                            std::size_t k, std::uint64_t seed,
                                            bool require_topdown)
{
  if (k == 0)
    throw InvalidCount("select_input_views: k must be >= 1");
  if (k > views.size())
    throw InsufficientViews("select_input_views: requested " + std::to_string(k) +
                            " views, only " + std::to_string(views.size()) +
                            " available");

  std::vector<std::size_t> out;
  std::vector<std::size_t> rest;
  for (std::size_t i = 0; i < views.size(); ++i) {
    if (require_topdown && out.empty() && is_topdown(views[i]))
      out.push_back(i);
    else
      rest.push_back(i);
  }
  if (require_topdown && out.empty())
    throw InsufficientViews("select_input_views: no top-down view available");

  std::mt19937_64 rng(seed);
  std::shuffle(rest.begin(), rest.end(), rng);
  rest.resize(k - out.size());
  out.insert(out.end(), rest.begin(), rest.end());
  return out;
}

std::vector<std::size_t> select_input_views(const SceneDataset& dataset,
                                            std::size_t k, std::uint64_t seed,
                                            bool require_topdown)
{
  std::vector<CameraView> cams;
  for (const auto& e : dataset.test_views)
    cams.push_back(camera_from_json(read_json(dataset.resolve(e.camera))));
  return select_input_views(cams, k, seed, require_topdown);
}

}  // namespace graspforge
