#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "graspforge/geometry.hpp"
#include "graspforge/image.hpp"
#include "graspforge/mesh.hpp"

namespace graspforge {

// Paths are relative to SceneDataset::root (the directory holding the
// manifest).
struct ViewEntry
{
  std::filesystem::path camera;
  std::filesystem::path rgb;
  std::filesystem::path depth;  // quantized PGM with a JSON sidecar
  std::filesystem::path mask;   // doubles as the depth-valid mask
  friend bool operator==(const ViewEntry&, const ViewEntry&) = default;
};

struct SceneDataset
{
  std::filesystem::path root;
  std::string object_id;
  std::filesystem::path mesh_path;
  std::vector<ViewEntry> train_views;
  std::vector<ViewEntry> test_views;

  std::filesystem::path resolve(const std::filesystem::path& p) const { return root / p; }
  friend bool operator==(const SceneDataset&, const SceneDataset&) = default;
};

struct DatasetConfig
{
  std::string object_id = "object";
  std::size_t views_train = 20;
  std::size_t views_test = 10;
  double radius = 0.6;
  HemisphereSampling sampling{};
  int bit_depth = 16;
  Rgb8 background{};
};

// Recentres the mesh on the origin, colorizes it, renders the train split and
// a disjoint test split (which holds the one top-down view, re-coloured with
// its own seed) and writes <out_dir>/<object_id>/manifest.json last.
SceneDataset generate_object_dataset(const TriangleMesh& mesh,
                                     const std::filesystem::path& out_dir,
                                     std::uint64_t seed,
                                     const DatasetConfig& config = {});

void write_manifest(const SceneDataset& dataset, const std::filesystem::path& path);

// Parses and validates: every referenced file exists and loads, image sizes
// match the camera, and exactly one test view is top-down.
SceneDataset read_manifest(const std::filesystem::path& path);

struct LoadedView
{
  CameraView camera;
  RgbImage rgb;
  DepthImage depth;
  Mask mask;
};

LoadedView load_view(const SceneDataset& dataset, const ViewEntry& entry);
std::vector<LoadedView> load_views(const SceneDataset& dataset,
                                   const std::vector<ViewEntry>& entries);

bool is_topdown(const CameraView& view);

// k indices into `views`. With require_topdown the single top-down view comes
// first and the other k-1 are drawn without replacement.
std::vector<std::size_t> select_input_views(const std::vector<CameraView>& views,
                                            std::size_t k, std::uint64_t seed,
                                            bool require_topdown);

// Same, over the dataset's test views.
std::vector<std::size_t> select_input_views(const SceneDataset& dataset,
                                            std::size_t k, std::uint64_t seed,
                                            bool require_topdown);

}  // namespace graspforge
