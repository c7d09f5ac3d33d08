#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "graspforge/dataset.hpp"
#include "graspforge/grasp.hpp"
#include "graspforge/reconstruct.hpp"

namespace graspforge {

struct EvalRow
{
  std::string label;
  std::string metric;
  double value = 0.0;
};

struct EvalReport
{
  std::vector<EvalRow> rows;
  std::vector<std::pair<std::string, double>> runtime_ms;

  // Throws ValidationError on a non-finite value or a repeated (label, metric).
  void validate() const;
  std::optional<double> value(const std::string& label, const std::string& metric) const;
};

std::string shot_label(std::size_t k);  // "3-shot"

struct Table1Options
{
  ReconstructionConfig reconstruction{};
  // Replace predictions with the ground truth; every error must then be 0.
  bool debug_pred_equals_gt = false;
  // When set, |pred - gt| maps are written here as 8-bit PGMs.
  std::optional<std::filesystem::path> diagnostics_dir;
};

// For each shot count k and each dataset: k input test views (top-down first),
// predicted depth at every test view, reconstruction_error against the ground
// truth. Rows "Above" (the top-down test view) and "Dataset" (mean over test
// views) with metrics shot_label(k); multiple datasets are averaged.
EvalReport run_table1_eval(const std::vector<SceneDataset>& datasets,
                           const std::vector<std::size_t>& shots, std::uint64_t seed,
                           const Table1Options& options = {});

void write_table1_csv(const EvalReport& report, const std::vector<std::size_t>& shots,
                      const std::filesystem::path& path);

// Gray level of a depth-difference pixel: 255 * min(1, |pred_n - gt_n| * 10)
// on normalised depth, 255 where exactly one image is valid, 0 where neither.
Image<std::uint8_t> depth_difference_image(const DepthImage& pred, const DepthImage& gt,
                                           double z_near, double z_far);

struct Table2Row
{
  std::string object;
  std::optional<double> topdown_q;
  std::optional<double> multiview_q;
  std::string winner;  // "topdown", "multiview", "tie" or "none"
};

struct Table2Options
{
  double radius = 0.6;
  CameraIntrinsics intrinsics{};
  std::size_t multiview_count = 5;
};

// Cameras for the multi-view condition: the top-down view followed by a ring
// on the table-level circumference around the object.
std::vector<CameraView> table2_cameras(const Table2Options& options);

Table2Row evaluate_table2_object(const std::string& name, const TriangleMesh& mesh,
                                 const PlannerConfig& planner,
                                 const Table2Options& options = {});

std::vector<Table2Row>
run_table2_eval(const std::vector<std::pair<std::string, TriangleMesh>>& objects,
                const PlannerConfig& planner, const Table2Options& options = {});

EvalReport table2_report(const std::vector<Table2Row>& rows);

void write_table2_csv(const std::vector<Table2Row>& rows,
                      const std::filesystem::path& path);

}  // namespace graspforge
