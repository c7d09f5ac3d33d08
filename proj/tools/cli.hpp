#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "graspforge/eval.hpp"
#include "graspforge/grasp.hpp"
#include "graspforge/reconstruct.hpp"

namespace graspforge::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitNoGrasp = 1;
inline constexpr int kExitError = 2;

struct RunConfig
{
  PlannerConfig planner{};
  ReconstructionConfig reconstruction{};
  bool has_seed = false;  // "seed" was present
};

// Strict parse of a run configuration. Unknown keys and wrongly typed values
// raise ParseError naming the dotted field path.
RunConfig parse_run_config(const nlohmann::json& j);
RunConfig load_run_config(const std::filesystem::path& path);

// GRASPFORGE_SEED when set and numeric, else 0.
std::uint64_t default_seed();

struct PlanRow
{
  std::size_t view_index = 0;
  double elevation_deg = 0.0;
  std::optional<Grasp> grasp;
};

void write_plan_csv(const std::string& object, const std::vector<PlanRow>& rows,
                    const std::optional<Grasp>& best, std::size_t best_view_index,
                    const std::filesystem::path& path);

// argv-style entry point; args excludes the program name.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace graspforge::cli
