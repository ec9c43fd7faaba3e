#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

#include "artrecon/config.hpp"
#include "artrecon/eval.hpp"
#include "artrecon/fusion.hpp"
#include "artrecon/geometry.hpp"
#include "artrecon/ply.hpp"
#include "artrecon/poisson.hpp"

namespace artrecon {

/// Every key the pipeline understands, with its default ("" = required or
/// unset). `eval.renders.<method>` keys are accepted in addition.
const std::vector<std::pair<std::string, std::string>>& known_config_keys();

struct PipelineConfig {
  std::filesystem::path workdir;

  std::filesystem::path image;
  std::filesystem::path depth_glpn;
  std::filesystem::path depth_da;
  std::filesystem::path output_dir;

  FusionParams fusion;
  std::optional<double> fx, fy, cx, cy;  // unset entries use the raster defaults
  OutlierParams outliers;
  std::size_t normals_k = 30;
  PoissonParams poisson;
  double trim_radius_cells = 2.0;
  std::size_t trim_min_count = 1;
  PlyFormat export_format = PlyFormat::BinaryLittleEndian;

  std::filesystem::path eval_artworks;
  std::vector<std::pair<std::string, std::filesystem::path>> eval_renders;
  std::filesystem::path eval_report;
  std::string eval_viewpoint;

  /// Parses and range-checks every key; relative paths resolve against
  /// `workdir`. Throws InputError.
  static PipelineConfig from_config(const Config& cfg, const std::filesystem::path& workdir);

  CameraIntrinsics camera_for(int width, int height) const;

  /// Input files exist (reconstruct mode).
  void validate_reconstruct_inputs() const;
  void validate_eval_inputs() const;
};

/// Stage failure; `input` marks bad inputs as opposed to processing errors.
class StageError : public std::runtime_error {
 public:
  StageError(std::string stage, const std::string& message, bool input)
      : std::runtime_error("[" + stage + "] " + message), stage(std::move(stage)), input(input) {}
  std::string stage;
  bool input;
};

struct ReconstructArtifacts {
  std::filesystem::path fused_depth;
  std::filesystem::path point_cloud;
  std::filesystem::path mesh;
  std::filesystem::path diagnostics;

  MeshStats raw_mesh;      // straight out of the isosurface extraction
  MeshStats final_mesh;    // after trimming
  SolveReport solve;
  double isovalue = 0.0;
  double cell_size = 0.0;
};

/// Runs the full image-to-mesh pipeline and writes the four artifacts into
/// the output directory. Diagnostics are line-delimited JSON records, one per
/// stage plus a summary. Nothing is written unless every stage succeeds.
ReconstructArtifacts run_reconstruct(const PipelineConfig& cfg, std::ostream* log = nullptr);

/// Computes per-method similarity tables and writes the report.
EvaluationTable run_eval(const PipelineConfig& cfg, std::ostream* out = nullptr);

}  // namespace artrecon
