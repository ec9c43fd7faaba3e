#include "artrecon/pipeline.hpp"

#include <chrono>
#include <fstream>
#include <functional>
#include <sstream>

#include <json.hpp>

#include "artrecon/error.hpp"
#include "artrecon/fusion.hpp"
#include "artrecon/mesh.hpp"
#include "artrecon/raster.hpp"

namespace artrecon {

namespace {

using Json = nlohmann::ordered_json;

constexpr const char* kRenderPrefix = "eval.renders.";

std::filesystem::path resolve(const std::filesystem::path& workdir, const std::string& value) {
  if (value.empty()) return {};
  const std::filesystem::path p(value);
  return p.is_absolute() ? p : workdir / p;
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    const auto b = item.find_first_not_of(' ');
    const auto e = item.find_last_not_of(' ');
    if (b != std::string::npos) out.push_back(item.substr(b, e - b + 1));
  }
  return out;
}

Json stats_json(const MeshStats& s) {
  return Json{{"vertices", s.vertex_count},
              {"triangles", s.triangle_count},
              {"boundary_edges", s.boundary_edges},
              {"non_manifold_edges", s.non_manifold_edges},
              {"components", s.components},
              {"watertight", s.watertight()}};
}

class StageRunner {
 public:
  explicit StageRunner(std::ostream* log) : log_(log) {}

  // Runs `body`, timing it and appending its record. Exceptions become
  // StageError tagged with the stage name.
  void run(const std::string& stage, const std::function<void(Json&)>& body) {
    Json record{{"stage", stage}};
    const auto start = std::chrono::steady_clock::now();
    try {
      body(record);
    } catch (const StageError&) {
      throw;
    } catch (const InputError& e) {
      throw StageError(stage, e.what(), true);
    } catch (const FormatError& e) {
      throw StageError(stage, e.what(), true);
    } catch (const std::exception& e) {
      throw StageError(stage, e.what(), false);
    }
    const std::chrono::duration<double> elapsed = std::chrono::steady_clock::now() - start;
    record["seconds"] = elapsed.count();
    if (log_) *log_ << record.dump() << '\n';
    records_.push_back(std::move(record));
  }

  const std::vector<Json>& records() const { return records_; }

 private:
  std::ostream* log_;
  std::vector<Json> records_;
};

}  // namespace

const std::vector<std::pair<std::string, std::string>>& known_config_keys() {
  static const std::vector<std::pair<std::string, std::string>> keys = {
      {"input.image", ""},
      {"input.depth_glpn", ""},
      {"input.depth_da", ""},
      {"output.dir", "out"},
      {"fusion.alpha", "0.97"},
      {"fusion.d_min", "0.6"},
      {"fusion.d_max", "1.0"},
      {"camera.fx", ""},
      {"camera.fy", ""},
      {"camera.cx", ""},
      {"camera.cy", ""},
      {"outliers.k", "20"},
      {"outliers.std_ratio", "2.0"},
      {"normals.k", "30"},
      {"poisson.depth", "6"},
      {"poisson.pad_fraction", "0.15"},
      {"poisson.cg_tolerance", "1e-6"},
      {"poisson.cg_max_iters", "3000"},
      {"poisson.iso_strategy", "mean_at_samples"},
      {"poisson.iso_value", "0.5"},
      {"trim.radius_cells", "2.0"},
      {"trim.min_count", "1"},
      {"export.format", "binary_le"},
      {"eval.artworks", ""},
      {"eval.methods", ""},
      {"eval.report", "similarity_report.txt"},
      {"eval.viewpoint", ""},
  };
  return keys;
}

PipelineConfig PipelineConfig::from_config(const Config& cfg, const std::filesystem::path& workdir) {
  for (const auto& [key, value] : cfg.entries()) {
    if (key.rfind(kRenderPrefix, 0) == 0 && key.size() > std::string(kRenderPrefix).size()) continue;
    bool known = false;
    for (const auto& [k, d] : known_config_keys()) known = known || k == key;
    if (!known) throw InputError("unknown config key '" + key + "'");
  }

  auto as_count = [&](const std::string& key, long long fallback, long long min) {
    const long long v = cfg.get_int(key, fallback);
    if (v < min) throw InputError(key + " must be >= " + std::to_string(min));
    return static_cast<std::size_t>(v);
  };
  auto optional_double = [&](const std::string& key) -> std::optional<double> {
    if (!cfg.has(key)) return std::nullopt;
    return cfg.get_double(key, 0.0);
  };

  PipelineConfig pc;
  pc.workdir = workdir;
  pc.image = resolve(workdir, cfg.get_string("input.image", ""));
  pc.depth_glpn = resolve(workdir, cfg.get_string("input.depth_glpn", ""));
  pc.depth_da = resolve(workdir, cfg.get_string("input.depth_da", ""));
  pc.output_dir = resolve(workdir, cfg.get_string("output.dir", "out"));

  pc.fusion.alpha = cfg.get_double("fusion.alpha", pc.fusion.alpha);
  pc.fusion.d_min = cfg.get_double("fusion.d_min", pc.fusion.d_min);
  pc.fusion.d_max = cfg.get_double("fusion.d_max", pc.fusion.d_max);

  pc.fx = optional_double("camera.fx");
  pc.fy = optional_double("camera.fy");
  pc.cx = optional_double("camera.cx");
  pc.cy = optional_double("camera.cy");

  pc.outliers.k_neighbors = as_count("outliers.k", 20, 1);
  pc.outliers.std_ratio = cfg.get_double("outliers.std_ratio", 2.0);
  pc.normals_k = as_count("normals.k", 30, 3);

  pc.poisson.depth = static_cast<int>(cfg.get_int("poisson.depth", 6));
  pc.poisson.pad_fraction = cfg.get_double("poisson.pad_fraction", 0.15);
  pc.poisson.cg_tolerance = cfg.get_double("poisson.cg_tolerance", 1e-6);
  pc.poisson.cg_max_iters = static_cast<int>(cfg.get_int("poisson.cg_max_iters", 3000));
  const std::string strategy = cfg.get_string("poisson.iso_strategy", "mean_at_samples");
  if (strategy == "mean_at_samples") {
    pc.poisson.iso_strategy = IsoStrategy::MeanAtSamples;
  } else if (strategy == "fixed") {
    pc.poisson.iso_strategy = IsoStrategy::Fixed;
  } else {
    throw InputError("poisson.iso_strategy must be 'mean_at_samples' or 'fixed'");
  }
  pc.poisson.iso_value = cfg.get_double("poisson.iso_value", 0.5);

  pc.trim_radius_cells = cfg.get_double("trim.radius_cells", 2.0);
  pc.trim_min_count = as_count("trim.min_count", 1, 0);
  const std::string format = cfg.get_string("export.format", "binary_le");
  if (format == "binary_le") {
    pc.export_format = PlyFormat::BinaryLittleEndian;
  } else if (format == "ascii") {
    pc.export_format = PlyFormat::Ascii;
  } else {
    throw InputError("export.format must be 'binary_le' or 'ascii'");
  }

  pc.eval_artworks = resolve(workdir, cfg.get_string("eval.artworks", ""));
  pc.eval_report = resolve(workdir, cfg.get_string("eval.report", "similarity_report.txt"));
  pc.eval_viewpoint = cfg.get_string("eval.viewpoint", "");
  std::vector<std::string> methods = split_list(cfg.get_string("eval.methods", ""));
  if (methods.empty()) {
    for (const auto& [key, value] : cfg.entries()) {
      if (key.rfind(kRenderPrefix, 0) == 0) methods.push_back(key.substr(std::string(kRenderPrefix).size()));
    }
  }
  for (const auto& m : methods) {
    const auto path = cfg.get(kRenderPrefix + m);
    if (!path) throw InputError("eval.methods lists '" + m + "' but eval.renders." + m + " is unset");
    pc.eval_renders.emplace_back(m, resolve(workdir, *path));
  }

  try {
    pc.fusion.validate();
    pc.outliers.validate();
    pc.poisson.validate();
    if (pc.fx || pc.fy || pc.cx || pc.cy) {
      CameraIntrinsics probe{pc.fx.value_or(1.0), pc.fy.value_or(1.0), pc.cx.value_or(0.0),
                             pc.cy.value_or(0.0)};
      probe.validate();
    }
  } catch (const std::invalid_argument& e) {
    throw InputError(e.what());
  }
  if (!(pc.trim_radius_cells > 0.0)) throw InputError("trim.radius_cells must be > 0");
  return pc;
}

CameraIntrinsics PipelineConfig::camera_for(int width, int height) const {
  CameraIntrinsics cam = CameraIntrinsics::default_for(width, height);
  if (fx) cam.fx = *fx;
  if (fy) cam.fy = *fy;
  if (cx) cam.cx = *cx;
  if (cy) cam.cy = *cy;
  return cam;
}

void PipelineConfig::validate_reconstruct_inputs() const {
  const std::pair<const char*, const std::filesystem::path*> inputs[] = {
      {"input.image", &image}, {"input.depth_glpn", &depth_glpn}, {"input.depth_da", &depth_da}};
  for (const auto& [key, path] : inputs) {
    if (path->empty()) throw InputError(std::string(key) + " is not set");
    if (!std::filesystem::is_regular_file(*path)) {
      throw InputError(std::string(key) + ": file '" + path->string() + "' does not exist");
    }
  }
}

void PipelineConfig::validate_eval_inputs() const {
  if (eval_artworks.empty()) throw InputError("eval.artworks is not set");
  if (!std::filesystem::is_regular_file(eval_artworks)) {
    throw InputError("eval.artworks: file '" + eval_artworks.string() + "' does not exist");
  }
  if (eval_renders.empty()) throw InputError("no eval.renders.<method> entries configured");
  for (const auto& [method, path] : eval_renders) {
    if (!std::filesystem::is_regular_file(path)) {
      throw InputError("eval.renders." + method + ": file '" + path.string() + "' does not exist");
    }
  }
}

ReconstructArtifacts run_reconstruct(const PipelineConfig& cfg, std::ostream* log) {
  try {
    cfg.validate_reconstruct_inputs();
  } catch (const InputError& e) {
    throw StageError("validate", e.what(), true);
  }

  StageRunner stages(log);
  ReconstructArtifacts art;
  RgbImage image;
  DepthMap glpn, da, fused;
  PointCloud cloud;
  Reconstruction recon;
  TriangleMesh mesh;

  stages.run("load", [&](Json& rec) {
    const RgbImage raw = load_rgb(cfg.image);
    try {
      image = resize_to_multiple_of_32(raw);
    } catch (const std::invalid_argument& e) {
      throw InputError(e.what());
    }
    glpn = load_depth(cfg.depth_glpn);
    da = load_depth(cfg.depth_da);
    rec["image"] = {raw.width, raw.height};
    rec["image_resized"] = {image.width, image.height};
    rec["depth_glpn"] = {glpn.width, glpn.height};
    rec["depth_da"] = {da.width, da.height};
  });

  stages.run("fusion", [&](Json& rec) {
    fused = fuse_and_normalize(glpn, da, cfg.fusion);
    rec["alpha"] = cfg.fusion.alpha;
    rec["range"] = {cfg.fusion.d_min, cfg.fusion.d_max};
  });

  stages.run("back_projection", [&](Json& rec) {
    // Depth follows the GLPN raster; bring it onto the image raster.
    const DepthMap depth = (fused.width == image.width && fused.height == image.height)
                               ? fused
                               : resize_bilinear(fused, image.width, image.height);
    const CameraIntrinsics cam = cfg.camera_for(image.width, image.height);
    cloud = back_project(depth, image, cam);
    rec["camera"] = {{"fx", cam.fx}, {"fy", cam.fy}, {"cx", cam.cx}, {"cy", cam.cy}};
    rec["points"] = cloud.size();
  });

  stages.run("outlier_removal", [&](Json& rec) {
    OutlierResult r = remove_statistical_outliers(cloud, cfg.outliers);
    rec["k"] = cfg.outliers.k_neighbors;
    rec["std_ratio"] = cfg.outliers.std_ratio;
    rec["threshold"] = r.threshold;
    rec["removed"] = r.removed_indices.size();
    rec["points"] = r.cloud.size();
    cloud = std::move(r.cloud);
  });

  stages.run("normal_estimation", [&](Json& rec) {
    NormalEstimate est = estimate_normals(cloud, cfg.normals_k);
    rec["k"] = cfg.normals_k;
    rec["degenerate"] = est.degenerate_count;
    cloud = std::move(est.cloud);
  });

  stages.run("poisson", [&](Json& rec) {
    recon = reconstruct(cloud, cfg.poisson);
    art.raw_mesh = mesh_stats(recon.mesh);
    art.solve = recon.solve;
    art.isovalue = recon.isovalue;
    art.cell_size = recon.grid.cell_size;
    rec["depth"] = cfg.poisson.depth;
    rec["cell_size"] = recon.grid.cell_size;
    rec["cg_iterations"] = recon.solve.iterations;
    rec["cg_residual"] = recon.solve.residual_norm;
    rec["cg_relative_residual"] =
        recon.solve.rhs_norm > 0 ? recon.solve.residual_norm / recon.solve.rhs_norm : 0.0;
    rec["cg_converged"] = recon.solve.converged;
    rec["isovalue"] = recon.isovalue;
    rec["isovalue_out_of_range"] = recon.isovalue_out_of_range;
    rec["mesh"] = stats_json(art.raw_mesh);
    if (recon.mesh.triangles.empty()) {
      throw std::runtime_error("isosurface extraction produced an empty mesh");
    }
  });

  stages.run("trim", [&](Json& rec) {
    const double radius = cfg.trim_radius_cells * recon.grid.cell_size;
    TrimResult t = trim_low_support(recon.mesh, cloud, radius, cfg.trim_min_count);
    rec["radius"] = radius;
    rec["min_count"] = cfg.trim_min_count;
    rec["unsupported_vertices"] = t.unsupported_vertices;
    rec["dropped_component_vertices"] = t.dropped_component_vertices;
    mesh = std::move(t.mesh);
  });

  stages.run("color_transfer", [&](Json& rec) {
    mesh = transfer_colors(mesh, cloud);
    art.final_mesh = mesh_stats(mesh);
    rec["mesh"] = stats_json(art.final_mesh);
  });

  stages.run("export", [&](Json& rec) {
    std::filesystem::create_directories(cfg.output_dir);
    art.fused_depth = cfg.output_dir / "fused_depth.pfm";
    art.point_cloud = cfg.output_dir / "point_cloud.ply";
    art.mesh = cfg.output_dir / "mesh.ply";
    art.diagnostics = cfg.output_dir / "diagnostics.jsonl";
    write_pfm(fused, art.fused_depth);
    write_point_cloud_ply(cloud, art.point_cloud);
    write_ply(mesh, art.mesh, cfg.export_format);
    rec["files"] = {art.fused_depth.string(), art.point_cloud.string(), art.mesh.string()};
  });

  std::ofstream diag(art.diagnostics);
  for (const auto& r : stages.records()) diag << r.dump() << '\n';
  Json summary{{"stage", "summary"},
               {"status", "ok"},
               {"points", cloud.size()},
               {"raw_mesh", stats_json(art.raw_mesh)},
               {"final_mesh", stats_json(art.final_mesh)}};
  double total = 0.0;
  for (const auto& r : stages.records()) total += r["seconds"].get<double>();
  summary["seconds"] = total;
  diag << summary.dump() << '\n';
  if (log) *log << summary.dump() << '\n';
  if (!diag) throw StageError("export", "failed writing diagnostics", false);
  return art;
}

EvaluationTable run_eval(const PipelineConfig& cfg, std::ostream* out) {
  try {
    cfg.validate_eval_inputs();
  } catch (const InputError& e) {
    throw StageError("validate", e.what(), true);
  }
  EvaluationTable table;
  try {
    const auto artworks = load_embeddings(cfg.eval_artworks);
    std::vector<std::pair<std::string, std::vector<Embedding>>> renders;
    for (const auto& [method, path] : cfg.eval_renders) {
      renders.emplace_back(method, load_embeddings(path));
    }
    table = evaluate(artworks, renders);
  } catch (const InputError& e) {
    throw StageError("eval", e.what(), true);
  } catch (const FormatError& e) {
    throw StageError("eval", e.what(), true);
  } catch (const std::exception& e) {
    throw StageError("eval", e.what(), false);
  }

  std::ostringstream text;
  if (!cfg.eval_viewpoint.empty()) text << "# viewpoint: " << cfg.eval_viewpoint << '\n';
  write_table(table, text);
  if (!cfg.eval_report.empty()) {
    if (cfg.eval_report.has_parent_path()) {
      std::filesystem::create_directories(cfg.eval_report.parent_path());
    }
    std::ofstream f(cfg.eval_report);
    f << text.str();
    if (!f) throw StageError("eval", "failed writing '" + cfg.eval_report.string() + "'", false);
  }
  if (out) *out << text.str();
  return table;
}

}  // namespace artrecon
