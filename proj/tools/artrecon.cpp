// artrecon: depth fusion to textured mesh, plus embedding similarity reports.
//
//   artrecon reconstruct --workdir DIR [--config FILE] [--<key> VALUE]... [--set key=value]... [--dry-run]
//   artrecon eval        --workdir DIR [--config FILE] [--<key> VALUE]... [--dry-run]
//   artrecon inspect     --workdir DIR MESH.ply
//   artrecon version
//
// Exit status: 0 success, 1 usage error, 2 input error, 3 processing failure.

#include <iostream>
#include <map>

#include <CLI11.hpp>

#include "artrecon/config.hpp"
#include "artrecon/error.hpp"
#include "artrecon/mesh.hpp"
#include "artrecon/pipeline.hpp"
#include "artrecon/ply.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitInput = 2;
constexpr int kExitFailure = 3;

constexpr const char* kVersion = "0.1.0";

struct CommonArgs {
  std::string workdir;
  std::string config_file;
  std::map<std::string, std::string> flags;
  std::vector<std::string> sets;
  bool dry_run = false;
};

void add_common(CLI::App* cmd, CommonArgs& args, bool include_reconstruct_keys, bool include_eval_keys) {
  cmd->add_option("--workdir", args.workdir, "Directory that relative paths resolve against")->required();
  cmd->add_option("--config", args.config_file, "Config file (relative to --workdir)");
  cmd->add_option("--set", args.sets, "Override any key: --set key=value (repeatable)");
  cmd->add_flag("--dry-run", args.dry_run, "Print the resolved config, validate inputs, and exit");
  for (const auto& [key, def] : artrecon::known_config_keys()) {
    const bool is_eval = key.rfind("eval.", 0) == 0;
    if ((is_eval && !include_eval_keys) || (!is_eval && !include_reconstruct_keys)) continue;
    std::string help = def.empty() ? "" : "default " + def;
    cmd->add_option_function<std::string>(
        "--" + key, [&args, key = key](const std::string& v) { args.flags[key] = v; }, help);
  }
}

artrecon::Config build_config(const CommonArgs& args) {
  const std::filesystem::path workdir(args.workdir);
  if (!std::filesystem::is_directory(workdir)) {
    throw artrecon::InputError("--workdir '" + args.workdir + "' is not a directory");
  }
  artrecon::Config cfg;
  if (!args.config_file.empty()) {
    std::filesystem::path p(args.config_file);
    if (p.is_relative()) p = workdir / p;
    cfg = artrecon::Config::load(p);
  }
  for (const auto& [key, value] : args.flags) cfg.set(key, value);
  for (const auto& s : args.sets) {
    const auto eq = s.find('=');
    if (eq == std::string::npos || eq == 0) {
      throw artrecon::InputError("--set expects key=value, got '" + s + "'");
    }
    cfg.set(s.substr(0, eq), s.substr(eq + 1));
  }
  return cfg;
}

int report(const artrecon::StageError& e) {
  std::cerr << "artrecon: " << e.what() << '\n';
  return e.input ? kExitInput : kExitFailure;
}

int run_reconstruct(const CommonArgs& args) {
  const artrecon::Config cfg = build_config(args);
  const auto pc = artrecon::PipelineConfig::from_config(cfg, args.workdir);
  if (args.dry_run) {
    pc.validate_reconstruct_inputs();
    std::cout << cfg.dump();
    std::cout << "# dry run: inputs validated, nothing executed\n";
    return kExitOk;
  }
  try {
    const auto art = artrecon::run_reconstruct(pc, &std::cerr);
    std::cout << "fused depth: " << art.fused_depth.string() << '\n'
              << "point cloud: " << art.point_cloud.string() << '\n'
              << "mesh:        " << art.mesh.string() << '\n'
              << "diagnostics: " << art.diagnostics.string() << '\n';
  } catch (const artrecon::StageError& e) {
    return report(e);
  }
  return kExitOk;
}

int run_eval(const CommonArgs& args) {
  const artrecon::Config cfg = build_config(args);
  const auto pc = artrecon::PipelineConfig::from_config(cfg, args.workdir);
  if (args.dry_run) {
    pc.validate_eval_inputs();
    std::cout << cfg.dump();
    std::cout << "# dry run: inputs validated, nothing executed\n";
    return kExitOk;
  }
  try {
    artrecon::run_eval(pc, &std::cout);
  } catch (const artrecon::StageError& e) {
    return report(e);
  }
  return kExitOk;
}

int run_inspect(const std::string& workdir, const std::string& mesh_path) {
  std::filesystem::path p(mesh_path);
  if (p.is_relative()) p = std::filesystem::path(workdir) / p;
  const auto mesh = artrecon::read_ply(p);
  const auto s = artrecon::mesh_stats(mesh);
  std::cout << "vertices            " << s.vertex_count << '\n'
            << "triangles           " << s.triangle_count << '\n'
            << "boundary_edges      " << s.boundary_edges << '\n'
            << "non_manifold_edges  " << s.non_manifold_edges << '\n'
            << "components          " << s.components << '\n'
            << "watertight          " << (s.watertight() ? "yes" : "no") << '\n'
            << "colors              " << (mesh.has_colors() ? "yes" : "no") << '\n';
  if (s.vertex_count > 0) {
    std::cout << "bbox_min            " << s.bbox_min.transpose() << '\n'
              << "bbox_max            " << s.bbox_max.transpose() << '\n';
  }
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Monocular artwork to 3D mesh reconstruction"};
  app.require_subcommand(1);

  CommonArgs rec_args;
  auto* rec = app.add_subcommand("reconstruct", "Fuse depths and reconstruct a colored mesh");
  add_common(rec, rec_args, true, false);

  CommonArgs eval_args;
  auto* ev = app.add_subcommand("eval", "Score rendered views against artwork embeddings");
  add_common(ev, eval_args, false, true);
  ev->allow_extras(false);

  std::string inspect_workdir, inspect_mesh;
  auto* ins = app.add_subcommand("inspect", "Print mesh statistics for a PLY file");
  ins->add_option("--workdir", inspect_workdir, "Directory that relative paths resolve against")->required();
  ins->add_option("mesh", inspect_mesh, "Mesh PLY file")->required();

  app.add_subcommand("version", "Print the version");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (*rec) return run_reconstruct(rec_args);
    if (*ev) return run_eval(eval_args);
    if (*ins) return run_inspect(inspect_workdir, inspect_mesh);
    std::cout << "artrecon " << kVersion << '\n';
    return kExitOk;
  } catch (const artrecon::InputError& e) {
    std::cerr << "artrecon: " << e.what() << '\n';
    return kExitInput;
  } catch (const artrecon::FormatError& e) {
    std::cerr << "artrecon: " << e.what() << '\n';
    return kExitInput;
  } catch (const std::exception& e) {
    std::cerr << "artrecon: " << e.what() << '\n';
    return kExitFailure;
  }
}
