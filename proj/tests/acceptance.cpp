// End-to-end acceptance checks. One PASS/FAIL line per criterion; exit
// status is nonzero if any criterion fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <iostream>
#include <random>
#include <sstream>
#include <string>

#include "artrecon/eval.hpp"
#include "artrecon/fusion.hpp"
#include "artrecon/geometry.hpp"
#include "artrecon/kdtree.hpp"
#include "artrecon/mesh.hpp"
#include "artrecon/pipeline.hpp"
#include "artrecon/poisson.hpp"
#include "artrecon/raster.hpp"
#include "support.hpp"

using namespace artrecon;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

int g_failures = 0;

void criterion(const std::string& name, double time_limit, const std::function<Outcome()>& body) {
  const auto start = std::chrono::steady_clock::now();
  Outcome o;
  try {
    o = body();
  } catch (const std::exception& e) {
    o = {false, std::string("exception: ") + e.what()};
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  std::ostringstream timing;
  timing.precision(3);
  timing << std::fixed << secs << " s";
  if (time_limit > 0.0) {
    timing << " / limit " << time_limit << " s";
    if (secs >= time_limit) {
      o.pass = false;
      o.detail += " (over time limit)";
    }
  }
  std::cout << (o.pass ? "PASS " : "FAIL ") << name << ": " << o.detail << " [" << timing.str() << "]"
            << std::endl;
  if (!o.pass) ++g_failures;
}

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.3g", v);
  return buf;
}

// Scalar per-pixel reference for fusion + normalization, written
// independently of the library: corner-aligned bilinear resize of the
// second map, convex blend, then min-max mapping onto [lo, hi].
std::vector<double> fusion_oracle(const DepthMap& glpn, const DepthMap& da, double alpha, double lo, double hi) {
  const int w = glpn.width, h = glpn.height;
  std::vector<double> fused(static_cast<std::size_t>(w) * h);
  for (int v = 0; v < h; ++v) {
    for (int u = 0; u < w; ++u) {
      const double sx = w == 1 ? 0.5 * (da.width - 1) : u * double(da.width - 1) / (w - 1);
      const double sy = h == 1 ? 0.5 * (da.height - 1) : v * double(da.height - 1) / (h - 1);
      const int x0 = std::min(int(sx), da.width - 1), y0 = std::min(int(sy), da.height - 1);
      const int x1 = std::min(x0 + 1, da.width - 1), y1 = std::min(y0 + 1, da.height - 1);
      const double tx = sx - x0, ty = sy - y0;
      const double r = (1 - tx) * (1 - ty) * da.at(x0, y0) + tx * (1 - ty) * da.at(x1, y0) +
                       (1 - tx) * ty * da.at(x0, y1) + tx * ty * da.at(x1, y1);
      fused[v * w + u] = alpha * glpn.at(u, v) + (1 - alpha) * r;
    }
  }
  double mn = fused[0], mx = fused[0];
  for (double f : fused) mn = std::min(mn, f), mx = std::max(mx, f);
  for (double& f : fused) f = mx > mn ? lo + (f - mn) * (hi - lo) / (mx - mn) : 0.5 * (lo + hi);
  return fused;
}

DepthMap random_map(std::mt19937& rng, int w, int h, double lo, double hi) {
  std::uniform_real_distribution<double> u(lo, hi);
  DepthMap d(w, h);
  for (double& v : d.values) v = u(rng);
  return d;
}

Outcome fusion_math() {
  std::mt19937 rng(101);
  const FusionParams params;
  double worst = 0.0;
  bool extremes = true;
  for (int trial = 0; trial < 20; ++trial) {
    const DepthMap glpn = random_map(rng, 64, 64, 0.1, 10.0);
    // Half the trials also exercise the resize path.
    const DepthMap da = trial % 2 ? random_map(rng, 64, 64, 0.0, 255.0) : random_map(rng, 48, 40, 0.0, 255.0);
    const DepthMap out = fuse_and_normalize(glpn, da, params);
    const auto ref = fusion_oracle(glpn, da, params.alpha, params.d_min, params.d_max);
    for (std::size_t i = 0; i < ref.size(); ++i) worst = std::max(worst, std::abs(out.values[i] - ref[i]));
    const auto [mn, mx] = std::minmax_element(out.values.begin(), out.values.end());
    extremes = extremes && *mn == 0.6 && *mx == 1.0;
  }
  return {worst <= 1e-6 && extremes,
          "max |lib - oracle| = " + fmt(worst) + " (tol 1e-6), min/max exactly 0.6/1.0: " + (extremes ? "yes" : "no")};
}

Outcome back_projection_round_trip() {
  std::mt19937 rng(202);
  const int w = 640, h = 480;
  const CameraIntrinsics cam = CameraIntrinsics::default_for(w, h);
  std::uniform_int_distribution<int> uu(0, w - 1), vv(0, h - 1);
  std::uniform_real_distribution<double> dd(0.0, 2.0);
  DepthMap depth(w, h, 1.0);
  RgbImage img(w, h);
  std::vector<std::tuple<int, int, double>> samples;
  for (int i = 0; i < 10000; ++i) {
    const int u = uu(rng), v = vv(rng);
    double d = dd(rng);
    while (d <= 0.0) d = dd(rng);
    depth.at(u, v) = d;
    samples.emplace_back(u, v, d);
  }
  const PointCloud pc = back_project(depth, img, cam);
  double worst = 0.0;
  for (const auto& [u, v, _] : samples) {
    const std::size_t idx = depth.index(u, v);
    const ProjectedPixel p = project(pc.positions[idx], cam);
    worst = std::max({worst, std::abs(p.u - u), std::abs(p.v - v), std::abs(p.depth - depth.values[idx])});
  }
  return {worst <= 1e-5, "max round-trip error " + fmt(worst) + " over 10000 pixels (tol 1e-5)"};
}

Outcome knn_and_outliers() {
  std::mt19937 rng(303);
  std::normal_distribution<double> g(0.0, 0.2);
  std::uniform_real_distribution<double> far(-3.0, 3.0);
  PointCloud pc;
  for (int i = 0; i < 1960; ++i) pc.positions.emplace_back(g(rng), g(rng), g(rng));
  for (int i = 0; i < 40; ++i) pc.positions.emplace_back(far(rng), far(rng), far(rng));

  const KdTree tree(pc.positions);
  std::size_t knn_mismatch = 0;
  for (std::size_t i = 0; i < pc.size(); ++i) {
    if (tree.knn(pc.positions[i], 20, i) != testsupport::brute_knn(pc.positions, pc.positions[i], 20, i)) {
      ++knn_mismatch;
    }
  }

  std::size_t decision_mismatch = 0, removed = 0;
  for (std::size_t k : {8u, 20u}) {
    OutlierParams params;
    params.k_neighbors = k;
    const OutlierResult r = remove_statistical_outliers(pc, params);
    const auto oracle = testsupport::brute_outliers(pc.positions, k, params.std_ratio);
    decision_mismatch += r.removed_indices != oracle.removed;
    removed += r.removed_indices.size();
  }
  return {knn_mismatch == 0 && decision_mismatch == 0,
          std::to_string(knn_mismatch) + " neighbour-set mismatches over 2000 points (k=20), " +
              std::to_string(decision_mismatch) + " removal-decision mismatches (k=8,20; " +
              std::to_string(removed) + " removals)"};
}

Outcome poisson_manufactured() {
  VoxelGrid g;
  g.resolution = 32;
  g.cell_size = 1.0 / 32;
  ScalarField f{g, std::vector<double>(g.node_count())};
  for (int k = 0; k <= 32; ++k)
    for (int j = 0; j <= 32; ++j)
      for (int i = 0; i <= 32; ++i) {
        const Eigen::Vector3d p = g.node_position(i, j, k);
        f.values[g.node_index(i, j, k)] =
            std::sin(M_PI * p.x()) * std::sin(2 * M_PI * p.y()) * std::sin(M_PI * p.z());
      }
  // Analytic Laplacian, -6 pi^2 f, on interior nodes: the error below includes
  // the discretization error of the 7-point stencil, not just solver error.
  ScalarField rhs{g, std::vector<double>(g.node_count(), 0.0)};
  for (int k = 1; k < 32; ++k)
    for (int j = 1; j < 32; ++j)
      for (int i = 1; i < 32; ++i) rhs.values[g.node_index(i, j, k)] = -6.0 * M_PI * M_PI * f.at(i, j, k);
  const SolveResult r = solve_poisson(rhs, {});
  double err = 0.0, sup = 0.0;
  for (std::size_t i = 0; i < f.values.size(); ++i) {
    err = std::max(err, std::abs(r.chi.values[i] - f.values[i]));
    sup = std::max(sup, std::abs(f.values[i]));
  }
  const double rel_res = r.report.residual_norm / r.report.rhs_norm;
  return {err <= 0.02 * sup && rel_res <= 1e-6,
          "max error " + fmt(err / sup * 100) + "% of sup-norm (tol 2%), residual/||rhs|| " + fmt(rel_res) +
              " (tol 1e-6), " + std::to_string(r.report.iterations) + " iterations"};
}

Outcome sphere_end_to_end() {
  const PointCloud pc = testsupport::sphere_cloud(10000, 404);
  PoissonParams p;
  p.depth = 6;
  const Reconstruction r = reconstruct(pc, p);
  const MeshStats s = mesh_stats(r.mesh);
  std::size_t close = 0;
  for (const auto& v : r.mesh.vertices) close += std::abs(v.norm() - 1.0) <= 0.02;
  const double frac = s.vertex_count ? double(close) / s.vertex_count : 0.0;
  return {s.boundary_edges == 0 && s.vertex_count > 0 && frac >= 0.95,
          std::to_string(s.boundary_edges) + " boundary edges, " + fmt(frac * 100) +
              "% of " + std::to_string(s.vertex_count) + " vertices within 0.02 of r=1 (need >=95%)"};
}

Outcome bump_height_field() {
  testsupport::TempDir tmp;
  testsupport::copy_scene("bump", tmp.path());
  const PipelineConfig cfg = PipelineConfig::from_config(Config::load(tmp / "scene.cfg"), tmp.path());
  const ReconstructArtifacts a = run_reconstruct(cfg);

  const RgbImage img = load_rgb(cfg.image);
  const int w = img.width, h = img.height;
  const DepthMap glpn = read_pfm(cfg.depth_glpn);
  const DepthMap da = read_pfm(cfg.depth_da);
  DepthMap expected(glpn.width, glpn.height, fusion_oracle(glpn, da, 0.97, 0.6, 1.0));
  if (expected.width != w || expected.height != h) expected = resize_bilinear(expected, w, h);

  const TriangleMesh mesh = read_ply(a.mesh);
  const auto z = testsupport::rasterize_depth(mesh, cfg.camera_for(w, h), w, h);
  const double tol = 3.0 * a.cell_size;
  std::size_t covered = 0, within = 0;
  for (std::size_t i = 0; i < z.size(); ++i) {
    if (std::isnan(z[i])) continue;
    ++covered;
    within += std::abs(z[i] - expected.values[i]) <= tol;
  }
  const double frac = covered ? double(within) / covered : 0.0;
  return {covered > 0 && frac >= 0.90,
          fmt(frac * 100) + "% of " + std::to_string(covered) + "/" + std::to_string(z.size()) +
              " covered pixels within 3 cells (" + fmt(tol) + ") of the input depth (need >=90%)"};
}

Outcome eval_harness() {
  std::mt19937 rng(505);
  std::normal_distribution<double> n(0.0, 1.0);
  std::uniform_real_distribution<double> s(1e-3, 1e3);
  std::size_t sym = 0, scale = 0, range = 0, agree = 0;
  for (int i = 0; i < 1000; ++i) {
    const std::size_t d = 2 + i % 511;
    Embedding a{"a", std::vector<double>(d)}, b{"b", std::vector<double>(d)};
    for (auto& v : a.values) v = n(rng);
    for (auto& v : b.values) v = n(rng);
    const double ab = cosine_similarity(a, b);
    sym += ab != cosine_similarity(b, a);
    range += !(ab >= -1.0 && ab <= 1.0);
    Embedding sa = a;
    const double f = s(rng);
    for (auto& v : sa.values) v *= f;
    scale += std::abs(cosine_similarity(sa, b) - ab) > 1e-6;
    auto unit = [](Embedding e) {
      double q = 0.0;
      for (double v : e.values) q += v * v;
      for (double& v : e.values) v /= std::sqrt(q);
      return e;
    };
    const Embedding ua = unit(a), ub = unit(b);
    agree += std::abs(dot_if_normalized(ua, ub) - cosine_similarity(ua, ub)) > 1e-6;
  }

  const auto dir = testsupport::fixture_dir() / "table1";
  const std::vector<std::pair<std::string, std::vector<double>>> targets = {
      {"depth_anything", {0.7040, 0.5672, 0.5732, 0.5774, 0.5048}},
      {"glpn", {0.5717, 0.7025, 0.5891, 0.6011, 0.6758}},
      {"proposed", {0.7314, 0.7168, 0.7686, 0.6928, 0.7376}},
  };
  std::vector<std::pair<std::string, std::vector<Embedding>>> renders;
  for (const auto& [m, _] : targets) renders.emplace_back(m, load_embeddings(dir / (m + ".tsv")));
  const EvaluationTable t = evaluate(load_embeddings(dir / "artworks.tsv"), renders);
  double worst = 0.0;
  for (const auto& [m, scores] : targets) {
    for (std::size_t i = 0; i < scores.size(); ++i) {
      worst = std::max(worst, std::abs(t.per_method.at(m).scores[i] - scores[i]));
    }
  }
  const bool ok = sym == 0 && scale == 0 && range == 0 && agree == 0 && worst <= 1e-4;
  return {ok, "1000 pairs: symmetry/scale/range/dot-agreement violations " + std::to_string(sym) + "/" +
                  std::to_string(scale) + "/" + std::to_string(range) + "/" + std::to_string(agree) +
                  "; table fixture max deviation " + fmt(worst) + " (tol 1e-4)"};
}

Outcome determinism() {
  testsupport::TempDir a, b;
  testsupport::copy_scene("sphere", a.path());
  testsupport::copy_scene("sphere", b.path());
  const auto run = [](const testsupport::TempDir& d) {
    return run_reconstruct(PipelineConfig::from_config(Config::load(d / "scene.cfg"), d.path()));
  };
  const ReconstructArtifacts ra = run(a), rb = run(b);
  std::size_t differing = 0;
  for (const auto& [x, y] : {std::pair{ra.mesh, rb.mesh}, std::pair{ra.point_cloud, rb.point_cloud},
                              std::pair{ra.fused_depth, rb.fused_depth}}) {
    const std::string bx = testsupport::read_bytes(x), by = testsupport::read_bytes(y);
    differing += bx.empty() || bx != by;
  }
  return {differing == 0, std::to_string(differing) + " of 3 artifacts differ (mesh.ply, point_cloud.ply, "
                                                      "fused_depth.pfm)"};
}

}  // namespace

int main() {
  criterion("fusion math", 1.0, fusion_math);
  criterion("back-projection round trip", 1.0, back_projection_round_trip);
  criterion("k-NN and outlier removal vs brute force", 10.0, knn_and_outliers);
  criterion("Poisson manufactured solution", 30.0, poisson_manufactured);
  criterion("end-to-end sphere", 60.0, sphere_end_to_end);
  criterion("end-to-end bump depth fixture", 0.0, bump_height_field);
  criterion("similarity harness", 0.0, eval_harness);
  criterion("determinism", 0.0, determinism);
  std::cout << (g_failures ? "FAILED " : "ALL PASSED ") << "(" << g_failures << " failing)" << std::endl;
  return g_failures ? 1 : 0;
}
