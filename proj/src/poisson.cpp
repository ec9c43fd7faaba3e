#include "artrecon/poisson.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace artrecon {

namespace {

constexpr int kDivergenceWindow = 50;

double dot_interior(const VoxelGrid& g, const std::vector<double>& a,
                    const std::vector<double>& b) {
  const int n = g.resolution;
  double sum = 0.0;
  for (int k = 1; k < n; ++k)
    for (int j = 1; j < n; ++j)
      for (int i = 1; i < n; ++i) {
        const std::size_t idx = g.node_index(i, j, k);
        sum += a[idx] * b[idx];
      }
  return sum;
}

// y = (6x - sum of neighbours) at interior nodes; that is -h^2 times the
// 7-point Laplacian, which is SPD under the zero Dirichlet boundary.
void apply_negative_laplacian(const VoxelGrid& g, const std::vector<double>& x,
                              std::vector<double>& y) {
  const int n = g.resolution;
  const std::size_t sy = static_cast<std::size_t>(g.nodes_per_axis());
  const std::size_t sz = sy * sy;
  for (int k = 1; k < n; ++k)
    for (int j = 1; j < n; ++j)
      for (int i = 1; i < n; ++i) {
        const std::size_t idx = g.node_index(i, j, k);
        y[idx] = 6.0 * x[idx] - (x[idx - 1] + x[idx + 1] + x[idx - sy] + x[idx + sy] +
                                 x[idx - sz] + x[idx + sz]);
      }
}

}  // namespace

bool VoxelGrid::contains(const Eigen::Vector3d& p) const {
  const Eigen::Vector3d hi = origin + Eigen::Vector3d::Constant(cell_size * resolution);
  return (p.array() > origin.array()).all() && (p.array() < hi.array()).all();
}

void VoxelGrid::validate() const {
  if (resolution < 8) throw std::invalid_argument("voxel grid resolution must be >= 8");
  if (!(cell_size > 0.0) || !std::isfinite(cell_size)) {
    throw std::invalid_argument("voxel grid cell size must be positive");
  }
  if (!origin.allFinite()) throw std::invalid_argument("voxel grid origin must be finite");
}

VoxelGrid VoxelGrid::enclosing(std::span<const Eigen::Vector3d> points, int depth,
                               double pad_fraction) {
  if (points.empty()) throw std::invalid_argument("cannot build a grid around zero points");
  if (depth < 3 || depth > 9) throw std::invalid_argument("grid depth out of range");
  if (!(pad_fraction > 0.0)) throw std::invalid_argument("pad_fraction must be > 0");

  Eigen::Vector3d lo = points.front();
  Eigen::Vector3d hi = lo;
  for (const auto& p : points) {
    lo = lo.cwiseMin(p);
    hi = hi.cwiseMax(p);
  }
  double extent = (hi - lo).maxCoeff();
  if (!(extent > 0.0)) extent = 1.0;
  const double size = extent * (1.0 + 2.0 * pad_fraction);

  VoxelGrid g;
  g.resolution = 1 << depth;
  g.cell_size = size / g.resolution;
  g.origin = 0.5 * (lo + hi) - Eigen::Vector3d::Constant(0.5 * size);
  return g;
}

double ScalarField::sample(const Eigen::Vector3d& p) const {
  const int n = grid.resolution;
  const Eigen::Vector3d g = (p - grid.origin) / grid.cell_size;
  int base[3];
  double frac[3];
  for (int a = 0; a < 3; ++a) {
    const double c = std::clamp(g[a], 0.0, static_cast<double>(n));
    base[a] = std::min(static_cast<int>(std::floor(c)), n - 1);
    frac[a] = c - base[a];
  }
  double result = 0.0;
  for (int corner = 0; corner < 8; ++corner) {
    const int di = corner & 1, dj = (corner >> 1) & 1, dk = (corner >> 2) & 1;
    const double w = (di ? frac[0] : 1.0 - frac[0]) * (dj ? frac[1] : 1.0 - frac[1]) *
                     (dk ? frac[2] : 1.0 - frac[2]);
    result += w * at(base[0] + di, base[1] + dj, base[2] + dk);
  }
  return result;
}

void PoissonParams::validate() const {
  if (depth < 4 || depth > 9) throw std::invalid_argument("poisson.depth must lie in [4,9]");
  if (!(pad_fraction > 0.0)) throw std::invalid_argument("poisson.pad_fraction must be > 0");
  if (!(cg_tolerance > 0.0)) throw std::invalid_argument("poisson.cg_tolerance must be > 0");
  if (cg_max_iters < 1) throw std::invalid_argument("poisson.cg_max_iters must be >= 1");
  if (iso_strategy == IsoStrategy::Fixed && !std::isfinite(iso_value)) {
    throw std::invalid_argument("poisson.iso_value must be finite");
  }
}

VectorField splat_normals(const PointCloud& pc, const VoxelGrid& grid) {
  grid.validate();
  if (!pc.has_normals()) throw std::invalid_argument("splatting requires oriented normals");
  pc.validate();

  VectorField field{grid, std::vector<Eigen::Vector3d>(grid.node_count(), Eigen::Vector3d::Zero())};
  const double inv_h = 1.0 / grid.cell_size;
  for (std::size_t p = 0; p < pc.size(); ++p) {
    const Eigen::Vector3d& x = pc.positions[p];
    if (!grid.contains(x)) {
      throw std::invalid_argument("point " + std::to_string(p) + " lies outside the voxel grid");
    }
    const Eigen::Vector3d g = (x - grid.origin) * inv_h;
    int base[3];
    double frac[3];
    for (int a = 0; a < 3; ++a) {
      base[a] = std::min(static_cast<int>(std::floor(g[a])), grid.resolution - 1);
      frac[a] = g[a] - base[a];
    }
    for (int corner = 0; corner < 8; ++corner) {
      const int di = corner & 1, dj = (corner >> 1) & 1, dk = (corner >> 2) & 1;
      const double w = (di ? frac[0] : 1.0 - frac[0]) * (dj ? frac[1] : 1.0 - frac[1]) *
                       (dk ? frac[2] : 1.0 - frac[2]);
      if (w == 0.0) continue;
      field.vectors[grid.node_index(base[0] + di, base[1] + dj, base[2] + dk)] +=
          (w * inv_h) * pc.normals[p];
    }
  }
  return field;
}

ScalarField divergence(const VectorField& v) {
  const VoxelGrid& g = v.grid;
  const int n = g.resolution;
  const double h = g.cell_size;
  ScalarField out{g, std::vector<double>(g.node_count(), 0.0)};

  // Derivative of component `axis` along `axis` at coordinate c.
  auto partial = [&](int i, int j, int k, int axis) {
    int c = axis == 0 ? i : axis == 1 ? j : k;
    auto comp = [&](int offset) {
      int idx[3] = {i, j, k};
      idx[axis] += offset;
      return v.vectors[g.node_index(idx[0], idx[1], idx[2])][axis];
    };
    if (c == 0) return (comp(1) - comp(0)) / h;
    if (c == n) return (comp(0) - comp(-1)) / h;
    return (comp(1) - comp(-1)) / (2.0 * h);
  };

  for (int k = 0; k <= n; ++k)
    for (int j = 0; j <= n; ++j)
      for (int i = 0; i <= n; ++i) {
        out.values[g.node_index(i, j, k)] =
            partial(i, j, k, 0) + partial(i, j, k, 1) + partial(i, j, k, 2);
      }
  return out;
}

ScalarField laplacian(const ScalarField& f) {
  ScalarField out{f.grid, std::vector<double>(f.grid.node_count(), 0.0)};
  apply_negative_laplacian(f.grid, f.values, out.values);
  const double scale = -1.0 / (f.grid.cell_size * f.grid.cell_size);
  for (double& x : out.values) x *= scale;
  return out;
}

SolveResult solve_poisson(const ScalarField& rhs, const PoissonParams& params) {
  params.validate();
  const VoxelGrid& g = rhs.grid;
  g.validate();
  if (rhs.values.size() != g.node_count()) {
    throw std::invalid_argument("right-hand side does not match its grid");
  }
  for (double v : rhs.values) {
    if (!std::isfinite(v)) throw std::invalid_argument("right-hand side is not finite");
  }

  const int n = g.resolution;
  const double h2 = g.cell_size * g.cell_size;
  const std::size_t count = g.node_count();

  // Solve (-h^2 L) x = -h^2 rhs; boundary entries stay zero throughout.
  // Conjugate residuals: same Krylov space and cost as CG, but each step
  // minimizes ||r||_2, so the residual history never increases.
  std::vector<double> x(count, 0.0), r(count, 0.0), p(count, 0.0);
  std::vector<double> ar(count, 0.0), ap(count, 0.0);
  for (int k = 1; k < n; ++k)
    for (int j = 1; j < n; ++j)
      for (int i = 1; i < n; ++i) {
        const std::size_t idx = g.node_index(i, j, k);
        r[idx] = -h2 * rhs.values[idx];
      }

  SolveResult result{ScalarField{g, {}}, {}};
  SolveReport& rep = result.report;
  const double b_norm = std::sqrt(dot_interior(g, r, r));
  rep.rhs_norm = b_norm / h2;
  const double target = params.cg_tolerance * b_norm;

  rep.residual_history.push_back(b_norm / h2);
  p = r;
  apply_negative_laplacian(g, r, ar);
  ap = ar;
  double rar = dot_interior(g, r, ar);
  double norm = b_norm;
  int growth_streak = 0;
  while (norm > target && rep.iterations < params.cg_max_iters) {
    const double alpha = rar / dot_interior(g, ap, ap);
    for (int k = 1; k < n; ++k)
      for (int j = 1; j < n; ++j)
        for (int i = 1; i < n; ++i) {
          const std::size_t idx = g.node_index(i, j, k);
          x[idx] += alpha * p[idx];
          r[idx] -= alpha * ap[idx];
        }
    ++rep.iterations;
    const double next = std::sqrt(dot_interior(g, r, r));
    rep.residual_history.push_back(next / h2);

    growth_streak = next > norm ? growth_streak + 1 : 0;
    norm = next;
    if (growth_streak >= kDivergenceWindow || !std::isfinite(norm)) {
      rep.residual_norm = norm / h2;
      throw SolverError("conjugate residual solver diverged after " +
                            std::to_string(rep.iterations) + " iterations",
                        rep);
    }

    apply_negative_laplacian(g, r, ar);
    const double rar_next = dot_interior(g, r, ar);
    const double beta = rar_next / rar;
    rar = rar_next;
    for (int k = 1; k < n; ++k)
      for (int j = 1; j < n; ++j)
        for (int i = 1; i < n; ++i) {
          const std::size_t idx = g.node_index(i, j, k);
          p[idx] = r[idx] + beta * p[idx];
          ap[idx] = ar[idx] + beta * ap[idx];
        }
  }

  // Report the true residual, not the recurrence value.
  apply_negative_laplacian(g, x, ap);
  double true_rr = 0.0;
  for (int k = 1; k < n; ++k)
    for (int j = 1; j < n; ++j)
      for (int i = 1; i < n; ++i) {
        const std::size_t idx = g.node_index(i, j, k);
        const double res = -h2 * rhs.values[idx] - ap[idx];
        true_rr += res * res;
      }
  rep.residual_norm = std::sqrt(true_rr) / h2;
  rep.converged = std::sqrt(true_rr) <= target;
  result.chi.values = std::move(x);
  return result;
}

double select_isovalue(const ScalarField& chi, const PointCloud& pc, const PoissonParams& params) {
  if (params.iso_strategy == IsoStrategy::Fixed) return params.iso_value;
  if (pc.empty()) throw std::invalid_argument("mean-at-samples isovalue needs a non-empty cloud");
  double sum = 0.0;
  for (const auto& p : pc.positions) sum += chi.sample(p);
  return sum / static_cast<double>(pc.size());
}

bool isovalue_in_range(const ScalarField& chi, double isovalue) {
  if (chi.values.empty()) return false;
  const auto [lo, hi] = std::minmax_element(chi.values.begin(), chi.values.end());
  return isovalue >= *lo && isovalue <= *hi;
}

Reconstruction reconstruct(const PointCloud& pc, const PoissonParams& params) {
  params.validate();
  if (pc.empty()) throw std::invalid_argument("cannot reconstruct an empty point cloud");
  if (!pc.has_normals()) throw std::invalid_argument("reconstruction requires oriented normals");

  Reconstruction out;
  out.grid = VoxelGrid::enclosing(pc.positions, params.depth, params.pad_fraction);
  const VectorField field = splat_normals(pc, out.grid);
  ScalarField rhs = divergence(field);
  // Normals point outward; negating the source makes chi larger inside.
  for (double& v : rhs.values) v = -v;
  SolveResult solved = solve_poisson(rhs, params);
  out.solve = std::move(solved.report);
  out.isovalue = select_isovalue(solved.chi, pc, params);
  out.isovalue_out_of_range = !isovalue_in_range(solved.chi, out.isovalue);
  out.mesh = marching_cubes(solved.chi, out.isovalue);
  return out;
}

}  // namespace artrecon
