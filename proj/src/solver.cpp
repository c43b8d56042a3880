#include "meltpool/solver.hpp"

#include <Eigen/IterativeLinearSolvers>
#include <Eigen/SparseCore>
#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "meltpool/error.hpp"

namespace meltpool {

void SimulationConfig::validate() const {
  material.validate();
  source.path.validate();
  std::visit([](const auto& m) {
    if constexpr (std::is_same_v<std::decay_t<decltype(m)>, GoldakSpec>) m.validate();
  }, source.model);
  grid.domain.validate();
  if (time_step && !(*time_step > 0.0)) throw ConfigError("solver.dt", "must be > 0");
  if (!(end_time > 0.0)) throw ConfigError("solver.end_time", "must be > 0");
  if (!(newton.relative_tolerance > 0.0)) throw ConfigError("solver.newton_tolerance", "must be > 0");
  if (newton.max_iterations < 1) throw ConfigError("solver.newton_max_iterations", "must be >= 1");
  if (!(emissivity >= 0.0 && emissivity <= 1.0)) {
    throw ConfigError("boundary.emissivity", "must lie in [0, 1]");
  }
  if (!(stefan_boltzmann >= 0.0)) throw ConfigError("boundary.stefan_boltzmann", "must be >= 0");
  if (!(initial_temperature + kKelvinOffset > 0.0)) {
    throw ConfigError("boundary.initial_temperature", "must be above absolute zero");
  }
  if (!(ambient_temperature + kKelvinOffset > 0.0)) {
    throw ConfigError("boundary.ambient_temperature", "must be above absolute zero");
  }
}

double radiation_flux(double T, double T_ambient, double emissivity, double stefan_boltzmann) {
  const double tk = T + kKelvinOffset;
  const double ek = T_ambient + kKelvinOffset;
  if (!(tk > 0.0 && ek > 0.0)) throw InvalidInput("radiation_flux: temperature below absolute zero");
  return stefan_boltzmann * emissivity * (tk * tk + ek * ek) * (ek * ek - tk * tk);
}

double SolveReport::total_input() const {
  double s = 0.0;
  for (const auto& r : steps) s += r.energy_input;
  return s;
}

double SolveReport::total_radiated() const {
  double s = 0.0;
  for (const auto& r : steps) s += r.energy_radiated;
  return s;
}

double SolveReport::total_stored() const {
  double s = 0.0;
  for (const auto& r : steps) s += r.energy_stored;
  return s;
}

const TemperatureField& SnapshotStore::nearest(double time) const {
  if (fields.empty()) throw InvalidInput("snapshot store is empty");
  const auto it = std::min_element(fields.begin(), fields.end(), [time](const auto& a, const auto& b) {
    return std::abs(a.time - time) < std::abs(b.time - time);
  });
  return *it;
}

std::vector<double> lumped_volumes(const GradedGrid& g) {
  std::vector<double> v(g.node_count(), 0.0);
  for (std::size_t k = 0; k < g.cells(2); ++k) {
    const double hz = g.coords(2)[k + 1] - g.coords(2)[k];
    for (std::size_t j = 0; j < g.cells(1); ++j) {
      const double hy = g.coords(1)[j + 1] - g.coords(1)[j];
      for (std::size_t i = 0; i < g.cells(0); ++i) {
        const double hx = g.coords(0)[i + 1] - g.coords(0)[i];
        const double share = 0.125 * hx * hy * hz;
        for (int c = 0; c < 8; ++c) {
          v[g.index(i + (c & 1), j + ((c >> 1) & 1), k + ((c >> 2) & 1))] += share;
        }
      }
    }
  }
  return v;
}

namespace {

using SparseMatrix = Eigen::SparseMatrix<double, Eigen::RowMajor, int>;
using Vector = Eigen::VectorXd;

// Unit element matrices D (x) M (x) M for the three axes of a box cell; local
// node a = ix + 2 iy + 4 iz.
struct ElementMatrices {
  std::array<std::array<std::array<double, 8>, 8>, 3> axis{};

  ElementMatrices() {
    const double D[2][2] = {{1.0, -1.0}, {-1.0, 1.0}};
    const double M[2][2] = {{1.0 / 3.0, 1.0 / 6.0}, {1.0 / 6.0, 1.0 / 3.0}};
    for (int a = 0; a < 8; ++a) {
      const int ia[3] = {a & 1, (a >> 1) & 1, (a >> 2) & 1};
      for (int b = 0; b < 8; ++b) {
        const int ib[3] = {b & 1, (b >> 1) & 1, (b >> 2) & 1};
        for (int d = 0; d < 3; ++d) {
          double v = 1.0;
          for (int e = 0; e < 3; ++e) v *= (e == d ? D : M)[ia[e]][ib[e]];
          axis[d][a][b] = v;
        }
      }
    }
  }
};

const ElementMatrices& element_matrices() {
  static const ElementMatrices m;
  return m;
}

double norm2(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return std::sqrt(s);
}

}  // namespace

struct HeatSolver::Impl {
  SimulationConfig cfg;
  std::shared_ptr<const GradedGrid> grid;
  std::size_t nx, ny, nz, n;
  std::vector<double> volume;    // lumped nodal volume
  std::vector<double> top_area;  // lumped top-face area, indexed i + nx * k
  std::array<int, 3> frame;      // grid axis d takes material-frame component frame[d]
  SparseMatrix jacobian;

  // Per-axis neighbour counts used to locate matrix slots.
  std::array<std::vector<int>, 3> has_minus;
  std::array<std::vector<int>, 3> count;

  // Step workspace.
  std::vector<double> loads, enthalpy_old, residual, trial, trial_residual, diag;

  explicit Impl(SimulationConfig c) : cfg(std::move(c)) {
    cfg.validate();
    grid = build_grid(cfg.grid);
    nx = grid->nodes(0);
    ny = grid->nodes(1);
    nz = grid->nodes(2);
    n = grid->node_count();
    volume = lumped_volumes(*grid);
    top_area.assign(nx * nz, 0.0);
    for (std::size_t k = 0; k + 1 < nz; ++k) {
      const double hz = grid->coords(2)[k + 1] - grid->coords(2)[k];
      for (std::size_t i = 0; i + 1 < nx; ++i) {
        const double share = 0.25 * hz * (grid->coords(0)[i + 1] - grid->coords(0)[i]);
        top_area[i + nx * k] += share;
        top_area[i + 1 + nx * k] += share;
        top_area[i + nx * (k + 1)] += share;
        top_area[i + 1 + nx * (k + 1)] += share;
      }
    }
    const auto& dir = cfg.source.path.direction;
    if (std::abs(dir.x) > std::abs(dir.z)) {
      frame = {0, 2, 1};  // scan along x
    } else {
      frame = {1, 2, 0};  // scan along z
    }
    build_pattern();
  }

  void build_pattern() {
    const std::array<std::size_t, 3> dims{nx, ny, nz};
    for (int a = 0; a < 3; ++a) {
      has_minus[a].resize(dims[a]);
      count[a].resize(dims[a]);
      for (std::size_t i = 0; i < dims[a]; ++i) {
        has_minus[a][i] = i > 0 ? 1 : 0;
        count[a][i] = 1 + (i > 0 ? 1 : 0) + (i + 1 < dims[a] ? 1 : 0);
      }
    }
    jacobian.resize(static_cast<int>(n), static_cast<int>(n));
    Eigen::VectorXi row_sizes(static_cast<Eigen::Index>(n));
    for (std::size_t k = 0; k < nz; ++k)
      for (std::size_t j = 0; j < ny; ++j)
        for (std::size_t i = 0; i < nx; ++i)
          row_sizes[static_cast<Eigen::Index>(grid->index(i, j, k))] =
              count[0][i] * count[1][j] * count[2][k];
    jacobian.reserve(row_sizes);
    for (std::size_t k = 0; k < nz; ++k)
      for (std::size_t j = 0; j < ny; ++j)
        for (std::size_t i = 0; i < nx; ++i) {
          const auto row = static_cast<int>(grid->index(i, j, k));
          for (int dk = -has_minus[2][k]; dk <= count[2][k] - 1 - has_minus[2][k]; ++dk)
            for (int dj = -has_minus[1][j]; dj <= count[1][j] - 1 - has_minus[1][j]; ++dj)
              for (int di = -has_minus[0][i]; di <= count[0][i] - 1 - has_minus[0][i]; ++di) {
                const auto col = static_cast<int>(grid->index(i + di, j + dj, k + dk));
                jacobian.insert(row, col) = 0.0;
              }
        }
    jacobian.makeCompressed();
  }

  // Position of column (row + offset) inside the compressed row of node (i, j, k).
  int slot(std::size_t i, std::size_t j, std::size_t k, int di, int dj, int dk) const {
    const int cx = count[0][i];
    const int cxy = cx * count[1][j];
    const int pos = (dk + has_minus[2][k]) * cxy + (dj + has_minus[1][j]) * cx + (di + has_minus[0][i]);
    return jacobian.outerIndexPtr()[grid->index(i, j, k)] + pos;
  }

  std::array<double, 3> grid_frame(const ConductivityTensor& k) const {
    return {k[frame[0]], k[frame[1]], k[frame[2]]};
  }

  // Residual, and the Jacobian when `with_jacobian` is set.
  void assemble(const std::vector<double>& T, double dt, std::vector<double>& R,
                bool with_jacobian) {
    const MaterialModel& mat = cfg.material;
    const ElementMatrices& em = element_matrices();
    R.resize(n);
    double* values = nullptr;
    if (with_jacobian) {
      values = jacobian.valuePtr();
      std::fill(values, values + jacobian.nonZeros(), 0.0);
      diag.assign(n, 0.0);
    }
    const double inv_dt = 1.0 / dt;
    for (std::size_t p = 0; p < n; ++p) {
      R[p] = volume[p] * (volumetric_enthalpy(mat, T[p]) - enthalpy_old[p]) * inv_dt - loads[p];
      if (with_jacobian) diag[p] = volume[p] * apparent_volumetric_capacity(mat, T[p]) * inv_dt;
    }
    const double eps_sigma = cfg.emissivity * cfg.stefan_boltzmann;
    if (eps_sigma > 0.0) {
      const double ek = cfg.ambient_temperature + kKelvinOffset;
      for (std::size_t k = 0; k < nz; ++k) {
        for (std::size_t i = 0; i < nx; ++i) {
          const std::size_t p = grid->index(i, ny - 1, k);
          const double area = top_area[i + nx * k];
          const double tk = T[p] + kKelvinOffset;
          R[p] -= area * eps_sigma * (ek * ek * ek * ek - tk * tk * tk * tk);
          if (with_jacobian) diag[p] += area * eps_sigma * 4.0 * tk * tk * tk;
        }
      }
    }

    const std::size_t sy = nx;
    const std::size_t sz = nx * ny;
    const std::array<std::size_t, 8> offsets{0, 1, sy, sy + 1, sz, sz + 1, sz + sy, sz + sy + 1};
    const auto& xs = grid->coords(0);
    const auto& ys = grid->coords(1);
    const auto& zs = grid->coords(2);
    std::array<double, 8> te{};
    std::array<std::array<double, 8>, 3> at{};
    for (std::size_t k = 0; k + 1 < nz; ++k) {
      const double hz = zs[k + 1] - zs[k];
      for (std::size_t j = 0; j + 1 < ny; ++j) {
        const double hy = ys[j + 1] - ys[j];
        for (std::size_t i = 0; i + 1 < nx; ++i) {
          const double hx = xs[i + 1] - xs[i];
          const std::array<double, 3> geom{hy * hz / hx, hx * hz / hy, hx * hy / hz};
          const std::size_t base = grid->index(i, j, k);
          double mean = 0.0;
          for (int a = 0; a < 8; ++a) {
            te[a] = T[base + offsets[a]];
            mean += te[a];
          }
          mean *= 0.125;
          const auto kc = grid_frame(conductivity_tensor(mat, mean));
          std::array<double, 3> coef{};
          for (int d = 0; d < 3; ++d) {
            coef[d] = kc[d] * geom[d];
            for (int a = 0; a < 8; ++a) {
              double s = 0.0;
              for (int b = 0; b < 8; ++b) s += em.axis[d][a][b] * te[b];
              at[d][a] = s;
            }
          }
          for (int a = 0; a < 8; ++a) {
            R[base + offsets[a]] += coef[0] * at[0][a] + coef[1] * at[1][a] + coef[2] * at[2][a];
          }
          if (!with_jacobian) continue;
          const auto dkc = grid_frame(conductivity_tensor_slope(mat, mean));
          const std::array<double, 3> dcoef{0.125 * dkc[0] * geom[0], 0.125 * dkc[1] * geom[1],
                                            0.125 * dkc[2] * geom[2]};
          for (int a = 0; a < 8; ++a) {
            const int ia = a & 1, ja = (a >> 1) & 1, ka = (a >> 2) & 1;
            const double rank_one = dcoef[0] * at[0][a] + dcoef[1] * at[1][a] + dcoef[2] * at[2][a];
            const std::size_t ri = i + ia, rj = j + ja, rk = k + ka;
            for (int b = 0; b < 8; ++b) {
              const int ib = b & 1, jb = (b >> 1) & 1, kb = (b >> 2) & 1;
              const double v = coef[0] * em.axis[0][a][b] + coef[1] * em.axis[1][a][b] +
                               coef[2] * em.axis[2][a][b] + rank_one;
              values[slot(ri, rj, rk, ib - ia, jb - ja, kb - ka)] += v;
            }
          }
        }
      }
    }
    if (with_jacobian) {
      for (std::size_t k = 0; k < nz; ++k)
        for (std::size_t j = 0; j < ny; ++j)
          for (std::size_t i = 0; i < nx; ++i)
            values[slot(i, j, k, 0, 0, 0)] += diag[grid->index(i, j, k)];
    }
  }

  void compute_loads(double t, std::vector<double>& F) const {
    F.assign(n, 0.0);
    const ScanPath& path = cfg.source.path;
    if (t < path.start_time) return;
    const BeamState beam = beam_center(path, t);
    if (!beam.active || absorbed_power(cfg.source.model) == 0.0) return;
    const Footprint fp = source_footprint(cfg.source.model);
    const SurfacePoint c = beam.center;
    const SurfacePoint dir = path.direction;

    double x0, x1, z0, z1;
    bool split_z = false, split_x = false;
    if (std::abs(dir.x) <= 1e-12) {
      x0 = c.x - fp.half_x;
      x1 = c.x + fp.half_x;
      z0 = dir.z > 0 ? c.z - fp.behind : c.z - fp.ahead;
      z1 = dir.z > 0 ? c.z + fp.ahead : c.z + fp.behind;
      split_z = true;
    } else if (std::abs(dir.z) <= 1e-12) {
      z0 = c.z - fp.half_x;
      z1 = c.z + fp.half_x;
      x0 = dir.x > 0 ? c.x - fp.behind : c.x - fp.ahead;
      x1 = dir.x > 0 ? c.x + fp.ahead : c.x + fp.behind;
      split_x = true;
    } else {
      const double r = std::max({fp.half_x, fp.behind, fp.ahead});
      x0 = c.x - r;
      x1 = c.x + r;
      z0 = c.z - r;
      z1 = c.z + r;
    }
    const auto& xs = grid->coords(0);
    const auto& zs = grid->coords(2);
    x0 = std::max(x0, xs.front());
    x1 = std::min(x1, xs.back());
    z0 = std::max(z0, zs.front());
    z1 = std::min(z1, zs.back());
    if (!(x1 > x0 && z1 > z0)) return;
    const std::size_t i0 = grid->locate(0, x0).first;
    const std::size_t i1 = grid->locate(0, x1).first;
    const std::size_t k0 = grid->locate(2, z0).first;
    const std::size_t k1 = grid->locate(2, z1).first;
    const double sub = fp.resolution / 4.0;
    const double g = 0.5 / std::sqrt(3.0);
    const double gauss[2] = {0.5 - g, 0.5 + g};

    const auto pieces = [](double a, double b, bool split, double at) {
      std::vector<std::pair<double, double>> out;
      if (split && at > a && at < b) {
        out.push_back({a, at});
        out.push_back({at, b});
      } else {
        out.push_back({a, b});
      }
      return out;
    };

    for (std::size_t k = k0; k <= k1; ++k) {
      const double za = zs[k], zb = zs[k + 1], hz = zb - za;
      for (std::size_t i = i0; i <= i1; ++i) {
        const double xa = xs[i], xb = xs[i + 1], hx = xb - xa;
        double w00 = 0.0, w10 = 0.0, w01 = 0.0, w11 = 0.0;
        for (const auto& [pz0, pz1] : pieces(za, zb, split_z, c.z)) {
          const auto mz = static_cast<std::size_t>(std::max(1.0, std::ceil((pz1 - pz0) / sub)));
          const double dz = (pz1 - pz0) / static_cast<double>(mz);
          for (const auto& [px0, px1] : pieces(xa, xb, split_x, c.x)) {
            const auto mx = static_cast<std::size_t>(std::max(1.0, std::ceil((px1 - px0) / sub)));
            const double dx = (px1 - px0) / static_cast<double>(mx);
            const double weight = 0.25 * dx * dz;
            for (std::size_t sk = 0; sk < mz; ++sk) {
              for (int gk = 0; gk < 2; ++gk) {
                const double z = pz0 + dz * (static_cast<double>(sk) + gauss[gk]);
                const double w = (z - za) / hz;
                for (std::size_t si = 0; si < mx; ++si) {
                  for (int gi = 0; gi < 2; ++gi) {
                    const double x = px0 + dx * (static_cast<double>(si) + gauss[gi]);
                    const double q = surface_flux(cfg.source.model, {x, z}, c, dir);
                    if (q == 0.0) continue;
                    const double u = (x - xa) / hx;
                    const double qw = q * weight;
                    w00 += qw * (1.0 - u) * (1.0 - w);
                    w10 += qw * u * (1.0 - w);
                    w01 += qw * (1.0 - u) * w;
                    w11 += qw * u * w;
                  }
                }
              }
            }
          }
        }
        F[grid->index(i, ny - 1, k)] += w00;
        F[grid->index(i + 1, ny - 1, k)] += w10;
        F[grid->index(i, ny - 1, k + 1)] += w01;
        F[grid->index(i + 1, ny - 1, k + 1)] += w11;
      }
    }
  }

  TemperatureField advance(const TemperatureField& state, double dt, StepRecord& rec) {
    const auto started = std::chrono::steady_clock::now();
    if (state.grid != grid && (state.values.size() != n)) {
      throw InvalidInput("advance: state does not belong to this solver's grid");
    }
    if (!(dt > 0.0)) throw InvalidInput("advance: dt must be positive");
    const double t_new = state.time + dt;
    const MaterialModel& mat = cfg.material;
    compute_loads(t_new, loads);
    enthalpy_old.resize(n);
    double h_scale = 0.0;
    for (std::size_t p = 0; p < n; ++p) {
      enthalpy_old[p] = volumetric_enthalpy(mat, state.values[p]);
      const double v = volume[p] * enthalpy_old[p] / dt;
      h_scale += v * v;
    }
    const double floor_tol = 1e-13 * std::sqrt(h_scale);

    std::vector<double> T = state.values;
    assemble(T, dt, residual, false);
    double r_norm = norm2(residual);
    rec = StepRecord{};
    rec.time = t_new;
    rec.dt = dt;
    rec.initial_residual = r_norm;
    const double tol = std::max(cfg.newton.relative_tolerance * r_norm, floor_tol);

    Eigen::BiCGSTAB<SparseMatrix, Eigen::DiagonalPreconditioner<double>> linear;
    linear.setTolerance(cfg.newton.linear_tolerance);
    linear.setMaxIterations(2000);
    Vector rhs(static_cast<Eigen::Index>(n));
    bool converged = r_norm <= tol;
    int it = 0;
    while (!converged && it < cfg.newton.max_iterations) {
      ++it;
      assemble(T, dt, residual, true);
      for (std::size_t p = 0; p < n; ++p) rhs[static_cast<Eigen::Index>(p)] = -residual[p];
      linear.compute(jacobian);
      const Vector delta = linear.solve(rhs);
      if (linear.info() != Eigen::Success && !(linear.error() < 1e-2)) {
        rec.newton_iterations = it;
        rec.final_residual = r_norm;
        throw SolverError("linear solve failed at t=" + std::to_string(t_new) +
                          " (BiCGSTAB error " + std::to_string(linear.error()) + ")");
      }
      double lambda = 1.0;
      bool accepted = false;
      for (int bt = 0; bt <= cfg.newton.max_backtracks; ++bt) {
        trial.resize(n);
        for (std::size_t p = 0; p < n; ++p) {
          trial[p] = T[p] + lambda * delta[static_cast<Eigen::Index>(p)];
        }
        assemble(trial, dt, trial_residual, false);
        const double trial_norm = norm2(trial_residual);
        if (std::isfinite(trial_norm) && trial_norm < (1.0 - 1e-4 * lambda) * r_norm) {
          T.swap(trial);
          residual.swap(trial_residual);
          r_norm = trial_norm;
          accepted = true;
          break;
        }
        lambda *= 0.5;
      }
      if (!accepted) {
        rec.newton_iterations = it;
        rec.final_residual = r_norm;
        std::ostringstream msg;
        msg << "Newton stalled at t=" << t_new << " after " << it << " iterations (residual "
            << r_norm << ", target " << tol << ")";
        throw SolverError(msg.str());
      }
      converged = r_norm <= tol;
    }
    rec.newton_iterations = it;
    rec.final_residual = r_norm;
    if (!converged) {
      std::ostringstream msg;
      msg << "Newton did not converge at t=" << t_new << " in " << it << " iterations (residual "
          << r_norm << ", target " << tol << ")";
      throw SolverError(msg.str());
    }

    double input = 0.0;
    for (double f : loads) input += f;
    double radiated = 0.0;
    if (cfg.emissivity > 0.0) {
      for (std::size_t k = 0; k < nz; ++k)
        for (std::size_t i = 0; i < nx; ++i) {
          radiated += top_area[i + nx * k] *
                      radiation_flux(T[grid->index(i, ny - 1, k)], cfg.ambient_temperature,
                                     cfg.emissivity, cfg.stefan_boltzmann);
        }
    }
    double stored = 0.0;
    for (std::size_t p = 0; p < n; ++p) {
      stored += volume[p] * (volumetric_enthalpy(mat, T[p]) - enthalpy_old[p]);
    }
    rec.energy_input = input * dt;
    rec.energy_radiated = radiated * dt;
    rec.energy_stored = stored;
    rec.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();

    TemperatureField out;
    out.grid = grid;
    out.values = std::move(T);
    out.time = t_new;
    return out;
  }
};

HeatSolver::HeatSolver(SimulationConfig cfg) : impl_(std::make_unique<Impl>(std::move(cfg))) {}
HeatSolver::~HeatSolver() = default;
HeatSolver::HeatSolver(HeatSolver&&) noexcept = default;
HeatSolver& HeatSolver::operator=(HeatSolver&&) noexcept = default;

const SimulationConfig& HeatSolver::config() const { return impl_->cfg; }
const std::shared_ptr<const GradedGrid>& HeatSolver::grid() const { return impl_->grid; }

TemperatureField HeatSolver::initial_field() const {
  return TemperatureField(impl_->grid, impl_->cfg.initial_temperature, 0.0);
}

double HeatSolver::default_time_step() const {
  return impl_->grid->min_spacing() / (2.0 * impl_->cfg.source.path.speed);
}

TemperatureField HeatSolver::advance(const TemperatureField& state, double dt, StepRecord& record) {
  return impl_->advance(state, dt, record);
}

std::vector<double> HeatSolver::laser_loads(double t) const {
  std::vector<double> f;
  impl_->compute_loads(t, f);
  return f;
}

TemperatureField advance(const TemperatureField& state, const SimulationConfig& cfg, double dt) {
  HeatSolver solver(cfg);
  TemperatureField start = state;
  if (state.values.size() != solver.grid()->node_count()) {
    throw InvalidInput("advance: state does not match the configured grid");
  }
  start.grid = solver.grid();
  StepRecord rec;
  return solver.advance(start, dt, rec);
}

SimulationResult simulate(const SimulationConfig& cfg, const ProgressCallback& progress) {
  const auto started = std::chrono::steady_clock::now();
  HeatSolver solver(cfg);
  SimulationResult result;
  TemperatureField field = solver.initial_field();
  result.snapshots.fields.push_back(field);

  const double end = cfg.end_time;
  std::vector<double> targets;
  for (double t : cfg.snapshots.times) {
    if (t > 0.0 && t < end) targets.push_back(t);
  }
  targets.push_back(end);
  std::sort(targets.begin(), targets.end());
  targets.erase(std::unique(targets.begin(), targets.end()), targets.end());

  const double nominal = cfg.time_step.value_or(solver.default_time_step());
  double dt = nominal;
  std::size_t next_target = 0;
  std::size_t step = 0;
  int halvings = 0;
  while (next_target < targets.size()) {
    const double target = targets[next_target];
    double h = std::min(dt, target - field.time);
    // Avoid a sliver step just before a target.
    bool hits_target = false;
    if (target - field.time - h <= 1e-3 * h) {
      h = target - field.time;
      hits_target = true;
    }
    StepRecord rec;
    TemperatureField next;
    try {
      next = solver.advance(field, h, rec);
    } catch (const SolverError& e) {
      ++result.report.rejected_steps;
      if (++halvings > cfg.newton.max_step_halvings) {
        throw SolverError(std::string(e.what()) + "; time step underflow after " +
                          std::to_string(cfg.newton.max_step_halvings) + " halvings");
      }
      dt = 0.5 * h;
      continue;
    }
    halvings = 0;
    if (hits_target) next.time = target;
    rec.step = ++step;
    rec.time = next.time;
    result.report.steps.push_back(rec);
    if (progress) progress(rec);
    field = std::move(next);
    const bool cadence = cfg.snapshots.every_n_steps > 0 && step % cfg.snapshots.every_n_steps == 0;
    if (hits_target) ++next_target;
    if (hits_target || cadence) result.snapshots.fields.push_back(field);
    dt = std::min(nominal, 2.0 * dt);
  }
  result.report.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  return result;
}

double energy_balance(const SimulationResult& result, const MaterialModel& material) {
  const auto& fields = result.snapshots.fields;
  if (fields.empty()) throw InvalidInput("energy_balance: empty history");
  const TemperatureField& first = fields.front();
  const TemperatureField& last = fields.back();
  for (std::size_t s = 0; s < fields.size(); ++s) {
    if (fields[s].grid != first.grid || fields[s].values.size() != first.values.size()) {
      throw InvalidInput("energy_balance: snapshots live on different grids");
    }
    if (s > 0 && !(fields[s].time > fields[s - 1].time)) {
      throw InvalidInput("energy_balance: snapshot times must increase");
    }
  }
  const double t0 = first.time;
  const double t1 = last.time;
  const double slack = 1e-12 * std::max(1.0, std::abs(t1));
  double input = 0.0;
  double radiated = 0.0;
  bool covered_end = t1 == t0;
  double covered_until = t0;
  for (const auto& r : result.report.steps) {
    if (r.time <= t0 + slack || r.time > t1 + slack) continue;
    if (std::abs((r.time - r.dt) - covered_until) > 1e-9 * std::max(r.dt, slack)) {
      throw InvalidInput("energy_balance: solve report does not cover the snapshot window");
    }
    covered_until = r.time;
    input += r.energy_input;
    radiated += r.energy_radiated;
    if (std::abs(r.time - t1) <= slack) covered_end = true;
  }
  if (!covered_end) throw InvalidInput("energy_balance: solve report does not reach the last snapshot");

  const std::vector<double> volume = lumped_volumes(*first.grid);
  double stored = 0.0;
  for (std::size_t p = 0; p < volume.size(); ++p) {
    stored += volume[p] *
              (volumetric_enthalpy(material, last.values[p]) - volumetric_enthalpy(material, first.values[p]));
  }
  const double mismatch = std::abs(input + radiated - stored);
  if (input > 0.0) return mismatch / input;
  const double scale = std::max(std::abs(radiated), std::abs(stored));
  return scale > 0.0 ? mismatch / scale : 0.0;
}

void write_report_csv(const std::filesystem::path& path, const SolveReport& report) {
  std::ofstream out(path);
  if (!out) throw InvalidInput("cannot write " + path.string());
  out << "step,time,dt,newton_iterations,initial_residual,final_residual,wall_seconds,"
         "energy_input,energy_radiated,energy_stored\n";
  out << std::setprecision(12);
  for (const auto& r : report.steps) {
    out << r.step << ',' << r.time << ',' << r.dt << ',' << r.newton_iterations << ','
        << r.initial_residual << ',' << r.final_residual << ',' << r.wall_seconds << ','
        << r.energy_input << ',' << r.energy_radiated << ',' << r.energy_stored << '\n';
  }
}

std::vector<std::filesystem::path> write_snapshots(const std::filesystem::path& dir,
                                                   const SnapshotStore& store) {
  std::filesystem::create_directories(dir);
  std::vector<std::filesystem::path> files;
  std::ofstream manifest(dir / "manifest.csv");
  if (!manifest) throw InvalidInput("cannot write " + (dir / "manifest.csv").string());
  manifest << "index,time,file\n" << std::setprecision(12);
  for (std::size_t s = 0; s < store.fields.size(); ++s) {
    std::ostringstream name;
    name << "snapshot_" << std::setw(4) << std::setfill('0') << s << ".vtk";
    write_vtk(dir / name.str(), store.fields[s]);
    manifest << s << ',' << store.fields[s].time << ',' << name.str() << '\n';
    files.push_back(dir / name.str());
  }
  files.push_back(dir / "manifest.csv");
  return files;
}

}  // namespace meltpool
