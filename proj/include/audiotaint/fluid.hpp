#pragma once

// 3D periodic-grid velocity fields: seeded initialization, one explicit
// update step with viscous stresses and a pressure-gradient surrogate,
// Laplacian smoothing, Reynolds number and a drag coefficient.

#include <cmath>
#include <stdexcept>
#include <vector>

#include "audiotaint/rng.hpp"

namespace taint::fluid {

struct GridSpec {
  double lx = 2.0 * kPi, ly = 2.0 * kPi, lz = 2.0 * kPi;
  int nx = 16, ny = 16, nz = 16;

  double dx() const { return lx / (nx - 1); }
  double dy() const { return ly / (ny - 1); }
  double dz() const { return lz / (nz - 1); }
  void validate() const {
    if (nx < 2 || ny < 2 || nz < 2)
      throw std::invalid_argument("GridSpec: grid must be at least 2 points per axis");
    if (lx <= 0.0 || ly <= 0.0 || lz <= 0.0)
      throw std::invalid_argument("GridSpec: domain lengths must be > 0");
  }
};

// Dense scalar field on an nx*ny*nz grid, row-major in (i, j, k).
class Grid3 {
 public:
  Grid3() = default;
  Grid3(int nx, int ny, int nz, double fill = 0.0)
      : nx_(nx), ny_(ny), nz_(nz), data_(static_cast<std::size_t>(nx) * ny * nz, fill) {}

  int nx() const { return nx_; }
  int ny() const { return ny_; }
  int nz() const { return nz_; }
  std::size_t size() const { return data_.size(); }

  double& at(int i, int j, int k) { return data_[idx(i, j, k)]; }
  double at(int i, int j, int k) const { return data_[idx(i, j, k)]; }
  const std::vector<double>& data() const { return data_; }
  std::vector<double>& data() { return data_; }

  bool same_shape(const Grid3& o) const {
    return nx_ == o.nx_ && ny_ == o.ny_ && nz_ == o.nz_;
  }
  double max_abs() const {
    double m = 0.0;
    for (double v : data_) m = std::max(m, std::abs(v));
    return m;
  }
  double sum() const {
    double s = 0.0;
    for (double v : data_) s += v;
    return s;
  }
  bool all_finite() const {
    for (double v : data_)
      if (!std::isfinite(v)) return false;
    return true;
  }

 private:
  std::size_t idx(int i, int j, int k) const {
    return (static_cast<std::size_t>(i) * ny_ + j) * nz_ + k;
  }
  int nx_ = 0, ny_ = 0, nz_ = 0;
  std::vector<double> data_;
};

struct VelocityField {
  Grid3 u, v, w;

  bool matches(const GridSpec& g) const {
    return u.nx() == g.nx && u.ny() == g.ny && u.nz() == g.nz && u.same_shape(v) &&
           u.same_shape(w);
  }
  bool all_finite() const { return u.all_finite() && v.all_finite() && w.all_finite(); }
  double max_abs() const { return std::max({u.max_abs(), v.max_abs(), w.max_abs()}); }
};

struct FluidParams {
  double density = 1.0;
  double viscosity = 0.01;
  double dt = 1e-3;
  double pressure_coeff = 1.0;  // artificial-compressibility constant c^2

  void validate() const {
    if (density <= 0.0 || viscosity <= 0.0 || dt <= 0.0)
      throw std::invalid_argument("FluidParams: density, viscosity, dt must be > 0");
    if (pressure_coeff < 0.0)
      throw std::invalid_argument("FluidParams: pressure_coeff must be >= 0");
  }
};

// Periodic forward difference along one axis: (f(next) - f(here)) / h.
enum class Axis { X, Y, Z };

inline Grid3 forward_diff(const Grid3& f, Axis axis, double h) {
  Grid3 out(f.nx(), f.ny(), f.nz());
  const int nx = f.nx(), ny = f.ny(), nz = f.nz();
  for (int i = 0; i < nx; ++i)
    for (int j = 0; j < ny; ++j)
      for (int k = 0; k < nz; ++k) {
        double next;
        switch (axis) {
          case Axis::X: next = f.at((i + 1) % nx, j, k); break;
          case Axis::Y: next = f.at(i, (j + 1) % ny, k); break;
          default: next = f.at(i, j, (k + 1) % nz); break;
        }
        out.at(i, j, k) = (next - f.at(i, j, k)) / h;
      }
  return out;
}

// Radial seed sin(r)e^{-r}, cos(r)e^{-r}, sin(r)e^{-r}, then overwritten by
// the index-based sinusoidal-Gaussian profiles with amplitudes 1.0/0.5/0.25.
inline VelocityField initialize_system(const GridSpec& g) {
  g.validate();
  VelocityField f;
  f.u = Grid3(g.nx, g.ny, g.nz);
  f.v = Grid3(g.nx, g.ny, g.nz);
  f.w = Grid3(g.nx, g.ny, g.nz);
  for (int i = 0; i < g.nx; ++i)
    for (int j = 0; j < g.ny; ++j)
      for (int k = 0; k < g.nz; ++k) {
        const double x = i * g.dx(), y = j * g.dy(), z = k * g.dz();
        const double r = std::sqrt(x * x + y * y + z * z);
        f.u.at(i, j, k) = std::sin(r) * std::exp(-r);
        f.v.at(i, j, k) = std::cos(r) * std::exp(-r);
        f.w.at(i, j, k) = std::sin(r) * std::exp(-r);
      }
  for (int i = 0; i < g.nx; ++i)
    for (int j = 0; j < g.ny; ++j)
      for (int k = 0; k < g.nz; ++k) {
        const double fi = static_cast<double>(i), fj = static_cast<double>(j),
                     fk = static_cast<double>(k);
        const double gz = std::exp(-(fk / g.nz) * (fk / g.nz));
        f.u.at(i, j, k) = 1.0 * std::sin(kPi * fk / g.nx) * std::cos(kPi * fj / g.ny) * gz;
        f.v.at(i, j, k) = 0.5 * std::sin(kPi * fj / g.ny) * std::cos(kPi * fi / g.nx) * gz;
        f.w.at(i, j, k) = 0.25 * std::sin(kPi * fk / g.nz) * std::cos(kPi * fi / g.nx) *
                          std::exp(-(fj / g.ny) * (fj / g.ny));
      }
  return f;
}

// One explicit update:
//   tau_ij = mu (d_j u_i + d_i u_j) / 2          (viscous stress)
//   grad_p = pressure_coeff * grad(div u)        (compressibility surrogate)
//   u_new  = u - dt (grad_p_i + sum_j d_j tau_ij)
// All derivatives are periodic forward differences; the input is not mutated.
inline VelocityField navier_stokes_step(const VelocityField& f, const GridSpec& g,
                                        const FluidParams& p) {
  g.validate();
  p.validate();
  if (!f.matches(g)) throw std::invalid_argument("navier_stokes_step: field/grid shape mismatch");
  if (!f.all_finite()) throw std::invalid_argument("navier_stokes_step: non-finite input field");

  const double hs[3] = {g.dx(), g.dy(), g.dz()};
  const Grid3* vel[3] = {&f.u, &f.v, &f.w};

  // grad[i][j] = d u_i / d x_j
  Grid3 grad[3][3];
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j)
      grad[i][j] = forward_diff(*vel[i], static_cast<Axis>(j), hs[j]);

  // Divergence and its gradient.
  Grid3 div(g.nx, g.ny, g.nz);
  for (std::size_t c = 0; c < div.size(); ++c)
    div.data()[c] = grad[0][0].data()[c] + grad[1][1].data()[c] + grad[2][2].data()[c];
  Grid3 grad_p[3];
  for (int j = 0; j < 3; ++j) {
    grad_p[j] = forward_diff(div, static_cast<Axis>(j), hs[j]);
    for (double& v : grad_p[j].data()) v *= p.pressure_coeff;
  }

  VelocityField out;
  Grid3* out_vel[3] = {&out.u, &out.v, &out.w};
  for (int i = 0; i < 3; ++i) {
    // Stress divergence: sum_j d_j [ mu (grad[i][j] + grad[j][i]) / 2 ].
    Grid3 stress_div(g.nx, g.ny, g.nz);
    for (int j = 0; j < 3; ++j) {
      Grid3 tau(g.nx, g.ny, g.nz);
      for (std::size_t c = 0; c < tau.size(); ++c)
        tau.data()[c] = p.viscosity * 0.5 * (grad[i][j].data()[c] + grad[j][i].data()[c]);
      const Grid3 dtau = forward_diff(tau, static_cast<Axis>(j), hs[j]);
      for (std::size_t c = 0; c < stress_div.size(); ++c)
        stress_div.data()[c] += dtau.data()[c];
    }
    *out_vel[i] = *vel[i];
    for (std::size_t c = 0; c < out_vel[i]->size(); ++c)
      out_vel[i]->data()[c] -= p.dt * (grad_p[i].data()[c] + stress_div.data()[c]);
  }
  return out;
}

// x <- x + weight * L x where L is the 6-neighbor periodic graph Laplacian
// normalized by 6, so weight = 1 replaces each cell by its neighbor average.
// The grid sum is preserved exactly up to rounding.
inline Grid3 laplacian_smooth(const Grid3& field, double weight) {
  if (weight < 0.0 || weight > 1.0)
    throw std::invalid_argument("laplacian_smooth: weight must lie in [0,1]");
  const int nx = field.nx(), ny = field.ny(), nz = field.nz();
  Grid3 out(nx, ny, nz);
  for (int i = 0; i < nx; ++i)
    for (int j = 0; j < ny; ++j)
      for (int k = 0; k < nz; ++k) {
        const double nbr = field.at((i + 1) % nx, j, k) + field.at((i + nx - 1) % nx, j, k) +
                           field.at(i, (j + 1) % ny, k) + field.at(i, (j + ny - 1) % ny, k) +
                           field.at(i, j, (k + 1) % nz) + field.at(i, j, (k + nz - 1) % nz);
        const double c = field.at(i, j, k);
        out.at(i, j, k) = c + weight * (nbr / 6.0 - c);
      }
  return out;
}

// Re = rho V D / mu.
inline double reynolds_number(double density, double velocity, double diameter,
                              double viscosity) {
  if (viscosity <= 0.0) throw std::invalid_argument("reynolds_number: viscosity must be > 0");
  return density * velocity * diameter / viscosity;
}

// Drag coefficient from a boundary-face force balance: the net viscous force
// per axis is the stress tensor integrated over the six outer faces of the
// grid cube, F_i = sum_faces tau_ij n_j dA. This surface-sum reading stands
// in for the underspecified force-balance routine; uniform fields give zero.
inline double compute_drag_coefficient(const VelocityField& f, const GridSpec& g,
                                       const FluidParams& p) {
  g.validate();
  p.validate();
  if (!f.matches(g)) throw std::invalid_argument("compute_drag_coefficient: shape mismatch");

  const double hs[3] = {g.dx(), g.dy(), g.dz()};
  const Grid3* vel[3] = {&f.u, &f.v, &f.w};

  double speed_sum = 0.0;
  for (std::size_t c = 0; c < f.u.size(); ++c)
    speed_sum += std::sqrt(f.u.data()[c] * f.u.data()[c] + f.v.data()[c] * f.v.data()[c] +
                           f.w.data()[c] * f.w.data()[c]);
  const double mean_speed = speed_sum / static_cast<double>(f.u.size());
  if (mean_speed <= 0.0)
    throw std::domain_error("compute_drag_coefficient: zero mean velocity");

  Grid3 tau[3][3];
  {
    Grid3 grad[3][3];
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j)
        grad[i][j] = forward_diff(*vel[i], static_cast<Axis>(j), hs[j]);
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j) {
        tau[i][j] = Grid3(g.nx, g.ny, g.nz);
        for (std::size_t c = 0; c < tau[i][j].size(); ++c)
          tau[i][j].data()[c] =
              p.viscosity * 0.5 * (grad[i][j].data()[c] + grad[j][i].data()[c]);
      }
  }

  double force[3] = {0.0, 0.0, 0.0};
  const double area_x = g.dy() * g.dz(), area_y = g.dx() * g.dz(), area_z = g.dx() * g.dy();
  for (int i = 0; i < 3; ++i) {
    // x = 0 (outward normal -x) and x = nx-1 (+x) faces.
    for (int j = 0; j < g.ny; ++j)
      for (int k = 0; k < g.nz; ++k)
        force[i] += (tau[i][0].at(g.nx - 1, j, k) - tau[i][0].at(0, j, k)) * area_x;
    for (int ii = 0; ii < g.nx; ++ii)
      for (int k = 0; k < g.nz; ++k)
        force[i] += (tau[i][1].at(ii, g.ny - 1, k) - tau[i][1].at(ii, 0, k)) * area_y;
    for (int ii = 0; ii < g.nx; ++ii)
      for (int j = 0; j < g.ny; ++j)
        force[i] += (tau[i][2].at(ii, j, g.nz - 1) - tau[i][2].at(ii, j, 0)) * area_z;
  }
  const double drag_force =
      std::sqrt(force[0] * force[0] + force[1] * force[1] + force[2] * force[2]);
  const double drag_area = 1.0;
  return drag_force / (0.5 * p.density * mean_speed * mean_speed * drag_area);
}

}  // namespace taint::fluid
