#include "maglens/kernels/sampling.hpp"

#include <algorithm>
#include <cmath>

namespace maglens::kernels {

namespace {

constexpr double kInteriorMargin = 1e-9;
constexpr double kBoundsSlack = 1e-9;

inline bool interior(const GridView& g, double px, double py, double pz) {
  const double lx = (px - g.ox) / g.sx;
  const double ly = (py - g.oy) / g.sy;
  const double lz = (pz - g.oz) / g.sz;
  return lx >= 1.0 + kInteriorMargin && lx <= (g.nx - 2) - kInteriorMargin &&
         ly >= 1.0 + kInteriorMargin && ly <= (g.ny - 2) - kInteriorMargin &&
         lz >= 1.0 + kInteriorMargin && lz <= (g.nz - 2) - kInteriorMargin;
}

}  // namespace

double sample_point(const GridView& g, double px, double py, double pz) {
  const double mx = static_cast<double>(g.nx - 1);
  const double my = static_cast<double>(g.ny - 1);
  const double mz = static_cast<double>(g.nz - 1);
  double lx = (px - g.ox) / g.sx;
  double ly = (py - g.oy) / g.sy;
  double lz = (pz - g.oz) / g.sz;
  // Closed box: points on a face (up to rounding) count as inside.
  if (!(lx >= -kBoundsSlack && lx <= mx + kBoundsSlack && ly >= -kBoundsSlack && ly <= my + kBoundsSlack &&
        lz >= -kBoundsSlack && lz <= mz + kBoundsSlack)) {
    return 0.0;
  }
  lx = std::min(std::max(lx, 0.0), mx);
  ly = std::min(std::max(ly, 0.0), my);
  lz = std::min(std::max(lz, 0.0), mz);
  int ix = static_cast<int>(lx);
  int iy = static_cast<int>(ly);
  int iz = static_cast<int>(lz);
  // Axes of length 1 clamp to voxel 0 and read it as their own neighbor.
  const int cx = g.nx > 1 ? g.nx - 2 : 0;
  const int cy = g.ny > 1 ? g.ny - 2 : 0;
  const int cz = g.nz > 1 ? g.nz - 2 : 0;
  if (ix > cx) ix = cx;
  if (iy > cy) iy = cy;
  if (iz > cz) iz = cz;
  const double fx = lx - static_cast<double>(ix);
  const double fy = ly - static_cast<double>(iy);
  const double fz = lz - static_cast<double>(iz);

  const int sxy = g.nx * g.ny;
  const int base = ix + g.nx * iy + sxy * iz;
  const int dx = g.nx > 1 ? 1 : 0;
  const int dy = g.ny > 1 ? g.nx : 0;
  const int dz = g.nz > 1 ? sxy : 0;
  const double* v = g.values;
  const double c000 = v[base];
  const double c100 = v[base + dx];
  const double c010 = v[base + dy];
  const double c110 = v[base + dy + dx];
  const double c001 = v[base + dz];
  const double c101 = v[base + dz + dx];
  const double c011 = v[base + dz + dy];
  const double c111 = v[base + dz + dy + dx];

  const double gx = 1.0 - fx;
  const double gy = 1.0 - fy;
  const double gz = 1.0 - fz;
  const double c00 = c000 * gx + c100 * fx;
  const double c10 = c010 * gx + c110 * fx;
  const double c01 = c001 * gx + c101 * fx;
  const double c11 = c011 * gx + c111 * fx;
  const double c0 = c00 * gy + c10 * fy;
  const double c1 = c01 * gy + c11 * fy;
  return c0 * gz + c1 * fz;
}

namespace scalar {

void sample_line(const GridView& g, const Line& line, std::span<double> out) {
  for (std::size_t k = 0; k < out.size(); ++k) {
    const double kd = static_cast<double>(k);
    out[k] = sample_point(g, line.start[0] + kd * line.delta[0], line.start[1] + kd * line.delta[1],
                          line.start[2] + kd * line.delta[2]);
  }
}

void gradient_line(const GridView& g, const Line& line, bool interior_only,
                   std::span<double> out) {
  const double two_sx = 2.0 * g.sx;
  const double two_sy = 2.0 * g.sy;
  const double two_sz = 2.0 * g.sz;
  for (std::size_t k = 0; k < out.size(); ++k) {
    const double kd = static_cast<double>(k);
    const double px = line.start[0] + kd * line.delta[0];
    const double py = line.start[1] + kd * line.delta[1];
    const double pz = line.start[2] + kd * line.delta[2];
    if (interior_only && !interior(g, px, py, pz)) {
      out[k] = 0.0;
      continue;
    }
    const double dx = (sample_point(g, px + g.sx, py, pz) - sample_point(g, px - g.sx, py, pz)) / two_sx;
    const double dy = (sample_point(g, px, py + g.sy, pz) - sample_point(g, px, py - g.sy, pz)) / two_sy;
    const double dz = (sample_point(g, px, py, pz + g.sz) - sample_point(g, px, py, pz - g.sz)) / two_sz;
    out[k] = std::sqrt(dx * dx + dy * dy + dz * dz);
  }
}

}  // namespace scalar
}  // namespace maglens::kernels
