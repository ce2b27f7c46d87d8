// AVX2 variants of the sampling kernels. Four sample points per iteration,
// corner values fetched with gathers. The arithmetic mirrors
// sampling_scalar.cpp operation for operation so results are bit-identical.
//
// Functions carry target attributes instead of compiling the file with
// -mavx2, so no AVX2 code can leak into inline functions shared with the
// rest of the program.

#include "maglens/kernels/sampling.hpp"

#include <immintrin.h>

#define MAGLENS_AVX2 __attribute__((target("avx2")))

namespace maglens::kernels::avx2 {

namespace {

constexpr double kInteriorMargin = 1e-9;
constexpr double kBoundsSlack = 1e-9;

struct Constants {
  __m256d ox, oy, oz;
  __m256d sx, sy, sz;
  __m256d maxx, maxy, maxz;
  __m256d lo_slack, hix, hiy, hiz;
  __m256d zero, one;
  __m128i clampx, clampy, clampz;
  __m128i nx, sxy;
  __m128i step_x, step_y, step_z;
  const double* values;
};

MAGLENS_AVX2 inline Constants make_constants(const GridView& g) {
  Constants c;
  c.ox = _mm256_set1_pd(g.ox);
  c.oy = _mm256_set1_pd(g.oy);
  c.oz = _mm256_set1_pd(g.oz);
  c.sx = _mm256_set1_pd(g.sx);
  c.sy = _mm256_set1_pd(g.sy);
  c.sz = _mm256_set1_pd(g.sz);
  c.maxx = _mm256_set1_pd(static_cast<double>(g.nx - 1));
  c.maxy = _mm256_set1_pd(static_cast<double>(g.ny - 1));
  c.maxz = _mm256_set1_pd(static_cast<double>(g.nz - 1));
  c.lo_slack = _mm256_set1_pd(-kBoundsSlack);
  c.hix = _mm256_set1_pd(static_cast<double>(g.nx - 1) + kBoundsSlack);
  c.hiy = _mm256_set1_pd(static_cast<double>(g.ny - 1) + kBoundsSlack);
  c.hiz = _mm256_set1_pd(static_cast<double>(g.nz - 1) + kBoundsSlack);
  c.zero = _mm256_setzero_pd();
  c.one = _mm256_set1_pd(1.0);
  c.clampx = _mm_set1_epi32(g.nx > 1 ? g.nx - 2 : 0);
  c.clampy = _mm_set1_epi32(g.ny > 1 ? g.ny - 2 : 0);
  c.clampz = _mm_set1_epi32(g.nz > 1 ? g.nz - 2 : 0);
  c.step_x = _mm_set1_epi32(g.nx > 1 ? 1 : 0);
  c.step_y = _mm_set1_epi32(g.ny > 1 ? g.nx : 0);
  c.step_z = _mm_set1_epi32(g.nz > 1 ? g.nx * g.ny : 0);
  c.nx = _mm_set1_epi32(g.nx);
  c.sxy = _mm_set1_epi32(g.nx * g.ny);
  c.values = g.values;
  return c;
}

MAGLENS_AVX2 inline __m256d lerp(__m256d a, __m256d b, __m256d f, __m256d g) {
  return _mm256_add_pd(_mm256_mul_pd(a, g), _mm256_mul_pd(b, f));
}

MAGLENS_AVX2 inline __m256d sample4(const Constants& c, __m256d px, __m256d py,
                                    __m256d pz) {
  const __m256d lx = _mm256_div_pd(_mm256_sub_pd(px, c.ox), c.sx);
  const __m256d ly = _mm256_div_pd(_mm256_sub_pd(py, c.oy), c.sy);
  const __m256d lz = _mm256_div_pd(_mm256_sub_pd(pz, c.oz), c.sz);

  __m256d inside = _mm256_and_pd(_mm256_cmp_pd(lx, c.lo_slack, _CMP_GE_OQ),
                                 _mm256_cmp_pd(lx, c.hix, _CMP_LE_OQ));
  inside = _mm256_and_pd(inside, _mm256_cmp_pd(ly, c.lo_slack, _CMP_GE_OQ));
  inside = _mm256_and_pd(inside, _mm256_cmp_pd(ly, c.hiy, _CMP_LE_OQ));
  inside = _mm256_and_pd(inside, _mm256_cmp_pd(lz, c.lo_slack, _CMP_GE_OQ));
  inside = _mm256_and_pd(inside, _mm256_cmp_pd(lz, c.hiz, _CMP_LE_OQ));
  if (_mm256_movemask_pd(inside) == 0) return c.zero;

  // Out-of-box lanes are evaluated at voxel 0 and masked at the end.
  const __m256d sx = _mm256_blendv_pd(c.zero, _mm256_min_pd(_mm256_max_pd(lx, c.zero), c.maxx), inside);
  const __m256d sy = _mm256_blendv_pd(c.zero, _mm256_min_pd(_mm256_max_pd(ly, c.zero), c.maxy), inside);
  const __m256d sz = _mm256_blendv_pd(c.zero, _mm256_min_pd(_mm256_max_pd(lz, c.zero), c.maxz), inside);

  const __m128i ix = _mm_min_epi32(_mm256_cvttpd_epi32(sx), c.clampx);
  const __m128i iy = _mm_min_epi32(_mm256_cvttpd_epi32(sy), c.clampy);
  const __m128i iz = _mm_min_epi32(_mm256_cvttpd_epi32(sz), c.clampz);
  const __m256d fx = _mm256_sub_pd(sx, _mm256_cvtepi32_pd(ix));
  const __m256d fy = _mm256_sub_pd(sy, _mm256_cvtepi32_pd(iy));
  const __m256d fz = _mm256_sub_pd(sz, _mm256_cvtepi32_pd(iz));

  const __m128i base = _mm_add_epi32(_mm_add_epi32(ix, _mm_mullo_epi32(c.nx, iy)),
                                     _mm_mullo_epi32(c.sxy, iz));
  const __m128i o100 = _mm_add_epi32(base, c.step_x);
  const __m128i o010 = _mm_add_epi32(base, c.step_y);
  const __m128i o110 = _mm_add_epi32(o010, c.step_x);
  const __m128i o001 = _mm_add_epi32(base, c.step_z);
  const __m128i o101 = _mm_add_epi32(o001, c.step_x);
  const __m128i o011 = _mm_add_epi32(o001, c.step_y);
  const __m128i o111 = _mm_add_epi32(o011, c.step_x);

  const double* v = c.values;
  const __m256d c000 = _mm256_i32gather_pd(v, base, 8);
  const __m256d c100 = _mm256_i32gather_pd(v, o100, 8);
  const __m256d c010 = _mm256_i32gather_pd(v, o010, 8);
  const __m256d c110 = _mm256_i32gather_pd(v, o110, 8);
  const __m256d c001 = _mm256_i32gather_pd(v, o001, 8);
  const __m256d c101 = _mm256_i32gather_pd(v, o101, 8);
  const __m256d c011 = _mm256_i32gather_pd(v, o011, 8);
  const __m256d c111 = _mm256_i32gather_pd(v, o111, 8);

  const __m256d gx = _mm256_sub_pd(c.one, fx);
  const __m256d gy = _mm256_sub_pd(c.one, fy);
  const __m256d gz = _mm256_sub_pd(c.one, fz);
  const __m256d c00 = lerp(c000, c100, fx, gx);
  const __m256d c10 = lerp(c010, c110, fx, gx);
  const __m256d c01 = lerp(c001, c101, fx, gx);
  const __m256d c11 = lerp(c011, c111, fx, gx);
  const __m256d c0 = lerp(c00, c10, fy, gy);
  const __m256d c1 = lerp(c01, c11, fy, gy);
  return _mm256_and_pd(lerp(c0, c1, fz, gz), inside);
}

MAGLENS_AVX2 inline __m256d lane_index(std::size_t k) {
  return _mm256_set_pd(static_cast<double>(k + 3), static_cast<double>(k + 2),
                       static_cast<double>(k + 1), static_cast<double>(k));
}

}  // namespace

MAGLENS_AVX2 void sample_line(const GridView& g, const Line& line, std::span<double> out) {
  const Constants c = make_constants(g);
  const __m256d x0 = _mm256_set1_pd(line.start[0]);
  const __m256d y0 = _mm256_set1_pd(line.start[1]);
  const __m256d z0 = _mm256_set1_pd(line.start[2]);
  const __m256d dx = _mm256_set1_pd(line.delta[0]);
  const __m256d dy = _mm256_set1_pd(line.delta[1]);
  const __m256d dz = _mm256_set1_pd(line.delta[2]);
  const std::size_t n = out.size();
  std::size_t k = 0;
  for (; k + 4 <= n; k += 4) {
    const __m256d kd = lane_index(k);
    const __m256d px = _mm256_add_pd(x0, _mm256_mul_pd(kd, dx));
    const __m256d py = _mm256_add_pd(y0, _mm256_mul_pd(kd, dy));
    const __m256d pz = _mm256_add_pd(z0, _mm256_mul_pd(kd, dz));
    _mm256_storeu_pd(out.data() + k, sample4(c, px, py, pz));
  }
  for (; k < n; ++k) {
    const double kd = static_cast<double>(k);
    out[k] = sample_point(g, line.start[0] + kd * line.delta[0], line.start[1] + kd * line.delta[1],
                          line.start[2] + kd * line.delta[2]);
  }
}

MAGLENS_AVX2 void gradient_line(const GridView& g, const Line& line, bool interior_only,
                                std::span<double> out) {
  const Constants c = make_constants(g);
  const __m256d x0 = _mm256_set1_pd(line.start[0]);
  const __m256d y0 = _mm256_set1_pd(line.start[1]);
  const __m256d z0 = _mm256_set1_pd(line.start[2]);
  const __m256d ddx = _mm256_set1_pd(line.delta[0]);
  const __m256d ddy = _mm256_set1_pd(line.delta[1]);
  const __m256d ddz = _mm256_set1_pd(line.delta[2]);
  const __m256d two_sx = _mm256_set1_pd(2.0 * g.sx);
  const __m256d two_sy = _mm256_set1_pd(2.0 * g.sy);
  const __m256d two_sz = _mm256_set1_pd(2.0 * g.sz);
  const __m256d lo = _mm256_set1_pd(1.0 + kInteriorMargin);
  const __m256d hix = _mm256_set1_pd((g.nx - 2) - kInteriorMargin);
  const __m256d hiy = _mm256_set1_pd((g.ny - 2) - kInteriorMargin);
  const __m256d hiz = _mm256_set1_pd((g.nz - 2) - kInteriorMargin);

  const std::size_t n = out.size();
  std::size_t k = 0;
  for (; k + 4 <= n; k += 4) {
    const __m256d kd = lane_index(k);
    const __m256d px = _mm256_add_pd(x0, _mm256_mul_pd(kd, ddx));
    const __m256d py = _mm256_add_pd(y0, _mm256_mul_pd(kd, ddy));
    const __m256d pz = _mm256_add_pd(z0, _mm256_mul_pd(kd, ddz));

    __m256d keep = _mm256_castsi256_pd(_mm256_set1_epi64x(-1));
    if (interior_only) {
      const __m256d lx = _mm256_div_pd(_mm256_sub_pd(px, c.ox), c.sx);
      const __m256d ly = _mm256_div_pd(_mm256_sub_pd(py, c.oy), c.sy);
      const __m256d lz = _mm256_div_pd(_mm256_sub_pd(pz, c.oz), c.sz);
      keep = _mm256_and_pd(_mm256_cmp_pd(lx, lo, _CMP_GE_OQ), _mm256_cmp_pd(lx, hix, _CMP_LE_OQ));
      keep = _mm256_and_pd(keep, _mm256_cmp_pd(ly, lo, _CMP_GE_OQ));
      keep = _mm256_and_pd(keep, _mm256_cmp_pd(ly, hiy, _CMP_LE_OQ));
      keep = _mm256_and_pd(keep, _mm256_cmp_pd(lz, lo, _CMP_GE_OQ));
      keep = _mm256_and_pd(keep, _mm256_cmp_pd(lz, hiz, _CMP_LE_OQ));
      if (_mm256_movemask_pd(keep) == 0) {
        _mm256_storeu_pd(out.data() + k, c.zero);
        continue;
      }
    }

    const __m256d gx = _mm256_div_pd(
        _mm256_sub_pd(sample4(c, _mm256_add_pd(px, c.sx), py, pz),
                      sample4(c, _mm256_sub_pd(px, c.sx), py, pz)),
        two_sx);
    const __m256d gy = _mm256_div_pd(
        _mm256_sub_pd(sample4(c, px, _mm256_add_pd(py, c.sy), pz),
                      sample4(c, px, _mm256_sub_pd(py, c.sy), pz)),
        two_sy);
    const __m256d gz = _mm256_div_pd(
        _mm256_sub_pd(sample4(c, px, py, _mm256_add_pd(pz, c.sz)),
                      sample4(c, px, py, _mm256_sub_pd(pz, c.sz))),
        two_sz);
    const __m256d sum = _mm256_add_pd(_mm256_add_pd(_mm256_mul_pd(gx, gx), _mm256_mul_pd(gy, gy)),
                                      _mm256_mul_pd(gz, gz));
    _mm256_storeu_pd(out.data() + k, _mm256_and_pd(_mm256_sqrt_pd(sum), keep));
  }
  for (; k < n; ++k) {
    // Same point the scalar kernel computes for index k.
    Line one = line;
    const double kd = static_cast<double>(k);
    for (int a = 0; a < 3; ++a) one.start[a] = line.start[a] + kd * line.delta[a];
    scalar::gradient_line(g, one, interior_only, out.subspan(k, 1));
  }
}

}  // namespace maglens::kernels::avx2
