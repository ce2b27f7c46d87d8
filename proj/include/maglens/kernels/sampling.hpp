#pragma once

// Volume sampling kernels used by the ray-caster's inner loop.
//
// Every kernel has a scalar reference implementation and, on x86-64, an AVX2
// variant. Both perform the same floating-point operations in the same order
// (no FMA contraction), so their outputs are bit-identical; the equivalence
// tests rely on that. The active variant is chosen once at startup from the
// CPU features and can be forced with MAGLENS_KERNELS=scalar|avx2.

#include <cstddef>
#include <span>
#include <string_view>

namespace maglens::kernels {

// Read-only view of a grid's storage, flattened for the kernels.
struct GridView {
  const double* values = nullptr;
  int nx = 0, ny = 0, nz = 0;
  double ox = 0, oy = 0, oz = 0;  // world position of voxel (0,0,0)
  double sx = 1, sy = 1, sz = 1;  // spacing
};

// A line of sample points p_k = start + k * delta, k = 0..count-1.
struct Line {
  double start[3];
  double delta[3];
};

enum class Isa { Scalar, Avx2 };

std::string_view isa_name(Isa isa);
bool isa_supported(Isa isa);
Isa active_isa();
// Returns false (and changes nothing) when the CPU lacks the requested ISA.
bool set_active_isa(Isa isa);

// Trilinear samples along the line; 0 outside the voxel-center box.
void sample_line(const GridView& grid, const Line& line, std::span<double> out);

// Central-difference gradient magnitude along the line, step = spacing per
// axis. With interior_only set, points whose stencil would leave the
// voxel-center box yield 0.
void gradient_line(const GridView& grid, const Line& line, bool interior_only,
                   std::span<double> out);

// Single-point scalar reference, shared by the public sample_trilinear.
double sample_point(const GridView& grid, double px, double py, double pz);

namespace scalar {
void sample_line(const GridView& grid, const Line& line, std::span<double> out);
void gradient_line(const GridView& grid, const Line& line, bool interior_only,
                   std::span<double> out);
}  // namespace scalar

namespace avx2 {
// Only callable when isa_supported(Isa::Avx2).
void sample_line(const GridView& grid, const Line& line, std::span<double> out);
void gradient_line(const GridView& grid, const Line& line, bool interior_only,
                   std::span<double> out);
}  // namespace avx2

}  // namespace maglens::kernels
