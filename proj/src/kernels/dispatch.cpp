#include "maglens/kernels/sampling.hpp"

#include <atomic>
#include <cstdlib>
#include <string_view>

namespace maglens::kernels {

namespace {

Isa detect() {
  Isa best = isa_supported(Isa::Avx2) ? Isa::Avx2 : Isa::Scalar;
  if (const char* forced = std::getenv("MAGLENS_KERNELS")) {
    const std::string_view f(forced);
    if (f == "scalar") return Isa::Scalar;
    if (f == "avx2" && isa_supported(Isa::Avx2)) return Isa::Avx2;
  }
  return best;
}

std::atomic<Isa>& current() {
  static std::atomic<Isa> isa{detect()};
  return isa;
}

}  // namespace

std::string_view isa_name(Isa isa) {
  switch (isa) {
    case Isa::Scalar:
      return "scalar";
    case Isa::Avx2:
      return "avx2";
  }
  return "unknown";
}

bool isa_supported(Isa isa) {
  switch (isa) {
    case Isa::Scalar:
      return true;
    case Isa::Avx2:
#if defined(MAGLENS_HAVE_AVX2_KERNELS)
      return __builtin_cpu_supports("avx2");
#else
      return false;
#endif
  }
  return false;
}

Isa active_isa() { return current().load(std::memory_order_relaxed); }

bool set_active_isa(Isa isa) {
  if (!isa_supported(isa)) return false;
  current().store(isa, std::memory_order_relaxed);
  return true;
}

void sample_line(const GridView& grid, const Line& line, std::span<double> out) {
#if defined(MAGLENS_HAVE_AVX2_KERNELS)
  if (active_isa() == Isa::Avx2) return avx2::sample_line(grid, line, out);
#endif
  scalar::sample_line(grid, line, out);
}

void gradient_line(const GridView& grid, const Line& line, bool interior_only,
                   std::span<double> out) {
#if defined(MAGLENS_HAVE_AVX2_KERNELS)
  if (active_isa() == Isa::Avx2) return avx2::gradient_line(grid, line, interior_only, out);
#endif
  scalar::gradient_line(grid, line, interior_only, out);
}

}  // namespace maglens::kernels
