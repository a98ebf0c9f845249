#pragma once

#include <cstddef>
#include <cstdint>
#include <string_view>

// Data-parallel inner loops of the perception pipeline. Each kernel has a
// scalar reference implementation and, where the build and CPU allow, an
// AVX2 variant picked at runtime. Variants are bitwise-equivalent: float
// kernels use the same operation order without FMA contraction and the
// reductions are exact integer sums.
namespace pvvs::simd {

/// Per-row parameters of the edge rasterizer. For pixel column i the
/// normalized image coordinate is x = x0 + i * dx and the world ray has
/// -d_z = negdz_b + negdz_s * x. Distances along the ray to the array and
/// ground planes are h_array / -d_z and h_ground / -d_z; the hit point's
/// coordinates across and along the array are perp0 + t * (perp_b + perp_s * x)
/// and along0 + t * (along_b + along_s * x).
struct RenderRow {
  float x0 = 0.f, dx = 0.f;
  float negdz_b = 0.f, negdz_s = 0.f;
  float perp_b = 0.f, perp_s = 0.f;
  float along_b = 0.f, along_s = 0.f;
  float perp0 = 0.f, along0 = 0.f;
  float h_array = 0.f, h_ground = 0.f;
  float half_width = 0.f;   // |perp| <= half_width is on the array
  float inner_edge = 0.f;   // |perp| >= inner_edge is on an edge band
  float length = 0.f;       // 0 <= along <= length is on the array
  float min_negdz = 1e-6f;  // rays flatter than this miss both planes
};

struct RowMoments {
  std::int64_t count = 0;
  std::int64_t sum_i = 0;
  std::int64_t sum_ii = 0;
};

/// Writes one row of the binary edge mask (0/1) and camera-frame depth
/// (0 where the ray misses).
using RenderRowFn = void (*)(const RenderRow& row, int width, std::uint8_t* mask,
                             float* depth);
/// out[k] = mask[k] != 0 && lo <= depth[k] <= hi.
using ThresholdFn = void (*)(const std::uint8_t* mask, const float* depth, std::size_t n,
                             float lo, float hi, std::uint8_t* out);
/// Count, sum of column index and sum of squared column index of the set
/// pixels of a 0/1 row in [begin, end).
using RowMomentsFn = RowMoments (*)(const std::uint8_t* row, int begin, int end);

struct KernelSet {
  std::string_view name;
  RenderRowFn render_row;
  ThresholdFn threshold;
  RowMomentsFn row_moments;
};

const KernelSet& scalar_kernels();
/// nullptr when the AVX2 variant was not compiled in.
const KernelSet* avx2_kernels();
bool cpu_supports_avx2();

/// Best variant for this machine. The environment variable PVVS_SIMD=scalar
/// forces the reference kernels.
const KernelSet& active_kernels();

}  // namespace pvvs::simd
