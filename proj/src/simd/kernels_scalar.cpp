#include <cmath>

#include "pvvs/simd/kernels.hpp"
#include "kernels_impl.hpp"

namespace pvvs::simd {

namespace detail {

void render_row_scalar(const RenderRow& p, int begin, int width, std::uint8_t* mask,
                       float* depth) {
  for (int i = begin; i < width; ++i) {
    const float x = p.x0 + static_cast<float>(i) * p.dx;
    const float negdz = p.negdz_b + p.negdz_s * x;
    if (!(negdz > p.min_negdz)) {
      mask[i] = 0;
      depth[i] = 0.f;
      continue;
    }
    const float ta = p.h_array / negdz;
    const float tg = p.h_ground / negdz;
    const float perp = p.perp0 + ta * (p.perp_b + p.perp_s * x);
    const float along = p.along0 + ta * (p.along_b + p.along_s * x);
    const float ap = std::fabs(perp);
    const bool on = ap <= p.half_width && along >= 0.f && along <= p.length;
    const bool edge = on && ap >= p.inner_edge;
    mask[i] = edge ? 1 : 0;
    depth[i] = on ? ta : tg;
  }
}

void threshold_scalar(const std::uint8_t* mask, const float* depth, std::size_t begin,
                      std::size_t n, float lo, float hi, std::uint8_t* out) {
  for (std::size_t k = begin; k < n; ++k) {
    out[k] = (mask[k] != 0 && depth[k] >= lo && depth[k] <= hi) ? 1 : 0;
  }
}

RowMoments row_moments_scalar(const std::uint8_t* row, int begin, int end) {
  RowMoments m;
  for (int i = begin; i < end; ++i) {
    if (row[i] != 0) {
      m.count += 1;
      m.sum_i += i;
      m.sum_ii += static_cast<std::int64_t>(i) * i;
    }
  }
  return m;
}

}  // namespace detail

namespace {

void render_row(const RenderRow& p, int width, std::uint8_t* mask, float* depth) {
  detail::render_row_scalar(p, 0, width, mask, depth);
}

void threshold(const std::uint8_t* mask, const float* depth, std::size_t n, float lo,
               float hi, std::uint8_t* out) {
  detail::threshold_scalar(mask, depth, 0, n, lo, hi, out);
}

RowMoments row_moments(const std::uint8_t* row, int begin, int end) {
  return detail::row_moments_scalar(row, begin, end);
}

}  // namespace

const KernelSet& scalar_kernels() {
  static const KernelSet set{"scalar", &render_row, &threshold, &row_moments};
  return set;
}

}  // namespace pvvs::simd
