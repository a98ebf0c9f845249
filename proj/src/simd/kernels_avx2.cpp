#include <immintrin.h>

#include <algorithm>

#include "pvvs/simd/kernels.hpp"
#include "kernels_impl.hpp"

namespace pvvs::simd {

namespace {

inline void store_bits(std::uint8_t* out, int bits) {
  for (int k = 0; k < 8; ++k) out[k] = static_cast<std::uint8_t>((bits >> k) & 1);
}

void render_row(const RenderRow& p, int width, std::uint8_t* mask, float* depth) {
  const __m256 lane = _mm256_setr_ps(0.f, 1.f, 2.f, 3.f, 4.f, 5.f, 6.f, 7.f);
  const __m256 x0 = _mm256_set1_ps(p.x0), dx = _mm256_set1_ps(p.dx);
  const __m256 nzb = _mm256_set1_ps(p.negdz_b), nzs = _mm256_set1_ps(p.negdz_s);
  const __m256 pb = _mm256_set1_ps(p.perp_b), ps = _mm256_set1_ps(p.perp_s);
  const __m256 ab = _mm256_set1_ps(p.along_b), as = _mm256_set1_ps(p.along_s);
  const __m256 p0 = _mm256_set1_ps(p.perp0), a0 = _mm256_set1_ps(p.along0);
  const __m256 ha = _mm256_set1_ps(p.h_array), hg = _mm256_set1_ps(p.h_ground);
  const __m256 hw = _mm256_set1_ps(p.half_width), inner = _mm256_set1_ps(p.inner_edge);
  const __m256 len = _mm256_set1_ps(p.length), zero = _mm256_setzero_ps();
  const __m256 min_nz = _mm256_set1_ps(p.min_negdz);
  const __m256 sign = _mm256_set1_ps(-0.0f);

  int i = 0;
  for (; i + 8 <= width; i += 8) {
    const __m256 fi = _mm256_add_ps(_mm256_set1_ps(static_cast<float>(i)), lane);
    const __m256 x = _mm256_add_ps(x0, _mm256_mul_ps(fi, dx));
    const __m256 negdz = _mm256_add_ps(nzb, _mm256_mul_ps(nzs, x));
    const __m256 hit = _mm256_cmp_ps(negdz, min_nz, _CMP_GT_OQ);
    const __m256 ta = _mm256_div_ps(ha, negdz);
    const __m256 tg = _mm256_div_ps(hg, negdz);
    const __m256 perp =
        _mm256_add_ps(p0, _mm256_mul_ps(ta, _mm256_add_ps(pb, _mm256_mul_ps(ps, x))));
    const __m256 along =
        _mm256_add_ps(a0, _mm256_mul_ps(ta, _mm256_add_ps(ab, _mm256_mul_ps(as, x))));
    const __m256 ap = _mm256_andnot_ps(sign, perp);
    const __m256 on = _mm256_and_ps(
        _mm256_cmp_ps(ap, hw, _CMP_LE_OQ),
        _mm256_and_ps(_mm256_cmp_ps(along, zero, _CMP_GE_OQ),
                      _mm256_cmp_ps(along, len, _CMP_LE_OQ)));
    const __m256 edge = _mm256_and_ps(on, _mm256_cmp_ps(ap, inner, _CMP_GE_OQ));
    store_bits(mask + i, _mm256_movemask_ps(_mm256_and_ps(edge, hit)));
    const __m256 d = _mm256_and_ps(_mm256_blendv_ps(tg, ta, on), hit);
    _mm256_storeu_ps(depth + i, d);
  }
  detail::render_row_scalar(p, i, width, mask, depth);
}

void threshold(const std::uint8_t* mask, const float* depth, std::size_t n, float lo,
               float hi, std::uint8_t* out) {
  const __m256 lov = _mm256_set1_ps(lo), hiv = _mm256_set1_ps(hi);
  const __m256i zero = _mm256_setzero_si256();
  std::size_t k = 0;
  for (; k + 8 <= n; k += 8) {
    const __m256i m = _mm256_cvtepu8_epi32(
        _mm_loadl_epi64(reinterpret_cast<const __m128i*>(mask + k)));
    const __m256 nz = _mm256_castsi256_ps(_mm256_cmpgt_epi32(m, zero));
    const __m256 d = _mm256_loadu_ps(depth + k);
    const __m256 in = _mm256_and_ps(_mm256_cmp_ps(d, lov, _CMP_GE_OQ),
                                    _mm256_cmp_ps(d, hiv, _CMP_LE_OQ));
    store_bits(out + k, _mm256_movemask_ps(_mm256_and_ps(nz, in)));
  }
  detail::threshold_scalar(mask, depth, k, n, lo, hi, out);
}

// Lane sums use offsets relative to the chunk start so the squared index
// stays well inside int32 range for any image width.
constexpr int kChunk = 1024;

std::int64_t hsum(__m256i v) {
  alignas(32) std::int32_t lanes[8];
  _mm256_store_si256(reinterpret_cast<__m256i*>(lanes), v);
  std::int64_t s = 0;
  for (std::int32_t x : lanes) s += x;
  return s;
}

RowMoments row_moments(const std::uint8_t* row, int begin, int end) {
  RowMoments out;
  const __m256i lane = _mm256_setr_epi32(0, 1, 2, 3, 4, 5, 6, 7);
  const __m256i zero = _mm256_setzero_si256();
  int i = begin;
  while (i + 8 <= end) {
    const int chunk_end = std::min(end, i + kChunk);
    const int base = i;
    __m256i cnt = zero, s1 = zero, s2 = zero;
    for (; i + 8 <= chunk_end; i += 8) {
      const __m256i m = _mm256_cvtepu8_epi32(
          _mm_loadl_epi64(reinterpret_cast<const __m128i*>(row + i)));
      const __m256i bit = _mm256_and_si256(_mm256_cmpgt_epi32(m, zero), _mm256_set1_epi32(1));
      const __m256i rel = _mm256_add_epi32(_mm256_set1_epi32(i - base), lane);
      const __m256i w = _mm256_mullo_epi32(bit, rel);
      cnt = _mm256_add_epi32(cnt, bit);
      s1 = _mm256_add_epi32(s1, w);
      s2 = _mm256_add_epi32(s2, _mm256_mullo_epi32(w, rel));
    }
    const std::int64_t c = hsum(cnt), r1 = hsum(s1), r2 = hsum(s2);
    out.count += c;
    out.sum_i += r1 + c * base;
    out.sum_ii += r2 + 2 * static_cast<std::int64_t>(base) * r1 +
                  static_cast<std::int64_t>(base) * base * c;
  }
  const RowMoments tail = detail::row_moments_scalar(row, i, end);
  out.count += tail.count;
  out.sum_i += tail.sum_i;
  out.sum_ii += tail.sum_ii;
  return out;
}

}  // namespace

const KernelSet* avx2_kernels() {
  static const KernelSet set{"avx2", &render_row, &threshold, &row_moments};
  return &set;
}

}  // namespace pvvs::simd
