#pragma once

#include "pvvs/simd/kernels.hpp"

// Scalar loops shared by every variant for row tails.
namespace pvvs::simd::detail {

void render_row_scalar(const RenderRow& p, int begin, int width, std::uint8_t* mask,
                       float* depth);
void threshold_scalar(const std::uint8_t* mask, const float* depth, std::size_t begin,
                      std::size_t n, float lo, float hi, std::uint8_t* out);
RowMoments row_moments_scalar(const std::uint8_t* row, int begin, int end);

}  // namespace pvvs::simd::detail
