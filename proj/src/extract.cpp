#include <algorithm>
#include <cmath>
#include <limits>

#include "pvvs/perception.hpp"
#include "pvvs/simd/kernels.hpp"

namespace pvvs {

namespace {

// Exact integer moments of a pixel set in raster coordinates.
struct Moments {
  std::int64_t n = 0, si = 0, sj = 0, sii = 0, sij = 0, sjj = 0;

  void add_row(std::int64_t j, const simd::RowMoments& m) {
    n += m.count;
    si += m.sum_i;
    sj += j * m.count;
    sii += m.sum_ii;
    sij += j * m.sum_i;
    sjj += j * j * m.count;
  }
};

struct Fit {
  Vec2 centroid;   // pixel-center raster coordinates
  Vec2 direction;  // unit, major axis
  double residual = 0.0;  // sum of squared perpendicular distances
  std::int64_t n = 0;
};

Fit fit_line(const Moments& m) {
  Fit f;
  f.n = m.n;
  if (m.n == 0) {
    f.centroid.setZero();
    f.direction = Vec2::UnitX();
    return f;
  }
  const double n = static_cast<double>(m.n);
  const double mi = m.si / n, mj = m.sj / n;
  const double cii = m.sii / n - mi * mi;
  const double cij = m.sij / n - mi * mj;
  const double cjj = m.sjj / n - mj * mj;
  const double phi = 0.5 * std::atan2(2.0 * cij, cii - cjj);
  const double half_diff = 0.5 * (cii - cjj);
  const double lmin = 0.5 * (cii + cjj) - std::sqrt(half_diff * half_diff + cij * cij);
  f.centroid = Vec2(mi + 0.5, mj + 0.5);
  f.direction = Vec2(std::cos(phi), std::sin(phi));
  f.residual = std::max(0.0, lmin) * n;
  return f;
}

// Row-wise moments of the pixels on either side of the line through
// `centroid` with unit direction `dir`. Side B has nrm . (p - c) >= 0.
std::pair<Moments, Moments> split_moments(const std::vector<std::uint8_t>& mask, int w, int h,
                                          const std::vector<simd::RowMoments>& rows,
                                          const Vec2& centroid, const Vec2& dir,
                                          const simd::KernelSet& k) {
  const Vec2 nrm(-dir.y(), dir.x());
  Moments a, b;
  for (int j = 0; j < h; ++j) {
    if (rows[j].count == 0) continue;
    const std::uint8_t* row = mask.data() + static_cast<std::size_t>(j) * w;
    const double off = nrm.y() * (j + 0.5 - centroid.y());
    if (std::abs(nrm.x()) < 1e-12) {
      (off >= 0.0 ? b : a).add_row(j, rows[j]);
      continue;
    }
    const double istar = centroid.x() - 0.5 - off / nrm.x();
    int cut;
    if (nrm.x() > 0.0) {
      cut = static_cast<int>(std::clamp(std::ceil(istar), 0.0, static_cast<double>(w)));
      a.add_row(j, k.row_moments(row, 0, cut));
      b.add_row(j, k.row_moments(row, cut, w));
    } else {
      cut = static_cast<int>(std::clamp(std::floor(istar) + 1.0, 0.0, static_cast<double>(w)));
      b.add_row(j, k.row_moments(row, 0, cut));
      a.add_row(j, k.row_moments(row, cut, w));
    }
  }
  return {a, b};
}

LineFeature to_line(const Fit& f, const CameraRig& rig) {
  const PointFeature p1{f.centroid.x() - rig.cx(), f.centroid.y() - rig.cy(), 0.0};
  const PointFeature p2{p1.u + 100.0 * f.direction.x(), p1.v + 100.0 * f.direction.y(), 0.0};
  return line_from_points(p1, p2);
}

double axis_intercept(const LineFeature& l) { return l.r / std::cos(l.theta); }

// Square erosion (AND) or dilation (OR), separated into a horizontal pass
// and a vertical pass over whole rows. Pixels beyond the image are the
// neutral element, so they never change the result.
void morph(std::vector<std::uint8_t>& mask, int w, int h, int radius, bool erode) {
  const std::uint8_t init = erode ? 1 : 0;
  std::vector<std::uint8_t> tmp(mask.size());
  for (int j = 0; j < h; ++j) {
    const std::uint8_t* in = mask.data() + static_cast<std::size_t>(j) * w;
    std::uint8_t* out = tmp.data() + static_cast<std::size_t>(j) * w;
    std::fill(out, out + w, init);
    for (int d = -radius; d <= radius; ++d) {
      const int lo = std::max(0, -d), hi = std::min(w, w - d);
      if (erode) {
        for (int i = lo; i < hi; ++i) out[i] &= in[i + d];
      } else {
        for (int i = lo; i < hi; ++i) out[i] |= in[i + d];
      }
    }
  }
  for (int j = 0; j < h; ++j) {
    std::uint8_t* out = mask.data() + static_cast<std::size_t>(j) * w;
    std::fill(out, out + w, init);
    for (int k = j - radius; k <= j + radius; ++k) {
      if (k < 0 || k >= h) continue;
      const std::uint8_t* in = tmp.data() + static_cast<std::size_t>(k) * w;
      if (erode) {
        for (int i = 0; i < w; ++i) out[i] &= in[i];
      } else {
        for (int i = 0; i < w; ++i) out[i] |= in[i];
      }
    }
  }
}

}  // namespace

void binary_open(std::vector<std::uint8_t>& mask, int width, int height, int radius) {
  if (radius <= 0) return;
  if (mask.size() != static_cast<std::size_t>(width) * height) {
    throw Error("config", "mask size does not match its dimensions");
  }
  morph(mask, width, height, radius, true);
  morph(mask, width, height, radius, false);
}

EdgeObservation extract_edge_lines(const EdgeImage& image, const CameraRig& rig,
                                   const ExtractorConfig& config,
                                   const std::optional<std::array<LineFeature, 2>>& hint) {
  EdgeObservation obs;
  const int w = image.width, h = image.height;
  if (w != rig.image_width || h != rig.image_height ||
      image.mask.size() != static_cast<std::size_t>(w) * h || image.depth.size() != image.mask.size()) {
    throw Error("config", "edge image does not match the camera resolution");
  }
  const simd::KernelSet& k = simd::active_kernels();

  std::vector<std::uint8_t> mask(image.mask.size());
  k.threshold(image.mask.data(), image.depth.data(), mask.size(),
              static_cast<float>(config.depth_min), static_cast<float>(config.depth_max),
              mask.data());
  binary_open(mask, w, h, config.open_radius);

  std::vector<simd::RowMoments> rows(h);
  Moments all;
  for (int j = 0; j < h; ++j) {
    rows[j] = k.row_moments(mask.data() + static_cast<std::size_t>(j) * w, 0, w);
    all.add_row(j, rows[j]);
  }
  if (all.n < config.min_pixels) return obs;

  const Fit overall = fit_line(all);
  const Vec2 candidates[2] = {overall.direction,
                              Vec2(-overall.direction.y(), overall.direction.x())};
  Fit best_a, best_b;
  double best_score = std::numeric_limits<double>::infinity();
  for (const Vec2& dir : candidates) {
    const auto [ma, mb] = split_moments(mask, w, h, rows, overall.centroid, dir, k);
    const Fit fa = fit_line(ma), fb = fit_line(mb);
    const double score = fa.residual + fb.residual;
    if (score < best_score) {
      best_score = score;
      best_a = fa;
      best_b = fb;
    }
  }

  bool two_bands = best_a.n > 0 && best_b.n > 0;
  if (two_bands) {
    const Vec2 da = best_a.direction, db = best_b.direction;
    const Vec2 mean_dir = (da.dot(db) >= 0.0 ? Vec2(da + db) : Vec2(da - db)).normalized();
    const Vec2 sep_n(-mean_dir.y(), mean_dir.x());
    two_bands = std::abs(sep_n.dot(best_a.centroid - best_b.centroid)) >= config.min_separation_px;
  }

  if (two_bands) {
    LineFeature la = to_line(best_a, rig), lb = to_line(best_b, rig);
    int na = static_cast<int>(best_a.n), nb = static_cast<int>(best_b.n);
    if (la.r > lb.r) {
      std::swap(la, lb);
      std::swap(na, nb);
    }
    obs.left = la;
    obs.right = lb;
    obs.left_pixels = na;
    obs.right_pixels = nb;
    obs.left_valid = na >= config.min_pixels;
    obs.right_valid = nb >= config.min_pixels;
  } else {
    const LineFeature l = to_line(overall, rig);
    bool is_left = l.r <= 0.0;
    if (hint) {
      is_left = std::abs(l.r - (*hint)[0].r) <= std::abs(l.r - (*hint)[1].r);
    }
    const int n = static_cast<int>(overall.n);
    if (is_left) {
      obs.left = l;
      obs.left_pixels = n;
      obs.left_valid = n >= config.min_pixels;
    } else {
      obs.right = l;
      obs.right_pixels = n;
      obs.right_valid = n >= config.min_pixels;
    }
  }
  if (obs.both_valid()) {
    obs.d_l1l2 = std::abs(axis_intercept(obs.right) - axis_intercept(obs.left));
  }
  return obs;
}

}  // namespace pvvs
