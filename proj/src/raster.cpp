#include "mathrec/raster.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace mathrec::data {

namespace {

constexpr double kThickness = 2.0;  // stamp diameter in pixels
constexpr int kMargin = 2;

double point_segment_distance(double px, double py, double ax, double ay, double bx, double by) {
  const double dx = bx - ax, dy = by - ay;
  const double len2 = dx * dx + dy * dy;
  double t = 0.0;
  if (len2 > 0.0) t = std::clamp(((px - ax) * dx + (py - ay) * dy) / len2, 0.0, 1.0);
  const double cx = ax + t * dx - px;
  const double cy = ay + t * dy - py;
  return std::sqrt(cx * cx + cy * cy);
}

void stamp_segment(Image& img, double ax, double ay, double bx, double by) {
  const double r = kThickness / 2.0;
  const int r0 = std::max(0, static_cast<int>(std::floor(std::min(ay, by) - r)));
  const int r1 = std::min(img.height - 1, static_cast<int>(std::ceil(std::max(ay, by) + r)));
  const int c0 = std::max(0, static_cast<int>(std::floor(std::min(ax, bx) - r)));
  const int c1 = std::min(img.width - 1, static_cast<int>(std::ceil(std::max(ax, bx) + r)));
  for (int row = r0; row <= r1; ++row)
    for (int col = c0; col <= c1; ++col)
      if (point_segment_distance(col, row, ax, ay, bx, by) < r) img.at(row, col) = 1.0f;
}

}  // namespace

Image rasterize(const std::vector<Trace>& traces, int target_height) {
  if (target_height < 2 * kMargin + 1) fail("IoFailure", "target height too small");
  bool any = false;
  double min_x = std::numeric_limits<double>::max(), max_x = std::numeric_limits<double>::lowest();
  double min_y = min_x, max_y = max_x;
  for (const auto& trace : traces) {
    for (const auto& p : trace) {
      any = true;
      min_x = std::min(min_x, p[0]);
      max_x = std::max(max_x, p[0]);
      min_y = std::min(min_y, p[1]);
      max_y = std::max(max_y, p[1]);
    }
  }
  if (!any) fail("EmptyTraces", "no points to rasterize");

  const double span_x = max_x - min_x;
  const double span_y = max_y - min_y;
  const double usable = static_cast<double>(target_height - 2 * kMargin);
  double scale;
  if (span_y > 0.0) scale = usable / span_y;
  else if (span_x > 0.0) scale = usable / span_x;
  else scale = 0.0;  // single dot

  const int width = std::max(target_height / 4,
                             static_cast<int>(std::lround(span_x * scale)) + 2 * kMargin + 1);
  Image img(target_height, width);
  for (const auto& trace : traces) {
    for (size_t i = 0; i + 1 < trace.size() || (trace.size() == 1 && i == 0); ++i) {
      const auto& a = trace[i];
      const auto& b = trace[std::min(i + 1, trace.size() - 1)];
      stamp_segment(img, (a[0] - min_x) * scale + kMargin, (a[1] - min_y) * scale + kMargin,
                    (b[0] - min_x) * scale + kMargin, (b[1] - min_y) * scale + kMargin);
      if (trace.size() == 1) break;
    }
  }
  return img;
}

}  // namespace mathrec::data
