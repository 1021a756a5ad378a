#pragma once

#include "mathrec/image.hpp"
#include "mathrec/inkml.hpp"

namespace mathrec::data {

/// Render pen traces to a grayscale image of the given height. Strokes are
/// interpolated line segments of fixed 2-pixel thickness; aspect ratio is
/// preserved; ink is 1 on a 0 background. A degenerate bounding box renders
/// a single dot.
Image rasterize(const std::vector<Trace>& traces, int target_height);

}  // namespace mathrec::data
