#pragma once

#include <array>
#include <string>
#include <vector>

#include "mathrec/error.hpp"

namespace mathrec::data {

using Point = std::array<double, 2>;
using Trace = std::vector<Point>;

// One online handwriting sample: pen trajectories plus the LaTeX ground truth.
struct InkSample {
  std::vector<Trace> traces;
  std::string truth;
};

/// Parse an InkML document (CROHME schema subset: <trace> elements and a
/// truth <annotation>). Errors: MalformedXml, MissingTruth, EmptyTraces.
InkSample parse_inkml(const std::string& document);
InkSample parse_inkml_file(const std::string& path);

}  // namespace mathrec::data
