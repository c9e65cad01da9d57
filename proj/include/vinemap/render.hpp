#pragma once

#include "vinemap/io.hpp"

#include <string>

namespace vinemap {

struct RenderInput {
  MapFile map;
  GroundTruthFile truth;    ///< may be empty; its datum is the drawing frame when set
  TrajectoryFile trajectory;
  bool has_truth = false;
  bool has_trajectory = false;
};

/// Top-down SVG of the map. Every map landmark and every truth landmark is
/// one element with class "marker"; the trajectory is a single polyline.
std::string render_svg(const RenderInput& input);

}  // namespace vinemap
