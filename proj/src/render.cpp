#include "vinemap/render.hpp"

#include <algorithm>
#include <cstdio>
#include <limits>
#include <sstream>

namespace vinemap {

namespace {

constexpr double kWidth = 1200.0;
constexpr double kMargin = 40.0;

const char* class_color(LandmarkClass c) { return c == LandmarkClass::kPole ? "#1f5fbf" : "#2e8b3a"; }

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

}  // namespace

std::string render_svg(const RenderInput& in) {
  const GeodeticDatum frame = in.has_truth ? in.truth.datum : in.map.datum;

  std::vector<Vec3> est, traj;
  for (const MappedLandmark& m : in.map.landmarks) est.push_back(rebase_enu(m.position, in.map.datum, frame));
  if (in.has_trajectory)
    for (const KeyframeEstimate& k : in.trajectory.keyframes)
      traj.push_back(rebase_enu(k.pose.translation(), in.trajectory.datum, frame));

  double x0 = std::numeric_limits<double>::infinity(), y0 = x0;
  double x1 = -x0, y1 = -x0;
  auto extend = [&](const Vec3& p) {
    x0 = std::min(x0, p.x());
    x1 = std::max(x1, p.x());
    y0 = std::min(y0, p.y());
    y1 = std::max(y1, p.y());
  };
  for (const Vec3& p : est) extend(p);
  for (const Vec3& p : traj) extend(p);
  if (in.has_truth)
    for (const GroundTruthLandmark& g : in.truth.landmarks) extend(g.position);
  if (!(x1 >= x0)) {
    x0 = y0 = 0.0;
    x1 = y1 = 1.0;
  }
  x0 -= 1.0;
  y0 -= 1.0;
  x1 += 1.0;
  y1 += 1.0;
  const double scale = (kWidth - 2.0 * kMargin) / (x1 - x0);
  const double height = (y1 - y0) * scale + 2.0 * kMargin;
  auto sx = [&](double x) { return num(kMargin + (x - x0) * scale); };
  auto sy = [&](double y) { return num(kMargin + (y1 - y) * scale); };

  std::ostringstream os;
  os << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << num(kWidth) << "\" height=\"" << num(height)
     << "\" viewBox=\"0 0 " << num(kWidth) << " " << num(height) << "\">\n";
  os << "<title>vinemap " << in.map.landmarks.size() << " landmarks</title>\n";
  os << "<rect x=\"0\" y=\"0\" width=\"" << num(kWidth) << "\" height=\"" << num(height) << "\" fill=\"#ffffff\"/>\n";

  if (!traj.empty()) {
    os << "<polyline class=\"trajectory\" fill=\"none\" stroke=\"#999999\" stroke-width=\"1\" points=\"";
    for (std::size_t i = 0; i < traj.size(); ++i) os << (i ? " " : "") << sx(traj[i].x()) << "," << sy(traj[i].y());
    os << "\"/>\n";
  }

  os << "<g id=\"truth\">\n";
  if (in.has_truth) {
    const double s = std::max(2.0, 0.08 * scale);
    for (const GroundTruthLandmark& g : in.truth.landmarks) {
      os << "<rect class=\"marker truth " << to_string(g.cls) << "\" x=\"" << num(kMargin + (g.position.x() - x0) * scale - s / 2)
         << "\" y=\"" << num(kMargin + (y1 - g.position.y()) * scale - s / 2) << "\" width=\"" << num(s)
         << "\" height=\"" << num(s) << "\" fill=\"none\" stroke=\"#000000\" stroke-width=\"0.8\"/>\n";
    }
  }
  os << "</g>\n<g id=\"map\">\n";
  const double r = std::max(1.5, 0.05 * scale);
  for (std::size_t i = 0; i < est.size(); ++i) {
    const LandmarkClass c = in.map.landmarks[i].cls;
    os << "<circle class=\"marker estimate " << to_string(c) << "\" cx=\"" << sx(est[i].x()) << "\" cy=\""
       << sy(est[i].y()) << "\" r=\"" << num(r) << "\" fill=\"" << class_color(c) << "\"/>\n";
  }
  os << "</g>\n";
  os << "<text x=\"" << num(kMargin) << "\" y=\"20\" font-family=\"sans-serif\" font-size=\"12\">"
     << "poles (blue), trunks (green), ground truth (squares), trajectory (grey)</text>\n";
  os << "</svg>\n";
  return os.str();
}

}  // namespace vinemap
