#include "vinemap/perception.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace vinemap {

void CameraIntrinsics::validate() const {
  if (!(fx > 0.0) || !(fy > 0.0)) throw std::invalid_argument("camera focal lengths must be positive");
  if (width <= 0 || height <= 0) throw std::invalid_argument("camera image size must be positive");
  if (!(cx > 0.0 && cx < width) || !(cy > 0.0 && cy < height))
    throw std::invalid_argument("camera principal point must lie inside the image");
}

double BBox::area() const { return std::max(0.0, u_max - u_min) * std::max(0.0, v_max - v_min); }

double iou(const BBox& a, const BBox& b) {
  const double w = std::min(a.u_max, b.u_max) - std::max(a.u_min, b.u_min);
  const double h = std::min(a.v_max, b.v_max) - std::max(a.v_min, b.v_min);
  if (w <= 0.0 || h <= 0.0) return 0.0;
  const double inter = w * h;
  const double uni = a.area() + b.area() - inter;
  return uni > 0.0 ? inter / uni : 0.0;
}

std::vector<Detection> filter_detections(std::span<const Detection> dets, double theta_conf,
                                         std::span<const LandmarkClass> allowed, double theta_iou) {
  std::vector<std::size_t> order;
  for (std::size_t i = 0; i < dets.size(); ++i) {
    if (dets[i].confidence < theta_conf) continue;
    if (std::find(allowed.begin(), allowed.end(), dets[i].cls) == allowed.end()) continue;
    order.push_back(i);
  }
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return dets[a].confidence > dets[b].confidence; });

  std::vector<char> keep(dets.size(), 0);
  std::vector<std::size_t> kept;
  for (std::size_t i : order) {
    bool suppressed = false;
    for (std::size_t j : kept) {
      if (dets[j].cls == dets[i].cls && iou(dets[i].bbox, dets[j].bbox) > theta_iou) {
        suppressed = true;
        break;
      }
    }
    if (!suppressed) {
      kept.push_back(i);
      keep[i] = 1;
    }
  }
  std::vector<Detection> out;
  for (std::size_t i = 0; i < dets.size(); ++i)
    if (keep[i]) out.push_back(dets[i]);
  return out;
}

std::optional<std::vector<Vec3>> backproject(const Detection& det, const CameraIntrinsics& k, double z_min,
                                             double z_max, std::size_t n_min) {
  std::vector<Vec3> cloud;
  cloud.reserve(det.samples.size());
  for (const PixelDepth& s : det.samples) {
    if (!std::isfinite(s.z) || !std::isfinite(s.u) || !std::isfinite(s.v)) continue;
    if (s.z < z_min || s.z > z_max) continue;
    cloud.push_back(k.backproject(s.u, s.v, s.z));
  }
  if (cloud.size() < n_min) return std::nullopt;
  return cloud;
}

double median(std::vector<double> values) {
  if (values.empty()) throw std::invalid_argument("median of an empty set");
  const std::size_t n = values.size();
  const std::size_t mid = n / 2;
  std::nth_element(values.begin(), values.begin() + static_cast<std::ptrdiff_t>(mid), values.end());
  const double upper = values[mid];
  if (n % 2 == 1) return upper;
  const double lower = *std::max_element(values.begin(), values.begin() + static_cast<std::ptrdiff_t>(mid));
  return 0.5 * (lower + upper);
}

Vec3 reference_point(std::span<const Vec3> cloud) {
  if (cloud.size() < 4) throw std::invalid_argument("reference_point needs at least 4 points");
  std::vector<std::size_t> idx(cloud.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return cloud[a].y() > cloud[b].y(); });
  const std::size_t m = std::max<std::size_t>(1, (cloud.size() + 3) / 4);
  double sx = 0.0, sy = 0.0;
  std::vector<double> zs;
  zs.reserve(m);
  for (std::size_t i = 0; i < m; ++i) {
    const Vec3& p = cloud[idx[i]];
    sx += p.x();
    sy += p.y();
    zs.push_back(p.z());
  }
  return {sx / static_cast<double>(m), sy / static_cast<double>(m), median(std::move(zs))};
}

Vec3 centroid(std::span<const Vec3> cloud) {
  if (cloud.empty()) throw std::invalid_argument("centroid of an empty cloud");
  Vec3 s = Vec3::Zero();
  for (const Vec3& p : cloud) s += p;
  return s / static_cast<double>(cloud.size());
}

std::optional<LandmarkObservation> observe(const Detection& det, const CameraIntrinsics& k,
                                           const PerceptionConfig& config) {
  const auto cloud = backproject(det, k, config.z_min, config.z_max, std::max<std::size_t>(config.n_min, 4));
  if (!cloud) return std::nullopt;
  LandmarkObservation obs;
  obs.point = config.use_reference_point ? reference_point(*cloud) : centroid(*cloud);
  obs.cls = det.cls;
  obs.confidence = det.confidence;
  obs.track_id = det.track_id;
  obs.point_count = cloud->size();
  return obs;
}

}  // namespace vinemap
