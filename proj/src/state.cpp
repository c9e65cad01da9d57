#include "vinemap/state.hpp"

namespace vinemap {

std::string_view to_string(LandmarkClass c) {
  return c == LandmarkClass::kTrunk ? "trunk" : "pole";
}

std::optional<LandmarkClass> parse_landmark_class(std::string_view s) {
  if (s == "trunk" || s == "0") return LandmarkClass::kTrunk;
  if (s == "pole" || s == "1") return LandmarkClass::kPole;
  return std::nullopt;
}

std::optional<LandmarkClass> landmark_class_from_int(int v) {
  if (v == 0) return LandmarkClass::kTrunk;
  if (v == 1) return LandmarkClass::kPole;
  return std::nullopt;
}

}  // namespace vinemap
