#pragma once
// Static visual artifacts: SVG box overlays (model boxes blue, expert boxes
// green) and HTML word listings.

#include <optional>
#include <string>
#include <vector>

#include "mmsurrogate/model.hpp"

namespace mmsurrogate {

inline constexpr const char* kModelBoxColor = "blue";
inline constexpr const char* kExpertBoxColor = "green";

struct OverlayRect {
  Box box;
  std::string color;
  std::string label;
};

struct OverlayDocument {
  std::optional<std::string> background;
  double width = 0.0;
  double height = 0.0;
  std::vector<OverlayRect> rects;
  std::vector<std::string> caption;
};

// Model boxes in rank order, then expert boxes in input order.
OverlayDocument render_image_overlay(const Instance& instance, const Explanation& explanation,
                                     const ExpertAnnotation* annotation = nullptr,
                                     std::optional<std::string> background = std::nullopt);

std::string to_svg(const OverlayDocument& document);

std::string render_text_listing(const Instance& instance, const Explanation& explanation,
                                const ExpertAnnotation* annotation = nullptr);

}  // namespace mmsurrogate
