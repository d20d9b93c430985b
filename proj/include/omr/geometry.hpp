#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <stdexcept>

namespace omr {

// Axis-aligned box in page pixel coordinates, top-left origin, y grows down.
struct BBox {
    double top = 0.0;
    double left = 0.0;
    double bottom = 0.0;
    double right = 0.0;

    double width() const { return right - left; }
    double height() const { return bottom - top; }
    double area() const { return std::max(0.0, width()) * std::max(0.0, height()); }
    double center_x() const { return 0.5 * (left + right); }
    double center_y() const { return 0.5 * (top + bottom); }

    bool valid() const {
        return std::isfinite(top) && std::isfinite(left) && std::isfinite(bottom) &&
               std::isfinite(right) && top < bottom && left < right;
    }

    bool contains(double x, double y) const {
        return x >= left && x < right && y >= top && y < bottom;
    }

    friend bool operator==(const BBox&, const BBox&) = default;
};

inline double intersection_area(const BBox& a, const BBox& b) {
    const double w = std::min(a.right, b.right) - std::max(a.left, b.left);
    const double h = std::min(a.bottom, b.bottom) - std::max(a.top, b.top);
    if (w <= 0.0 || h <= 0.0) return 0.0;
    return w * h;
}

inline double iou(const BBox& a, const BBox& b) {
    const double inter = intersection_area(a, b);
    if (inter <= 0.0) return 0.0;
    const double uni = a.area() + b.area() - inter;
    return uni > 0.0 ? inter / uni : 0.0;
}

// Uniform scale 2/W on both axes, centered on the page. x lands in [-1, 1];
// y keeps the box aspect ratio and lands in [-H/W, H/W].
// Returned order mirrors BBox: {top, left, bottom, right}.
inline std::array<double, 4> normalize_bbox(const BBox& b, double page_width,
                                            double page_height) {
    if (!(page_width > 0.0))
        throw std::invalid_argument("normalize_bbox: page width must be positive");
    const auto nx = [&](double x) { return (2.0 * x - page_width) / page_width; };
    const auto ny = [&](double y) { return (2.0 * y - page_height) / page_width; };
    return {ny(b.top), nx(b.left), ny(b.bottom), nx(b.right)};
}

inline double center_distance(const BBox& a, const BBox& b) {
    const double dx = a.center_x() - b.center_x();
    const double dy = a.center_y() - b.center_y();
    return std::sqrt(dx * dx + dy * dy);
}

}  // namespace omr
