// Axis-aligned bounding boxes in pixel coordinates and the overlap
// arithmetic shared by candidate generation, NMS, losses and metrics.
#pragma once

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace ebt {

struct BoundingBox {
    double x = 0.0;  // left edge
    double y = 0.0;  // top edge
    double w = 0.0;
    double h = 0.0;

    BoundingBox() = default;
    BoundingBox(double x_, double y_, double w_, double h_) : x(x_), y(y_), w(w_), h(h_) {}

    double area() const { return w * h; }
    double cx() const { return x + 0.5 * w; }
    double cy() const { return y + 0.5 * h; }
    double x2() const { return x + w; }
    double y2() const { return y + h; }
    double diagonal() const { return std::sqrt(w * w + h * h); }
    bool valid() const { return w > 0.0 && h > 0.0; }

    bool operator==(const BoundingBox& o) const {
        return x == o.x && y == o.y && w == o.w && h == o.h;
    }
    bool operator!=(const BoundingBox& o) const { return !(*this == o); }
};

inline double intersection_area(const BoundingBox& a, const BoundingBox& b) {
    const double ix = std::min(a.x2(), b.x2()) - std::max(a.x, b.x);
    const double iy = std::min(a.y2(), b.y2()) - std::max(a.y, b.y);
    if (ix <= 0.0 || iy <= 0.0) return 0.0;
    return ix * iy;
}

inline double iou(const BoundingBox& a, const BoundingBox& b) {
    const double inter = intersection_area(a, b);
    if (inter <= 0.0) return 0.0;
    return inter / (a.area() + b.area() - inter);
}

inline double center_error(const BoundingBox& a, const BoundingBox& b) {
    const double dx = a.cx() - b.cx();
    const double dy = a.cy() - b.cy();
    return std::sqrt(dx * dx + dy * dy);
}

// Shifts the box so it lies inside a frame_w x frame_h frame, shrinking it
// if it is larger than the frame.
inline BoundingBox clamp_into_frame(BoundingBox b, int frame_w, int frame_h) {
    b.w = std::min(b.w, static_cast<double>(frame_w));
    b.h = std::min(b.h, static_cast<double>(frame_h));
    b.x = std::clamp(b.x, 0.0, frame_w - b.w);
    b.y = std::clamp(b.y, 0.0, frame_h - b.h);
    return b;
}

inline bool intersects_frame(const BoundingBox& b, int frame_w, int frame_h) {
    return b.x < frame_w && b.y < frame_h && b.x2() > 0.0 && b.y2() > 0.0;
}

// Deterministic ordering used to break score ties everywhere a ranked list
// of boxes is produced: smaller area first, then (x, y) lexicographic.
inline bool tie_before(const BoundingBox& a, const BoundingBox& b) {
    if (a.area() != b.area()) return a.area() < b.area();
    if (a.x != b.x) return a.x < b.x;
    if (a.y != b.y) return a.y < b.y;
    if (a.w != b.w) return a.w < b.w;
    return a.h < b.h;
}

}  // namespace ebt
