#pragma once

// Planar geometry kernel: rooms, mirror images and specular ray tracing via
// the image method. All angles are measured counterclockwise from the shared
// reference axis (+x); a ray with angle a travels along (cos a, sin a).
// The departure angle of a path points from the transmitter along its first
// leg; the arrival angle points from the receiver toward the source side
// (toward the last reflection point, or toward the transmitter for a direct
// path).

#include <cmath>
#include <optional>
#include <stdexcept>
#include <vector>

#include "mmsense/common.hpp"

namespace mmsense {

struct Point2 {
  double x = 0.0;
  double y = 0.0;

  constexpr Point2() = default;
  constexpr Point2(double px, double py) : x(px), y(py) {}

  constexpr Point2 operator+(const Point2& r) const { return {x + r.x, y + r.y}; }
  constexpr Point2 operator-(const Point2& r) const { return {x - r.x, y - r.y}; }
  constexpr Point2 operator*(double s) const { return {x * s, y * s}; }
  friend constexpr Point2 operator*(double s, const Point2& p) { return {p.x * s, p.y * s}; }

  constexpr double dot(const Point2& r) const { return x * r.x + y * r.y; }
  constexpr double cross(const Point2& r) const { return x * r.y - y * r.x; }
  double norm() const { return std::hypot(x, y); }
  double angle() const { return std::atan2(y, x); }

  Point2 normalized(double eps = 1e-15) const {
    double n = norm();
    if (n <= eps) return {0.0, 0.0};
    return {x / n, y / n};
  }
};

inline double distance(const Point2& a, const Point2& b) { return (a - b).norm(); }

/// Unit direction for a world angle.
inline Point2 unit_vector(double angle) { return {std::cos(angle), std::sin(angle)}; }

struct Wall {
  Point2 a;
  Point2 b;
  double reflection_loss_db = 10.0;

  double length() const { return distance(a, b); }
};

struct RoomLayout {
  std::vector<Wall> walls;
  Point2 tx_position{0.0, 0.0};  // origin by convention
  Point2 reference_axis{1.0, 0.0};
};

/// One propagation path from the transmitter to a receiver position.
struct PropagationPath {
  double aod = 0.0;     // rad, departure direction at tx
  double aoa = 0.0;     // rad, arrival direction at rx, toward the source side
  double length = 0.0;  // m
  int order = 0;        // number of reflections, 0 = direct
  std::vector<Point2> reflection_points;
  std::vector<int> wall_sequence;  // wall index per reflection, tx-to-rx order
  cd gain{0.0, 0.0};               // complex amplitude at the center frequency
};

struct VirtualTransmitter {
  Point2 position;
  std::optional<int> source_wall;  // last reflecting wall
  int order = 1;
  std::vector<int> wall_sequence;
};

class GeometryError : public std::runtime_error {
 public:
  explicit GeometryError(const std::string& what) : std::runtime_error(what) {}
};

/// Reflection of p across the infinite supporting line of wall.
/// Throws GeometryError for a degenerate (zero-length) wall.
Point2 mirror_point(const Point2& p, const Wall& wall);

/// Proper intersection of segments p-q and a-b. When hit, t parameterizes
/// p-q and s parameterizes a-b, both in [0, 1].
struct SegmentHit {
  bool hit = false;
  double t = 0.0;
  double s = 0.0;
  Point2 point;
};
SegmentHit segment_intersection(const Point2& p, const Point2& q, const Point2& a,
                                const Point2& b);

double point_segment_distance(const Point2& p, const Point2& a, const Point2& b);

/// Closest point of segment a-b to p.
Point2 closest_point_on_segment(const Point2& p, const Point2& a, const Point2& b);

/// True when the open interior of segment p-q crosses the interior of any
/// listed wall. A crossing with either parameter within 1e-9 of an endpoint
/// does not count, so rays may graze shared corners and wall endpoints.
bool segment_occluded(const Point2& p, const Point2& q, const std::vector<Wall>& walls);

/// All geometrically valid propagation paths up to max_order reflections,
/// constructed with the image method. Gain magnitude decays as 1/length and
/// loses each wall's reflection_loss_db per bounce; gain phase is
/// -2*pi*length/wavelength. max_order must be in {0, 1, 2}.
std::vector<PropagationPath> trace_paths(const RoomLayout& layout, const Point2& rx,
                                         int max_order, double wavelength);

/// Mirror images of the transmitter across every wall (order 1) and every
/// ordered wall pair (order 2). Independent of any receiver position.
std::vector<VirtualTransmitter> virtual_transmitters(const RoomLayout& layout,
                                                     int max_order);

}  // namespace mmsense
