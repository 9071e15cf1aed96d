#pragma once

#include <cmath>
#include <compare>

namespace aog {

/// Image-plane position in pixels.
struct Point {
    double x = 0.0;
    double y = 0.0;

    friend Point operator+(Point a, Point b) { return {a.x + b.x, a.y + b.y}; }
    friend Point operator-(Point a, Point b) { return {a.x - b.x, a.y - b.y}; }
    friend Point operator*(double s, Point a) { return {s * a.x, s * a.y}; }
    friend bool operator==(Point, Point) = default;
};

inline double squared_norm(Point p) { return p.x * p.x + p.y * p.y; }
inline double norm(Point p) { return std::sqrt(squared_norm(p)); }

/// Lexicographic (x, y) order used for reproducible tie-breaking.
inline bool lex_less(Point a, Point b) { return a.x < b.x || (a.x == b.x && a.y < b.y); }

/// Axis-aligned box stored by center and size, in pixels.
struct Box {
    double cx = 0.0;
    double cy = 0.0;
    double w = 0.0;
    double h = 0.0;

    Point center() const { return {cx, cy}; }
    double x0() const { return cx - 0.5 * w; }
    double x1() const { return cx + 0.5 * w; }
    double y0() const { return cy - 0.5 * h; }
    double y1() const { return cy + 0.5 * h; }
    friend bool operator==(const Box&, const Box&) = default;
};

}  // namespace aog
