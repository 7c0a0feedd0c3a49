#pragma once

#include <Eigen/Dense>

#include <array>
#include <optional>

#include "segtrack/core/mask.hpp"
#include "segtrack/core/tensor.hpp"

namespace segtrack {

// Oriented rectangle: center, side lengths (major >= minor) and the angle of
// the major-axis direction in [0, pi). Pixel (row,col) maps to point
// (x,y) = (col,row).
struct RotatedBox {
    double cx = 0, cy = 0;
    double s_major = 0, s_minor = 0;
    double angle = 0;

    std::array<Eigen::Vector2d, 4> corners() const;
    double area() const { return s_major * s_minor; }

    // Normalizes side order and wraps the angle into [0, pi).
    static RotatedBox make(double cx, double cy, double side_u, double side_v, double angle);
};

struct BoxFitStats {
    long n_in_pos = 0;   // foreground pixels inside the box
    long n_in_neg = 0;   // background pixels inside the box
    long n_out_pos = 0;  // foreground pixels outside the box
    double alpha = 0;
};

// Threshold at 0.5 on the class-1 probability, keep the largest 8-connected
// component. Empty result means "target lost".
std::optional<Mask> binarize_largest_component(const Tensor<float>& prob);

// Boundary pixels of the foreground (4-neighbor background or image border).
std::vector<Eigen::Vector2d> outline_pixels(const Mask& mask);

// Direct least-squares ellipse fit on the outline; the returned box has the
// ellipse center, sides (2a, 2b) and the major-axis angle. Degenerate
// outlines fall back to the minimum-area rectangle.
RotatedBox fit_ellipse(const Mask& mask);

// N+in / (alpha*N-in + N+in + N+out); 0 when every count is zero.
double iou_mod(const RotatedBox& box, const Mask& mask, double alpha,
               BoxFitStats* stats = nullptr);

struct BoxFitConfig {
    double alpha = 0.25;
    double shrink_step = 0.95;
    double grow_step = 1.05;
    bool allow_grow = true;  // literal reading of the fitting step is shrink-only
    int eval_budget = 200;
};

// Coordinate descent on the two side lengths starting from the ellipse box;
// only strict improvements of iou_mod are accepted. `eval_count` reports the
// number of objective evaluations spent.
RotatedBox fit_rotated_box(const Mask& mask, const BoxFitConfig& config = {},
                           int* eval_count = nullptr);

// Ablation alternatives.
RotatedBox min_max_box(const Mask& mask);   // tight axis-aligned bounds
RotatedBox min_area_box(const Mask& mask);  // rotating calipers on the hull

std::vector<Eigen::Vector2d> convex_hull(std::vector<Eigen::Vector2d> points);

}  // namespace segtrack
