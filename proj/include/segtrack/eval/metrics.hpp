#pragma once

#include <optional>
#include <vector>

#include "segtrack/boxfit/boxfit.hpp"
#include "segtrack/core/mask.hpp"

namespace segtrack {

// Predicted or ground-truth region: rotated box, mask, or both.
struct Region {
    std::optional<RotatedBox> box;
    std::optional<Mask> mask;

    bool empty() const;
    static Region from_box(const RotatedBox& b) { return {b, std::nullopt}; }
    static Region from_mask(Mask m) { return {std::nullopt, std::move(m)}; }
};

// Convex polygon helpers (Sutherland-Hodgman clipping, shoelace area).
double polygon_area(const std::vector<Eigen::Vector2d>& poly);
std::vector<Eigen::Vector2d> clip_convex_polygon(const std::vector<Eigen::Vector2d>& subject,
                                                 const std::vector<Eigen::Vector2d>& clip);

// Intersection-over-union. Box-box uses analytic polygon clipping, mask-mask
// pixel counts, mixed pairs rasterize the box onto the mask grid. Two empty
// regions overlap 0 by convention.
double region_overlap(const RotatedBox& a, const RotatedBox& b);
double region_overlap(const Mask& a, const Mask& b);
double region_overlap(const Region& a, const Region& b);

struct NoResetSummary {
    double average_overlap = 0;
    double sr_050 = 0;
    double sr_075 = 0;
    double precision_20px = 0;
};

// AO, SR_tau (fraction of overlaps strictly above tau) and center precision
// at 20 px. `center_errors` may be empty when centers are unavailable.
NoResetSummary average_overlap_sr(const std::vector<double>& overlaps,
                                  const std::vector<double>& center_errors);

struct DavisSummary {
    double j_mean = 0;
    double f_mean = 0;
};

// Per-frame region Jaccard and contour F-measure, averaged. The boundary
// match tolerance is a fraction of the image diagonal.
DavisSummary davis_measures(const std::vector<Mask>& predictions,
                            const std::vector<Mask>& ground_truth,
                            double boundary_tolerance = 0.008);

double mask_jaccard(const Mask& a, const Mask& b);
double contour_f_measure(const Mask& prediction, const Mask& ground_truth,
                         double boundary_tolerance = 0.008);

}  // namespace segtrack
