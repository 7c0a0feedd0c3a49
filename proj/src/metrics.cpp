#include "segtrack/eval/metrics.hpp"

#include <algorithm>
#include <cmath>

namespace segtrack {

bool Region::empty() const {
    if (mask) return foreground_count(*mask) == 0;
    if (box) return !(box->s_major > 0) || !(box->s_minor > 0);
    return true;
}

double polygon_area(const std::vector<Eigen::Vector2d>& poly) {
    double a = 0;
    const size_t n = poly.size();
    for (size_t i = 0; i < n; ++i) {
        const auto& p = poly[i];
        const auto& q = poly[(i + 1) % n];
        a += p.x() * q.y() - q.x() * p.y();
    }
    return std::abs(a) / 2.0;
}

std::vector<Eigen::Vector2d> clip_convex_polygon(const std::vector<Eigen::Vector2d>& subject,
                                                 const std::vector<Eigen::Vector2d>& clip) {
    // Sutherland-Hodgman; the clip polygon must be convex, counter-clockwise
    // or clockwise handled via signed side consistency.
    std::vector<Eigen::Vector2d> output = subject;
    const size_t nc = clip.size();
    // orientation of the clip polygon
    double orient = 0;
    for (size_t i = 0; i < nc; ++i) {
        const auto& p = clip[i];
        const auto& q = clip[(i + 1) % nc];
        orient += p.x() * q.y() - q.x() * p.y();
    }
    const double sign = orient >= 0 ? 1.0 : -1.0;
    for (size_t i = 0; i < nc && !output.empty(); ++i) {
        const Eigen::Vector2d a = clip[i];
        const Eigen::Vector2d b = clip[(i + 1) % nc];
        const Eigen::Vector2d edge = b - a;
        const auto inside = [&](const Eigen::Vector2d& p) {
            return sign * (edge.x() * (p.y() - a.y()) - edge.y() * (p.x() - a.x())) >= 0;
        };
        std::vector<Eigen::Vector2d> input;
        input.swap(output);
        const size_t ni = input.size();
        for (size_t j = 0; j < ni; ++j) {
            const Eigen::Vector2d& cur = input[j];
            const Eigen::Vector2d& prev = input[(j + ni - 1) % ni];
            const bool cur_in = inside(cur), prev_in = inside(prev);
            if (cur_in != prev_in) {
                const Eigen::Vector2d d = cur - prev;
                const double denom = edge.x() * d.y() - edge.y() * d.x();
                if (std::abs(denom) > 1e-15) {
                    const double t =
                        (edge.x() * (a.y() - prev.y()) - edge.y() * (a.x() - prev.x())) / denom;
                    output.push_back(prev + t * d);
                }
            }
            if (cur_in) output.push_back(cur);
        }
    }
    return output;
}

double region_overlap(const RotatedBox& a, const RotatedBox& b) {
    const double area_a = a.area(), area_b = b.area();
    if (area_a <= 0 && area_b <= 0) return 0.0;
    const auto ca = a.corners();
    const auto cb = b.corners();
    const std::vector<Eigen::Vector2d> pa(ca.begin(), ca.end());
    const std::vector<Eigen::Vector2d> pb(cb.begin(), cb.end());
    const double inter = polygon_area(clip_convex_polygon(pa, pb));
    const double uni = area_a + area_b - inter;
    return uni > 0 ? inter / uni : 0.0;
}

double region_overlap(const Mask& a, const Mask& b) {
    const long inter = ((a != 0) && (b != 0)).count();
    const long uni = ((a != 0) || (b != 0)).count();
    return uni > 0 ? static_cast<double>(inter) / static_cast<double>(uni) : 0.0;
}

namespace {

Mask rasterize_box(const RotatedBox& box, int rows, int cols) {
    Mask m = Mask::Zero(rows, cols);
    const Eigen::Vector2d c(box.cx, box.cy);
    const Eigen::Vector2d u(std::cos(box.angle), std::sin(box.angle));
    const Eigen::Vector2d v(-std::sin(box.angle), std::cos(box.angle));
    const double hu = box.s_major / 2, hv = box.s_minor / 2;
    for (int y = 0; y < rows; ++y)
        for (int x = 0; x < cols; ++x) {
            const Eigen::Vector2d p = Eigen::Vector2d(x, y) - c;
            if (std::abs(p.dot(u)) <= hu && std::abs(p.dot(v)) <= hv) m(y, x) = 1;
        }
    return m;
}

}  // namespace

double region_overlap(const Region& a, const Region& b) {
    if (a.empty() && b.empty()) return 0.0;
    if (a.mask && b.mask) return region_overlap(*a.mask, *b.mask);
    if (a.box && b.box && !a.mask && !b.mask) return region_overlap(*a.box, *b.box);
    // mixed: rasterize the box onto the mask grid
    const Mask* m = a.mask ? &*a.mask : (b.mask ? &*b.mask : nullptr);
    const RotatedBox* bx = a.mask ? (b.box ? &*b.box : nullptr) : (a.box ? &*a.box : nullptr);
    if (!m || !bx) return 0.0;
    return region_overlap(*m, rasterize_box(*bx, static_cast<int>(m->rows()),
                                            static_cast<int>(m->cols())));
}

NoResetSummary average_overlap_sr(const std::vector<double>& overlaps,
                                  const std::vector<double>& center_errors) {
    NoResetSummary s;
    if (overlaps.empty()) return s;
    double sum = 0;
    long n050 = 0, n075 = 0;
    for (double o : overlaps) {
        sum += o;
        if (o > 0.5) ++n050;
        if (o > 0.75) ++n075;
    }
    const double n = static_cast<double>(overlaps.size());
    s.average_overlap = sum / n;
    s.sr_050 = n050 / n;
    s.sr_075 = n075 / n;
    if (!center_errors.empty()) {
        long hits = 0;
        for (double e : center_errors)
            if (e <= 20.0) ++hits;
        s.precision_20px = hits / static_cast<double>(center_errors.size());
    }
    return s;
}

double mask_jaccard(const Mask& a, const Mask& b) {
    const long fa = foreground_count(a), fb = foreground_count(b);
    if (fa == 0 && fb == 0) return 1.0;
    return region_overlap(a, b);
}

namespace {

std::vector<Eigen::Vector2i> boundary_pixels(const Mask& m) {
    const int H = static_cast<int>(m.rows()), W = static_cast<int>(m.cols());
    std::vector<Eigen::Vector2i> pts;
    for (int y = 0; y < H; ++y)
        for (int x = 0; x < W; ++x) {
            if (!m(y, x)) continue;
            if (y == 0 || y == H - 1 || x == 0 || x == W - 1 || !m(y - 1, x) || !m(y + 1, x) ||
                !m(y, x - 1) || !m(y, x + 1))
                pts.emplace_back(x, y);
        }
    return pts;
}

// Fraction of `from` boundary pixels within `radius` of any `to` pixel,
// via a dilated occupancy grid.
double boundary_match_fraction(const std::vector<Eigen::Vector2i>& from,
                               const std::vector<Eigen::Vector2i>& to, int rows, int cols,
                               double radius) {
    if (from.empty()) return 0.0;
    Mask dilated = Mask::Zero(rows, cols);
    const int r = static_cast<int>(std::ceil(radius));
    const double r2 = radius * radius;
    for (const auto& p : to)
        for (int dy = -r; dy <= r; ++dy)
            for (int dx = -r; dx <= r; ++dx) {
                if (dy * dy + dx * dx > r2) continue;
                const int y = p.y() + dy, x = p.x() + dx;
                if (y >= 0 && y < rows && x >= 0 && x < cols) dilated(y, x) = 1;
            }
    long hits = 0;
    for (const auto& p : from)
        if (dilated(p.y(), p.x())) ++hits;
    return hits / static_cast<double>(from.size());
}

}  // namespace

double contour_f_measure(const Mask& prediction, const Mask& ground_truth,
                         double boundary_tolerance) {
    const int rows = static_cast<int>(ground_truth.rows());
    const int cols = static_cast<int>(ground_truth.cols());
    const auto pb = boundary_pixels(prediction);
    const auto gb = boundary_pixels(ground_truth);
    if (pb.empty() && gb.empty()) return 1.0;
    if (pb.empty() || gb.empty()) return 0.0;
    const double radius =
        boundary_tolerance * std::sqrt(static_cast<double>(rows * rows + cols * cols));
    const double precision = boundary_match_fraction(pb, gb, rows, cols, radius);
    const double recall = boundary_match_fraction(gb, pb, rows, cols, radius);
    if (precision + recall <= 0) return 0.0;
    return 2.0 * precision * recall / (precision + recall);
}

DavisSummary davis_measures(const std::vector<Mask>& predictions,
                            const std::vector<Mask>& ground_truth, double boundary_tolerance) {
    DavisSummary s;
    const size_t n = std::min(predictions.size(), ground_truth.size());
    if (n == 0) return s;
    for (size_t i = 0; i < n; ++i) {
        s.j_mean += mask_jaccard(predictions[i], ground_truth[i]);
        s.f_mean += contour_f_measure(predictions[i], ground_truth[i], boundary_tolerance);
    }
    s.j_mean /= static_cast<double>(n);
    s.f_mean /= static_cast<double>(n);
    return s;
}

}  // namespace segtrack
