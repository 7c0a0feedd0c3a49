#include "segtrack/boxfit/boxfit.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <vector>

namespace segtrack {

namespace {

constexpr double kPi = std::numbers::pi;

double wrap_angle(double a) {
    a = std::fmod(a, kPi);
    if (a < 0) a += kPi;
    return a;
}

}  // namespace

RotatedBox RotatedBox::make(double cx, double cy, double side_u, double side_v, double angle) {
    RotatedBox b;
    b.cx = cx;
    b.cy = cy;
    if (side_u >= side_v) {
        b.s_major = side_u;
        b.s_minor = side_v;
        b.angle = wrap_angle(angle);
    } else {
        b.s_major = side_v;
        b.s_minor = side_u;
        b.angle = wrap_angle(angle + kPi / 2);
    }
    return b;
}

std::array<Eigen::Vector2d, 4> RotatedBox::corners() const {
    const Eigen::Vector2d c(cx, cy);
    const Eigen::Vector2d u(std::cos(angle), std::sin(angle));
    const Eigen::Vector2d v(-std::sin(angle), std::cos(angle));
    const Eigen::Vector2d a = u * (s_major / 2), b = v * (s_minor / 2);
    return {c - a - b, c + a - b, c + a + b, c - a + b};
}

std::optional<Mask> binarize_largest_component(const Tensor<float>& prob) {
    const int H = prob.dim(1), W = prob.dim(2);
    Mask fg(H, W);
    long count = 0;
    for (int y = 0; y < H; ++y)
        for (int x = 0; x < W; ++x) {
            fg(y, x) = prob(1, y, x) > 0.5f ? 1 : 0;
            count += fg(y, x);
        }
    if (count == 0) return std::nullopt;

    // largest 8-connected component by BFS
    Eigen::ArrayXXi label = Eigen::ArrayXXi::Constant(H, W, -1);
    std::vector<int> stack;
    long best_size = 0;
    int best_label = -1, next_label = 0;
    for (int y = 0; y < H; ++y)
        for (int x = 0; x < W; ++x) {
            if (!fg(y, x) || label(y, x) >= 0) continue;
            const int cur = next_label++;
            long size = 0;
            stack.push_back(y * W + x);
            label(y, x) = cur;
            while (!stack.empty()) {
                const int p = stack.back();
                stack.pop_back();
                ++size;
                const int py = p / W, px = p % W;
                for (int dy = -1; dy <= 1; ++dy)
                    for (int dx = -1; dx <= 1; ++dx) {
                        const int ny = py + dy, nx = px + dx;
                        if (ny < 0 || ny >= H || nx < 0 || nx >= W) continue;
                        if (!fg(ny, nx) || label(ny, nx) >= 0) continue;
                        label(ny, nx) = cur;
                        stack.push_back(ny * W + nx);
                    }
            }
            if (size > best_size) {
                best_size = size;
                best_label = cur;
            }
        }
    Mask out(H, W);
    for (int y = 0; y < H; ++y)
        for (int x = 0; x < W; ++x) out(y, x) = label(y, x) == best_label ? 1 : 0;
    return out;
}

std::vector<Eigen::Vector2d> outline_pixels(const Mask& mask) {
    const int H = static_cast<int>(mask.rows()), W = static_cast<int>(mask.cols());
    std::vector<Eigen::Vector2d> pts;
    for (int y = 0; y < H; ++y)
        for (int x = 0; x < W; ++x) {
            if (!mask(y, x)) continue;
            const bool border = y == 0 || y == H - 1 || x == 0 || x == W - 1;
            if (border || !mask(y - 1, x) || !mask(y + 1, x) || !mask(y, x - 1) ||
                !mask(y, x + 1))
                pts.emplace_back(x, y);
        }
    return pts;
}

namespace {

// Direct least-squares conic fit constrained to an ellipse
// (Fitzgibbon et al., numerically stabilized partitioning). Returns false on
// a degenerate point set.
bool fit_ellipse_conic(const std::vector<Eigen::Vector2d>& pts, RotatedBox& out) {
    const size_t n = pts.size();
    if (n < 6) return false;
    Eigen::Vector2d mean = Eigen::Vector2d::Zero();
    for (const auto& p : pts) mean += p;
    mean /= static_cast<double>(n);

    Eigen::MatrixXd d1(n, 3), d2(n, 3);
    for (size_t i = 0; i < n; ++i) {
        const double x = pts[i].x() - mean.x(), y = pts[i].y() - mean.y();
        d1(static_cast<Eigen::Index>(i), 0) = x * x;
        d1(static_cast<Eigen::Index>(i), 1) = x * y;
        d1(static_cast<Eigen::Index>(i), 2) = y * y;
        d2(static_cast<Eigen::Index>(i), 0) = x;
        d2(static_cast<Eigen::Index>(i), 1) = y;
        d2(static_cast<Eigen::Index>(i), 2) = 1.0;
    }
    const Eigen::Matrix3d s1 = d1.transpose() * d1;
    const Eigen::Matrix3d s2 = d1.transpose() * d2;
    const Eigen::Matrix3d s3 = d2.transpose() * d2;
    Eigen::FullPivLU<Eigen::Matrix3d> lu(s3);
    if (!lu.isInvertible()) return false;
    const Eigen::Matrix3d t = -lu.solve(s2.transpose());
    const Eigen::Matrix3d m0 = s1 + s2 * t;
    Eigen::Matrix3d m;
    m.row(0) = m0.row(2) / 2.0;
    m.row(1) = -m0.row(1);
    m.row(2) = m0.row(0) / 2.0;

    Eigen::EigenSolver<Eigen::Matrix3d> es(m);
    if (es.info() != Eigen::Success) return false;
    Eigen::Vector3d conic_quadratic = Eigen::Vector3d::Zero();
    bool found = false;
    for (int i = 0; i < 3; ++i) {
        if (std::abs(es.eigenvalues()[i].imag()) > 1e-12) continue;
        const Eigen::Vector3d v = es.eigenvectors().col(i).real();
        const double cond = 4.0 * v(0) * v(2) - v(1) * v(1);
        if (cond > 0) {
            conic_quadratic = v;
            found = true;
        }
    }
    if (!found) return false;
    const Eigen::Vector3d linear = t * conic_quadratic;

    // conic a x^2 + b xy + c y^2 + d x + e y + f = 0 (centroid frame)
    const double a = conic_quadratic(0), b = conic_quadratic(1), c = conic_quadratic(2);
    const double d = linear(0), e = linear(1), f = linear(2);
    Eigen::Matrix2d quad;
    quad << a, b / 2, b / 2, c;
    Eigen::FullPivLU<Eigen::Matrix2d> qlu(quad);
    if (!qlu.isInvertible()) return false;
    const Eigen::Vector2d center = -0.5 * qlu.solve(Eigen::Vector2d(d, e));
    const double c0 = f + 0.5 * (d * center.x() + e * center.y());
    Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> qe(quad);
    const Eigen::Vector2d evals = qe.eigenvalues();
    if (!(evals(0) * -c0 > 0) || !(evals(1) * -c0 > 0)) return false;
    const double axis0 = std::sqrt(-c0 / evals(0));  // evals ascending: axis0 is the major semi-axis
    const double axis1 = std::sqrt(-c0 / evals(1));
    const Eigen::Vector2d major_dir = qe.eigenvectors().col(0);
    out = RotatedBox::make(center.x() + mean.x(), center.y() + mean.y(), 2 * axis0, 2 * axis1,
                           std::atan2(major_dir.y(), major_dir.x()));
    return true;
}

}  // namespace

RotatedBox fit_ellipse(const Mask& mask) {
    const auto pts = outline_pixels(mask);
    RotatedBox box;
    if (fit_ellipse_conic(pts, box)) return box;
    return min_area_box(mask);
}

double iou_mod(const RotatedBox& box, const Mask& mask, double alpha, BoxFitStats* stats) {
    const int H = static_cast<int>(mask.rows()), W = static_cast<int>(mask.cols());
    const Eigen::Vector2d c(box.cx, box.cy);
    const Eigen::Vector2d u(std::cos(box.angle), std::sin(box.angle));
    const Eigen::Vector2d v(-std::sin(box.angle), std::cos(box.angle));
    const double hu = box.s_major / 2, hv = box.s_minor / 2;

    const double reach = std::hypot(hu, hv);
    const int x0 = std::max(0, static_cast<int>(std::floor(box.cx - reach)));
    const int x1 = std::min(W - 1, static_cast<int>(std::ceil(box.cx + reach)));
    const int y0 = std::max(0, static_cast<int>(std::floor(box.cy - reach)));
    const int y1 = std::min(H - 1, static_cast<int>(std::ceil(box.cy + reach)));

    long in_pos = 0, in_neg = 0;
    for (int y = y0; y <= y1; ++y)
        for (int x = x0; x <= x1; ++x) {
            const Eigen::Vector2d p = Eigen::Vector2d(x, y) - c;
            if (std::abs(p.dot(u)) <= hu && std::abs(p.dot(v)) <= hv) {
                if (mask(y, x))
                    ++in_pos;
                else
                    ++in_neg;
            }
        }
    const long out_pos = foreground_count(mask) - in_pos;
    if (stats) *stats = {in_pos, in_neg, out_pos, alpha};
    const double denom = alpha * in_neg + in_pos + out_pos;
    if (in_pos == 0 && in_neg == 0 && out_pos == 0) return 0.0;
    return denom > 0 ? in_pos / denom : 0.0;
}

RotatedBox fit_rotated_box(const Mask& mask, const BoxFitConfig& config, int* eval_count) {
    RotatedBox box = fit_ellipse(mask);
    if (eval_count) *eval_count = 0;
    if (box.s_major <= 0 || box.s_minor <= 0) return box;
    int evals = 0;
    double best = iou_mod(box, mask, config.alpha);
    ++evals;
    std::vector<double> steps{config.shrink_step};
    if (config.allow_grow) steps.push_back(config.grow_step);
    bool improved = true;
    while (improved && evals < config.eval_budget) {
        improved = false;
        for (int axis = 0; axis < 2 && evals < config.eval_budget; ++axis) {
            for (double step : steps) {
                if (evals >= config.eval_budget) break;
                RotatedBox cand = box;
                (axis == 0 ? cand.s_major : cand.s_minor) *= step;
                const double score = iou_mod(cand, mask, config.alpha);
                ++evals;
                if (score > best) {
                    best = score;
                    box = cand;
                    improved = true;
                    break;
                }
            }
        }
    }
    // side order can flip after shrinking
    if (eval_count) *eval_count = evals;
    return RotatedBox::make(box.cx, box.cy, box.s_major, box.s_minor, box.angle);
}

RotatedBox min_max_box(const Mask& mask) {
    const int H = static_cast<int>(mask.rows()), W = static_cast<int>(mask.cols());
    double minx = std::numeric_limits<double>::max(), maxx = std::numeric_limits<double>::lowest();
    double miny = minx, maxy = maxx;
    for (int y = 0; y < H; ++y)
        for (int x = 0; x < W; ++x) {
            if (!mask(y, x)) continue;
            minx = std::min<double>(minx, x);
            maxx = std::max<double>(maxx, x);
            miny = std::min<double>(miny, y);
            maxy = std::max<double>(maxy, y);
        }
    if (maxx < minx) return {};
    return RotatedBox::make((minx + maxx) / 2, (miny + maxy) / 2, maxx - minx, maxy - miny, 0.0);
}

std::vector<Eigen::Vector2d> convex_hull(std::vector<Eigen::Vector2d> pts) {
    if (pts.size() < 3) return pts;
    std::sort(pts.begin(), pts.end(), [](const auto& a, const auto& b) {
        return a.x() < b.x() || (a.x() == b.x() && a.y() < b.y());
    });
    const auto cross = [](const Eigen::Vector2d& o, const Eigen::Vector2d& a,
                          const Eigen::Vector2d& b) {
        return (a.x() - o.x()) * (b.y() - o.y()) - (a.y() - o.y()) * (b.x() - o.x());
    };
    std::vector<Eigen::Vector2d> hull(2 * pts.size());
    size_t k = 0;
    for (const auto& p : pts) {
        while (k >= 2 && cross(hull[k - 2], hull[k - 1], p) <= 0) --k;
        hull[k++] = p;
    }
    const size_t lower = k + 1;
    for (auto it = pts.rbegin(); it != pts.rend(); ++it) {
        while (k >= lower && cross(hull[k - 2], hull[k - 1], *it) <= 0) --k;
        hull[k++] = *it;
    }
    hull.resize(k - 1);
    return hull;
}

RotatedBox min_area_box(const Mask& mask) {
    std::vector<Eigen::Vector2d> pts;
    for (int y = 0; y < static_cast<int>(mask.rows()); ++y)
        for (int x = 0; x < static_cast<int>(mask.cols()); ++x)
            if (mask(y, x)) pts.emplace_back(x, y);
    if (pts.empty()) return {};
    const auto hull = convex_hull(std::move(pts));
    if (hull.size() < 3) {
        // collinear or single point: align with the extent
        Eigen::Vector2d a = hull.front(), b = hull.back();
        for (const auto& p : hull) {
            if (p.x() < a.x() || (p.x() == a.x() && p.y() < a.y())) a = p;
            if (p.x() > b.x() || (p.x() == b.x() && p.y() > b.y())) b = p;
        }
        const Eigen::Vector2d d = b - a;
        return RotatedBox::make((a.x() + b.x()) / 2, (a.y() + b.y()) / 2, d.norm(), 0.0,
                                std::atan2(d.y(), d.x()));
    }

    double best_area = std::numeric_limits<double>::max();
    RotatedBox best;
    for (size_t i = 0; i < hull.size(); ++i) {
        const Eigen::Vector2d edge = hull[(i + 1) % hull.size()] - hull[i];
        const double len = edge.norm();
        if (len < 1e-12) continue;
        const Eigen::Vector2d u = edge / len;
        const Eigen::Vector2d v(-u.y(), u.x());
        double minu = std::numeric_limits<double>::max(), maxu = -minu;
        double minv = minu, maxv = -minu;
        for (const auto& p : hull) {
            const double pu = p.dot(u), pv = p.dot(v);
            minu = std::min(minu, pu);
            maxu = std::max(maxu, pu);
            minv = std::min(minv, pv);
            maxv = std::max(maxv, pv);
        }
        const double area = (maxu - minu) * (maxv - minv);
        if (area < best_area) {
            best_area = area;
            const Eigen::Vector2d center =
                u * ((minu + maxu) / 2) + v * ((minv + maxv) / 2);
            best = RotatedBox::make(center.x(), center.y(), maxu - minu, maxv - minv,
                                    std::atan2(u.y(), u.x()));
        }
    }
    return best;
}

}  // namespace segtrack
