#pragma once

// Slow, obviously-correct reimplementations used to check the library.
// Nothing here calls the routine it is checking.

#include "gravekit/assemble.hpp"
#include "gravekit/geometry.hpp"
#include "gravekit/image.hpp"
#include "gravekit/morpho.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <numbers>
#include <random>
#include <set>
#include <tuple>
#include <utility>
#include <vector>

namespace oracle {

using gravekit::BBox;
using gravekit::Detection;
using gravekit::GrayImage;
using gravekit::Point2d;

using PixelSet = std::set<std::pair<int, int>>;  // (x, y)

/// Outer border pixels of every outermost 8-connected component: component
/// pixels with a 4-neighbour in the background region reachable from
/// outside the image. Sorted for comparison.
inline std::vector<PixelSet> outer_boundaries(const GrayImage& binary) {
    const int w = binary.width() + 2;
    const int h = binary.height() + 2;
    auto fg = [&](int x, int y) {
        if (x <= 0 || y <= 0 || x >= w - 1 || y >= h - 1) return false;
        return binary.at(x - 1, y - 1) != 0;
    };
    std::vector<char> outside(static_cast<std::size_t>(w * h), 0);
    std::deque<std::pair<int, int>> q{{0, 0}};
    outside[0] = 1;
    const int d4[4][2] = {{1, 0}, {-1, 0}, {0, 1}, {0, -1}};
    while (!q.empty()) {
        auto [x, y] = q.front();
        q.pop_front();
        for (const auto& d : d4) {
            const int nx = x + d[0], ny = y + d[1];
            if (nx < 0 || ny < 0 || nx >= w || ny >= h || fg(nx, ny)) continue;
            char& seen = outside[static_cast<std::size_t>(ny * w + nx)];
            if (!seen) {
                seen = 1;
                q.emplace_back(nx, ny);
            }
        }
    }
    std::vector<int> comp(static_cast<std::size_t>(w * h), -1);
    std::vector<PixelSet> out;
    for (int y = 1; y < h - 1; ++y) {
        for (int x = 1; x < w - 1; ++x) {
            if (!fg(x, y) || comp[static_cast<std::size_t>(y * w + x)] >= 0) continue;
            const int id = static_cast<int>(out.size());
            PixelSet border;
            std::deque<std::pair<int, int>> cq{{x, y}};
            comp[static_cast<std::size_t>(y * w + x)] = id;
            while (!cq.empty()) {
                auto [cx, cy] = cq.front();
                cq.pop_front();
                for (const auto& d : d4) {
                    if (outside[static_cast<std::size_t>((cy + d[1]) * w + cx + d[0])]) border.emplace(cx - 1, cy - 1);
                }
                for (int dy = -1; dy <= 1; ++dy) {
                    for (int dx = -1; dx <= 1; ++dx) {
                        const int nx = cx + dx, ny = cy + dy;
                        if (!fg(nx, ny)) continue;
                        int& c = comp[static_cast<std::size_t>(ny * w + nx)];
                        if (c < 0) {
                            c = id;
                            cq.emplace_back(nx, ny);
                        }
                    }
                }
            }
            out.push_back(std::move(border));
        }
    }
    std::erase_if(out, [](const PixelSet& s) { return s.empty(); });
    std::sort(out.begin(), out.end());
    return out;
}

/// Random blobs: overlapping discs and boxes, some with holes.
inline GrayImage random_blobs(std::mt19937_64& rng, int w, int h) {
    GrayImage img(w, h, 0);
    std::uniform_int_distribution<int> n_shapes(1, 8);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    const int n = n_shapes(rng);
    for (int s = 0; s < n; ++s) {
        const double cx = u(rng) * w, cy = u(rng) * h;
        const double r = 2.0 + u(rng) * std::min(w, h) / 4.0;
        const bool ring = u(rng) < 0.3;
        const bool box = u(rng) < 0.4;
        for (int y = 0; y < h; ++y) {
            for (int x = 0; x < w; ++x) {
                const double dx = x - cx, dy = y - cy;
                const double d = box ? std::max(std::abs(dx), std::abs(dy)) : std::hypot(dx, dy);
                if (d <= r && !(ring && d < r * 0.5)) img.at(x, y) = 255;
            }
        }
    }
    // Salt so that single pixels and thin bridges occur too.
    for (int i = 0; i < w * h / 40; ++i) {
        img.at(static_cast<int>(u(rng) * w), static_cast<int>(u(rng) * h)) = 255;
    }
    return img;
}

/// Smallest bounding-rectangle area over a 0.1 degree sweep.
inline double swept_rect_area(const std::vector<Point2d>& pts) {
    double best = std::numeric_limits<double>::infinity();
    for (int i = 0; i < 1800; ++i) {
        const double t = i * 0.1 * std::numbers::pi / 180.0;
        const double c = std::cos(t), s = std::sin(t);
        double u0 = 1e300, u1 = -1e300, v0 = 1e300, v1 = -1e300;
        for (const Point2d& p : pts) {
            const double u = p.x * c + p.y * s;
            const double v = -p.x * s + p.y * c;
            u0 = std::min(u0, u);
            u1 = std::max(u1, u);
            v0 = std::min(v0, v);
            v1 = std::max(v1, v);
        }
        best = std::min(best, (u1 - u0) * (v1 - v0));
    }
    return best;
}

/// Star-shaped polygon with every angular gap below pi, hence simple.
inline std::vector<Point2d> random_simple_polygon(std::mt19937_64& rng, int n) {
    n = std::max(n, 4);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    const double step = 2.0 * std::numbers::pi / n;
    std::vector<Point2d> poly;
    const Point2d c{u(rng) * 100.0, u(rng) * 100.0};
    for (int k = 0; k < n; ++k) {
        const double a = (k + 0.9 * u(rng)) * step;
        const double r = 10.0 + u(rng) * 40.0;
        poly.push_back({c.x + r * std::cos(a), c.y + r * std::sin(a)});
    }
    return poly;
}

inline bool inside_even_odd(const std::vector<Point2d>& poly, Point2d p) {
    bool in = false;
    for (std::size_t i = 0, j = poly.size() - 1; i < poly.size(); j = i++) {
        const Point2d a = poly[i], b = poly[j];
        if ((a.y > p.y) != (b.y > p.y) && p.x < (b.x - a.x) * (p.y - a.y) / (b.y - a.y) + a.x) in = !in;
    }
    return in;
}

inline double bbox_area(const std::vector<Point2d>& poly) {
    double x0 = 1e300, x1 = -1e300, y0 = 1e300, y1 = -1e300;
    for (const Point2d& p : poly) {
        x0 = std::min(x0, p.x);
        x1 = std::max(x1, p.x);
        y0 = std::min(y0, p.y);
        y1 = std::max(y1, p.y);
    }
    return (x1 - x0) * (y1 - y0);
}

inline double monte_carlo_area(const std::vector<Point2d>& poly, int samples, std::mt19937_64& rng) {
    double x0 = 1e300, x1 = -1e300, y0 = 1e300, y1 = -1e300;
    for (const Point2d& p : poly) {
        x0 = std::min(x0, p.x);
        x1 = std::max(x1, p.x);
        y0 = std::min(y0, p.y);
        y1 = std::max(y1, p.y);
    }
    std::uniform_real_distribution<double> ux(x0, x1), uy(y0, y1);
    int hits = 0;
    for (int i = 0; i < samples; ++i) hits += inside_even_odd(poly, {ux(rng), uy(rng)}) ? 1 : 0;
    return (x1 - x0) * (y1 - y0) * hits / samples;
}

/// Mean squared distance between a closed polyline, parameterised by chord
/// length, and a truncated Fourier series, from `m` midpoint samples of t.
inline double efd_l2_error(const std::vector<Point2d>& pts, const gravekit::EFDCoefficients& c, int m) {
    const std::size_t n = pts.size();
    std::vector<double> cum(n + 1, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        const Point2d a = pts[i], b = pts[(i + 1) % n];
        cum[i + 1] = cum[i] + std::hypot(b.x - a.x, b.y - a.y);
    }
    const double total = cum[n];
    double sum = 0.0;
    std::size_t seg = 0;
    for (int k = 0; k < m; ++k) {
        const double t = (k + 0.5) / m * total;
        while (seg + 1 < n && cum[seg + 1] <= t) ++seg;
        const double len = cum[seg + 1] - cum[seg];
        const double f = len > 0 ? (t - cum[seg]) / len : 0.0;
        const Point2d a = pts[seg], b = pts[(seg + 1) % n];
        const double x = a.x + (b.x - a.x) * f, y = a.y + (b.y - a.y) * f;
        double sx = c.a0, sy = c.c0;
        for (std::size_t h = 0; h < c.harmonics.size(); ++h) {
            const double ph = 2.0 * std::numbers::pi * static_cast<double>(h + 1) * t / total;
            sx += c.harmonics[h][0] * std::cos(ph) + c.harmonics[h][1] * std::sin(ph);
            sy += c.harmonics[h][2] * std::cos(ph) + c.harmonics[h][3] * std::sin(ph);
        }
        sum += (x - sx) * (x - sx) + (y - sy) * (y - sy);
    }
    return sum / m;
}

// -- Grouping ---------------------------------------------------------------

inline bool within(const BBox& o, const BBox& g) {
    const double cx = (o.x_min + o.x_max) / 2, cy = (o.y_min + o.y_max) / 2;
    if (!(cx >= g.x_min && cx <= g.x_max && cy >= g.y_min && cy <= g.y_max)) return false;
    const double ix = std::max(0.0, std::min(o.x_max, g.x_max) - std::max(o.x_min, g.x_min));
    const double iy = std::max(0.0, std::min(o.y_max, g.y_max) - std::max(o.y_min, g.y_min));
    return ix * iy >= 0.9 * (o.x_max - o.x_min) * (o.y_max - o.y_min);
}

inline auto order_key(const Detection& d) {
    return std::make_tuple(d.bbox.y_min, d.bbox.x_min, d.bbox.y_max, d.bbox.x_max, d.id);
}

struct TreeIds {
    std::string grave, scale, arrow, section;
    std::vector<std::string> skeletons, artefacts;
    bool operator==(const TreeIds&) const = default;
};

/// All-pairs search: for each grave, every candidate of a kind is compared
/// by squared centre distance.
inline std::vector<TreeIds> brute_force_trees(const std::vector<Detection>& dets) {
    using gravekit::ClassLabel;
    std::vector<const Detection*> graves;
    for (const auto& d : dets) {
        if (d.label == ClassLabel::grave) graves.push_back(&d);
    }
    std::sort(graves.begin(), graves.end(), [](auto* a, auto* b) { return order_key(*a) < order_key(*b); });
    auto sq = [](const Detection& a, const Detection& b) {
        const double dx = (a.bbox.x_min + a.bbox.x_max) / 2 - (b.bbox.x_min + b.bbox.x_max) / 2;
        const double dy = (a.bbox.y_min + a.bbox.y_max) / 2 - (b.bbox.y_min + b.bbox.y_max) / 2;
        return dx * dx + dy * dy;
    };
    auto pick = [&](const Detection& g, ClassLabel label) {
        const Detection* best = nullptr;
        for (const auto& d : dets) {
            if (d.label != label) continue;
            if (!best || sq(g, d) < sq(g, *best) || (sq(g, d) == sq(g, *best) && order_key(d) < order_key(*best))) {
                best = &d;
            }
        }
        return best ? best->id : std::string();
    };
    auto artefact = [](ClassLabel l) {
        return l == ClassLabel::artefact || l == ClassLabel::grave_artefact || l == ClassLabel::ceramics ||
               l == ClassLabel::stone_tool || l == ClassLabel::shaft_axe;
    };
    std::vector<TreeIds> out;
    for (const Detection* g : graves) {
        TreeIds t{g->id, pick(*g, ClassLabel::scale), pick(*g, ClassLabel::arrow),
                  pick(*g, ClassLabel::grave_cross_section), {}, {}};
        std::vector<const Detection*> sk, ar;
        for (const auto& d : dets) {
            if (!within(d.bbox, g->bbox)) continue;
            if (d.label == ClassLabel::skeleton) sk.push_back(&d);
            if (artefact(d.label)) ar.push_back(&d);
        }
        auto by_order = [](auto* a, auto* b) { return order_key(*a) < order_key(*b); };
        std::sort(sk.begin(), sk.end(), by_order);
        std::sort(ar.begin(), ar.end(), by_order);
        for (auto* d : sk) t.skeletons.push_back(d->id);
        for (auto* d : ar) t.artefacts.push_back(d->id);
        out.push_back(std::move(t));
    }
    return out;
}

inline TreeIds ids_of(const gravekit::GraveTree& t) {
    TreeIds out{t.grave.id, t.scale ? t.scale->id : "", t.north_arrow ? t.north_arrow->id : "",
                t.cross_section ? t.cross_section->id : "", {}, {}};
    for (const auto& d : t.skeletons) out.skeletons.push_back(d.id);
    for (const auto& d : t.artefacts) out.artefacts.push_back(d.id);
    return out;
}

/// Up to 10 graves and 20 support objects on a 2000 x 1500 page, on a
/// coarse grid so that exact distance ties occur.
inline std::vector<Detection> random_layout(std::mt19937_64& rng, int layout) {
    using gravekit::ClassLabel;
    std::uniform_int_distribution<int> n_graves(0, 10), n_support(0, 20), grid(0, 40), size(1, 12), kind(0, 6);
    std::vector<Detection> out;
    auto box = [&](double scale) {
        const double x = grid(rng) * 50.0, y = grid(rng) * 37.5;
        return BBox{x, y, x + size(rng) * scale, y + size(rng) * scale};
    };
    const std::string page = "p" + std::to_string(layout);
    const int ng = n_graves(rng);
    for (int i = 0; i < ng; ++i) out.push_back({"g" + std::to_string(i), page, ClassLabel::grave, box(30.0), 0.9, {}});
    const ClassLabel kinds[] = {ClassLabel::scale,    ClassLabel::arrow,    ClassLabel::grave_cross_section,
                                ClassLabel::skeleton, ClassLabel::ceramics, ClassLabel::stone_tool,
                                ClassLabel::text};
    const int ns = n_support(rng);
    for (int i = 0; i < ns; ++i) {
        out.push_back({"s" + std::to_string(i), page, kinds[kind(rng)], box(8.0), 0.9, {}});
    }
    return out;
}

// -- Linear algebra ---------------------------------------------------------

/// Eigenpairs of a symmetric matrix by cyclic Jacobi rotations, sorted by
/// descending eigenvalue. Columns of the result are eigenvectors.
struct Eigen {
    std::vector<double> values;
    std::vector<std::vector<double>> vectors;  // vectors[k] is the k-th eigenvector
};

inline Eigen jacobi_eigen(std::vector<std::vector<double>> a) {
    const std::size_t n = a.size();
    std::vector<std::vector<double>> v(n, std::vector<double>(n, 0.0));
    for (std::size_t i = 0; i < n; ++i) v[i][i] = 1.0;
    for (int sweep = 0; sweep < 100; ++sweep) {
        double off = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t j = i + 1; j < n; ++j) off += a[i][j] * a[i][j];
        }
        if (off < 1e-30) break;
        for (std::size_t p = 0; p < n; ++p) {
            for (std::size_t q = p + 1; q < n; ++q) {
                if (std::abs(a[p][q]) < 1e-300) continue;
                const double theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
                const double t = (theta >= 0 ? 1.0 : -1.0) / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
                const double c = 1.0 / std::sqrt(t * t + 1.0), s = t * c;
                for (std::size_t k = 0; k < n; ++k) {
                    const double akp = a[k][p], akq = a[k][q];
                    a[k][p] = c * akp - s * akq;
                    a[k][q] = s * akp + c * akq;
                }
                for (std::size_t k = 0; k < n; ++k) {
                    const double apk = a[p][k], aqk = a[q][k];
                    a[p][k] = c * apk - s * aqk;
                    a[q][k] = s * apk + c * aqk;
                }
                for (std::size_t k = 0; k < n; ++k) {
                    const double vkp = v[k][p], vkq = v[k][q];
                    v[k][p] = c * vkp - s * vkq;
                    v[k][q] = s * vkp + c * vkq;
                }
            }
        }
    }
    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = i;
    std::sort(order.begin(), order.end(), [&](std::size_t x, std::size_t y) { return a[x][x] > a[y][y]; });
    Eigen out;
    for (std::size_t k : order) {
        out.values.push_back(a[k][k]);
        std::vector<double> col(n);
        for (std::size_t i = 0; i < n; ++i) col[i] = v[i][k];
        out.vectors.push_back(std::move(col));
    }
    return out;
}

}  // namespace oracle
