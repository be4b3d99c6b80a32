#include "gravekit/morpho.hpp"

#include "gravekit/error.hpp"
#include "gravekit/numfmt.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <numbers>

namespace gravekit {

std::vector<Point2d> resample_closed(std::span<const Point2d> points, int count) {
    const std::size_t n = points.size();
    std::vector<double> cumulative(n + 1, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        cumulative[i + 1] = cumulative[i] + norm(points[(i + 1) % n] - points[i]);
    }
    const double total = cumulative[n];
    std::vector<Point2d> out;
    out.reserve(static_cast<std::size_t>(count));
    std::size_t seg = 0;
    for (int k = 0; k < count; ++k) {
        const double s = total * k / count;
        while (seg + 1 < n && cumulative[seg + 1] <= s) ++seg;
        const double len = cumulative[seg + 1] - cumulative[seg];
        const double f = len > 0.0 ? (s - cumulative[seg]) / len : 0.0;
        const Point2d a = points[seg];
        const Point2d b = points[(seg + 1) % n];
        out.push_back(a + (b - a) * f);
    }
    return out;
}

Outline normalize_outline(const Contour& contour, const Conversion& conversion, const RotatedRect& rect,
                          int samples, RotationMode mode) {
    if (contour.points.size() < 3) throw Error(ErrorCode::DegenerateContour, "outline needs 3 points");
    if (!(conversion.px_per_cm > 0.0)) throw Error(ErrorCode::NonPositiveInput, "px_per_cm must be positive");

    std::vector<Point2d> pts;
    pts.reserve(contour.points.size());
    const double inv = 1.0 / conversion.px_per_cm;
    for (const Point2d& p : contour.points) {
        Point2d q = p * inv;
        if (mode == RotationMode::GraveRect) q = rotate_point(q, -rect.angle_deg);
        pts.push_back(q);
    }
    const double area = signed_area(pts);
    if (area == 0.0) throw Error(ErrorCode::DegenerateContour, "outline has zero area");
    if (area < 0.0) std::reverse(pts.begin(), pts.end());

    const auto top = std::min_element(pts.begin(), pts.end(), [](Point2d a, Point2d b) {
        return a.y < b.y || (a.y == b.y && a.x < b.x);
    });
    std::rotate(pts.begin(), top, pts.end());

    Outline out;
    out.points = resample_closed(pts, samples);
    Point2d mean{};
    for (const Point2d& p : out.points) mean = mean + p;
    mean = mean * (1.0 / static_cast<double>(out.points.size()));
    for (Point2d& p : out.points) p = p - mean;
    return out;
}

EFDCoefficients efd(std::span<const Point2d> pts, int harmonics) {
    const std::size_t n = pts.size();
    if (harmonics < 1 || n < static_cast<std::size_t>(2 * harmonics + 1)) {
        throw Error(ErrorCode::TooFewPoints,
                    std::to_string(n) + " points for " + std::to_string(harmonics) + " harmonics");
    }

    struct Segment {
        double dx, dy, t0, t1;
    };
    std::vector<Segment> segments;
    segments.reserve(n);
    double t = 0.0;
    double sum_x = 0.0, sum_y = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const Point2d a = pts[i];
        const Point2d b = pts[(i + 1) % n];
        const double dt = norm(b - a);
        if (dt == 0.0) continue;
        segments.push_back({b.x - a.x, b.y - a.y, t, t + dt});
        sum_x += dt * (a.x + b.x) / 2.0;
        sum_y += dt * (a.y + b.y) / 2.0;
        t += dt;
    }
    const double period = t;
    if (period == 0.0) throw Error(ErrorCode::TooFewPoints, "outline has zero length");

    EFDCoefficients out;
    out.a0 = sum_x / period;
    out.c0 = sum_y / period;
    out.harmonics.resize(static_cast<std::size_t>(harmonics));
    for (int h = 1; h <= harmonics; ++h) {
        const double w = 2.0 * std::numbers::pi * h / period;
        double a = 0.0, b = 0.0, c = 0.0, d = 0.0;
        for (const Segment& s : segments) {
            const double len = s.t1 - s.t0;
            const double dcos = std::cos(w * s.t1) - std::cos(w * s.t0);
            const double dsin = std::sin(w * s.t1) - std::sin(w * s.t0);
            a += s.dx / len * dcos;
            b += s.dx / len * dsin;
            c += s.dy / len * dcos;
            d += s.dy / len * dsin;
        }
        const double k = period / (2.0 * std::numbers::pi * std::numbers::pi * h * h);
        out.harmonics[static_cast<std::size_t>(h - 1)] = {k * a, k * b, k * c, k * d};
    }
    return out;
}

EFDCoefficients efd(const Outline& outline, int harmonics) { return efd(outline.points, harmonics); }

std::vector<Point2d> efd_reconstruct(const EFDCoefficients& coeffs, int n_points) {
    std::vector<Point2d> out;
    out.reserve(static_cast<std::size_t>(std::max(n_points, 0)));
    for (int k = 0; k < n_points; ++k) {
        const double t = static_cast<double>(k) / n_points;
        Point2d p{coeffs.a0, coeffs.c0};
        for (std::size_t i = 0; i < coeffs.harmonics.size(); ++i) {
            const double phase = 2.0 * std::numbers::pi * static_cast<double>(i + 1) * t;
            const auto& [a, b, c, d] = coeffs.harmonics[i];
            p.x += a * std::cos(phase) + b * std::sin(phase);
            p.y += c * std::cos(phase) + d * std::sin(phase);
        }
        out.push_back(p);
    }
    return out;
}

EFDCoefficients normalize_efd(const EFDCoefficients& coeffs, bool size_invariant) {
    EFDCoefficients out = coeffs;
    out.a0 = 0.0;
    out.c0 = 0.0;
    if (out.harmonics.empty()) return out;

    const auto [a1, b1, c1, d1] = coeffs.harmonics[0];
    const double theta = 0.5 * std::atan2(2.0 * (a1 * b1 + c1 * d1), a1 * a1 - b1 * b1 + c1 * c1 - d1 * d1);
    for (std::size_t i = 0; i < out.harmonics.size(); ++i) {
        const double n = static_cast<double>(i + 1);
        const double ct = std::cos(n * theta);
        const double st = std::sin(n * theta);
        auto& [a, b, c, d] = out.harmonics[i];
        const double na = a * ct + b * st;
        const double nb = -a * st + b * ct;
        const double nc = c * ct + d * st;
        const double nd = -c * st + d * ct;
        a = na;
        b = nb;
        c = nc;
        d = nd;
    }
    const double psi = std::atan2(out.harmonics[0][2], out.harmonics[0][0]);
    const double cp = std::cos(psi);
    const double sp = std::sin(psi);
    for (auto& [a, b, c, d] : out.harmonics) {
        const double na = cp * a + sp * c;
        const double nb = cp * b + sp * d;
        const double nc = -sp * a + cp * c;
        const double nd = -sp * b + cp * d;
        a = na;
        b = nb;
        c = nc;
        d = nd;
    }
    // The first ellipse fixes the frame only up to a half turn, which flips
    // every even harmonic. Pick the variant whose largest even coefficient is positive.
    double largest_even = 0.0;
    for (std::size_t i = 1; i < out.harmonics.size(); i += 2) {
        for (double v : out.harmonics[i]) {
            if (std::abs(v) > std::abs(largest_even)) largest_even = v;
        }
    }
    if (largest_even < 0.0) {
        for (std::size_t i = 1; i < out.harmonics.size(); i += 2) {
            for (double& v : out.harmonics[i]) v = -v;
        }
    }
    if (size_invariant) {
        const double size = std::abs(out.harmonics[0][0]);
        if (size > 0.0) {
            for (auto& h : out.harmonics) {
                for (double& v : h) v /= size;
            }
        }
    }
    return out;
}

std::vector<double> flatten(const EFDCoefficients& coeffs) {
    std::vector<double> out;
    out.reserve(coeffs.harmonics.size() * 4);
    for (const auto& h : coeffs.harmonics) out.insert(out.end(), h.begin(), h.end());
    return out;
}

PCAResult pca_project(const std::vector<std::vector<double>>& rows, int k) {
    const auto m = static_cast<Eigen::Index>(rows.size());
    if (m < 2) throw Error(ErrorCode::TooFewSamples, "PCA needs at least 2 samples");
    const auto p = static_cast<Eigen::Index>(rows.front().size());
    for (const auto& r : rows) {
        if (static_cast<Eigen::Index>(r.size()) != p) throw Error(ErrorCode::InvalidParams, "ragged rows");
    }
    k = std::clamp(k, 1, static_cast<int>(p));

    Eigen::MatrixXd x(m, p);
    for (Eigen::Index i = 0; i < m; ++i) {
        for (Eigen::Index j = 0; j < p; ++j) x(i, j) = rows[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
    }
    const Eigen::RowVectorXd mean = x.colwise().mean();
    const Eigen::MatrixXd centered = x.rowwise() - mean;
    const Eigen::MatrixXd cov = centered.transpose() * centered / static_cast<double>(m - 1);
    const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(cov);

    PCAResult result;
    result.model.mean.assign(mean.data(), mean.data() + p);
    for (int c = 0; c < k; ++c) {
        const Eigen::Index col = p - 1 - c;  // eigenvalues come back ascending
        Eigen::VectorXd v = solver.eigenvectors().col(col);
        Eigen::Index arg = 0;
        for (Eigen::Index j = 1; j < p; ++j) {
            if (std::abs(v(j)) > std::abs(v(arg))) arg = j;
        }
        if (v(arg) < 0.0) v = -v;
        result.model.components.emplace_back(v.data(), v.data() + p);
        result.model.explained_variance.push_back(std::max(solver.eigenvalues()(col), 0.0));
    }
    result.projections.assign(static_cast<std::size_t>(m), std::vector<double>(static_cast<std::size_t>(k)));
    for (Eigen::Index i = 0; i < m; ++i) {
        for (int c = 0; c < k; ++c) {
            const auto& comp = result.model.components[static_cast<std::size_t>(c)];
            double s = 0.0;
            for (Eigen::Index j = 0; j < p; ++j) s += centered(i, j) * comp[static_cast<std::size_t>(j)];
            result.projections[static_cast<std::size_t>(i)][static_cast<std::size_t>(c)] = s;
        }
    }
    return result;
}

std::string coefficients_csv(const std::vector<std::string>& record_ids,
                             const std::vector<EFDCoefficients>& coefficients) {
    std::size_t harmonics = 0;
    for (const auto& c : coefficients) harmonics = std::max(harmonics, c.harmonics.size());
    if (harmonics == 0) harmonics = kDefaultHarmonics;
    std::string out = "record_id";
    for (std::size_t n = 1; n <= harmonics; ++n) {
        for (const char* letter : {"a", "b", "c", "d"}) out += "," + std::string(letter) + std::to_string(n);
    }
    out += '\n';
    for (std::size_t i = 0; i < coefficients.size(); ++i) {
        out += record_ids.at(i);
        for (double v : flatten(coefficients[i])) out += "," + format_shortest(v);
        out += '\n';
    }
    return out;
}

std::string projection_csv(const std::vector<std::string>& record_ids, const PCAResult& result) {
    std::string out = "# explained_variance: ";
    for (std::size_t c = 0; c < result.model.explained_variance.size(); ++c) {
        if (c > 0) out += ',';
        out += format_shortest(result.model.explained_variance[c]);
    }
    out += "\nrecord_id";
    for (std::size_t c = 0; c < result.model.components.size(); ++c) out += ",pc" + std::to_string(c + 1);
    out += '\n';
    for (std::size_t i = 0; i < result.projections.size(); ++i) {
        out += record_ids.at(i);
        for (double v : result.projections[i]) out += "," + format_shortest(v);
        out += '\n';
    }
    return out;
}

}  // namespace gravekit
