#pragma once

#include "gravekit/calibrate.hpp"
#include "gravekit/geometry.hpp"

#include <array>
#include <string>
#include <vector>

// Whole-outline morphometrics: normalised outlines, elliptic Fourier
// descriptors (Kuhl & Giardina, piecewise-linear form) and PCA.

namespace gravekit {

inline constexpr int kDefaultHarmonics = 15;
inline constexpr int kOutlineSamples = 256;

/// Closed outline in centimetres with its vertex centroid at the origin and
/// the grave's long axis vertical.
struct Outline {
    std::vector<Point2d> points;
    std::string source_record_id;
};

enum class RotationMode {
    GraveRect,      // undo the grave's min-area-rect angle
    FirstHarmonic,  // leave the rotation alone; normalise with normalize_efd instead
};

/// Scale to cm, rotate by -rect.angle_deg, resample to `samples` points at
/// equal arc length, then centre. Outlines are made clockwise on screen and
/// start at their topmost point so that coefficients of different records
/// are comparable.
Outline normalize_outline(const Contour& contour, const Conversion& conversion, const RotatedRect& rect,
                          int samples = kOutlineSamples, RotationMode mode = RotationMode::GraveRect);

/// `count` points at equal arc-length spacing along the closed polyline,
/// starting at its first vertex.
std::vector<Point2d> resample_closed(std::span<const Point2d> points, int count);

struct EFDCoefficients {
    std::vector<std::array<double, 4>> harmonics;  // (a_n, b_n, c_n, d_n), n = 1..H
    double a0 = 0.0;                               // DC x
    double c0 = 0.0;                               // DC y
};

/// Throws TooFewPoints below 2H+1 points.
EFDCoefficients efd(const Outline& outline, int harmonics = kDefaultHarmonics);
EFDCoefficients efd(std::span<const Point2d> closed_points, int harmonics = kDefaultHarmonics);

/// Evaluates the truncated series at t = k / n_points, k = 0..n_points-1.
std::vector<Point2d> efd_reconstruct(const EFDCoefficients& coeffs, int n_points);

/// Rotation/phase normalisation on the first harmonic ellipse; optionally
/// divides by its semi-major axis. DC terms are zeroed. The half-turn
/// ambiguity is settled by making the largest even-harmonic coefficient positive.
EFDCoefficients normalize_efd(const EFDCoefficients& coeffs, bool size_invariant = true);

/// (a_1, b_1, c_1, d_1, ..., a_H, b_H, c_H, d_H); DC excluded.
std::vector<double> flatten(const EFDCoefficients& coeffs);

struct PCAModel {
    std::vector<double> mean;
    std::vector<std::vector<double>> components;  // k unit vectors
    std::vector<double> explained_variance;       // descending
};

struct PCAResult {
    PCAModel model;
    std::vector<std::vector<double>> projections;  // m x k
};

/// Covariance (divisor m-1) eigendecomposition. Each component's entry of
/// largest magnitude is made positive. Throws TooFewSamples below 2 rows.
PCAResult pca_project(const std::vector<std::vector<double>>& rows, int k = 2);

/// Header then one row per record: record_id,a1,b1,c1,d1,...
std::string coefficients_csv(const std::vector<std::string>& record_ids,
                             const std::vector<EFDCoefficients>& coefficients);

/// "# explained_variance: v1,v2" comment line, then record_id,pc1,pc2,...
std::string projection_csv(const std::vector<std::string>& record_ids, const PCAResult& result);

}  // namespace gravekit
