#pragma once

#include <array>
#include <cstddef>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "sbd/geometry.hpp"
#include "sbd/image.hpp"

namespace sbd {

enum class Polarity { bright, dark };

std::string_view to_string(Polarity p);
Polarity parse_polarity(std::string_view name);

struct AtomDetection {
    Point center;
    double scale = 0.0;     // sigma of the LoG level that fired
    double response = 0.0;  // scale-normalized LoG magnitude
    bool is_surface = false;
};

struct BlobParams {
    double sigma_min = 5.4;
    double sigma_max = 14.4;
    int n_scales = 6;
    double threshold = 0.2;
    Polarity polarity = Polarity::bright;

    void validate() const;

    /// Sigma range [0.6, 1.6] x column sigma and a threshold of one tenth
    /// of the peak response of a column with the given amplitude.
    static BlobParams for_columns(double column_sigma, double amplitude, Polarity polarity = Polarity::bright);
};

/// Sigma values of the scale stack, geometrically spaced.
std::vector<double> blob_scales(const BlobParams& params);

/// Scale-normalized LoG response -sigma^2 * (LoG_sigma * img), computed in the
/// Fourier domain on a replicate-padded copy. Bright blobs respond positively.
Image log_response(const Image& img, double sigma);

std::vector<AtomDetection> detect_blobs(const Image& img, const BlobParams& params);

// ---------------------------------------------------------------------------
// Delaunay triangulation and alpha shape

struct Triangle {
    std::array<std::size_t, 3> v{};
};

/// Delaunay triangulation of distinct points (Bowyer-Watson). Fewer than three
/// points or an all-collinear set yields no triangles.
std::vector<Triangle> delaunay(const std::vector<Point>& points);

double circumradius(Point a, Point b, Point c);

/// 1.5 x the median nearest-neighbour distance; 0 for fewer than two points.
double default_alpha(const std::vector<Point>& points);

struct SurfacePartition {
    std::vector<bool> is_surface;           // per input point
    std::vector<Triangle> kept;             // alpha-complex triangles, indices into the input
    std::vector<std::string> warnings;
};

/// Points on the boundary of the union of Delaunay triangles with
/// circumradius <= alpha, plus points in no such triangle, are surface.
/// Points closer than 1e-6 to an earlier point share its flag and produce a
/// warning.
SurfacePartition surface_flags(const std::vector<Point>& points, double alpha);

/// Sets is_surface on every detection; returns warnings.
std::vector<std::string> surface_partition(std::vector<AtomDetection>& detections, double alpha);

// ---------------------------------------------------------------------------
// Matching

struct MatchPair {
    std::size_t a = 0;
    std::size_t b = 0;
    double distance = 0.0;
};

struct Matching {
    std::vector<MatchPair> pairs;
    std::vector<std::size_t> unmatched_a;
    std::vector<std::size_t> unmatched_b;
    double threshold = 0.0;
};

/// Greedy globally-shortest-pair matching: repeatedly pairs the closest
/// unmatched (a, b) with distance <= threshold; ties go to the lowest a, then b.
Matching match_atoms(const std::vector<Point>& a, const std::vector<Point>& b, double threshold);

std::vector<Point> centers(const std::vector<AtomDetection>& detections);

// ---------------------------------------------------------------------------
// CSV: x,y,scale,response,is_surface

void write_detections_csv(const std::filesystem::path& path, const std::vector<AtomDetection>& detections);
std::vector<AtomDetection> read_detections_csv(const std::filesystem::path& path);

}  // namespace sbd
