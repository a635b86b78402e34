#include "sbd/likelihood.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "sbd/csv.hpp"
#include "sbd/error.hpp"
#include "sbd/parallel.hpp"

namespace sbd {

Region disk_region(Point center, double radius, std::size_t width, std::size_t height) {
    Region r;
    if (!(radius >= 0.0)) return r;
    const long x0 = std::max(0L, static_cast<long>(std::ceil(center.x - radius)));
    const long x1 = std::min(static_cast<long>(width) - 1, static_cast<long>(std::floor(center.x + radius)));
    const long y0 = std::max(0L, static_cast<long>(std::ceil(center.y - radius)));
    const long y1 = std::min(static_cast<long>(height) - 1, static_cast<long>(std::floor(center.y + radius)));
    const double r2 = radius * radius;
    for (long y = y0; y <= y1; ++y) {
        for (long x = x0; x <= x1; ++x) {
            const double dx = static_cast<double>(x) - center.x;
            const double dy = static_cast<double>(y) - center.y;
            if (dx * dx + dy * dy <= r2) r.pixels.push_back(static_cast<std::size_t>(y) * width + static_cast<std::size_t>(x));
        }
    }
    return r;
}

Region fit_region(const Image& denoised, Region region) {
    if (region.pixels.empty()) throw ValidationError("cannot fit an empty region");
    const auto px = denoised.pixels();
    double sum = 0.0;
    for (std::size_t i : region.pixels) {
        if (i >= px.size()) throw ValidationError("region pixel outside the image");
        sum += px[i];
    }
    region.fitted_intensity = std::max(sum / static_cast<double>(region.pixels.size()), kMinRate);
    return region;
}

double poisson_loglik(const Image& noisy, const Region& region, double rate) {
    if (!(rate > 0.0) || !std::isfinite(rate)) throw DomainError("poisson rate must be positive");
    const auto px = noisy.pixels();
    const double log_rate = std::log(rate);
    double total = 0.0;
    for (std::size_t i : region.pixels) {
        if (i >= px.size()) throw ValidationError("region pixel outside the image");
        const double y = px[i];
        const double k = std::round(y);
        if (!(std::abs(y - k) <= 1e-6) || k < 0.0) throw DomainError("noisy value is not a non-negative integer count");
        total += k * log_rate - rate - std::lgamma(k + 1.0);
    }
    return total;
}

namespace {

void fill_triangle(std::vector<char>& mask, std::size_t w, std::size_t h, Point a, Point b, Point c) {
    const auto edge = [](Point p, Point q, double x, double y) { return (q.x - p.x) * (y - p.y) - (q.y - p.y) * (x - p.x); };
    const double area = edge(a, b, c.x, c.y);
    if (area == 0.0) return;
    const long x0 = std::max(0L, static_cast<long>(std::floor(std::min({a.x, b.x, c.x}))));
    const long x1 = std::min(static_cast<long>(w) - 1, static_cast<long>(std::ceil(std::max({a.x, b.x, c.x}))));
    const long y0 = std::max(0L, static_cast<long>(std::floor(std::min({a.y, b.y, c.y}))));
    const long y1 = std::min(static_cast<long>(h) - 1, static_cast<long>(std::ceil(std::max({a.y, b.y, c.y}))));
    for (long y = y0; y <= y1; ++y) {
        for (long x = x0; x <= x1; ++x) {
            const double px = static_cast<double>(x), py = static_cast<double>(y);
            const double e0 = edge(a, b, px, py) / area;
            const double e1 = edge(b, c, px, py) / area;
            const double e2 = edge(c, a, px, py) / area;
            if (e0 >= 0.0 && e1 >= 0.0 && e2 >= 0.0) mask[static_cast<std::size_t>(y) * w + static_cast<std::size_t>(x)] = 1;
        }
    }
}

}  // namespace

VacuumEstimate estimate_vacuum(const Image& noisy, const std::vector<AtomDetection>& detections, double dilation,
                               std::optional<double> alpha) {
    const std::size_t w = noisy.width(), h = noisy.height();
    std::vector<char> excluded(noisy.size(), 0);
    for (const auto& d : detections) {
        const double radius = d.scale * std::sqrt(2.0) + dilation;
        // Strictly farther than the radius is vacuum, so the disk is inclusive.
        for (std::size_t i : disk_region(d.center, radius, w, h).pixels) excluded[i] = 1;
    }
    if (detections.size() >= 3) {
        const auto pts = centers(detections);
        const auto part = surface_flags(pts, alpha ? *alpha : default_alpha(pts));
        for (const auto& t : part.kept) fill_triangle(excluded, w, h, pts[t.v[0]], pts[t.v[1]], pts[t.v[2]]);
    }

    VacuumEstimate est;
    est.region.kind = RegionKind::vacuum;
    const auto px = noisy.pixels();
    double sum = 0.0;
    for (std::size_t i = 0; i < px.size(); ++i) {
        if (excluded[i]) continue;
        est.region.pixels.push_back(i);
        sum += px[i];
    }
    if (est.region.pixels.empty()) throw CalibrationError("no vacuum pixels remain outside the detections");
    est.rate = sum / static_cast<double>(est.region.pixels.size());
    est.region.fitted_intensity = est.rate;
    return est;
}

RegionLlr region_llr(const Image& noisy, const Image& denoised, Point center, double radius, double vacuum_rate) {
    require_same_shape(noisy, denoised, "likelihood inputs");
    RegionLlr out;
    out.center = center;
    out.radius = radius;
    out.vacuum_rate = vacuum_rate;
    auto region = disk_region(center, radius, noisy.width(), noisy.height());
    out.n_pixels = region.pixels.size();
    if (region.pixels.empty()) return out;
    region = fit_region(denoised, std::move(region));
    out.fit_rate = *region.fitted_intensity;
    const double diff = poisson_loglik(noisy, region, out.fit_rate) - poisson_loglik(noisy, region, vacuum_rate);
    out.llr_per_pixel = diff / static_cast<double>(out.n_pixels);
    return out;
}

LikelihoodMap llr_map(const Image& noisy, const Image& denoised, const std::vector<AtomDetection>& detections,
                      double vacuum_rate) {
    require_same_shape(noisy, denoised, "likelihood inputs");
    if (!(vacuum_rate > 0.0)) throw DomainError("vacuum rate must be positive");
    LikelihoodMap map;
    map.per_region.resize(detections.size());
    parallel_for(detections.size(), [&](std::size_t i) {
        map.per_region[i] =
            region_llr(noisy, denoised, detections[i].center, std::sqrt(2.0) * detections[i].scale, vacuum_rate);
        map.per_region[i].id = i;
    });
    map.raster = Image(noisy.width(), noisy.height(), 0.0, noisy.pixel_size());
    auto raster = map.raster.pixels();
    for (const auto& r : map.per_region) {
        for (std::size_t i : disk_region(r.center, r.radius, noisy.width(), noisy.height()).pixels) raster[i] = r.llr_per_pixel;
    }
    return map;
}

void write_llr_csv(const std::filesystem::path& path, const std::vector<RegionLlr>& regions) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write " + path.string());
    out << "region_id,cx,cy,radius,n_pixels,fit_rate,vacuum_rate,llr_per_pixel\n";
    for (const auto& r : regions) {
        out << r.id << ',' << format_number(r.center.x) << ',' << format_number(r.center.y) << ','
            << format_number(r.radius) << ',' << r.n_pixels << ',' << format_number(r.fit_rate) << ','
            << format_number(r.vacuum_rate) << ',' << format_number(r.llr_per_pixel) << '\n';
    }
    if (!out) throw IoError("write failed for " + path.string());
}

}  // namespace sbd
