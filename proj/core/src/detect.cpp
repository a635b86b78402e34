#include "sbd/detect.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <tuple>

#include "fft.hpp"
#include "sbd/csv.hpp"
#include "sbd/error.hpp"
#include "sbd/parallel.hpp"

namespace sbd {

std::string_view to_string(Polarity p) { return p == Polarity::bright ? "bright" : "dark"; }

Polarity parse_polarity(std::string_view name) {
    if (name == "bright") return Polarity::bright;
    if (name == "dark") return Polarity::dark;
    throw ParameterError("unknown polarity '" + std::string(name) + "'");
}

void BlobParams::validate() const {
    if (!(sigma_min > 0.0) || !(sigma_max > sigma_min)) {
        throw ParameterError("blob detection needs 0 < sigma_min < sigma_max");
    }
    if (n_scales < 1) throw ParameterError("blob detection needs n_scales >= 1");
    if (!std::isfinite(threshold)) throw ParameterError("blob threshold must be finite");
}

BlobParams BlobParams::for_columns(double column_sigma, double amplitude, Polarity polarity) {
    BlobParams p;
    p.sigma_min = 0.6 * column_sigma;
    p.sigma_max = 1.6 * column_sigma;
    p.n_scales = 6;
    // A Gaussian column of amplitude A peaks at A/2 when sigma matches.
    p.threshold = 0.1 * amplitude / 2.0;
    p.polarity = polarity;
    return p;
}

std::vector<double> blob_scales(const BlobParams& params) {
    params.validate();
    std::vector<double> s(static_cast<std::size_t>(params.n_scales));
    if (params.n_scales == 1) {
        s[0] = std::sqrt(params.sigma_min * params.sigma_max);
        return s;
    }
    const double ratio = std::log(params.sigma_max / params.sigma_min) / (params.n_scales - 1);
    for (int i = 0; i < params.n_scales; ++i) s[static_cast<std::size_t>(i)] = params.sigma_min * std::exp(ratio * i);
    s.back() = params.sigma_max;
    return s;
}

namespace {

std::size_t smooth_size(std::size_t n) {
    for (;; ++n) {
        std::size_t m = n;
        for (std::size_t p : {2u, 3u, 5u})
            while (m % p == 0) m /= p;
        if (m == 1) return n;
    }
}

class LogStack {
public:
    LogStack(const Image& img, double max_sigma) : w_(img.width()), h_(img.height()) {
        margin_ = static_cast<std::size_t>(std::ceil(4.0 * max_sigma));
        pw_ = smooth_size(w_ + 2 * margin_);
        ph_ = smooth_size(h_ + 2 * margin_);
        std::vector<double> grid(pw_ * ph_);
        const long m = static_cast<long>(margin_);
        for (std::size_t y = 0; y < ph_; ++y)
            for (std::size_t x = 0; x < pw_; ++x)
                grid[y * pw_ + x] = img.clamped(static_cast<long>(x) - m, static_cast<long>(y) - m);
        spectrum_ = detail::forward_fft(grid, pw_, ph_);
    }

    Image response(double sigma) const {
        auto spec = spectrum_;
        const double four_pi2 = 4.0 * std::numbers::pi * std::numbers::pi;
        for (std::size_t ky = 0; ky < ph_; ++ky) {
            const double fy = spec.freq_y(ky);
            for (std::size_t kx = 0; kx < spec.cols(); ++kx) {
                const double fx = spec.freq_x(kx);
                const double f2 = fx * fx + fy * fy;
                spec.at(ky, kx) *= sigma * sigma * four_pi2 * f2 * std::exp(-0.5 * four_pi2 * sigma * sigma * f2);
            }
        }
        const auto grid = detail::inverse_fft(spec);
        Image out(w_, h_);
        for (std::size_t y = 0; y < h_; ++y)
            for (std::size_t x = 0; x < w_; ++x) out(x, y) = grid[(y + margin_) * pw_ + x + margin_];
        return out;
    }

private:
    std::size_t w_, h_, margin_ = 0, pw_ = 0, ph_ = 0;
    detail::HalfSpectrum spectrum_;
};

double vertex_offset(double left, double mid, double right) {
    const double curvature = left - 2.0 * mid + right;
    if (!(curvature < 0.0)) return 0.0;
    return std::clamp(0.5 * (left - right) / curvature, -0.5, 0.5);
}

}  // namespace

Image log_response(const Image& img, double sigma) {
    if (!(sigma > 0.0)) throw ParameterError("LoG sigma must be positive");
    require_finite(img);
    Image out = LogStack(img, sigma).response(sigma);
    out.set_pixel_size(img.pixel_size());
    return out;
}

std::vector<AtomDetection> detect_blobs(const Image& img, const BlobParams& params) {
    require_finite(img);
    const auto sigmas = blob_scales(params);
    const LogStack stack(img, sigmas.back());
    std::vector<Image> levels(sigmas.size());
    parallel_for(sigmas.size(), [&](std::size_t s) {
        levels[s] = stack.response(sigmas[s]);
        if (params.polarity == Polarity::dark)
            for (double& v : levels[s].pixels()) v = -v;
    });

    const long w = static_cast<long>(img.width());
    const long h = static_cast<long>(img.height());
    const long ns = static_cast<long>(sigmas.size());
    std::vector<AtomDetection> found;
    for (long s = 0; s < ns; ++s) {
        const Image& level = levels[static_cast<std::size_t>(s)];
        for (long y = 0; y < h; ++y) {
            for (long x = 0; x < w; ++x) {
                const double v = level(static_cast<std::size_t>(x), static_cast<std::size_t>(y));
                if (!(v > params.threshold)) continue;
                bool is_max = true;
                for (long ds = -1; ds <= 1 && is_max; ++ds) {
                    const long t = s + ds;
                    if (t < 0 || t >= ns) continue;
                    const Image& other = levels[static_cast<std::size_t>(t)];
                    for (long dy = -1; dy <= 1 && is_max; ++dy) {
                        for (long dx = -1; dx <= 1; ++dx) {
                            if (ds == 0 && dx == 0 && dy == 0) continue;
                            const long nx = x + dx, ny = y + dy;
                            if (nx < 0 || ny < 0 || nx >= w || ny >= h) continue;
                            if (other(static_cast<std::size_t>(nx), static_cast<std::size_t>(ny)) > v) {
                                is_max = false;
                                break;
                            }
                        }
                    }
                }
                if (!is_max) continue;
                double ox = 0.0, oy = 0.0;
                if (x > 0 && x < w - 1)
                    ox = vertex_offset(level.clamped(x - 1, y), v, level.clamped(x + 1, y));
                if (y > 0 && y < h - 1)
                    oy = vertex_offset(level.clamped(x, y - 1), v, level.clamped(x, y + 1));
                found.push_back({{static_cast<double>(x) + ox, static_cast<double>(y) + oy},
                                 sigmas[static_cast<std::size_t>(s)], v, false});
            }
        }
    }

    std::stable_sort(found.begin(), found.end(), [](const AtomDetection& a, const AtomDetection& b) {
        if (a.response != b.response) return a.response > b.response;
        return std::tie(a.center.y, a.center.x) < std::tie(b.center.y, b.center.x);
    });
    std::vector<AtomDetection> kept;
    for (const auto& d : found) {
        const bool overlaps = std::any_of(kept.begin(), kept.end(), [&](const AtomDetection& k) {
            return distance(k.center, d.center) < std::min(k.scale, d.scale);
        });
        if (!overlaps) kept.push_back(d);
    }
    std::sort(kept.begin(), kept.end(), [](const AtomDetection& a, const AtomDetection& b) {
        return std::tie(a.center.y, a.center.x) < std::tie(b.center.y, b.center.x);
    });
    return kept;
}

// ---------------------------------------------------------------------------

Matching match_atoms(const std::vector<Point>& a, const std::vector<Point>& b, double threshold) {
    if (!(threshold > 0.0)) throw ParameterError("match threshold must be positive");
    std::vector<MatchPair> candidates;
    for (std::size_t i = 0; i < a.size(); ++i) {
        for (std::size_t j = 0; j < b.size(); ++j) {
            const double d = distance(a[i], b[j]);
            if (d <= threshold) candidates.push_back({i, j, d});
        }
    }
    std::sort(candidates.begin(), candidates.end(), [](const MatchPair& p, const MatchPair& q) {
        return std::tie(p.distance, p.a, p.b) < std::tie(q.distance, q.a, q.b);
    });
    Matching m;
    m.threshold = threshold;
    std::vector<bool> used_a(a.size(), false), used_b(b.size(), false);
    for (const auto& c : candidates) {
        if (used_a[c.a] || used_b[c.b]) continue;
        used_a[c.a] = used_b[c.b] = true;
        m.pairs.push_back(c);
    }
    for (std::size_t i = 0; i < a.size(); ++i)
        if (!used_a[i]) m.unmatched_a.push_back(i);
    for (std::size_t j = 0; j < b.size(); ++j)
        if (!used_b[j]) m.unmatched_b.push_back(j);
    return m;
}

std::vector<Point> centers(const std::vector<AtomDetection>& detections) {
    std::vector<Point> out;
    out.reserve(detections.size());
    for (const auto& d : detections) out.push_back(d.center);
    return out;
}

// ---------------------------------------------------------------------------

void write_detections_csv(const std::filesystem::path& path, const std::vector<AtomDetection>& detections) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write " + path.string());
    out << "x,y,scale,response,is_surface\n";
    for (const auto& d : detections) {
        out << format_number(d.center.x) << ',' << format_number(d.center.y) << ',' << format_number(d.scale) << ','
            << format_number(d.response) << ',' << (d.is_surface ? 1 : 0) << '\n';
    }
    if (!out) throw IoError("write failed for " + path.string());
}

std::vector<AtomDetection> read_detections_csv(const std::filesystem::path& path) {
    const auto table = read_csv(path);
    const auto cx = table.column("x"), cy = table.column("y");
    std::vector<AtomDetection> out;
    for (const auto& row : table.rows) {
        AtomDetection d;
        d.center = {parse_double(row[cx]), parse_double(row[cy])};
        for (std::size_t i = 0; i < table.header.size(); ++i) {
            if (table.header[i] == "scale") d.scale = parse_double(row[i]);
            else if (table.header[i] == "response") d.response = parse_double(row[i]);
            else if (table.header[i] == "is_surface") d.is_surface = row[i] == "1" || row[i] == "true";
        }
        out.push_back(d);
    }
    return out;
}

}  // namespace sbd
