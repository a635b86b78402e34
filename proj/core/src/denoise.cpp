#include "sbd/denoise.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <numbers>
#include <set>

#include "fft.hpp"
#include "sbd/error.hpp"
#include "sbd/parallel.hpp"

namespace sbd {

// ---------------------------------------------------------------------------
// lowpass

double lowpass_mask(double r, double cutoff) {
    if (cutoff >= 1.0) return 1.0;
    const double lo = cutoff * (1.0 - kLowpassRolloff);
    const double hi = cutoff * (1.0 + kLowpassRolloff);
    if (r <= lo) return 1.0;
    if (r >= hi) return 0.0;
    return 0.5 * (1.0 + std::cos(std::numbers::pi * (r - lo) / (hi - lo)));
}

Image lowpass(const Image& img, double cutoff) {
    if (!(cutoff > 0.0 && cutoff <= 1.0)) {
        throw ParameterError("lowpass cutoff must lie in (0, 1]");
    }
    require_finite(img);
    if (cutoff >= 1.0) return img;

    const std::size_t w = img.width();
    const std::size_t h = img.height();
    const std::size_t pw = w + (w % 2);
    const std::size_t ph = h + (h % 2);
    std::vector<double> grid(pw * ph);
    for (std::size_t y = 0; y < ph; ++y) {
        for (std::size_t x = 0; x < pw; ++x) {
            grid[y * pw + x] = img(std::min(x, w - 1), std::min(y, h - 1));
        }
    }

    auto spectrum = detail::forward_fft(grid, pw, ph);
    for (std::size_t ky = 0; ky < ph; ++ky) {
        const double fy = spectrum.freq_y(ky);
        for (std::size_t kx = 0; kx < spectrum.cols(); ++kx) {
            const double fx = spectrum.freq_x(kx);
            // Nyquist is 0.5 cycles/pixel.
            const double r = std::sqrt(fx * fx + fy * fy) / 0.5;
            spectrum.at(ky, kx) *= lowpass_mask(r, cutoff);
        }
    }
    const auto filtered = detail::inverse_fft(spectrum);

    Image out(w, h, 0.0, img.pixel_size());
    for (std::size_t y = 0; y < h; ++y) {
        for (std::size_t x = 0; x < w; ++x) out(x, y) = filtered[y * pw + x];
    }
    return out;
}

// ---------------------------------------------------------------------------
// adaptive Wiener

namespace {

// Summed-area table over the replicate-padded image; (w+2m+1) x (h+2m+1).
struct Integral {
    std::size_t stride = 0;
    std::vector<double> sum;
    std::vector<double> sum_sq;

    Integral(const Image& img, long margin) {
        const long w = static_cast<long>(img.width());
        const long h = static_cast<long>(img.height());
        const long pw = w + 2 * margin;
        const long ph = h + 2 * margin;
        stride = static_cast<std::size_t>(pw + 1);
        sum.assign(stride * static_cast<std::size_t>(ph + 1), 0.0);
        sum_sq.assign(sum.size(), 0.0);
        for (long y = 0; y < ph; ++y) {
            double row = 0.0;
            double row_sq = 0.0;
            for (long x = 0; x < pw; ++x) {
                const double v = img.clamped(x - margin, y - margin);
                row += v;
                row_sq += v * v;
                const std::size_t i = static_cast<std::size_t>(y + 1) * stride + static_cast<std::size_t>(x + 1);
                sum[i] = sum[i - stride] + row;
                sum_sq[i] = sum_sq[i - stride] + row_sq;
            }
        }
    }

    // Sum over padded rectangle [x0, x1) x [y0, y1).
    static double box(const std::vector<double>& t, std::size_t stride, std::size_t x0, std::size_t y0,
                      std::size_t x1, std::size_t y1) {
        return t[y1 * stride + x1] - t[y0 * stride + x1] - t[y1 * stride + x0] + t[y0 * stride + x0];
    }
};

}  // namespace

Image wiener_adaptive(const Image& img, int radius) {
    if (radius < 1) throw ParameterError("wiener radius must be >= 1");
    require_finite(img);
    constexpr double eps = 1e-12;
    const auto r = static_cast<std::size_t>(radius);
    const Integral table(img, radius);
    const double n = static_cast<double>((2 * r + 1) * (2 * r + 1));

    Image out(img.width(), img.height(), 0.0, img.pixel_size());
    parallel_for(img.height(), [&](std::size_t y) {
        for (std::size_t x = 0; x < img.width(); ++x) {
            // Window centred on (x, y) spans padded [x, x + 2r] x [y, y + 2r].
            const double s = Integral::box(table.sum, table.stride, x, y, x + 2 * r + 1, y + 2 * r + 1);
            const double s2 = Integral::box(table.sum_sq, table.stride, x, y, x + 2 * r + 1, y + 2 * r + 1);
            const double mu = s / n;
            const double var = std::max(s2 / n - mu * mu, 0.0);
            const double noise = std::max(mu, eps);
            const double gain = std::max(var - noise, 0.0) / std::max(var, eps);
            out(x, y) = mu + gain * (img(x, y) - mu);
        }
    });
    return out;
}

// ---------------------------------------------------------------------------
// Anscombe pair

double anscombe(double v) {
    if (v < 0.0) throw DomainError("anscombe requires non-negative input");
    return 2.0 * std::sqrt(v + 3.0 / 8.0);
}

double inv_anscombe(double z) {
    if (!(z > 0.0)) throw DomainError("inverse anscombe requires positive input");
    static const double s = std::sqrt(1.5);
    const double zi = 1.0 / z;
    const double v = 0.25 * z * z - 0.125 + 0.25 * s * zi - 1.375 * zi * zi + 0.625 * s * zi * zi * zi;
    return std::max(v, 0.0);
}

Image anscombe(const Image& img) {
    Image out = img;
    for (double& v : out.pixels()) v = anscombe(v);
    return out;
}

Image inv_anscombe(const Image& img) {
    Image out = img;
    for (double& v : out.pixels()) v = inv_anscombe(v);
    return out;
}

// ---------------------------------------------------------------------------
// non-local means

Image nlm(const Image& img, int patch, int window, double strength, double noise_sigma) {
    if (patch < 1 || patch % 2 == 0) throw ParameterError("nlm patch must be a positive odd size");
    if (window < 1 || window % 2 == 0) throw ParameterError("nlm window must be a positive odd size");
    if (patch > window) throw ParameterError("nlm patch must not exceed the window");
    if (!(strength > 0.0)) throw ParameterError("nlm strength must be positive");
    require_finite(img);

    const long w = static_cast<long>(img.width());
    const long h = static_cast<long>(img.height());
    const long m = patch / 2;
    const long wr = window / 2;
    const long pw = w + 2 * m;
    const double inv_area = 1.0 / static_cast<double>(patch * patch);
    const double floor_d2 = 2.0 * noise_sigma * noise_sigma;
    const double inv_h2 = std::isinf(strength) ? 0.0 : 1.0 / (strength * strength);

    // Replicate-padded copy so every patch lookup is a plain index.
    std::vector<double> padded(static_cast<std::size_t>(pw * (h + 2 * m)));
    for (long y = 0; y < h + 2 * m; ++y) {
        for (long x = 0; x < pw; ++x) padded[static_cast<std::size_t>(y * pw + x)] = img.clamped(x - m, y - m);
    }

    Image out(img.width(), img.height(), 0.0, img.pixel_size());
    constexpr long kBand = 32;
    const long bands = (h + kBand - 1) / kBand;

    parallel_for(static_cast<std::size_t>(bands), [&](std::size_t band) {
        const long ya = static_cast<long>(band) * kBand;
        const long yb = std::min(h, ya + kBand);
        const long rows = yb - ya;
        std::vector<double> num(static_cast<std::size_t>(rows * w), 0.0);
        std::vector<double> den(num.size(), 0.0);
        std::vector<double> wmax(num.size(), 0.0);
        std::vector<double> e;
        std::vector<double> hsum;
        std::vector<double> vsum;

        for (long dy = -wr; dy <= wr; ++dy) {
            for (long dx = -wr; dx <= wr; ++dx) {
                if (dx == 0 && dy == 0) continue;
                const long x0 = std::max(0L, -dx), x1 = std::min(w, w - dx);
                const long y0 = std::max(ya, -dy), y1 = std::min(yb, h - dy);
                if (x0 >= x1 || y0 >= y1) continue;
                const long nx = x1 - x0, ny = y1 - y0;
                const long ew = nx + 2 * m, eh = ny + 2 * m;

                // Squared differences on the padded grid, then a separable box sum.
                e.resize(static_cast<std::size_t>(ew * eh));
                for (long j = 0; j < eh; ++j) {
                    const double* a = &padded[static_cast<std::size_t>((y0 + j) * pw + x0)];
                    const double* b = &padded[static_cast<std::size_t>((y0 + j + dy) * pw + x0 + dx)];
                    double* row = &e[static_cast<std::size_t>(j * ew)];
                    for (long i = 0; i < ew; ++i) {
                        const double d = a[i] - b[i];
                        row[i] = d * d;
                    }
                }
                hsum.assign(static_cast<std::size_t>(nx * eh), 0.0);
                for (long j = 0; j < eh; ++j) {
                    const double* row = &e[static_cast<std::size_t>(j * ew)];
                    double* dst = &hsum[static_cast<std::size_t>(j * nx)];
                    double acc = 0.0;
                    for (long i = 0; i <= 2 * m; ++i) acc += row[i];
                    dst[0] = acc;
                    for (long i = 1; i < nx; ++i) {
                        acc += row[i + 2 * m] - row[i - 1];
                        dst[i] = acc;
                    }
                }
                // Vertical running sum, one row at a time.
                vsum.assign(static_cast<std::size_t>(nx), 0.0);
                for (long j = 0; j <= 2 * m; ++j) {
                    const double* src = &hsum[static_cast<std::size_t>(j * nx)];
                    for (long i = 0; i < nx; ++i) vsum[static_cast<std::size_t>(i)] += src[i];
                }
                for (long j = 0; j < ny; ++j) {
                    if (j > 0) {
                        const double* add = &hsum[static_cast<std::size_t>((j + 2 * m) * nx)];
                        const double* sub = &hsum[static_cast<std::size_t>((j - 1) * nx)];
                        for (long i = 0; i < nx; ++i) vsum[static_cast<std::size_t>(i)] += add[i] - sub[i];
                    }
                    const long py = y0 + j;
                    const std::size_t base = static_cast<std::size_t>((py - ya) * w + x0);
                    const double* cand = &img.pixels()[static_cast<std::size_t>((py + dy) * w + x0 + dx)];
                    for (long i = 0; i < nx; ++i) {
                        const double d2 = std::max(vsum[static_cast<std::size_t>(i)], 0.0) * inv_area;
                        const double arg = std::max(d2 - floor_d2, 0.0) * inv_h2;
                        if (arg > 40.0) continue;
                        const double weight = std::exp(-arg);
                        const std::size_t k = base + static_cast<std::size_t>(i);
                        num[k] += weight * cand[i];
                        den[k] += weight;
                        wmax[k] = std::max(wmax[k], weight);
                    }
                }
            }
        }

        for (long y = ya; y < yb; ++y) {
            for (long x = 0; x < w; ++x) {
                const std::size_t k = static_cast<std::size_t>((y - ya) * w + x);
                const double self = img(static_cast<std::size_t>(x), static_cast<std::size_t>(y));
                const double total = den[k] + wmax[k];
                out(static_cast<std::size_t>(x), static_cast<std::size_t>(y)) =
                    total > 0.0 ? (num[k] + wmax[k] * self) / total : self;
            }
        }
    });
    return out;
}

Image vst_nlm(const Image& img, const VstNlmConfig& cfg) {
    require_nonnegative(img);
    return inv_anscombe(nlm(anscombe(img), cfg.patch, cfg.window, cfg.strength, 1.0));
}

// ---------------------------------------------------------------------------
// DenoiserSpec

std::string_view to_string(DenoiserKind kind) {
    switch (kind) {
        case DenoiserKind::identity: return "identity";
        case DenoiserKind::lowpass: return "lowpass";
        case DenoiserKind::wiener: return "wiener";
        case DenoiserKind::vst_nlm: return "vstnlm";
        case DenoiserKind::external: return "external";
    }
    return "unknown";
}

namespace {

std::set<std::string> allowed_keys(DenoiserKind kind) {
    switch (kind) {
        case DenoiserKind::identity: return {};
        case DenoiserKind::lowpass: return {"cutoff"};
        case DenoiserKind::wiener: return {"radius"};
        case DenoiserKind::vst_nlm: return {"patch", "window", "strength"};
        case DenoiserKind::external: return {"command", "timeout"};
    }
    return {};
}

double parse_number(const std::string& key, const std::string& text) {
    double v = 0.0;
    const auto* end = text.data() + text.size();
    const auto [ptr, ec] = std::from_chars(text.data(), end, v);
    if (ec != std::errc() || ptr != end || !std::isfinite(v)) {
        throw ParameterError("parameter '" + key + "' is not a number: '" + text + "'");
    }
    return v;
}

int odd_int(const DenoiserSpec& spec, const std::string& key, int fallback) {
    const double v = spec.number(key, fallback);
    if (v != std::floor(v) || static_cast<long>(v) % 2 == 0) {
        throw ParameterError("parameter '" + key + "' must be an odd integer");
    }
    return static_cast<int>(v);
}

}  // namespace

DenoiserSpec DenoiserSpec::parse(std::string_view method, const std::vector<std::string>& assignments) {
    DenoiserSpec spec;
    if (method.starts_with("external:")) {
        spec.kind = DenoiserKind::external;
        std::string command(method.substr(9));
        if (command.size() >= 2 && command.front() == '"' && command.back() == '"') {
            command = command.substr(1, command.size() - 2);
        }
        spec.parameters["command"] = command;
    } else if (method == "identity" || method == "raw") {
        spec.kind = DenoiserKind::identity;
    } else if (method == "lowpass" || method == "lpf") {
        spec.kind = DenoiserKind::lowpass;
    } else if (method == "wiener") {
        spec.kind = DenoiserKind::wiener;
    } else if (method == "vstnlm" || method == "vst_nlm") {
        spec.kind = DenoiserKind::vst_nlm;
    } else if (method == "external") {
        spec.kind = DenoiserKind::external;
    } else {
        throw ParameterError("unknown denoiser '" + std::string(method) + "'");
    }
    for (const auto& a : assignments) {
        const auto eq = a.find('=');
        if (eq == std::string::npos || eq == 0) {
            throw ParameterError("expected key=value, got '" + a + "'");
        }
        spec.parameters[a.substr(0, eq)] = a.substr(eq + 1);
    }
    spec.validate();
    return spec;
}

double DenoiserSpec::number(const std::string& key, double fallback) const {
    const auto it = parameters.find(key);
    return it == parameters.end() ? fallback : parse_number(key, it->second);
}

std::string DenoiserSpec::text(const std::string& key, const std::string& fallback) const {
    const auto it = parameters.find(key);
    return it == parameters.end() ? fallback : it->second;
}

void DenoiserSpec::validate() const {
    const auto allowed = allowed_keys(kind);
    for (const auto& [key, value] : parameters) {
        if (!allowed.contains(key)) {
            throw ParameterError("parameter '" + key + "' is not valid for " + std::string(to_string(kind)));
        }
        if (key != "command" && !(parse_number(key, value) > 0.0)) {
            throw ParameterError("parameter '" + key + "' must be positive");
        }
    }
    switch (kind) {
        case DenoiserKind::lowpass:
            if (number("cutoff", 0.25) > 1.0) throw ParameterError("lowpass cutoff must lie in (0, 1]");
            break;
        case DenoiserKind::wiener:
            if (number("radius", 13) != std::floor(number("radius", 13)))
                throw ParameterError("wiener radius must be an integer");
            break;
        case DenoiserKind::vst_nlm:
            if (odd_int(*this, "patch", 7) > odd_int(*this, "window", 21))
                throw ParameterError("nlm patch must not exceed the window");
            break;
        case DenoiserKind::external: {
            const auto cmd = text("command");
            if (cmd.empty()) throw ParameterError("external denoiser needs a command");
            break;
        }
        case DenoiserKind::identity: break;
    }
}

std::string DenoiserSpec::label() const {
    std::string out(to_string(kind));
    if (kind == DenoiserKind::external) {
        return out + ":" + text("command");
    }
    if (!parameters.empty()) {
        out += "(";
        bool first = true;
        for (const auto& [k, v] : parameters) {
            if (!first) out += ",";
            out += k + "=" + v;
            first = false;
        }
        out += ")";
    }
    return out;
}

DenoiserFn make_denoiser(const DenoiserSpec& spec) {
    spec.validate();
    switch (spec.kind) {
        case DenoiserKind::identity:
            return [](const Image& img) { return img; };
        case DenoiserKind::lowpass: {
            const double cutoff = spec.number("cutoff", 0.25);
            return [cutoff](const Image& img) { return lowpass(img, cutoff); };
        }
        case DenoiserKind::wiener: {
            const int radius = static_cast<int>(spec.number("radius", 13));
            return [radius](const Image& img) { return wiener_adaptive(img, radius); };
        }
        case DenoiserKind::vst_nlm: {
            const VstNlmConfig cfg{odd_int(spec, "patch", 7), odd_int(spec, "window", 21), spec.number("strength", 0.4)};
            return [cfg](const Image& img) { return vst_nlm(img, cfg); };
        }
        case DenoiserKind::external: {
            const std::string command = spec.text("command");
            const auto timeout = std::chrono::milliseconds(static_cast<long long>(spec.number("timeout", 300) * 1000.0));
            return [command, timeout](const Image& img) { return external_denoise(img, command, timeout); };
        }
    }
    throw ParameterError("unhandled denoiser kind");
}

// ---------------------------------------------------------------------------
// tiling

void TilingSpec::validate() const {
    if (tile == 0) throw ParameterError("tile size must be positive");
    if (overlap >= tile) throw ParameterError("tile overlap must be smaller than the tile");
}

std::vector<std::size_t> tile_origins(std::size_t extent, const TilingSpec& tiling) {
    tiling.validate();
    if (extent <= tiling.tile) return {0};
    const std::size_t stride = tiling.tile - tiling.overlap;
    std::vector<std::size_t> origins;
    for (std::size_t o = 0; o + tiling.tile < extent; o += stride) origins.push_back(o);
    const std::size_t last = extent - tiling.tile;
    if (origins.empty() || origins.back() != last) origins.push_back(last);
    return origins;
}

Image denoise_tiled(const Image& img, const DenoiserFn& denoiser, const TilingSpec& tiling, std::size_t max_threads) {
    tiling.validate();
    const auto xs = tile_origins(img.width(), tiling);
    const auto ys = tile_origins(img.height(), tiling);
    const std::size_t tw = std::min(tiling.tile, img.width());
    const std::size_t th = std::min(tiling.tile, img.height());

    if (xs.size() == 1 && ys.size() == 1) {
        Image out = denoiser(img);
        require_same_shape(img, out, "denoiser output");
        return out;
    }

    struct Tile {
        std::size_t x0, y0;
        Image result;
    };
    std::vector<Tile> tiles;
    for (std::size_t y0 : ys)
        for (std::size_t x0 : xs) tiles.push_back({x0, y0, {}});

    parallel_for(
        tiles.size(),
        [&](std::size_t t) {
            Image patch(tw, th, 0.0, img.pixel_size());
            for (std::size_t y = 0; y < th; ++y)
                for (std::size_t x = 0; x < tw; ++x) patch(x, y) = img(tiles[t].x0 + x, tiles[t].y0 + y);
            tiles[t].result = denoiser(patch);
            require_same_shape(patch, tiles[t].result, "denoiser tile output");
        },
        max_threads);

    // Running mean in fixed tile order: independent of scheduling, and equal
    // tile values average back to themselves exactly.
    std::vector<double> mean(img.size(), 0.0);
    std::vector<unsigned> count(img.size(), 0);
    for (const auto& tile : tiles) {
        for (std::size_t y = 0; y < th; ++y) {
            for (std::size_t x = 0; x < tw; ++x) {
                const std::size_t i = (tile.y0 + y) * img.width() + tile.x0 + x;
                mean[i] += (tile.result(x, y) - mean[i]) / ++count[i];
            }
        }
    }
    return Image(img.width(), img.height(), std::move(mean), img.pixel_size());
}

Image denoise_tiled(const Image& img, const DenoiserSpec& spec, const TilingSpec& tiling) {
    const std::size_t threads = spec.kind == DenoiserKind::external ? 4 : default_concurrency();
    return denoise_tiled(img, make_denoiser(spec), tiling, threads);
}

}  // namespace sbd
