#pragma once

#include <chrono>
#include <functional>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "sbd/image.hpp"

namespace sbd {

// ---------------------------------------------------------------------------
// Classical baselines
// ---------------------------------------------------------------------------

/// Relative width of the raised-cosine transition band of lowpass().
inline constexpr double kLowpassRolloff = 0.1;

/// Radial value of the lowpass mask at normalised radius r (r = 1 at Nyquist).
double lowpass_mask(double r, double cutoff);

/// Radially symmetric Fourier lowpass. The mask is 1 up to cutoff*(1-t) of
/// Nyquist and falls to 0 at cutoff*(1+t) along a raised cosine (t = 0.1).
/// cutoff == 1 is the all-pass filter. Odd dimensions are padded to even by
/// replicating the last row/column before transforming.
Image lowpass(const Image& img, double cutoff = 0.25);

/// Lee-style adaptive Wiener filter with a Poisson noise model: the local
/// noise variance is taken equal to the local mean.
Image wiener_adaptive(const Image& img, int radius = 13);

/// Anscombe forward transform 2*sqrt(v + 3/8).
Image anscombe(const Image& img);
double anscombe(double v);

/// Closed-form approximation of the exact unbiased inverse of the Anscombe
/// transform, clamped at 0. It inverts E[anscombe(Y)] for Y ~ Poisson(v),
/// not anscombe(v) itself: anscombe -> inv_anscombe carries an O(1/4) offset.
Image inv_anscombe(const Image& img);
double inv_anscombe(double z);

/// Non-local means with a noise-floor-corrected patch distance:
/// w = exp(-max(d2 - 2*sigma^2, 0) / strength^2), d2 the mean squared patch
/// difference, patches replicate-padded at borders, candidates restricted to
/// in-image pixels of the search window. The centre pixel receives the largest
/// weight among its candidates.
Image nlm(const Image& img, int patch, int window, double strength, double noise_sigma = 1.0);

struct VstNlmConfig {
    int patch = 7;
    int window = 21;
    double strength = 0.4;
};

/// inv_anscombe(nlm(anscombe(img))).
Image vst_nlm(const Image& img, const VstNlmConfig& cfg = {});

// ---------------------------------------------------------------------------
// Denoiser specification and dispatch
// ---------------------------------------------------------------------------

enum class DenoiserKind { identity, lowpass, wiener, vst_nlm, external };

std::string_view to_string(DenoiserKind kind);

/// A denoiser by kind plus string-valued parameters:
///   lowpass:  cutoff (0.25)
///   wiener:   radius (13)
///   vst_nlm:  patch (7), window (21), strength (0.4)
///   external: command (required), timeout (300 s)
struct DenoiserSpec {
    DenoiserKind kind = DenoiserKind::identity;
    std::map<std::string, std::string> parameters;

    /// Parses a method name (identity|lowpass|wiener|vstnlm|external) plus
    /// "key=value" assignments. "external:<command>" is accepted as shorthand.
    static DenoiserSpec parse(std::string_view method, const std::vector<std::string>& assignments = {});

    /// Throws ParameterError on unknown keys, missing required keys or
    /// non-positive numeric values.
    void validate() const;

    double number(const std::string& key, double fallback) const;
    std::string text(const std::string& key, const std::string& fallback = {}) const;

    /// Stable label for reports, e.g. "vstnlm" or "lowpass(cutoff=0.3)".
    std::string label() const;
};

using DenoiserFn = std::function<Image(const Image&)>;

DenoiserFn make_denoiser(const DenoiserSpec& spec);

// ---------------------------------------------------------------------------
// Patch tiling
// ---------------------------------------------------------------------------

struct TilingSpec {
    std::size_t tile = 400;
    std::size_t overlap = 200;

    void validate() const;
};

/// Tile origins along one axis: stride (tile - overlap), last tile snapped to
/// the far edge. An axis shorter than the tile yields a single origin 0.
std::vector<std::size_t> tile_origins(std::size_t extent, const TilingSpec& tiling);

/// Denoises every tile independently and averages overlapping outputs with
/// equal weights. Tiles are processed on up to `max_threads` threads.
Image denoise_tiled(const Image& img, const DenoiserFn& denoiser, const TilingSpec& tiling,
                    std::size_t max_threads = 1);
Image denoise_tiled(const Image& img, const DenoiserSpec& spec, const TilingSpec& tiling);

// ---------------------------------------------------------------------------
// External denoiser protocol
// ---------------------------------------------------------------------------

/// Runs `command` through /bin/sh after substituting {in} and {out} with
/// temporary F32IMG paths; " {in} {out}" is appended when the command has
/// neither placeholder. Exit status 0 and an output of identical
/// dimensions are required. Errors: ExternalError (non-zero exit, carries
/// stderr), ProtocolError (bad output), TimeoutError.
Image external_denoise(const Image& img, const std::string& command,
                       std::chrono::milliseconds timeout = std::chrono::seconds(300));

}  // namespace sbd
