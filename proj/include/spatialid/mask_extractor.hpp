#pragma once

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

#include "spatialid/attention.hpp"
#include "spatialid/core.hpp"

/// Spatial mask extraction: per-patch L2 response norms, min-max
/// normalization, then the three-step refinement (Gaussian blur, soft-hard
/// combination, grayscale dilation). Every stage maps [0,1] grids to [0,1]
/// grids; no renormalization happens between stages.
namespace spatialid {

/// Raw per-patch response norms and their min-max normalization.
struct RelevanceMap {
    PatchGrid grid;
    std::vector<double> raw_norms;   // row-major, >= 0
    std::vector<double> normalized;  // row-major, in [0, 1]
};

/// Per-patch L2 norm of the attention output, min-max normalized onto [0, 1].
/// When every norm is equal (max == min) there is no spatial signal; the
/// normalized map falls back to all ones so injection degrades to uniform.
inline RelevanceMap l2_relevance(const AttentionOutput& o) {
    const std::size_t n = o.grid.patch_count();
    std::vector<double> raw(n);
    for (std::size_t i = 0; i < n; ++i) raw[i] = row_l2_norm(o.data, i);

    const auto [lo_it, hi_it] = std::minmax_element(raw.begin(), raw.end());
    const double lo = *lo_it;
    const double hi = *hi_it;

    std::vector<double> normalized(n);
    if (hi == lo) {
        std::fill(normalized.begin(), normalized.end(), 1.0);
    } else {
        const double range = hi - lo;
        for (std::size_t i = 0; i < n; ++i) normalized[i] = (raw[i] - lo) / range;
    }
    return RelevanceMap{o.grid, std::move(raw), std::move(normalized)};
}

/// Normalized 1D Gaussian kernel; entries sum to 1.
inline std::vector<double> gaussian_kernel_1d(int kernel_size, double sigma) {
    if (kernel_size < 1 || kernel_size % 2 == 0) {
        throw std::invalid_argument("gaussian_kernel_1d: kernel size must be odd and positive");
    }
    if (!(sigma > 0.0)) throw std::invalid_argument("gaussian_kernel_1d: sigma must be > 0");
    const int radius = kernel_size / 2;
    std::vector<double> k(static_cast<std::size_t>(kernel_size));
    double sum = 0.0;
    for (int i = -radius; i <= radius; ++i) {
        const double v = std::exp(-(static_cast<double>(i) * i) / (2.0 * sigma * sigma));
        k[static_cast<std::size_t>(i + radius)] = v;
        sum += v;
    }
    for (double& v : k) v /= sum;
    return k;
}

/// Gaussian smoothing with edge replication. Implemented separably (row pass
/// then column pass), which with replicated borders equals the full 2D
/// convolution because the row and column clamps are independent.
inline SpatialMask gaussian_blur(const SpatialMask& mask, int kernel_size, double sigma) {
    const std::vector<double> kernel = gaussian_kernel_1d(kernel_size, sigma);
    const int radius = kernel_size / 2;
    const auto h = static_cast<std::ptrdiff_t>(mask.grid().height);
    const auto w = static_cast<std::ptrdiff_t>(mask.grid().width);
    const std::vector<double>& in = mask.values();

    auto clamp_idx = [](std::ptrdiff_t i, std::ptrdiff_t n) {
        return i < 0 ? 0 : (i >= n ? n - 1 : i);
    };

    std::vector<double> horiz(in.size());
    for (std::ptrdiff_t r = 0; r < h; ++r) {
        for (std::ptrdiff_t c = 0; c < w; ++c) {
            double acc = 0.0;
            for (int t = -radius; t <= radius; ++t) {
                acc += kernel[static_cast<std::size_t>(t + radius)] *
                       in[static_cast<std::size_t>(r * w + clamp_idx(c + t, w))];
            }
            horiz[static_cast<std::size_t>(r * w + c)] = acc;
        }
    }

    std::vector<double> out(in.size());
    for (std::ptrdiff_t r = 0; r < h; ++r) {
        for (std::ptrdiff_t c = 0; c < w; ++c) {
            double acc = 0.0;
            for (int t = -radius; t <= radius; ++t) {
                acc += kernel[static_cast<std::size_t>(t + radius)] *
                       horiz[static_cast<std::size_t>(clamp_idx(r + t, h) * w + c)];
            }
            out[static_cast<std::size_t>(r * w + c)] = acc;
        }
    }
    return SpatialMask::clamped(mask.grid(), std::move(out));
}

/// Elementwise beta * m + (1 - beta) * 1[m > tau], strict inequality.
inline SpatialMask soft_hard_combine(const SpatialMask& mask, double beta, double tau) {
    if (!(beta >= 0.0 && beta <= 1.0)) {
        throw std::invalid_argument("soft_hard_combine: beta must be in [0, 1]");
    }
    if (!(tau >= 0.0 && tau <= 1.0)) {
        throw std::invalid_argument("soft_hard_combine: tau must be in [0, 1]");
    }
    std::vector<double> out(mask.values().size());
    for (std::size_t i = 0; i < out.size(); ++i) {
        const double m = mask[i];
        const double hard = m > tau ? 1.0 : 0.0;
        out[i] = beta * m + (1.0 - beta) * hard;
    }
    return SpatialMask::clamped(mask.grid(), std::move(out));
}

/// Grayscale dilation: max over the (2r+1)x(2r+1) neighborhood, truncated at
/// the grid border. Radius 0 is the identity.
inline SpatialMask dilate(const SpatialMask& mask, int radius) {
    if (radius < 0) throw std::invalid_argument("dilate: radius must be >= 0");
    if (radius == 0) return mask;
    const auto h = static_cast<std::ptrdiff_t>(mask.grid().height);
    const auto w = static_cast<std::ptrdiff_t>(mask.grid().width);
    const std::vector<double>& in = mask.values();
    std::vector<double> out(in.size());
    for (std::ptrdiff_t r = 0; r < h; ++r) {
        for (std::ptrdiff_t c = 0; c < w; ++c) {
            double best = 0.0;
            const std::ptrdiff_t r0 = std::max<std::ptrdiff_t>(0, r - radius);
            const std::ptrdiff_t r1 = std::min<std::ptrdiff_t>(h - 1, r + radius);
            const std::ptrdiff_t c0 = std::max<std::ptrdiff_t>(0, c - radius);
            const std::ptrdiff_t c1 = std::min<std::ptrdiff_t>(w - 1, c + radius);
            for (std::ptrdiff_t rr = r0; rr <= r1; ++rr) {
                for (std::ptrdiff_t cc = c0; cc <= c1; ++cc) {
                    best = std::max(best, in[static_cast<std::size_t>(rr * w + cc)]);
                }
            }
            out[static_cast<std::size_t>(r * w + c)] = best;
        }
    }
    return SpatialMask(mask.grid(), std::move(out));
}

/// Full extraction pipeline: L2 relevance -> blur -> soft-hard -> dilate.
/// The result is the mid-phase mask.
inline SpatialMask extract_mask(const AttentionOutput& o, const ScheduleConfig& cfg) {
    cfg.validate();
    RelevanceMap relevance = l2_relevance(o);
    SpatialMask mask = SpatialMask::clamped(o.grid, std::move(relevance.normalized));
    mask = gaussian_blur(mask, cfg.blur_kernel_size, cfg.blur_sigma);
    mask = soft_hard_combine(mask, cfg.beta, cfg.tau);
    return dilate(mask, cfg.dilation_radius);
}

}  // namespace spatialid
