#pragma once

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include "spatialid/core.hpp"
#include "spatialid/mask_extractor.hpp"

/// Temporal-spatial scheduling: picks the mask form per denoising phase.
/// Early (t > t_early): center Gaussian prior, attention ignored.
/// Mid (t_late < t <= t_early): attention-derived refined mask.
/// Late (t <= t_late): mid mask lifted by the f_late floor.
/// A nonzero global_floor composes after phase dispatch, in every phase.
namespace spatialid {

enum class Phase { Early, Mid, Late };

inline const char* phase_name(Phase p) noexcept {
    switch (p) {
        case Phase::Early: return "early";
        case Phase::Mid: return "mid";
        case Phase::Late: return "late";
    }
    return "?";
}

/// Phase selection with the exact boundary inclusivities: t == t_early is
/// Mid, t == t_late is Late.
inline Phase phase_of(double t, const ScheduleConfig& cfg) {
    if (!(t > 0.0 && t <= 1.0)) {
        throw std::invalid_argument("phase_of: t = " + std::to_string(t) + " outside (0, 1]");
    }
    if (t > cfg.t_early) return Phase::Early;
    if (t > cfg.t_late) return Phase::Mid;
    return Phase::Late;
}

/// Radial Gaussian proxy mask: exp(-(d_r^2 + d_c^2) / (2 sigma_c^2 max(h,w)^2)).
/// symmetric_center puts the peak at the exact grid center ((h-1)/2, (w-1)/2);
/// otherwise the center is (h/2, w/2), which is half a cell off on even grids.
inline SpatialMask center_gaussian_prior(const PatchGrid& grid, double sigma_c,
                                         bool symmetric_center) {
    if (!(sigma_c > 0.0)) throw std::invalid_argument("center_gaussian_prior: sigma_c must be > 0");
    const double h = static_cast<double>(grid.height);
    const double w = static_cast<double>(grid.width);
    const double center_row = symmetric_center ? (h - 1.0) / 2.0 : h / 2.0;
    const double center_col = symmetric_center ? (w - 1.0) / 2.0 : w / 2.0;
    const double side = std::max(h, w);
    const double denom = 2.0 * sigma_c * sigma_c * side * side;

    std::vector<double> values(grid.patch_count());
    for (std::size_t r = 0; r < grid.height; ++r) {
        const double dr = static_cast<double>(r) - center_row;
        for (std::size_t c = 0; c < grid.width; ++c) {
            const double dc = static_cast<double>(c) - center_col;
            values[r * grid.width + c] = std::exp(-(dr * dr + dc * dc) / denom);
        }
    }
    return SpatialMask::clamped(grid, std::move(values));
}

/// Late relaxation: f_late + (1 - f_late) * m. Every cell ends up >= f_late
/// and cells already at 1 stay at 1.
inline SpatialMask relax_late(const SpatialMask& mid_mask, double f_late) {
    if (!(f_late >= 0.0 && f_late <= 1.0)) {
        throw std::invalid_argument("relax_late: f_late must be in [0, 1]");
    }
    std::vector<double> out(mid_mask.values().size());
    for (std::size_t i = 0; i < out.size(); ++i) {
        out[i] = f_late + (1.0 - f_late) * mid_mask[i];
    }
    return SpatialMask::clamped(mid_mask.grid(), std::move(out));
}

/// Same affine lift as relax_late, applied to the schedule output in every
/// phase. floor = 0 is the identity, floor = 1 yields the all-ones mask.
inline SpatialMask apply_global_floor(const SpatialMask& mask, double floor) {
    if (!(floor >= 0.0 && floor <= 1.0)) {
        throw std::invalid_argument("apply_global_floor: floor must be in [0, 1]");
    }
    std::vector<double> out(mask.values().size());
    for (std::size_t i = 0; i < out.size(); ++i) {
        out[i] = floor + (1.0 - floor) * mask[i];
    }
    return SpatialMask::clamped(mask.grid(), std::move(out));
}

/// The complete per-step mask M_t.
inline SpatialMask schedule_mask(double t, const AttentionOutput& o, const ScheduleConfig& cfg) {
    cfg.validate();
    const Phase phase = phase_of(t, cfg);
    SpatialMask mask = [&] {
        switch (phase) {
            case Phase::Early:
                return center_gaussian_prior(o.grid, cfg.sigma_c, cfg.symmetric_center);
            case Phase::Mid:
                return extract_mask(o, cfg);
            case Phase::Late:
            default:
                return relax_late(extract_mask(o, cfg), cfg.f_late);
        }
    }();
    return apply_global_floor(mask, cfg.global_floor);
}

}  // namespace spatialid
