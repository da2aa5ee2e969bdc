#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "spatialid/attention.hpp"
#include "spatialid/core.hpp"
#include "spatialid/injector.hpp"
#include "spatialid/scheduler.hpp"

/// Synthetic denoising-trajectory harness. Plants a known face region with a
/// controllable face/background response-norm ratio, runs the full mask
/// schedule over a T-step trajectory, and reports per-step localization and
/// energy metrics against the uniform-injection baseline.
namespace spatialid {

using Microseconds = std::chrono::duration<double, std::micro>;

/// A planted ground-truth scenario. The face region is a set of flat patch
/// indices; rows inside it get response norms face_norm_ratio times the
/// background. Noise is additive isotropic Gaussian on features with
/// per-coordinate std noise_scale * t * base_norm / sqrt(feature_dim), so
/// early steps (t near 1) are noise-dominated and late steps are sharp.
struct SyntheticScenario {
    PatchGrid grid;
    std::vector<std::size_t> face_region;  // sorted, unique
    double face_norm_ratio = 4.0;
    double base_norm = 1.0;
    double noise_scale = 1.0;
    std::size_t feature_dim = 64;
    std::uint64_t seed = 1;

    SyntheticScenario(PatchGrid g, std::vector<std::size_t> face)
        : grid(g), face_region(std::move(face)) {
        std::sort(face_region.begin(), face_region.end());
        face_region.erase(std::unique(face_region.begin(), face_region.end()), face_region.end());
        if (face_region.empty()) {
            throw std::invalid_argument("SyntheticScenario: face region must be non-empty");
        }
        if (face_region.back() >= grid.patch_count()) {
            throw std::invalid_argument("SyntheticScenario: face region outside grid");
        }
    }

    void validate() const {
        if (!(face_norm_ratio >= 1.0)) {
            throw std::invalid_argument("SyntheticScenario: face_norm_ratio must be >= 1");
        }
        if (!(base_norm > 0.0)) throw std::invalid_argument("SyntheticScenario: base_norm must be > 0");
        if (!(noise_scale >= 0.0)) {
            throw std::invalid_argument("SyntheticScenario: noise_scale must be >= 0");
        }
        if (feature_dim < 1) throw std::invalid_argument("SyntheticScenario: feature_dim must be >= 1");
    }

    std::vector<std::size_t> background_region() const {
        std::vector<std::size_t> bg;
        bg.reserve(grid.patch_count() - face_region.size());
        std::size_t next_face = 0;
        for (std::size_t i = 0; i < grid.patch_count(); ++i) {
            if (next_face < face_region.size() && face_region[next_face] == i) {
                ++next_face;
            } else {
                bg.push_back(i);
            }
        }
        return bg;
    }
};

/// Cells (r, c) with ((r-cr)/ra)^2 + ((c-cc)/rb)^2 <= 1, as flat indices.
inline std::vector<std::size_t> ellipse_region(const PatchGrid& grid, double center_row,
                                               double center_col, double radius_row,
                                               double radius_col) {
    if (!(radius_row > 0.0 && radius_col > 0.0)) {
        throw std::invalid_argument("ellipse_region: radii must be > 0");
    }
    std::vector<std::size_t> cells;
    for (std::size_t r = 0; r < grid.height; ++r) {
        for (std::size_t c = 0; c < grid.width; ++c) {
            const double dr = (static_cast<double>(r) - center_row) / radius_row;
            const double dc = (static_cast<double>(c) - center_col) / radius_col;
            if (dr * dr + dc * dc <= 1.0) cells.push_back(r * grid.width + c);
        }
    }
    if (cells.empty()) throw std::invalid_argument("ellipse_region: region is empty");
    return cells;
}

/// Default face shape: the axis-aligned ellipse inscribed in the central
/// third of the grid, centered at (h/2, w/2) like the center prior
/// (21 cells on a 16x16 grid).
inline std::vector<std::size_t> central_ellipse_region(const PatchGrid& grid) {
    const double h = static_cast<double>(grid.height);
    const double w = static_cast<double>(grid.width);
    return ellipse_region(grid, h / 2.0, w / 2.0, h / 6.0, w / 6.0);
}

/// Region grown by a square structuring element of the given radius,
/// matching the grayscale mask dilation.
inline std::vector<std::size_t> dilate_region(const PatchGrid& grid,
                                              const std::vector<std::size_t>& region, int radius) {
    if (radius < 0) throw std::invalid_argument("dilate_region: radius must be >= 0");
    std::vector<char> hit(grid.patch_count(), 0);
    for (std::size_t idx : region) {
        const auto [r, c] = grid.coords_of(idx);
        const auto rr0 = static_cast<std::ptrdiff_t>(r) - radius;
        const auto cc0 = static_cast<std::ptrdiff_t>(c) - radius;
        for (std::ptrdiff_t rr = rr0; rr <= rr0 + 2 * radius; ++rr) {
            if (rr < 0 || rr >= static_cast<std::ptrdiff_t>(grid.height)) continue;
            for (std::ptrdiff_t cc = cc0; cc <= cc0 + 2 * radius; ++cc) {
                if (cc < 0 || cc >= static_cast<std::ptrdiff_t>(grid.width)) continue;
                hit[static_cast<std::size_t>(rr) * grid.width + static_cast<std::size_t>(cc)] = 1;
            }
        }
    }
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < hit.size(); ++i) {
        if (hit[i]) out.push_back(i);
    }
    return out;
}

/// Synthetic per-step attention output. Each patch row is a random unit
/// direction scaled to its target norm plus the t-scaled Gaussian noise.
/// Consumes the generator sequentially; identical (scenario, t, rng state)
/// give identical outputs.
inline AttentionOutput synth_attention_output(const SyntheticScenario& scn, double t, Rng& rng) {
    scn.validate();
    if (!(t > 0.0 && t <= 1.0)) {
        throw std::invalid_argument("synth_attention_output: t outside (0, 1]");
    }
    const std::size_t n = scn.grid.patch_count();
    const std::size_t d = scn.feature_dim;
    const double noise_std =
        scn.noise_scale * t * scn.base_norm / std::sqrt(static_cast<double>(d));

    std::vector<char> is_face(n, 0);
    for (std::size_t idx : scn.face_region) is_face[idx] = 1;

    Matrix out(n, d);
    std::vector<double> direction(d);
    for (std::size_t i = 0; i < n; ++i) {
        double norm_sq = 0.0;
        for (std::size_t j = 0; j < d; ++j) {
            direction[j] = rng.normal();
            norm_sq += direction[j] * direction[j];
        }
        // Degenerate all-zero draw is vanishingly unlikely; fall back to e_0.
        double inv_norm;
        if (norm_sq > 0.0) {
            inv_norm = 1.0 / std::sqrt(norm_sq);
        } else {
            direction[0] = 1.0;
            inv_norm = 1.0;
        }
        const double target = scn.base_norm * (is_face[i] ? scn.face_norm_ratio : 1.0);
        for (std::size_t j = 0; j < d; ++j) {
            out(i, j) = target * (direction[j] * inv_norm) + noise_std * rng.normal();
        }
    }
    return AttentionOutput(scn.grid, std::move(out));
}

/// Intersection-over-union of the mask binarized at `threshold` (strictly
/// greater) against a ground-truth index set. Both-empty counts as 1.
inline double mask_iou(const SpatialMask& mask, const std::vector<std::size_t>& truth,
                       double threshold) {
    if (!(threshold > 0.0 && threshold < 1.0)) {
        throw std::invalid_argument("mask_iou: threshold outside (0, 1)");
    }
    const std::size_t n = mask.grid().patch_count();
    std::vector<char> in_truth(n, 0);
    for (std::size_t idx : truth) {
        if (idx >= n) throw std::out_of_range("mask_iou: truth index outside grid");
        in_truth[idx] = 1;
    }
    std::size_t intersection = 0;
    std::size_t uni = 0;
    for (std::size_t i = 0; i < n; ++i) {
        const bool pred = mask[i] > threshold;
        if (pred && in_truth[i]) ++intersection;
        if (pred || in_truth[i]) ++uni;
    }
    if (uni == 0) return 1.0;
    return static_cast<double>(intersection) / static_cast<double>(uni);
}

/// Per-step metrics. Energy ratios compare the scheduled mask against the
/// all-ones (uniform) baseline on the same attention output, so alpha
/// cancels. Timing covers schedule_mask and the masked injection.
struct StepRecord {
    int step_index = 0;
    double t = 0.0;
    Phase phase = Phase::Early;
    double mask_iou = 0.0;
    double contamination_ratio = 0.0;  // background energy, spatial / uniform
    double face_energy_ratio = 0.0;    // face energy, spatial / uniform
    Microseconds wall_time_mask{0.0};
    Microseconds wall_time_injection{0.0};
};

struct PhaseSummary {
    std::size_t count = 0;
    double mean_iou = 0.0;
    double mean_contamination_ratio = 0.0;
    double mean_face_energy_ratio = 0.0;
};

struct TrajectorySummary {
    PhaseSummary early;
    PhaseSummary mid;
    PhaseSummary late;

    const PhaseSummary& of(Phase p) const noexcept {
        switch (p) {
            case Phase::Early: return early;
            case Phase::Mid: return mid;
            default: return late;
        }
    }
};

struct TrajectoryReport {
    SyntheticScenario scenario;
    ScheduleConfig config;
    std::vector<StepRecord> steps;
    TrajectorySummary summary;
};

namespace detail {

/// One fully expanded per-step sample: the record, the scheduled mask and
/// the raw region energies behind the ratios.
struct StepData {
    StepRecord record;
    SpatialMask mask;
    double face_energy_uniform = 0.0;
    double face_energy_spatial = 0.0;
    double background_energy_uniform = 0.0;
    double background_energy_spatial = 0.0;
};

inline double ratio_or_one(double numerator, double denominator) {
    // Zero denominator means zero norms in the region, so the spatial
    // numerator is zero as well; treat as a self-comparison.
    if (denominator == 0.0) return 1.0;
    return numerator / denominator;
}

/// Shared trajectory loop. Deterministic given (scenario, config): the
/// scenario RNG is consumed in a fixed order (hidden states first, then one
/// attention output per step), independent of the schedule config.
inline std::vector<StepData> simulate_trajectory(const SyntheticScenario& scn,
                                                 const ScheduleConfig& cfg) {
    scn.validate();
    cfg.validate();
    using clock = std::chrono::steady_clock;

    Rng rng(scn.seed);
    Matrix h0(scn.grid.patch_count(), scn.feature_dim);
    for (double& v : h0.values()) v = rng.normal();
    const HiddenStates hidden(scn.grid, std::move(h0));

    const std::vector<std::size_t> face = scn.face_region;
    const std::vector<std::size_t> background = scn.background_region();
    const std::vector<std::size_t> truth = dilate_region(scn.grid, face, cfg.dilation_radius);
    const SpatialMask uniform_mask = SpatialMask::constant(scn.grid, 1.0);

    std::vector<StepData> steps;
    steps.reserve(static_cast<std::size_t>(cfg.total_steps));
    for (int k = 0; k < cfg.total_steps; ++k) {
        const double t = normalized_timestep(k, cfg.total_steps);
        const AttentionOutput o = synth_attention_output(scn, t, rng);

        const auto mask_begin = clock::now();
        SpatialMask mask = schedule_mask(t, o, cfg);
        const auto mask_end = clock::now();

        const auto inject_begin = clock::now();
        const HiddenStates masked = inject_masked(hidden, o, mask, cfg.alpha);
        const auto inject_end = clock::now();
        const HiddenStates uniform = inject_uniform(hidden, o, cfg.alpha);
        volatile double sink = masked.data(0, 0) + uniform.data(0, 0);
        (void)sink;

        StepData data{StepRecord{}, std::move(mask)};
        data.face_energy_spatial = injection_energy(o, data.mask, cfg.alpha, face);
        data.face_energy_uniform = injection_energy(o, uniform_mask, cfg.alpha, face);
        data.background_energy_spatial = injection_energy(o, data.mask, cfg.alpha, background);
        data.background_energy_uniform = injection_energy(o, uniform_mask, cfg.alpha, background);

        StepRecord& rec = data.record;
        rec.step_index = k;
        rec.t = t;
        rec.phase = phase_of(t, cfg);
        rec.mask_iou = mask_iou(data.mask, truth, 0.5);
        rec.contamination_ratio =
            ratio_or_one(data.background_energy_spatial, data.background_energy_uniform);
        rec.face_energy_ratio = ratio_or_one(data.face_energy_spatial, data.face_energy_uniform);
        rec.wall_time_mask = std::chrono::duration_cast<Microseconds>(mask_end - mask_begin);
        rec.wall_time_injection =
            std::chrono::duration_cast<Microseconds>(inject_end - inject_begin);
        steps.push_back(std::move(data));
    }
    return steps;
}

inline TrajectorySummary summarize(const std::vector<StepData>& steps) {
    TrajectorySummary summary;
    auto accumulate = [](PhaseSummary& s, const StepRecord& rec) {
        ++s.count;
        s.mean_iou += rec.mask_iou;
        s.mean_contamination_ratio += rec.contamination_ratio;
        s.mean_face_energy_ratio += rec.face_energy_ratio;
    };
    for (const StepData& data : steps) {
        switch (data.record.phase) {
            case Phase::Early: accumulate(summary.early, data.record); break;
            case Phase::Mid: accumulate(summary.mid, data.record); break;
            case Phase::Late: accumulate(summary.late, data.record); break;
        }
    }
    for (PhaseSummary* s : {&summary.early, &summary.mid, &summary.late}) {
        if (s->count > 0) {
            const double n = static_cast<double>(s->count);
            s->mean_iou /= n;
            s->mean_contamination_ratio /= n;
            s->mean_face_energy_ratio /= n;
        }
    }
    return summary;
}

}  // namespace detail

/// Runs the full T-step schedule against the synthetic scenario.
inline TrajectoryReport run_trajectory(const SyntheticScenario& scn, const ScheduleConfig& cfg) {
    std::vector<detail::StepData> steps = detail::simulate_trajectory(scn, cfg);
    TrajectoryReport report{scn, cfg, {}, detail::summarize(steps)};
    report.steps.reserve(steps.size());
    for (const detail::StepData& data : steps) report.steps.push_back(data.record);
    return report;
}

/// Paired per-step energies: scheduled mask vs the all-ones baseline on the
/// same attention outputs.
struct ComparisonStep {
    int step_index = 0;
    double t = 0.0;
    Phase phase = Phase::Early;
    double face_energy_uniform = 0.0;
    double face_energy_spatial = 0.0;
    double background_energy_uniform = 0.0;
    double background_energy_spatial = 0.0;
    double contamination_ratio = 0.0;
    double face_energy_ratio = 0.0;
};

struct ComparisonRecord {
    std::vector<ComparisonStep> steps;
    double mean_contamination_ratio = 0.0;      // over all steps
    double mean_face_energy_ratio = 0.0;        // over all steps
    double mean_mid_contamination_ratio = 0.0;  // over mid-phase steps
    double mean_mid_face_energy_ratio = 0.0;    // over mid-phase steps
};

inline ComparisonRecord compare_uniform_vs_spatial(const SyntheticScenario& scn,
                                                   const ScheduleConfig& cfg) {
    std::vector<detail::StepData> steps = detail::simulate_trajectory(scn, cfg);
    ComparisonRecord record;
    record.steps.reserve(steps.size());
    std::size_t mid_count = 0;
    for (const detail::StepData& data : steps) {
        ComparisonStep cs;
        cs.step_index = data.record.step_index;
        cs.t = data.record.t;
        cs.phase = data.record.phase;
        cs.face_energy_uniform = data.face_energy_uniform;
        cs.face_energy_spatial = data.face_energy_spatial;
        cs.background_energy_uniform = data.background_energy_uniform;
        cs.background_energy_spatial = data.background_energy_spatial;
        cs.contamination_ratio = data.record.contamination_ratio;
        cs.face_energy_ratio = data.record.face_energy_ratio;
        record.steps.push_back(cs);

        record.mean_contamination_ratio += cs.contamination_ratio;
        record.mean_face_energy_ratio += cs.face_energy_ratio;
        if (cs.phase == Phase::Mid) {
            ++mid_count;
            record.mean_mid_contamination_ratio += cs.contamination_ratio;
            record.mean_mid_face_energy_ratio += cs.face_energy_ratio;
        }
    }
    if (!record.steps.empty()) {
        record.mean_contamination_ratio /= static_cast<double>(record.steps.size());
        record.mean_face_energy_ratio /= static_cast<double>(record.steps.size());
    }
    if (mid_count > 0) {
        record.mean_mid_contamination_ratio /= static_cast<double>(mid_count);
        record.mean_mid_face_energy_ratio /= static_cast<double>(mid_count);
    }
    return record;
}

}  // namespace spatialid
