#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

/// Core value types shared by every module: patch-grid geometry, dense
/// matrices, spatial masks, scheduling configuration and the seeded RNG.
namespace spatialid {

/// Row-major dense matrix of doubles. Deliberately minimal: the shapes in
/// this library are small (a few thousand rows at most), so plain loops are
/// fast enough and keep the arithmetic order explicit.
class Matrix {
public:
    Matrix() = default;
    Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
        : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

    static Matrix from_rows(std::size_t rows, std::size_t cols, std::vector<double> values) {
        if (values.size() != rows * cols) {
            throw std::invalid_argument("Matrix: got " + std::to_string(values.size()) +
                                        " values for shape " + std::to_string(rows) + "x" +
                                        std::to_string(cols));
        }
        Matrix m;
        m.rows_ = rows;
        m.cols_ = cols;
        m.data_ = std::move(values);
        return m;
    }

    std::size_t rows() const noexcept { return rows_; }
    std::size_t cols() const noexcept { return cols_; }

    double& operator()(std::size_t r, std::size_t c) noexcept { return data_[r * cols_ + c]; }
    double operator()(std::size_t r, std::size_t c) const noexcept { return data_[r * cols_ + c]; }

    std::vector<double>& values() noexcept { return data_; }
    const std::vector<double>& values() const noexcept { return data_; }

    bool all_finite() const noexcept {
        for (double v : data_) {
            if (!std::isfinite(v)) return false;
        }
        return true;
    }

    bool operator==(const Matrix&) const = default;

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> data_;
};

/// Euclidean norm of one matrix row. Every norm in the library goes through
/// this helper so energy comparisons see identical values.
inline double row_l2_norm(const Matrix& m, std::size_t row) {
    double sum = 0.0;
    for (std::size_t c = 0; c < m.cols(); ++c) {
        const double v = m(row, c);
        sum += v * v;
    }
    return std::sqrt(sum);
}

/// Geometry of the h x w patch grid; maps flat row-major indices to (row, col).
struct PatchGrid {
    std::size_t height;
    std::size_t width;

    PatchGrid(std::size_t h, std::size_t w) : height(h), width(w) {
        if (h < 1 || w < 1) {
            throw std::invalid_argument("PatchGrid: dimensions must be >= 1");
        }
    }

    std::size_t patch_count() const noexcept { return height * width; }

    std::size_t index_of(std::size_t row, std::size_t col) const {
        if (row >= height || col >= width) {
            throw std::out_of_range("PatchGrid: (" + std::to_string(row) + ", " +
                                    std::to_string(col) + ") outside " + std::to_string(height) +
                                    "x" + std::to_string(width));
        }
        return row * width + col;
    }

    std::pair<std::size_t, std::size_t> coords_of(std::size_t index) const {
        if (index >= patch_count()) {
            throw std::out_of_range("PatchGrid: index " + std::to_string(index) + " outside " +
                                    std::to_string(patch_count()) + " patches");
        }
        return {index / width, index % width};
    }

    bool operator==(const PatchGrid&) const = default;
};

/// Per-patch hidden states: one feature row of dimension `dim` per patch.
struct HiddenStates {
    PatchGrid grid;
    std::size_t dim;
    Matrix data;

    HiddenStates(PatchGrid g, Matrix values) : grid(g), dim(values.cols()), data(std::move(values)) {
        if (data.rows() != grid.patch_count()) {
            throw std::invalid_argument("HiddenStates: " + std::to_string(data.rows()) +
                                        " rows for a grid of " + std::to_string(grid.patch_count()) +
                                        " patches");
        }
        if (dim < 1) throw std::invalid_argument("HiddenStates: feature dimension must be >= 1");
        if (!data.all_finite()) throw std::invalid_argument("HiddenStates: non-finite entry");
    }
};

/// Identity token matrix (token_count x token_dim).
struct IdentityTokens {
    static constexpr std::size_t kDefaultTokenCount = 32;
    static constexpr std::size_t kDefaultTokenDim = 2048;

    std::size_t token_count;
    std::size_t token_dim;
    Matrix data;

    explicit IdentityTokens(Matrix values)
        : token_count(values.rows()), token_dim(values.cols()), data(std::move(values)) {
        if (token_count < 1 || token_dim < 1) {
            throw std::invalid_argument("IdentityTokens: empty token matrix");
        }
        if (!data.all_finite()) throw std::invalid_argument("IdentityTokens: non-finite entry");
    }
};

/// h x w grid of injection weights. Invariant: every value is finite and in
/// [0, 1]. Transform stages rebuild masks through clamped() so the invariant
/// survives floating-point round-off.
class SpatialMask {
public:
    SpatialMask(PatchGrid grid, std::vector<double> values)
        : grid_(grid), values_(std::move(values)) {
        if (values_.size() != grid_.patch_count()) {
            throw std::invalid_argument("SpatialMask: " + std::to_string(values_.size()) +
                                        " values for a grid of " +
                                        std::to_string(grid_.patch_count()) + " patches");
        }
        for (double v : values_) {
            if (!std::isfinite(v)) throw std::invalid_argument("SpatialMask: non-finite value");
            if (v < 0.0 || v > 1.0) {
                throw std::invalid_argument("SpatialMask: value " + std::to_string(v) +
                                            " outside [0, 1]");
            }
        }
    }

    static SpatialMask constant(PatchGrid grid, double value) {
        return SpatialMask(grid, std::vector<double>(grid.patch_count(), value));
    }

    /// Clamps each value into [0, 1] before constructing. Non-finite values
    /// are still rejected.
    static SpatialMask clamped(PatchGrid grid, std::vector<double> values) {
        for (double& v : values) {
            if (!std::isfinite(v)) throw std::invalid_argument("SpatialMask: non-finite value");
            if (v < 0.0) v = 0.0;
            if (v > 1.0) v = 1.0;
        }
        return SpatialMask(grid, std::move(values));
    }

    const PatchGrid& grid() const noexcept { return grid_; }
    const std::vector<double>& values() const noexcept { return values_; }

    double at(std::size_t row, std::size_t col) const { return values_[grid_.index_of(row, col)]; }
    double operator[](std::size_t index) const noexcept { return values_[index]; }

    double min_value() const noexcept {
        double m = values_[0];
        for (double v : values_) m = std::min(m, v);
        return m;
    }
    double max_value() const noexcept {
        double m = values_[0];
        for (double v : values_) m = std::max(m, v);
        return m;
    }

    bool operator==(const SpatialMask&) const = default;

private:
    PatchGrid grid_;
    std::vector<double> values_;
};

/// All scheduling and refinement hyperparameters.
struct ScheduleConfig {
    double t_early = 0.7;        // early/mid phase boundary on normalized t
    double t_late = 0.3;         // mid/late phase boundary
    double f_late = 0.5;         // late-phase mask floor
    double sigma_c = 0.3;        // center prior spread
    double beta = 0.7;           // soft-hard combination weight
    double tau = 0.3;            // soft-hard binarization threshold
    int blur_kernel_size = 5;    // odd
    double blur_sigma = 1.5;
    int dilation_radius = 1;     // 1 = 3x3 structuring element
    double alpha = 1.0;          // injection weight
    double global_floor = 0.0;   // floor applied in every phase
    int total_steps = 25;
    bool symmetric_center = true;  // center prior at ((h-1)/2, (w-1)/2) instead of (h/2, w/2)

    void validate() const {
        if (!(t_early > 0.0 && t_early <= 1.0))
            throw std::invalid_argument("ScheduleConfig: t_early must be in (0, 1]");
        if (!(t_late >= 0.0 && t_late < t_early))
            throw std::invalid_argument("ScheduleConfig: t_late must be in [0, t_early)");
        if (!(f_late >= 0.0 && f_late <= 1.0))
            throw std::invalid_argument("ScheduleConfig: f_late must be in [0, 1]");
        if (!(sigma_c > 0.0)) throw std::invalid_argument("ScheduleConfig: sigma_c must be > 0");
        if (!(beta >= 0.0 && beta <= 1.0))
            throw std::invalid_argument("ScheduleConfig: beta must be in [0, 1]");
        if (!(tau >= 0.0 && tau <= 1.0))
            throw std::invalid_argument("ScheduleConfig: tau must be in [0, 1]");
        if (blur_kernel_size < 1 || blur_kernel_size % 2 == 0)
            throw std::invalid_argument("ScheduleConfig: blur_kernel_size must be odd and positive");
        if (!(blur_sigma > 0.0)) throw std::invalid_argument("ScheduleConfig: blur_sigma must be > 0");
        if (dilation_radius < 0)
            throw std::invalid_argument("ScheduleConfig: dilation_radius must be >= 0");
        if (!std::isfinite(alpha)) throw std::invalid_argument("ScheduleConfig: alpha must be finite");
        if (!(global_floor >= 0.0 && global_floor <= 1.0))
            throw std::invalid_argument("ScheduleConfig: global_floor must be in [0, 1]");
        if (total_steps < 1) throw std::invalid_argument("ScheduleConfig: total_steps must be >= 1");
    }
};

/// Deterministic 64-bit generator (SplitMix64). The output sequence, the
/// [0,1) mapping and the Box-Muller normal path are fixed; identical seeds
/// give identical sequences on every platform with IEEE-754 doubles and the
/// same libm. Not shared between threads: callers split() instead.
class Rng {
public:
    explicit Rng(std::uint64_t seed) noexcept : state_(seed) {}

    std::uint64_t next_u64() noexcept {
        std::uint64_t z = (state_ += 0x9E3779B97F4A7C15ull);
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
        return z ^ (z >> 31);
    }

    /// Uniform double in [0, 1), 53 random bits.
    double next_double() noexcept { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) noexcept { return lo + (hi - lo) * next_double(); }

    /// Standard normal via Box-Muller (cosine branch, two uniforms per draw).
    double normal() noexcept {
        const double u1 = 1.0 - next_double();  // (0, 1]
        const double u2 = next_double();
        constexpr double two_pi = 6.283185307179586476925286766559;
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(two_pi * u2);
    }

    /// Child generator seeded from this stream.
    Rng split() noexcept { return Rng(next_u64()); }

private:
    std::uint64_t state_;
};

/// Maps sampler step k in [0, total_steps) to normalized time t = 1 - k/T.
/// The first step is pure noise (t = 1); t decreases strictly toward 1/T.
inline double normalized_timestep(int step_index, int total_steps) {
    if (total_steps < 1) throw std::invalid_argument("normalized_timestep: total_steps must be >= 1");
    if (step_index < 0 || step_index >= total_steps) {
        throw std::out_of_range("normalized_timestep: step " + std::to_string(step_index) +
                                " outside [0, " + std::to_string(total_steps) + ")");
    }
    return 1.0 - static_cast<double>(step_index) / static_cast<double>(total_steps);
}

}  // namespace spatialid
