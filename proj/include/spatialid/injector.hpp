#pragma once

#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>

#include "spatialid/attention.hpp"
#include "spatialid/core.hpp"

/// Residual identity injection. The uniform form adds alpha * o to every
/// patch; the masked form scales each patch's full feature row by that
/// patch's mask value. With an all-ones mask the two are bit-identical:
/// both compute h + alpha * (m * o) with m = 1.
namespace spatialid {

namespace detail {

inline void require_same_shape(const HiddenStates& h, const AttentionOutput& o) {
    if (h.grid != o.grid) throw std::invalid_argument("inject: grid mismatch");
    if (h.dim != o.dim) {
        throw std::invalid_argument("inject: feature dim " + std::to_string(h.dim) +
                                    " != " + std::to_string(o.dim));
    }
}

}  // namespace detail

inline HiddenStates inject_uniform(const HiddenStates& h, const AttentionOutput& o, double alpha) {
    detail::require_same_shape(h, o);
    Matrix out = h.data;
    for (std::size_t i = 0; i < out.rows(); ++i) {
        for (std::size_t d = 0; d < out.cols(); ++d) {
            out(i, d) += alpha * o.data(i, d);
        }
    }
    return HiddenStates(h.grid, std::move(out));
}

inline HiddenStates inject_masked(const HiddenStates& h, const AttentionOutput& o,
                                  const SpatialMask& mask, double alpha) {
    detail::require_same_shape(h, o);
    if (mask.grid() != h.grid) throw std::invalid_argument("inject_masked: mask grid mismatch");
    Matrix out = h.data;
    for (std::size_t i = 0; i < out.rows(); ++i) {
        const double m = mask[i];
        for (std::size_t d = 0; d < out.cols(); ++d) {
            out(i, d) += alpha * (m * o.data(i, d));
        }
    }
    return HiddenStates(h.grid, std::move(out));
}

/// Injected identity energy restricted to a patch region:
/// sum over i in region of alpha * M_i * ||o_i||_2. With an all-ones mask
/// this is the uniform baseline's energy in that region.
inline double injection_energy(const AttentionOutput& o, const SpatialMask& mask, double alpha,
                               std::span<const std::size_t> region) {
    if (mask.grid() != o.grid) throw std::invalid_argument("injection_energy: mask grid mismatch");
    const std::size_t n = o.grid.patch_count();
    double total = 0.0;
    for (std::size_t idx : region) {
        if (idx >= n) {
            throw std::out_of_range("injection_energy: patch index " + std::to_string(idx) +
                                    " outside " + std::to_string(n) + " patches");
        }
        total += alpha * (mask[idx] * row_l2_norm(o.data, idx));
    }
    return total;
}

}  // namespace spatialid
