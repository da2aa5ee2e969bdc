#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "spatialid/core.hpp"

/// Minimal single-head cross-attention: enough to produce a per-patch
/// identity response with realistic norm structure. No output projection,
/// no multi-head splitting, no caching.
namespace spatialid {

struct CrossAttentionParams {
    Matrix w_q;  // feature_dim x head_dim
    Matrix w_k;  // token_dim x head_dim
    Matrix w_v;  // token_dim x feature_dim
    std::size_t head_dim;

    CrossAttentionParams(Matrix q, Matrix k, Matrix v)
        : w_q(std::move(q)), w_k(std::move(k)), w_v(std::move(v)), head_dim(w_q.cols()) {
        if (w_q.cols() != w_k.cols()) {
            throw std::invalid_argument("CrossAttentionParams: w_q and w_k head dims differ");
        }
        if (w_k.rows() != w_v.rows()) {
            throw std::invalid_argument("CrossAttentionParams: w_k and w_v token dims differ");
        }
        if (head_dim < 1) throw std::invalid_argument("CrossAttentionParams: head_dim must be >= 1");
        if (!w_q.all_finite() || !w_k.all_finite() || !w_v.all_finite()) {
            throw std::invalid_argument("CrossAttentionParams: non-finite weight");
        }
    }
};

/// The per-patch cross-attention response (patch_count x dim).
struct AttentionOutput {
    PatchGrid grid;
    std::size_t dim;
    Matrix data;

    AttentionOutput(PatchGrid g, Matrix values)
        : grid(g), dim(values.cols()), data(std::move(values)) {
        if (data.rows() != grid.patch_count()) {
            throw std::invalid_argument("AttentionOutput: " + std::to_string(data.rows()) +
                                        " rows for a grid of " +
                                        std::to_string(grid.patch_count()) + " patches");
        }
        if (dim < 1) throw std::invalid_argument("AttentionOutput: feature dimension must be >= 1");
        if (!data.all_finite()) throw std::invalid_argument("AttentionOutput: non-finite entry");
    }
};

/// Seeded weight init: i.i.d. uniform on [-1/sqrt(head_dim), +1/sqrt(head_dim)],
/// filled in w_q, w_k, w_v order, each row-major.
inline CrossAttentionParams init_params(std::uint64_t seed, std::size_t feature_dim,
                                        std::size_t token_dim, std::size_t head_dim) {
    if (feature_dim < 1 || token_dim < 1 || head_dim < 1) {
        throw std::invalid_argument("init_params: all dimensions must be >= 1");
    }
    Rng rng(seed);
    const double bound = 1.0 / std::sqrt(static_cast<double>(head_dim));
    auto fill = [&](std::size_t rows, std::size_t cols) {
        Matrix m(rows, cols);
        for (double& v : m.values()) v = rng.uniform(-bound, bound);
        return m;
    };
    Matrix w_q = fill(feature_dim, head_dim);
    Matrix w_k = fill(token_dim, head_dim);
    Matrix w_v = fill(token_dim, feature_dim);
    return CrossAttentionParams(std::move(w_q), std::move(w_k), std::move(w_v));
}

/// Numerically stable softmax (max-subtracted). Output sums to 1.
inline std::vector<double> softmax_row(const std::vector<double>& logits) {
    if (logits.empty()) throw std::invalid_argument("softmax_row: empty input");
    double max_logit = logits[0];
    for (double v : logits) {
        if (!std::isfinite(v)) throw std::invalid_argument("softmax_row: non-finite logit");
        max_logit = std::max(max_logit, v);
    }
    std::vector<double> out(logits.size());
    double sum = 0.0;
    for (std::size_t i = 0; i < logits.size(); ++i) {
        out[i] = std::exp(logits[i] - max_logit);
        sum += out[i];
    }
    for (double& v : out) v /= sum;
    return out;
}

namespace detail {

inline Matrix matmul(const Matrix& a, const Matrix& b) {
    Matrix out(a.rows(), b.cols(), 0.0);
    for (std::size_t i = 0; i < a.rows(); ++i) {
        for (std::size_t k = 0; k < a.cols(); ++k) {
            const double aik = a(i, k);
            for (std::size_t j = 0; j < b.cols(); ++j) {
                out(i, j) += aik * b(k, j);
            }
        }
    }
    return out;
}

}  // namespace detail

/// o = softmax(Q K^T / sqrt(d_k)) V with Q = h w_q, K = z w_k, V = z w_v.
/// Each output row is a convex combination of V's rows.
inline AttentionOutput cross_attention(const HiddenStates& h, const IdentityTokens& z,
                                       const CrossAttentionParams& p) {
    if (h.dim != p.w_q.rows()) {
        throw std::invalid_argument("cross_attention: hidden dim " + std::to_string(h.dim) +
                                    " != w_q rows " + std::to_string(p.w_q.rows()));
    }
    if (z.token_dim != p.w_k.rows()) {
        throw std::invalid_argument("cross_attention: token dim " + std::to_string(z.token_dim) +
                                    " != w_k rows " + std::to_string(p.w_k.rows()));
    }
    if (p.w_v.cols() != h.dim) {
        throw std::invalid_argument("cross_attention: w_v cols " + std::to_string(p.w_v.cols()) +
                                    " != hidden dim " + std::to_string(h.dim));
    }

    const Matrix q = detail::matmul(h.data, p.w_q);   // N x d_k
    const Matrix k = detail::matmul(z.data, p.w_k);   // M x d_k
    const Matrix v = detail::matmul(z.data, p.w_v);   // M x D
    const double scale = 1.0 / std::sqrt(static_cast<double>(p.head_dim));

    const std::size_t n = q.rows();
    const std::size_t m = k.rows();
    Matrix out(n, h.dim, 0.0);
    std::vector<double> logits(m);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < m; ++j) {
            double dot = 0.0;
            for (std::size_t d = 0; d < q.cols(); ++d) dot += q(i, d) * k(j, d);
            logits[j] = dot * scale;
        }
        const std::vector<double> weights = softmax_row(logits);
        for (std::size_t j = 0; j < m; ++j) {
            const double w = weights[j];
            for (std::size_t d = 0; d < h.dim; ++d) out(i, d) += w * v(j, d);
        }
    }
    return AttentionOutput(h.grid, std::move(out));
}

}  // namespace spatialid
