#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

#include "spatialid/attention.hpp"

using namespace spatialid;

namespace {

Matrix random_matrix(Rng& rng, std::size_t rows, std::size_t cols, double scale = 1.0) {
    Matrix m(rows, cols);
    for (double& v : m.values()) v = rng.uniform(-scale, scale);
    return m;
}

}  // namespace

TEST_CASE("init_params is deterministic per seed and respects the scale bound") {
    const auto a = init_params(7, 64, 128, 32);
    const auto b = init_params(7, 64, 128, 32);
    CHECK(a.w_q == b.w_q);
    CHECK(a.w_k == b.w_k);
    CHECK(a.w_v == b.w_v);

    const auto c = init_params(8, 64, 128, 32);
    CHECK(a.w_q != c.w_q);

    const double bound = 1.0 / std::sqrt(32.0);
    for (const Matrix* m : {&a.w_q, &a.w_k, &a.w_v}) {
        for (double v : m->values()) {
            CHECK(std::abs(v) <= bound);
        }
    }
    CHECK_THROWS_AS(init_params(1, 0, 128, 32), std::invalid_argument);
}

TEST_CASE("softmax_row matches closed forms and is numerically stable") {
    const auto uniform = softmax_row({0.0, 0.0, 0.0});
    for (double v : uniform) CHECK_THAT(v, Catch::Matchers::WithinAbs(1.0 / 3.0, 1e-12));

    const auto huge = softmax_row({1000.0, 1000.0});
    CHECK_THAT(huge[0], Catch::Matchers::WithinAbs(0.5, 1e-12));
    CHECK_THAT(huge[1], Catch::Matchers::WithinAbs(0.5, 1e-12));

    const auto closed = softmax_row({0.0, std::log(3.0)});
    CHECK_THAT(closed[0], Catch::Matchers::WithinAbs(0.25, 1e-12));
    CHECK_THAT(closed[1], Catch::Matchers::WithinAbs(0.75, 1e-12));

    CHECK_THROWS_AS(softmax_row({}), std::invalid_argument);
}

TEST_CASE("softmax rows sum to one and are shift invariant") {
    Rng rng(99);
    for (int trial = 0; trial < 200; ++trial) {
        const std::size_t n = 1 + rng.next_u64() % 12;
        std::vector<double> logits(n);
        for (double& v : logits) v = rng.uniform(-50.0, 50.0);

        const auto probs = softmax_row(logits);
        double sum = 0.0;
        for (double p : probs) sum += p;
        CHECK_THAT(sum, Catch::Matchers::WithinAbs(1.0, 1e-6));

        const double shift = rng.uniform(-100.0, 100.0);
        std::vector<double> shifted = logits;
        for (double& v : shifted) v += shift;
        const auto probs_shifted = softmax_row(shifted);
        for (std::size_t i = 0; i < n; ++i) {
            CHECK_THAT(probs_shifted[i], Catch::Matchers::WithinAbs(probs[i], 1e-9));
        }

        // Order preservation.
        for (std::size_t i = 0; i + 1 < n; ++i) {
            if (logits[i] < logits[i + 1]) CHECK(probs[i] <= probs[i + 1]);
            if (logits[i] > logits[i + 1]) CHECK(probs[i] >= probs[i + 1]);
        }
    }
}

TEST_CASE("single-token attention copies the value projection exactly") {
    Rng rng(5);
    const PatchGrid grid(3, 3);
    const HiddenStates h(grid, random_matrix(rng, grid.patch_count(), 16));
    const IdentityTokens z(random_matrix(rng, 1, 24));
    const auto params = init_params(11, 16, 24, 8);

    const AttentionOutput out = cross_attention(h, z, params);
    const Matrix v = detail::matmul(z.data, params.w_v);
    for (std::size_t i = 0; i < grid.patch_count(); ++i) {
        for (std::size_t d = 0; d < 16; ++d) {
            CHECK(out.data(i, d) == v(0, d));
        }
    }
}

TEST_CASE("attention outputs stay in the convex hull of the value rows") {
    Rng rng(31);
    for (int trial = 0; trial < 20; ++trial) {
        const std::size_t dim = 4 + rng.next_u64() % 12;
        const std::size_t tokens = 2 + rng.next_u64() % 6;
        const std::size_t token_dim = 4 + rng.next_u64() % 12;
        const PatchGrid grid(2 + rng.next_u64() % 3, 2 + rng.next_u64() % 3);

        const HiddenStates h(grid, random_matrix(rng, grid.patch_count(), dim, 2.0));
        const IdentityTokens z(random_matrix(rng, tokens, token_dim, 2.0));
        const auto params = init_params(rng.next_u64(), dim, token_dim, 8);
        const AttentionOutput out = cross_attention(h, z, params);

        const Matrix v = detail::matmul(z.data, params.w_v);
        for (std::size_t d = 0; d < dim; ++d) {
            double lo = v(0, d), hi = v(0, d);
            for (std::size_t k = 1; k < tokens; ++k) {
                lo = std::min(lo, v(k, d));
                hi = std::max(hi, v(k, d));
            }
            for (std::size_t i = 0; i < grid.patch_count(); ++i) {
                CHECK(out.data(i, d) >= lo - 1e-6);
                CHECK(out.data(i, d) <= hi + 1e-6);
            }
        }
    }
}

TEST_CASE("cross_attention rejects inconsistent shapes") {
    Rng rng(77);
    const PatchGrid grid(2, 2);
    const HiddenStates h(grid, random_matrix(rng, 4, 16));
    const IdentityTokens z(random_matrix(rng, 4, 24));

    const auto wrong_feature = init_params(1, 17, 24, 8);
    CHECK_THROWS_AS(cross_attention(h, z, wrong_feature), std::invalid_argument);

    const auto wrong_token = init_params(1, 16, 23, 8);
    CHECK_THROWS_AS(cross_attention(h, z, wrong_token), std::invalid_argument);
}

TEST_CASE("attention output type validates rows against the grid") {
    CHECK_THROWS_AS(AttentionOutput(PatchGrid(2, 2), Matrix(3, 4, 0.0)), std::invalid_argument);
    Matrix bad(4, 4, 0.0);
    bad(0, 0) = std::numeric_limits<double>::quiet_NaN();
    CHECK_THROWS_AS(AttentionOutput(PatchGrid(2, 2), std::move(bad)), std::invalid_argument);
}
