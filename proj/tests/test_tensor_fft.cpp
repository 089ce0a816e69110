#include <algorithm>
#include <atomic>
#include <vector>

#include "civs/fft.hpp"
#include "civs/rng.hpp"
#include "civs/tensor.hpp"
#include "civs/threading.hpp"

#include "doctest.h"
#include "oracles.hpp"

using namespace civs;

namespace {

RealStack random_stack(int rows, int cols, int depth, uint64_t seed) {
    Rng rng(seed);
    RealStack x(rows, cols, depth);
    for (double& v : x.v) v = rng.gaussian();
    return x;
}

}  // namespace

TEST_CASE("stack layout and validation") {
    RealStack x(3, 4, 2);
    CHECK(x.size() == 24);
    x.at(1, 2, 1) = 7.0;
    CHECK(x.v[(1 * 3 + 1) * 4 + 2] == 7.0);
    CHECK(x.slice(1)[1 * 4 + 2] == 7.0);
    CHECK_THROWS_AS(RealStack(0, 4, 2), DimensionError);
    CHECK_THROWS_AS(RealStack(3, -1, 2), DimensionError);

    RealStack y(3, 4, 2), z(4, 3, 2);
    CHECK(x.same_shape(y));
    CHECK_FALSE(x.same_shape(z));
    CHECK_THROWS_AS(require_same_shape(x, z, "test"), DimensionError);
}

TEST_CASE("elementwise helpers") {
    RealStack a = random_stack(4, 4, 2, 1);
    RealStack b = random_stack(4, 4, 2, 2);

    double want = 0;
    for (size_t i = 0; i < a.size(); ++i) want += a.v[i] * b.v[i];
    CHECK(dot(a, b) == doctest::Approx(want).epsilon(1e-14));
    CHECK(norm2_sq(a) == doctest::Approx(dot(a, a)).epsilon(1e-14));
    CHECK(norm2(a) == doctest::Approx(std::sqrt(dot(a, a))).epsilon(1e-14));

    RealStack c = add_scaled(a, -2.5, b);
    for (size_t i = 0; i < a.size(); ++i)
        CHECK(c.v[i] == doctest::Approx(a.v[i] - 2.5 * b.v[i]).epsilon(1e-15));

    CHECK(all_finite(a));
    RealStack bad = a;
    bad.v[3] = std::nan("");
    CHECK_FALSE(all_finite(bad));
}

TEST_CASE("parallel_for covers every index exactly once") {
    for (int threads : {1, 3, 8}) {
        set_num_threads(threads);
        std::vector<std::atomic<int>> hits(100);
        parallel_for(100, [&](int i) { hits[i].fetch_add(1); });
        CHECK(std::all_of(hits.begin(), hits.end(),
                          [](const std::atomic<int>& h) { return h == 1; }));
    }
    set_num_threads(1);
}

TEST_CASE("rng streams are reproducible") {
    Rng a(42), b(42), c(43);
    bool same = true, differ = false;
    for (int i = 0; i < 100; ++i) {
        const double va = a.gaussian();
        same = same && va == b.gaussian();
        differ = differ || va != c.gaussian();
    }
    CHECK(same);
    CHECK(differ);
}

TEST_CASE("fft2 is unitary and matches the direct DFT") {
    const RealStack x = random_stack(6, 6, 2, 3);
    const ComplexStack f = fft2(x);

    // Parseval under the unitary normalization.
    double fe = 0;
    for (const auto& v : f.v) fe += std::norm(v);
    CHECK(fe == doctest::Approx(norm2_sq(x)).epsilon(1e-12));

    const ComplexStack direct = oracle::unitary_fft2_direct(x);
    for (size_t i = 0; i < f.size(); ++i)
        CHECK(std::abs(f.v[i] - direct.v[i]) < 1e-10);

    const RealStack back = ifft2_real(f);
    for (size_t i = 0; i < x.size(); ++i)
        CHECK(back.v[i] == doctest::Approx(x.v[i]).epsilon(1e-12));
}

TEST_CASE("depth and 3d transforms compose") {
    const RealStack x = random_stack(8, 8, 4, 4);

    ComplexStack via_stages = fft1_depth(fft2(x));
    ComplexStack full = fft3(x);
    for (size_t i = 0; i < full.size(); ++i)
        CHECK(std::abs(via_stages.v[i] - full.v[i]) < 1e-12);

    const RealStack back = ifft3_real(full);
    for (size_t i = 0; i < x.size(); ++i)
        CHECK(back.v[i] == doctest::Approx(x.v[i]).epsilon(1e-12));

    double fe = 0;
    for (const auto& v : full.v) fe += std::norm(v);
    CHECK(fe == doctest::Approx(norm2_sq(x)).epsilon(1e-12));
}

TEST_CASE("ifft2_real flags large imaginary residue") {
    ComplexStack f(4, 4, 1);
    f.at(1, 0, 0) = {0.0, 1.0};  // no conjugate partner -> imaginary output
    CHECK_THROWS_AS(ifft2_real(f), NumericError);
}

TEST_CASE("fft requires square slices") {
    RealStack x(4, 6, 1);
    CHECK_THROWS_AS(fft2(x), DimensionError);
}
