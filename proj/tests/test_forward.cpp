#include <cmath>
#include <filesystem>

#include "civs/container.hpp"
#include "civs/forward_model.hpp"
#include "civs/rng.hpp"

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

std::vector<std::vector<RealStack>> random_kernel_grid(int K, int S,
                                                       uint64_t seed) {
    Rng rng(seed);
    std::vector<std::vector<RealStack>> grid(K);
    for (int k = 0; k < K; ++k)
        for (int s = 0; s < S; ++s) {
            const int sup = 1 + 2 * rng.uniform_int(0, 2);  // 1, 3 or 5
            RealStack h(sup, sup, 1);
            for (double& v : h.v) v = rng.gaussian();
            grid[k].push_back(std::move(h));
        }
    return grid;
}

}  // namespace

TEST_CASE("make_psf basics") {
    PsfSpec g;
    g.kind = PsfSpec::Kind::Gaussian;
    g.sigma_px = 1.2;
    g.support = 9;
    const RealStack kg = make_psf(g);
    double sum = 0;
    for (double v : kg.v) sum += v;
    CHECK(sum == doctest::Approx(1.0).epsilon(1e-12));
    // symmetric about the center
    CHECK(kg.at(3, 4, 0) == doctest::Approx(kg.at(5, 4, 0)).epsilon(1e-12));
    CHECK(kg.at(4, 3, 0) == doctest::Approx(kg.at(4, 5, 0)).epsilon(1e-12));

    PsfSpec tiny = g;
    tiny.sigma_px = 0.1;  // collapses to a delta
    tiny.support = 5;
    const RealStack kd = make_psf(tiny);
    CHECK(kd.at(2, 2, 0) == doctest::Approx(1.0));

    PsfSpec d;
    d.kind = PsfSpec::Kind::Delta;
    d.support = 1;
    d.weight = 2.5;
    const RealStack kdel = make_psf(d);
    CHECK(kdel.at(0, 0, 0) == doctest::Approx(2.5));

    PsfSpec disk;
    disk.kind = PsfSpec::Kind::DiskDefocus;
    disk.radius_px = 2.0;
    disk.support = 7;
    const RealStack kdsk = make_psf(disk);
    double dsum = 0;
    for (double v : kdsk.v) dsum += v;
    CHECK(dsum == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(kdsk.at(3, 3, 0) > kdsk.at(0, 0, 0));

    PsfSpec bad = g;
    bad.support = 0;
    CHECK_THROWS_AS(make_psf(bad), InvalidArgument);
    bad = g;
    bad.sigma_px = -1;
    CHECK_THROWS_AS(make_psf(bad), InvalidArgument);
}

TEST_CASE("embed_kernel places the center at the origin") {
    RealStack delta(1, 1, 1);
    delta.at(0, 0, 0) = 1.0;
    const RealStack e1 = embed_kernel(delta, 8);
    CHECK(e1.at(0, 0, 0) == 1.0);
    CHECK(norm2_sq(e1) == doctest::Approx(1.0));

    RealStack k3(3, 3, 1);
    for (int i = 0; i < 9; ++i) k3.v[i] = i + 1;
    const RealStack e3 = embed_kernel(k3, 8);
    // center tap (1,1) -> (0,0); tap (0,0) -> (-1,-1) wraps to (7,7)
    CHECK(e3.at(0, 0, 0) == doctest::Approx(5.0));
    CHECK(e3.at(7, 7, 0) == doctest::Approx(1.0));
    CHECK(e3.at(0, 7, 0) == doctest::Approx(4.0));
    CHECK(e3.at(1, 1, 0) == doctest::Approx(9.0));
}

TEST_CASE("delta bank has unit spectra and identity action") {
    RealStack delta(1, 1, 1);
    delta.at(0, 0, 0) = 1.0;
    std::vector<std::vector<RealStack>> grid{{delta}};
    BlurBank bank(grid, 16);
    const ComplexStack& spec = bank.spectrum(0, 0);
    for (const auto& v : spec.v) CHECK(std::abs(v - 1.0) < 1e-12);

    const RealStack x = random_stack(16, 16, 1, 5);
    const RealStack y = apply_forward(bank, x);
    for (size_t i = 0; i < x.size(); ++i)
        CHECK(y.v[i] == doctest::Approx(x.v[i]).epsilon(1e-12));
}

TEST_CASE("forward and adjoint match the dense spatial oracle") {
    const int n = 12, K = 2, S = 3;
    auto grid = random_kernel_grid(K, S, 11);
    BlurBank bank(grid, n);

    const RealStack x = random_stack(n, n, S, 12);
    const RealStack y = apply_forward(bank, x);
    const RealStack y_ref = oracle::dense_forward(grid, x);
    for (size_t i = 0; i < y.size(); ++i)
        CHECK(y.v[i] == doctest::Approx(y_ref.v[i]).epsilon(1e-10));

    const RealStack z = random_stack(n, n, K, 13);
    const RealStack a = apply_adjoint(bank, z);
    const RealStack a_ref = oracle::dense_adjoint(grid, z);
    for (size_t i = 0; i < a.size(); ++i)
        CHECK(a.v[i] == doctest::Approx(a_ref.v[i]).epsilon(1e-10));
}

TEST_CASE("forward/adjoint inner-product identity") {
    Rng rng(21);
    for (int trial = 0; trial < 25; ++trial) {
        const int n = 8 + 4 * rng.uniform_int(0, 2);
        const int K = 1 + rng.uniform_int(0, 2);
        const int S = 1 + rng.uniform_int(0, 2);
        auto grid = random_kernel_grid(K, S, 100 + trial);
        BlurBank bank(grid, n);
        const RealStack x = random_stack(n, n, S, 200 + trial);
        const RealStack y = random_stack(n, n, K, 300 + trial);
        const double lhs = dot(apply_forward(bank, x), y);
        const double rhs = dot(x, apply_adjoint(bank, y));
        CHECK(std::abs(lhs - rhs) < 1e-10 * (1.0 + std::abs(lhs)));
    }
}

TEST_CASE("noiseless simulation is exactly the forward model") {
    auto grid = random_kernel_grid(2, 2, 31);
    BlurBank bank(grid, 16);
    const RealStack x = random_stack(16, 16, 2, 32);
    NoiseSpec noise;  // snr_db stays +inf
    const SimulationResult sim = simulate_measurements(bank, x, noise);
    const RealStack clean = apply_forward(bank, x);
    CHECK(sim.y.v == clean.v);  // bit-for-bit
    for (double s : sim.sigma) CHECK(s == 0.0);
}

TEST_CASE("noisy simulation hits the target snr") {
    auto grid = random_kernel_grid(3, 2, 41);
    BlurBank bank(grid, 32);
    const RealStack x = random_stack(32, 32, 2, 42);
    NoiseSpec noise;
    noise.snr_db = 20.0;
    noise.seed = 7;
    const SimulationResult sim = simulate_measurements(bank, x, noise);
    const RealStack clean = apply_forward(bank, x);
    for (int k = 0; k < 3; ++k) {
        double sig = 0, err = 0;
        for (size_t i = 0; i < clean.slice_size(); ++i) {
            sig += clean.slice(k)[i] * clean.slice(k)[i];
            const double d = sim.y.slice(k)[i] - clean.slice(k)[i];
            err += d * d;
        }
        const double realized = 10.0 * std::log10(sig / err);
        CHECK(std::abs(realized - 20.0) < 0.5);
    }

    // determinism: same seed, same noise
    const SimulationResult again = simulate_measurements(bank, x, noise);
    CHECK(again.y.v == sim.y.v);

    // global mode shares one sigma
    NoiseSpec global = noise;
    global.per_measurement = false;
    const SimulationResult g = simulate_measurements(bank, x, global);
    CHECK(g.sigma[0] == g.sigma[1]);
    CHECK(g.sigma[1] == g.sigma[2]);
}

TEST_CASE("zero signal with finite snr is degenerate") {
    auto grid = random_kernel_grid(1, 1, 51);
    BlurBank bank(grid, 8);
    RealStack x(8, 8, 1);  // zeros
    NoiseSpec noise;
    noise.snr_db = 30.0;
    CHECK_THROWS_AS(simulate_measurements(bank, x, noise), DegenerateSignalError);
}

TEST_CASE("bank serialization round trip") {
    namespace fs = std::filesystem;
    auto grid = random_kernel_grid(2, 3, 61);
    BlurBank bank(grid, 16);
    const fs::path dir = fs::temp_directory_path() / "civs_bank_rt";
    fs::remove_all(dir);
    save_bank(bank, dir.string());
    const BlurBank back = load_bank(dir.string());
    CHECK(back.K() == bank.K());
    CHECK(back.S() == bank.S());
    CHECK(back.n() == bank.n());
    CHECK(back.content_hash() == bank.content_hash());
    for (int k = 0; k < 2; ++k)
        for (int s = 0; s < 3; ++s) {
            const ComplexStack& a = bank.spectrum(k, s);
            const ComplexStack& b = back.spectrum(k, s);
            for (size_t i = 0; i < a.size(); ++i)
                CHECK(std::abs(a.v[i] - b.v[i]) < 1e-14);
        }
    fs::remove_all(dir);
}

TEST_CASE("kernels must fit the grid") {
    RealStack big(9, 9, 1);
    big.at(4, 4, 0) = 1.0;
    std::vector<std::vector<RealStack>> grid{{big}};
    CHECK_THROWS_AS(BlurBank(grid, 8), DimensionError);
}
