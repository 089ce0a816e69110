#include <algorithm>
#include <cmath>
#include <cstring>
#include <string>
#include <vector>

#include "civs/admm.hpp"
#include "civs/fft.hpp"
#include "civs/metrics.hpp"
#include "civs/phantom.hpp"
#include "civs/rng.hpp"
#include "civs/threading.hpp"

#include "doctest.h"
#include "json.hpp"

using namespace civs;

namespace {

BlurBank delta_bank(int k, int s, int n) {
    RealStack delta(1, 1, 1);
    delta.at(0, 0, 0) = 1.0;
    std::vector<std::vector<RealStack>> kernels(k);
    for (int i = 0; i < k; ++i) kernels[i] = std::vector<RealStack>(s, delta);
    return BlurBank(std::move(kernels), n);
}

BlurBank gaussian_bank(int k, int s, int n, double base_sigma) {
    std::vector<std::vector<RealStack>> kernels(k);
    for (int i = 0; i < k; ++i)
        for (int j = 0; j < s; ++j) {
            PsfSpec spec;
            spec.kind = PsfSpec::Kind::Gaussian;
            spec.sigma_px = base_sigma + 0.4 * i + 0.25 * j;
            spec.support = 9;
            kernels[i].push_back(make_psf(spec));
        }
    return BlurBank(std::move(kernels), n);
}

}  // namespace

TEST_CASE("adapt_penalty covers all three branches") {
    CHECK(adapt_penalty(1.0, 20.0, 1.0) == doctest::Approx(2.0));   // grow
    CHECK(adapt_penalty(1.0, 1.0, 20.0) == doctest::Approx(0.5));   // shrink
    CHECK(adapt_penalty(1.0, 5.0, 1.0) == doctest::Approx(1.0));    // hold
    CHECK(adapt_penalty(3.0, 1.0, 1.0, 4.0, 2.0) == doctest::Approx(3.0));
    CHECK(adapt_penalty(3.0, 9.0, 1.0, 4.0, 2.0) == doctest::Approx(12.0));
    CHECK_THROWS_AS(adapt_penalty(0.0, 1.0, 1.0), InvalidArgument);
    CHECK_THROWS_AS(adapt_penalty(1.0, 1.0, 1.0, 1.0), InvalidArgument);
    CHECK_THROWS_AS(adapt_penalty(1.0, 1.0, 1.0, 2.0, 1.0), InvalidArgument);
}

TEST_CASE("stopping criterion never fires from a zero iterate") {
    CHECK(stopping_criterion(1e-6, 1.0, 1e-4));
    CHECK_FALSE(stopping_criterion(1e-2, 1.0, 1e-4));
    CHECK_FALSE(stopping_criterion(0.0, 0.0, 1e-4));
    CHECK_FALSE(stopping_criterion(1e-20, 0.0, 1e-4));
}

TEST_CASE("solver config is validated before any work") {
    const int n = 8, S = 1;
    const BlurBank bank = delta_bank(1, S, n);
    const RealStack y = apply_forward(bank, make_phantom(n, S, 9));
    auto run = [&](SolverConfig cfg) {
        run_analysis(y, bank, TransformOracle(), PriorKind::L1Transform, cfg);
    };
    SolverConfig ok;
    SolverConfig bad = ok;
    bad.beta = 0.0;
    CHECK_THROWS_AS(run(bad), InvalidArgument);
    bad = ok;
    bad.lambda = -1.0;
    CHECK_THROWS_AS(run(bad), InvalidArgument);
    bad = ok;
    bad.rho0 = 0.0;
    CHECK_THROWS_AS(run(bad), InvalidArgument);
    bad = ok;
    bad.sigma0 = -2.0;
    CHECK_THROWS_AS(run(bad), InvalidArgument);
    bad = ok;
    bad.max_iters = -1;
    CHECK_THROWS_AS(run(bad), InvalidArgument);
    bad = ok;
    bad.stop_tol = 0.0;
    CHECK_THROWS_AS(run(bad), InvalidArgument);
    bad = ok;
    bad.mu_tik = -0.5;
    CHECK_THROWS_AS(run(bad), InvalidArgument);
}

TEST_CASE("run report serialization") {
    RunReport rep;
    rep.iterations = 3;
    rep.converged = true;
    rep.final_primal = 1e-5;
    rep.final_dual = 2e-5;
    rep.psi_reinversions = 1;
    rep.rho_trajectory = {1.0, 1.0, 2.0};
    rep.objective_trajectory = {9.0, 4.0, 3.5};
    rep.iter_seconds = {0.01, 0.02, 0.015};

    const std::string a = run_report_json(rep, false);
    CHECK(a == run_report_json(rep, false));  // deterministic text
    auto ja = nlohmann::json::parse(a);
    CHECK(ja["iterations"] == 3);
    CHECK(ja["converged"] == true);
    CHECK(ja["psi_reinversions"] == 1);
    CHECK(ja["rho_trajectory"].size() == 3);
    CHECK_FALSE(ja.contains("iter_seconds"));
    CHECK_FALSE(ja.contains("sigma_trajectory"));  // empty trajectory stays out

    auto jb = nlohmann::json::parse(run_report_json(rep, true));
    CHECK(jb["iter_seconds"].size() == 3);

    rep.sigma_trajectory = {1.0, 0.5, 0.5};
    auto jc = nlohmann::json::parse(run_report_json(rep, false));
    CHECK(jc["sigma_trajectory"].size() == 3);

    const std::string csv = run_report_csv(rep);
    CHECK(csv.rfind("iter,rho,objective", 0) == 0);
    CHECK(std::count(csv.begin(), csv.end(), '\n') == 4);  // header + 3 rows
}

TEST_CASE("preset tables expose the published regimes") {
    const SolverConfig tv20 = preset_2d(PriorKind::Tv, 18.0);
    CHECK(tv20.lambda == doctest::Approx(1e-2));
    CHECK(tv20.beta == doctest::Approx(1.0));
    CHECK(tv20.rho0 == doctest::Approx(0.1));

    const SolverConfig l140 = preset_2d(PriorKind::L1Transform, 52.0);
    CHECK(l140.lambda == doctest::Approx(1e-4));

    const SolverConfig patch30 = preset_2d(PriorKind::PatchDict, 30.0);
    CHECK(patch30.lambda == doctest::Approx(0.05));
    CHECK(patch30.beta == doctest::Approx(500.0));
    CHECK(patch30.rho0 == doctest::Approx(1.0));

    const SolverConfig conv20 = preset_2d(PriorKind::ConvDict, 20.0);
    CHECK(conv20.beta == doctest::Approx(2.0));
    CHECK(conv20.rho0 == doctest::Approx(50.0 * conv20.lambda + 0.5));
    CHECK(conv20.mu_tik == doctest::Approx(0.01));

    const SolverConfig t3 = preset_3d(PriorKind::L1Transform, 30.0);
    CHECK(t3.lambda == doctest::Approx(0.1));
    CHECK(t3.rho0 == doctest::Approx(50.0));

    const SolverConfig p3 = preset_3d(PriorKind::PatchDict, 40.0);
    CHECK(p3.lambda == doctest::Approx(1e-4));
    CHECK(p3.beta == doctest::Approx(10.0));
    CHECK(p3.rho0 == doctest::Approx(1000.0));

    const SolverConfig c3 = preset_3d(PriorKind::ConvDict, 20.0);
    CHECK(c3.beta == doctest::Approx(0.01));
    CHECK(c3.mu_tik == doctest::Approx(0.1));
}

TEST_CASE("analysis solver recovers a well-posed measurement almost exactly") {
    const int n = 16, S = 2;
    const RealStack x = make_phantom(n, S, 42);

    // a mixed delta/gaussian grid with a down-weighted off-diagonal keeps
    // every per-bin 2x2 mixing matrix invertible (det = 1 - 0.6*g1*g2 >= 0.4);
    // an all-delta grid would collapse both measurements onto x_1 + x_2
    RealStack delta(1, 1, 1);
    delta.at(0, 0, 0) = 1.0;
    PsfSpec g1, g2;
    g1.kind = PsfSpec::Kind::Gaussian;
    g1.sigma_px = 1.0;
    g1.support = 9;
    g1.weight = 0.6;
    g2 = g1;
    g2.sigma_px = 1.6;
    g2.weight = 1.0;
    std::vector<std::vector<RealStack>> grid(2);
    grid[0] = {delta, make_psf(g1)};
    grid[1] = {make_psf(g2), delta};
    const BlurBank bank(std::move(grid), n);
    const RealStack y = apply_forward(bank, x);

    SolverConfig cfg;
    cfg.lambda = 1e-10;
    cfg.beta = 1.0;
    cfg.rho0 = 1e-9;
    cfg.max_iters = 30;
    cfg.stop_tol = 1e-12;
    const AnalysisResult res =
        run_analysis(y, bank, TransformOracle(), PriorKind::L1Transform, cfg);
    CHECK(res.report.iterations >= 1);
    CHECK(psnr(x, res.x) > 80.0);
}

TEST_CASE("augmented lagrangian decreases along the analysis iterations") {
    const int n = 16, S = 2;
    const RealStack x = make_phantom(n, S, 7);
    const BlurBank bank = gaussian_bank(2, S, n, 0.8);
    NoiseSpec noise;
    noise.snr_db = 30.0;
    noise.seed = 11;
    const RealStack y = simulate_measurements(bank, x, noise).y;

    SolverConfig cfg;
    cfg.lambda = 1e-3;
    cfg.rho0 = 1e-2;
    cfg.max_iters = 40;
    cfg.stop_tol = 1e-300;    // cannot fire: run all iterations
    cfg.adapt.enabled = false;  // fixed rho: the augmented objective is monotone-ish
    std::vector<double> aug, obj;
    const AnalysisResult res = run_analysis(
        y, bank, TransformOracle::from_config("dct2", n, S),
        PriorKind::L1Transform, cfg, [&](const IterationInfo& info) {
            aug.push_back(info.aug_lagrangian);
            obj.push_back(info.objective);
            CHECK(info.x != nullptr);
        });
    REQUIRE(aug.size() == 40);
    CHECK(aug.back() < aug.front());
    CHECK(obj.back() < obj.front());
    CHECK(res.report.objective_trajectory.size() == 40);
    CHECK(res.report.psi_reinversions == 0);  // adapt disabled
}

TEST_CASE("penalty adaptation re-inverts the analysis system") {
    const int n = 16, S = 2;
    const RealStack x = make_phantom(n, S, 7);
    const BlurBank bank = gaussian_bank(2, S, n, 0.8);
    const RealStack y = apply_forward(bank, x);

    SolverConfig cfg;
    cfg.lambda = 1e-3;
    cfg.rho0 = 1e3;  // far off balance: the controller must move
    cfg.max_iters = 30;
    cfg.stop_tol = 1e-300;  // run the whole budget
    std::vector<double> rhos;
    const AnalysisResult res =
        run_analysis(y, bank, TransformOracle(), PriorKind::Tv, cfg,
                     [&](const IterationInfo& info) { rhos.push_back(info.rho); });
    CHECK(res.report.psi_reinversions > 0);
    CHECK(res.report.rho_trajectory == rhos);
    bool moved = false;
    for (double r : rhos) moved = moved || r != 1e3;
    CHECK(moved);
}

TEST_CASE("synthesis keeps a single inversion even while rho adapts") {
    const int n = 16, S = 2;
    const RealStack x = make_phantom(n, S, 3);
    const BlurBank bank = gaussian_bank(2, S, n, 0.7);
    const RealStack y = apply_forward(bank, x);

    const PatchGeometry geom =
        PatchGeometry::make(4, 1, 1, PatchMode::PerSlice, true, n, S);
    const PatchDictionary dict =
        random_patch_dictionary(geom.patch_len(), geom.patch_len(), 5);

    SolverConfig cfg;
    cfg.lambda = 0.05;
    cfg.beta = 100.0;
    cfg.rho0 = 100.0;  // unbalanced on purpose
    cfg.max_iters = 12;
    cfg.stop_tol = 1e-300;  // run the whole budget
    const PatchSynthesisResult res = run_synthesis_patch(y, bank, dict, geom, cfg);
    CHECK(res.report.psi_reinversions == 0);
    bool moved = false;
    for (double r : res.report.rho_trajectory) moved = moved || r != 100.0;
    CHECK(moved);
    // static dictionary: sigma is reported but never adapted
    REQUIRE(res.report.sigma_trajectory.size() == 12);
    for (double s : res.report.sigma_trajectory) CHECK(s == cfg.sigma0);
    // the input is only re-projected onto the unit-Frobenius set
    CHECK((res.dict.D - dict.D).cwiseAbs().maxCoeff() < 1e-14);
    CHECK(res.dict.frob() == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("max_iters = 0 returns the zero stack without convergence") {
    const int n = 8, S = 2;
    const BlurBank bank = delta_bank(2, S, n);
    const RealStack y = apply_forward(bank, make_phantom(n, S, 1));

    SolverConfig cfg;
    cfg.max_iters = 0;
    const AnalysisResult res =
        run_analysis(y, bank, TransformOracle(), PriorKind::Tv, cfg);
    CHECK(res.report.iterations == 0);
    CHECK_FALSE(res.report.converged);
    for (double v : res.x.v) CHECK(v == 0.0);
}

TEST_CASE("divergence guard aborts an exploding run") {
    const int n = 8, S = 2;
    const BlurBank bank = delta_bank(2, S, n);
    const RealStack y = apply_forward(bank, make_phantom(n, S, 2));

    SolverConfig cfg;
    cfg.max_iters = 50;
    cfg.stop_tol = 1e-300;  // run the whole budget
    cfg.divergence_guard = 1e-12;  // any movement at all trips it
    CHECK_THROWS_AS(
        run_analysis(y, bank, TransformOracle(), PriorKind::Tv, cfg),
        DivergenceError);
}

TEST_CASE("tv prior rejects a non-identity transform") {
    const int n = 8, S = 2;
    const BlurBank bank = delta_bank(1, S, n);
    const RealStack y = apply_forward(bank, make_phantom(n, S, 2));
    SolverConfig cfg;
    CHECK_THROWS_AS(
        run_analysis(y, bank, TransformOracle::from_config("dct2", n, S),
                     PriorKind::Tv, cfg),
        InvalidArgument);
    CHECK_THROWS_AS(run_analysis(y, bank, TransformOracle(), PriorKind::PatchDict,
                                 cfg),
                    InvalidArgument);
}

TEST_CASE("synthesis rejects non-uniform patch coverage") {
    const int n = 8, S = 2;
    const BlurBank bank = delta_bank(1, S, n);
    const RealStack y = apply_forward(bank, make_phantom(n, S, 2));
    const PatchGeometry bad =
        PatchGeometry::make(3, 1, 2, PatchMode::PerSlice, false, n, S);
    const PatchDictionary dict = random_patch_dictionary(bad.patch_len(), 9, 1);
    SolverConfig cfg;
    CHECK_THROWS_AS(run_synthesis_patch(y, bank, dict, bad, cfg), InvalidArgument);
}

TEST_CASE("online dictionary runs keep the constraint sets and report sigma") {
    const int n = 16, S = 2;
    const RealStack x = make_phantom(n, S, 9);
    const BlurBank bank = gaussian_bank(2, S, n, 0.6);
    const RealStack y = apply_forward(bank, x);

    SolverConfig cfg;
    cfg.lambda = 0.05;
    cfg.beta = 100.0;
    cfg.rho0 = 1.0;
    cfg.sigma0 = 1.0;
    cfg.max_iters = 10;
    cfg.stop_tol = 1e-300;  // run the whole budget
    cfg.online_dict_update = true;

    const PatchGeometry geom =
        PatchGeometry::make(4, 1, 1, PatchMode::PerSlice, true, n, S);
    const PatchDictionary dict0 =
        random_patch_dictionary(geom.patch_len(), geom.patch_len(), 5);
    int seen = 0;
    const PatchSynthesisResult res = run_synthesis_patch(
        y, bank, dict0, geom, cfg, [&](const IterationInfo& info) {
            REQUIRE(info.patch_dict != nullptr);
            CHECK(info.patch_dict->frob() == doctest::Approx(1.0).epsilon(1e-10));
            CHECK(info.sigma > 0.0);
            ++seen;
        });
    CHECK(seen == 10);
    CHECK(res.report.sigma_trajectory.size() == 10);
    CHECK((res.dict.D - dict0.D).cwiseAbs().maxCoeff() > 0.0);

    const ConvDictionary cdict0 =
        ConvDictionary::random(2, 4, 1, ConvMode::PerSlice, n, S, 6);
    SolverConfig ccfg = cfg;
    ccfg.beta = 2.0;
    ccfg.lambda = 0.2;
    ccfg.rho0 = 10.0;
    ccfg.sigma0 = 10.0;
    ccfg.mu_tik = 0.01;
    const ConvSynthesisResult cres = run_synthesis_conv(
        y, bank, cdict0, ccfg, [&](const IterationInfo& info) {
            REQUIRE(info.conv_dict != nullptr);
            for (const RealStack& f : info.conv_dict->filters)
                CHECK(norm2(f) == doctest::Approx(1.0).epsilon(1e-10));
        });
    CHECK(cres.report.psi_reinversions == 0);
    for (int m = 0; m < cres.dict.M; ++m)
        CHECK(norm2(cres.dict.filters[m]) == doctest::Approx(1.0).epsilon(1e-10));
}

TEST_CASE("identical runs are bit-identical across thread counts") {
    const int n = 16, S = 2;
    const RealStack x = make_phantom(n, S, 21);
    const BlurBank bank = gaussian_bank(2, S, n, 0.9);
    NoiseSpec noise;
    noise.snr_db = 25.0;
    noise.seed = 77;
    const RealStack y = simulate_measurements(bank, x, noise).y;

    SolverConfig cfg;
    cfg.lambda = 1e-3;
    cfg.rho0 = 1e-2;
    cfg.max_iters = 15;
    cfg.stop_tol = 1e-300;  // run the whole budget

    auto run = [&]() {
        return run_analysis(y, bank, TransformOracle::from_config("dct2", n, S),
                            PriorKind::L1Transform, cfg);
    };
    set_num_threads(1);
    const AnalysisResult a = run();
    set_num_threads(4);
    const AnalysisResult b = run();
    set_num_threads(1);
    REQUIRE(a.x.size() == b.x.size());
    for (size_t i = 0; i < a.x.size(); ++i) {
        // bit-for-bit, not approximately
        CHECK(std::memcmp(&a.x.v[i], &b.x.v[i], sizeof(double)) == 0);
    }
    CHECK(run_report_json(a.report, false) == run_report_json(b.report, false));
}
