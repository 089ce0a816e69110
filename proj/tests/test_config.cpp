#include <cmath>
#include <string>

#include "civs/config.hpp"

#include "doctest.h"

using namespace civs;

namespace {

std::string message_of(const std::string& text) {
    try {
        parse_run_config(text, "cfg.json");
    } catch (const InvalidArgument& e) {
        return e.what();
    }
    return "";
}

}  // namespace

TEST_CASE("full config parses with the documented defaults") {
    const std::string text = R"({
        "forward": {
            "K": 2, "S": 2, "N": 32, "snr_db": 30, "seed": 7,
            "psfs": [
                {"kind": "gaussian", "sigma_px": 1.0},
                {"kind": "gaussian", "sigma_px": 2.0},
                {"kind": "disk", "radius_px": 2.5},
                {"kind": "delta"}
            ]
        },
        "prior": {
            "kind": "tv", "lambda": 0.002, "max_iters": 80
        },
        "io": {"output_dir": "/tmp/run"},
        "report": {"csv": true}
    })";
    const RunConfig cfg = parse_run_config(text, "cfg.json");
    CHECK(cfg.has_forward);
    CHECK(cfg.has_prior);
    CHECK(cfg.has_io);
    CHECK_FALSE(cfg.has_train);

    CHECK(cfg.forward.K == 2);
    CHECK(cfg.forward.S == 2);
    CHECK(cfg.forward.N == 32);
    CHECK(cfg.forward.noise.snr_db == doctest::Approx(30.0));
    CHECK(cfg.forward.noise.per_measurement);
    CHECK(cfg.forward.noise.seed == 7);
    REQUIRE(cfg.forward.psfs.size() == 4);
    CHECK(cfg.forward.psfs[0].kind == PsfSpec::Kind::Gaussian);
    CHECK(cfg.forward.psfs[0].support == 7);  // auto: 2*ceil(3 sigma) + 1
    CHECK(cfg.forward.psfs[2].kind == PsfSpec::Kind::DiskDefocus);
    CHECK(cfg.forward.psfs[2].support == 9);  // auto: 2*ceil(r) + 3
    CHECK(cfg.forward.psfs[3].kind == PsfSpec::Kind::Delta);

    CHECK(cfg.prior.kind == PriorKind::Tv);
    CHECK(cfg.prior.solver.lambda == doctest::Approx(0.002));
    CHECK(cfg.prior.solver.max_iters == 80);
    CHECK(cfg.prior.solver.beta == doctest::Approx(1.0));    // defaults kept
    CHECK(cfg.prior.solver.adapt.enabled);
    CHECK(cfg.prior.transform == "identity");

    CHECK(cfg.io.output_dir == "/tmp/run");
    CHECK(cfg.report.json);
    CHECK(cfg.report.csv);
    CHECK_FALSE(cfg.report.timings);
}

TEST_CASE("noiseless spelling keeps snr infinite") {
    const RunConfig cfg = parse_run_config(
        R"({"forward": {"K": 1, "S": 1, "N": 8, "snr_db": "noiseless",
            "psfs": [{"kind": "delta"}]}})",
        "cfg.json");
    CHECK(std::isinf(cfg.forward.noise.snr_db));
    CHECK(cfg.forward.noise.noiseless());
}

TEST_CASE("unknown keys are rejected with the source line") {
    const std::string text = "{\n"
                             "  \"forward\": {\n"
                             "    \"K\": 1, \"S\": 1, \"N\": 8,\n"
                             "    \"blur_level\": 3\n"
                             "  }\n"
                             "}";
    const std::string msg = message_of(text);
    CHECK(msg.find("cfg.json:4") != std::string::npos);
    CHECK(msg.find("blur_level") != std::string::npos);
}

TEST_CASE("json syntax errors carry a line anchor") {
    const std::string text = "{\n  \"forward\": {\n    \"K\": 1,,\n  }\n}";
    const std::string msg = message_of(text);
    CHECK(msg.find("cfg.json:3") != std::string::npos);
}

TEST_CASE("psf count must match the kernel grid") {
    const std::string msg = message_of(
        R"({"forward": {"K": 2, "S": 2, "N": 8, "psfs": [{"kind": "delta"}]}})");
    CHECK(msg.find("K*S = 4") != std::string::npos);
    CHECK(msg.find("got 1") != std::string::npos);
}

TEST_CASE("inline psfs and a bank path are mutually exclusive") {
    const std::string msg = message_of(
        R"({"forward": {"K": 1, "S": 1, "N": 8, "bank_path": "bank",
            "psfs": [{"kind": "delta"}]}})");
    CHECK(msg.find("not both") != std::string::npos);
}

TEST_CASE("enum spellings are validated") {
    CHECK(message_of(R"({"prior": {"kind": "ridge"}})").find("prior kind") !=
          std::string::npos);
    CHECK(message_of(R"({"prior": {"preset": "4d"}})") != "");
    CHECK(message_of(
              R"({"forward": {"K": 1, "S": 1, "N": 8, "noise_mode": "mixed"}})") !=
          "");
    CHECK(message_of(
              R"({"prior": {"patch": {"mode": "diagonal"}}})") != "");
    CHECK(message_of(R"({"forward": {"K": 0, "S": 1, "N": 8}})") != "");
    CHECK(message_of(R"({"forward": {"K": 1, "S": 1, "N": 8, "snr_db": true}})") !=
          "");
}

TEST_CASE("prior kind spellings map to the solver kinds") {
    bool tik = false;
    CHECK(prior_kind_from_string("l1-transform", &tik) == PriorKind::L1Transform);
    CHECK(prior_kind_from_string("tv", &tik) == PriorKind::Tv);
    CHECK(prior_kind_from_string("patch-dict", &tik) == PriorKind::PatchDict);
    CHECK(prior_kind_from_string("conv-dict", &tik) == PriorKind::ConvDict);
    CHECK_FALSE(tik);
    CHECK(prior_kind_from_string("conv-dict-tikhonov", &tik) == PriorKind::ConvDict);
    CHECK(tik);
    CHECK_THROWS_AS(prior_kind_from_string("lasso", &tik), InvalidArgument);

    CHECK(prior_kind_name(PriorKind::Tv) == "tv");
    CHECK(prior_kind_name(PriorKind::ConvDict) == "conv-dict");
}

TEST_CASE("presets fill the solver and explicit keys override them") {
    const std::string base = R"({
        "forward": {"K": 1, "S": 1, "N": 16, "snr_db": 20,
                    "psfs": [{"kind": "delta"}]},
        "prior": {"kind": "tv", "preset": "2d"%OVERRIDE%}
    })";

    std::string plain = base;
    plain.replace(plain.find("%OVERRIDE%"), 10, "");
    const RunConfig a = parse_run_config(plain, "cfg.json");
    CHECK(a.prior.solver.lambda == doctest::Approx(1e-2));  // 20 dB row
    CHECK(a.prior.solver.rho0 == doctest::Approx(0.1));

    std::string overridden = base;
    overridden.replace(overridden.find("%OVERRIDE%"), 10, ", \"lambda\": 0.5");
    const RunConfig b = parse_run_config(overridden, "cfg.json");
    CHECK(b.prior.solver.lambda == doctest::Approx(0.5));   // explicit wins
    CHECK(b.prior.solver.rho0 == doctest::Approx(0.1));     // preset remains
}

TEST_CASE("tikhonov spelling defaults the smoothing weight") {
    const RunConfig cfg = parse_run_config(
        R"({"prior": {"kind": "conv-dict-tikhonov"}})", "cfg.json");
    CHECK(cfg.prior.tikhonov);
    CHECK(cfg.prior.solver.mu_tik == doctest::Approx(0.01));

    const RunConfig strong = parse_run_config(
        R"({"prior": {"kind": "conv-dict-tikhonov", "mu_tik": 0.4}})", "cfg.json");
    CHECK(strong.prior.solver.mu_tik == doctest::Approx(0.4));
}

TEST_CASE("divergence guard is configurable") {
    const RunConfig cfg = parse_run_config(
        R"({"prior": {"kind": "tv", "divergence_guard": 1e-9}})", "cfg.json");
    CHECK(cfg.prior.solver.divergence_guard == doctest::Approx(1e-9));
}

TEST_CASE("train section parses both flavors") {
    const RunConfig cfg = parse_run_config(R"({
        "train": {
            "kind": "patch",
            "patch": {"q": 6, "stride": 2, "atoms": 48},
            "lambda": 0.1, "max_outer": 25, "seed": 3
        }
    })", "cfg.json");
    CHECK(cfg.has_train);
    CHECK(cfg.train.kind == "patch");
    CHECK(cfg.train.patch.q == 6);
    CHECK(cfg.train.patch.stride == 2);
    CHECK(cfg.train.patch.atoms == 48);
    CHECK(cfg.train.lambda == doctest::Approx(0.1));
    CHECK(cfg.train.max_outer == 25);
    CHECK(cfg.train.seed == 3);

    CHECK(message_of(R"({"train": {"kind": "lda"}})") != "");
}

TEST_CASE("missing files and bad documents raise io errors") {
    CHECK_THROWS_AS(load_run_config("/nonexistent/cfg.json"), IoError);
    CHECK_THROWS_AS(parse_run_config("[1, 2]", "cfg.json"), InvalidArgument);
}
