#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "civs/admm.hpp"
#include "civs/forward_model.hpp"

namespace civs {

// ---------------------------------------------------------------------------
// Run configuration
//
// One strict-schema JSON document drives every pipeline command. Unknown
// keys are rejected and every schema complaint carries the file name and
// (best-effort) line of the offending key. Sections are optional in the
// file; each command checks for the ones it needs.
// ---------------------------------------------------------------------------

struct ForwardConfig {
    int K = 1, S = 1, N = 32;
    std::vector<PsfSpec> psfs;  // K*S entries, measurement-major, or empty
    std::string bank_path;      // alternative to inline psfs
    NoiseSpec noise;            // snr_db stays +inf when the key is absent
};

struct PatchParams {
    int q = 8, t = 1, stride = 8;
    bool per_slice = true;
    bool wrap = true;
    int atoms = 0;  // 0 = square dictionary
};

struct ConvParams {
    int M = 8, L = 8, R = 1;
    bool per_slice = true;
};

struct PriorConfig {
    PriorKind kind = PriorKind::Tv;
    bool tikhonov = false;  // set by the "conv-dict-tikhonov" spelling
    std::string transform = "identity";
    SolverConfig solver;
    std::string dict_path;  // empty = seeded random dictionary
    PatchParams patch;
    ConvParams conv;
    std::string preset;  // "", "2d", "3d" (applied before explicit fields)
    uint64_t seed = 0;
};

struct IoConfig {
    std::string input;
    std::string ground_truth;
    bool phantom = false;  // simulate: synthesize the ground truth
    std::string output_dir = ".";
};

struct TrainConfig {
    std::string kind = "conv";  // "conv" | "patch"
    PatchParams patch;
    ConvParams conv;
    double lambda = 0.05, rho0 = 1.0, sigma0 = 1.0, mu_tik = 0.0, tol = 1e-4;
    bool adapt = true;
    int max_outer = 50;
    uint64_t seed = 0;
};

struct ReportConfig {
    bool json = true;
    bool csv = false;
    bool png = false;
    bool timings = false;  // timings vary run to run; off keeps reports stable
};

struct RunConfig {
    ForwardConfig forward;
    PriorConfig prior;
    IoConfig io;
    TrainConfig train;
    ReportConfig report;
    bool has_forward = false, has_prior = false, has_io = false,
         has_train = false;
};

// `source` names the document in error messages ("config.json:12: ...").
RunConfig parse_run_config(const std::string& text, const std::string& source);
RunConfig load_run_config(const std::string& path);

// "l1-transform", "tv", "patch-dict", "conv-dict", "conv-dict-tikhonov".
PriorKind prior_kind_from_string(const std::string& name, bool* tikhonov);
std::string prior_kind_name(PriorKind kind);

}  // namespace civs
