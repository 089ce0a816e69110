#pragma once

#include <functional>
#include <string>
#include <vector>

#include "civs/conv_prior.hpp"
#include "civs/forward_model.hpp"
#include "civs/freq_solver.hpp"
#include "civs/patch_prior.hpp"
#include "civs/prox.hpp"
#include "civs/transforms.hpp"

namespace civs {

// ---------------------------------------------------------------------------
// ADMM reconstruction drivers
//
// Two families share the same outer loop:
//
//   analysis   x-update against rho*I + beta*H^H H, then a prox of the
//              transform coefficients (soft threshold) or of the image
//              itself (TV); a rho change here alters the frequency-domain
//              system, which is re-assembled and re-inverted (counted).
//
//   synthesis  x-update against t_scale*I + beta*H^H H, then a dictionary
//              code update and a soft threshold; rho only enters the code
//              subproblem, so the frequency-domain system is inverted once.
//
// Scaled duals are used everywhere, with the standard convergent sign
// (dual += primal residual) and the dual rescaled by rho_old/rho_new when
// the penalty adapts. Iterations stop when the relative image change drops
// below stop_tol (skipped while the previous iterate is exactly zero) and
// abort with DivergenceError when it explodes past the divergence guard.
// ---------------------------------------------------------------------------

enum class PriorKind { L1Transform, Tv, PatchDict, ConvDict };

// Residual-balancing penalty update: grow by tau when the primal residual
// dominates the dual by more than mu_ratio, shrink by tau in the mirrored
// case, otherwise leave unchanged.
double adapt_penalty(double rho, double r_norm, double s_norm, double tau = 2.0,
                     double mu_ratio = 10.0);

// Relative-change stopping rule; never fires while prev_norm == 0.
bool stopping_criterion(double diff_norm, double prev_norm, double tol);

struct AdaptConfig {
    bool enabled = true;
    double tau = 2.0;
    double mu_ratio = 10.0;
};

struct SolverConfig {
    double beta = 1.0;
    double lambda = 1e-3;
    double rho0 = 1e-2;
    double sigma0 = 1.0;   // dictionary-ADMM penalty (online updates)
    double mu_tik = 0.0;   // Tikhonov smoothing of convolutional codes
    AdaptConfig adapt;
    int max_iters = 200;
    double stop_tol = 1e-4;
    bool online_dict_update = false;
    bool dense_inversion = false;  // per-bin dense solves instead of recursion
    TvProxOptions tv;
    double divergence_guard = 1e6;
};

struct RunReport {
    int iterations = 0;
    bool converged = false;
    double final_primal = 0.0;
    double final_dual = 0.0;
    int psi_reinversions = 0;
    std::vector<double> rho_trajectory;
    std::vector<double> sigma_trajectory;
    std::vector<double> objective_trajectory;
    std::vector<double> iter_seconds;
};

// Deterministic part of the report as JSON; timings are opt-in because they
// vary run to run while everything else is bit-reproducible.
std::string run_report_json(const RunReport& report, bool include_timings);
std::string run_report_csv(const RunReport& report);

// Per-iteration observer payload. Dictionary pointers are populated by the
// matching synthesis driver; aug_lagrangian is the full augmented objective
// including the dual-shift terms.
struct IterationInfo {
    int iter = 0;
    double rho = 0.0;
    double sigma = 0.0;
    double primal = 0.0;
    double dual = 0.0;
    double objective = 0.0;
    double aug_lagrangian = 0.0;
    const RealStack* x = nullptr;
    const PatchDictionary* patch_dict = nullptr;
    const ConvDictionary* conv_dict = nullptr;
};
using IterationObserver = std::function<void(const IterationInfo&)>;

struct AnalysisResult {
    RealStack x;
    RunReport report;
};

// prior must be L1Transform or Tv; the TV prior requires the identity
// transform (the image itself is the analysis variable).
AnalysisResult run_analysis(const RealStack& y, const BlurBank& bank,
                            const TransformOracle& transform, PriorKind prior,
                            const SolverConfig& cfg,
                            const IterationObserver& observer = {});

struct PatchSynthesisResult {
    RealStack x;
    RunReport report;
    PatchDictionary dict;
};

// The geometry must wrap with uniform coverage (P^H P proportional to the
// identity); anything else cannot be diagonalized by the per-slice DFT and
// is rejected.
PatchSynthesisResult run_synthesis_patch(const RealStack& y, const BlurBank& bank,
                                         const PatchDictionary& dict,
                                         const PatchGeometry& geom,
                                         const SolverConfig& cfg,
                                         const IterationObserver& observer = {});

struct ConvSynthesisResult {
    RealStack x;
    RunReport report;
    ConvDictionary dict;
};

ConvSynthesisResult run_synthesis_conv(const RealStack& y, const BlurBank& bank,
                                       const ConvDictionary& dict,
                                       const SolverConfig& cfg,
                                       const IterationObserver& observer = {});

// Shipped parameter regimes, keyed to the nearest of 20/30/40 dB. The 2D
// set pairs with per-slice priors, the 3D set with volumetric ones; priors
// without a published row fall back to the transform/TV row of their table.
SolverConfig preset_2d(PriorKind prior, double snr_db);
SolverConfig preset_3d(PriorKind prior, double snr_db);

}  // namespace civs
