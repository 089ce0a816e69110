#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "civs/tensor.hpp"

namespace civs {

// ---------------------------------------------------------------------------
// Convolutional (shift-invariant) synthesis prior
//
// The signal is modeled as a sum of M circular convolutions d_m (*) z_m.
// Volumetric mode uses 3D kernels of support L x L x R convolved with the
// whole stack; per-slice mode uses 2D kernels applied slice by slice (R is
// forced to 1) with independent codes per slice.
//
// Filters are stored corner-anchored: the native support occupies indices
// [0,L) x [0,L) x [0,R) of the padded grid before the DFT, and the
// crop/zero-pad projection in the dictionary update uses the same anchor.
// Cached filter spectra are unnormalized DFTs (circulant eigenvalues), next
// to unitary transforms of the data, mirroring the forward-model convention.
//
// All frequency-domain systems here are diagonal-plus-low-rank, solved in
// closed form by Sherman-Morrison per frequency bin; sums of several
// rank-one terms (per-slice dictionary updates, multi-stack training) use
// the iterated form, one update folded in after another.
// ---------------------------------------------------------------------------

enum class ConvMode { Volumetric, PerSlice };

struct ConvDictionary {
    int M = 0, L = 0, R = 1;
    ConvMode mode = ConvMode::Volumetric;
    int n = 0, s = 0;  // problem dims the spectra are bound to

    std::vector<RealStack> filters;     // native support L x L x R (or x 1)
    std::vector<ComplexStack> spectra;  // n x n x s (volumetric) or n x n x 1

    static ConvDictionary create(std::vector<RealStack> filters, ConvMode mode,
                                 int n, int s);
    // iid gaussian filters, each normalized to unit l2 norm.
    static ConvDictionary random(int M, int L, int R, ConvMode mode, int n,
                                 int s, uint64_t seed);
    void rebuild_spectra();
};

// M code stacks, each n x n x s. In per-slice mode slice s of z_m codes
// slice s of the image against the 2D filter d_m.
struct ConvCodeSet {
    std::vector<RealStack> z;

    static ConvCodeSet zeros(int M, int n, int s);
};

// Squared-magnitude spectra of the forward-difference filters [1, -1] along
// each axis (two axes per-slice, three volumetric; the depth term vanishes
// for s = 1). Scales the smoothing term mu/2 * sum_i ||r_i (*) z||^2.
struct TikhonovSpec {
    double mu = 0.0;
    RealStack grad_spectra;  // same bin layout as the code spectra

    static TikhonovSpec make(double mu, ConvMode mode, int n, int s);
    static TikhonovSpec none(ConvMode mode, int n, int s) {
        return make(0.0, mode, n, s);
    }
};

// z-update of the synthesis ADMM: solves, independently at every frequency
// bin, (e I + psi psi^H) v = c with e = rho + mu*grad, psi the vector of
// conjugated filter spectra, and c = conj(Theta)*x_hat + rho*(t - u)_hat,
// via the Sherman-Morrison closed form.
ConvCodeSet csc_code_update(const ConvDictionary& dict, const RealStack& x,
                            const ConvCodeSet& t_aux, const ConvCodeSet& u_dual,
                            double rho, const TikhonovSpec& tik);

// sum_m d_m (*) z_m.
RealStack conv_synth(const ConvDictionary& dict, const ConvCodeSet& z);

// One (codes, target) pair contributing a rank-one term per bin to the
// dictionary normal equations.
struct ConvTrainPair {
    const ConvCodeSet* z = nullptr;
    const RealStack* x = nullptr;
};

struct ConvDictStep {
    std::vector<RealStack> d;  // unconstrained LS filters, full grid
    std::vector<RealStack> g;  // projected: cropped to support, unit norm
    std::vector<RealStack> e;  // scaled dual, full grid
};

// One dictionary-ADMM round:
//   (sigma I + sum Z^H Z) d = sum Z^H x + sigma (g - e)   per frequency bin
//   g_m = P_support(d_m + e_m) / ||P_support(d_m + e_m)||_2
//   e_m = e_m + d_m - g_m
// Volumetric mode with one pair is a single Sherman-Morrison application;
// everything else runs the iterated form. The caller installs crop(g) as
// the updated filters.
ConvDictStep conv_dict_update(const ConvDictionary& dict,
                              const std::vector<ConvTrainPair>& pairs,
                              const std::vector<RealStack>& g_prev,
                              const std::vector<RealStack>& e_prev, double sigma);

// Embeds a native filter corner-anchored into the full grid; crop is the
// inverse restriction.
RealStack embed_filter(const RealStack& filter, int n, int s);
RealStack crop_filter(const RealStack& full, int L, int R);

struct ConvTrainOptions {
    int M = 4, L = 8, R = 1;
    ConvMode mode = ConvMode::PerSlice;
    double lambda = 0.05;
    double mu_tik = 0.0;
    double rho0 = 1.0;
    double sigma0 = 1.0;
    bool adapt = true;
    int max_outer = 100;
    double tol = 1e-4;
    uint64_t seed = 0;
};

// Alternates one sparse-coding ADMM round per training stack with one
// dictionary-ADMM round over all stacks, starting from a seeded random
// dictionary, until the relative filter change drops below tol.
ConvDictionary train_conv_dict(const std::vector<RealStack>& training,
                               const ConvTrainOptions& opts);

// Serialization: a directory of per-filter containers plus manifest.json
// {M, L, R, mode, anchor}. Loading binds the spectra to (n, s).
void save_conv_dictionary(const ConvDictionary& dict, const std::string& dir);
ConvDictionary load_conv_dictionary(const std::string& dir, int n, int s);

}  // namespace civs
