#pragma once

#include <Eigen/Dense>

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "civs/tensor.hpp"

namespace civs {

// ---------------------------------------------------------------------------
// Patch-based synthesis prior
//
// P extracts q x q x t patches from an N x N x S stack at every spatial
// offset divisible by `stride` and at every depth offset (step 1), with
// circular wraparound by default. Under wraparound and stride 1 every voxel
// is covered by exactly q*q*t patches, so P^H P = t_scale * I with
// t_scale = q^2 t; that scalar is what the frequency-domain image update is
// assembled with. Without wraparound coverage is non-uniform, which is fine
// for training data extraction but is rejected by the reconstruction path.
//
// Patch matrices are dense with one patch per column (patch_len() x J).
// Per-slice mode is volumetric mode with t = 1; it is kept as a named mode
// because dictionaries trained per slice are 2D objects.
// ---------------------------------------------------------------------------

enum class PatchMode { Volumetric, PerSlice };

struct PatchGeometry {
    int q = 0, t = 0, stride = 1;
    PatchMode mode = PatchMode::Volumetric;
    bool wrap = true;
    int n = 0, s = 0;  // the stack dims this geometry is bound to

    int J = 0;            // number of patches
    double t_scale = -1;  // uniform coverage count; -1 when non-uniform
    std::vector<std::array<int, 3>> positions;  // (row, col, depth) offsets

    static PatchGeometry make(int q, int t, int stride, PatchMode mode,
                              bool wrap, int n, int s);
    int patch_len() const { return q * q * t; }
    bool uniform_coverage() const { return t_scale > 0; }
};

// One patch per column, entries ordered depth-major then row-major.
Eigen::MatrixXd extract_patches(const RealStack& x, const PatchGeometry& g);

// Adjoint of extract_patches: adds every patch back into its voxels.
RealStack aggregate_patches(const Eigen::MatrixXd& p, const PatchGeometry& g);

struct PatchDictionary {
    Eigen::MatrixXd D;  // patch_len x atoms
    double frob() const { return D.norm(); }
};

// iid gaussian entries normalized to unit Frobenius norm.
PatchDictionary random_patch_dictionary(int patch_len, int atoms, uint64_t seed);

// Z = (rho I + D^T D)^{-1} (D^T X + rho (t_aux - u_dual)); the Gram factor
// is built and factored once per call.
Eigen::MatrixXd patch_code_update(const PatchDictionary& dict,
                                  const Eigen::MatrixXd& x_patches,
                                  const Eigen::MatrixXd& t_aux,
                                  const Eigen::MatrixXd& u_dual, double rho);

struct PatchDictStep {
    Eigen::MatrixXd D;  // unconstrained least-squares iterate
    Eigen::MatrixXd G;  // projection onto the unit Frobenius sphere
    Eigen::MatrixXd E;  // scaled dual
};

// One dictionary-ADMM round:
//   D = (X Z^T + sigma (G - E)) (Z Z^T + sigma I)^{-1}
//   G = (D + E) / ||D + E||_F      (SingularityError below 1e-14)
//   E = E + D - G
// The feasible iterate G is what reconstruction should use as the updated
// dictionary.
PatchDictStep patch_dict_update(const Eigen::MatrixXd& x_patches,
                                const Eigen::MatrixXd& z,
                                const Eigen::MatrixXd& g_prev,
                                const Eigen::MatrixXd& e_prev, double sigma);

// P^H (D z): the synthesis image entering the x-update right-hand side.
RealStack dict_synth_term(const PatchDictionary& dict, const Eigen::MatrixXd& z,
                          const PatchGeometry& g);

struct PatchTrainOptions {
    double lambda = 0.05;
    double rho0 = 1.0;
    double sigma0 = 1.0;
    bool adapt = true;
    int max_outer = 50;
    double tol = 1e-4;
    uint64_t seed = 0;
    int atoms = 0;  // 0 = square dictionary (patch_len x patch_len)
};

// Alternates sparse coding of the training patches with dictionary-ADMM
// rounds until the relative dictionary change drops below tol. Training
// stacks must share the geometry's dims.
PatchDictionary train_patch_dict(const std::vector<RealStack>& training,
                                 const PatchGeometry& g,
                                 const PatchTrainOptions& opts);

// Serialization: <base>.civs holds D as a rows x cols x 1 container,
// <base>.json the geometry (q, t, stride, mode, wrap, atoms).
void save_patch_dictionary(const PatchDictionary& dict, const PatchGeometry& g,
                           const std::string& base_path);
PatchDictionary load_patch_dictionary(const std::string& base_path,
                                      PatchGeometry* geom_out = nullptr,
                                      int n = 0, int s = 0);

}  // namespace civs
