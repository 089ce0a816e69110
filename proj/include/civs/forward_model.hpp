#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "civs/tensor.hpp"

namespace civs {

// ---------------------------------------------------------------------------
// Superimposed-convolution measurement model
//
// K measurement slices are formed from S source slices through a K x S grid
// of 2D circular convolution kernels:
//
//   y_k = sum_s h_{k,s} (*) x_s + w_k
//
// Kernels are kept at native support and embedded into the N x N grid with
// the kernel center at the (0,0) pixel and negative offsets wrapped, so a
// centered kernel introduces no shift. The cached spectrum of each kernel is
// the *unnormalized* 2D DFT of that embedding, i.e. exactly the eigenvalues
// of the corresponding circulant operator: a delta kernel has spectrum 1
// everywhere, and the frequency-domain products below need no extra scale
// factors next to the unitary data transforms.
// ---------------------------------------------------------------------------

struct PsfSpec {
    enum class Kind { Gaussian, DiskDefocus, Delta };
    Kind kind = Kind::Delta;
    double sigma_px = 1.0;  // gaussian width
    double radius_px = 1.0; // defocus disk radius
    int support = 1;        // native kernel side (odd recommended)
    double weight = 1.0;    // scalar applied after unit-sum normalization
};

// Builds a unit-sum kernel at native support, then applies `weight`.
// Gaussians narrower than 0.25 px collapse to a delta. Raises
// InvalidArgument for non-positive support/width/radius.
RealStack make_psf(const PsfSpec& spec);

// Embeds a native-support kernel into an n x n grid, kernel center at the
// origin with circular wraparound.
RealStack embed_kernel(const RealStack& kernel, int n);

class BlurBank {
  public:
    // kernels[k][s] at native support; each must fit inside n x n.
    BlurBank(std::vector<std::vector<RealStack>> kernels, int n);

    int K() const { return num_measurements_; }
    int S() const { return num_sources_; }
    int n() const { return n_; }

    const RealStack& kernel(int k, int s) const { return kernels_[k][s]; }
    // Operator eigenvalues of h_{k,s} on the n x n grid (see header comment).
    const ComplexStack& spectrum(int k, int s) const { return spectra_[k][s]; }

    // FNV-1a over dims and raw kernel payloads; stable across runs.
    std::string content_hash() const;

  private:
    int num_measurements_ = 0;
    int num_sources_ = 0;
    int n_ = 0;
    std::vector<std::vector<RealStack>> kernels_;
    std::vector<std::vector<ComplexStack>> spectra_;
};

// y = H x, computed per measurement in the frequency domain. x has S slices
// of n x n; the result has K slices.
RealStack apply_forward(const BlurBank& bank, const RealStack& x);

// x = H^T y (adjoint / correlation form), y has K slices, result S slices.
RealStack apply_adjoint(const BlurBank& bank, const RealStack& y);

struct NoiseSpec {
    // Target SNR in dB; +infinity means noiseless (no RNG draw at all).
    double snr_db = std::numeric_limits<double>::infinity();
    // Per-measurement: each slice gets its own sigma_k from its own energy.
    // Global: one sigma from the total clean energy across all slices.
    bool per_measurement = true;
    uint64_t seed = 0;

    bool noiseless() const { return std::isinf(snr_db); }
};

struct SimulationResult {
    RealStack y;                  // K noisy measurement slices
    std::vector<double> sigma;    // per-slice noise std (all equal in global mode)
};

// Draws white Gaussian noise with sigma_k chosen so that
// 10*log10(|clean_k|^2 / (n^2 sigma_k^2)) equals snr_db (per-measurement
// mode), or one shared sigma from the total energy (global mode).
// An all-zero clean measurement with finite SNR raises DegenerateSignalError.
SimulationResult simulate_measurements(const BlurBank& bank, const RealStack& x,
                                       const NoiseSpec& noise);

// Bank serialization: a directory holding one container per kernel plus
// manifest.json {K, S, n, kernels: [[paths]], weights: [[w]]}. Weights in
// the manifest are applied multiplicatively at load time.
void save_bank(const BlurBank& bank, const std::string& dir);
BlurBank load_bank(const std::string& dir);

}  // namespace civs
