#pragma once

#include <string>
#include <vector>

#include "civs/tensor.hpp"

namespace civs {

// ---------------------------------------------------------------------------
// Orthonormal sparsifying transforms
//
// A transform is built from at most two orthonormal matrices: a 1D spatial
// basis A (n x n) applied separably to slice rows and columns, and a 1D
// depth basis B (S x S) applied along the slice axis. This covers the three
// layouts used by the solvers:
//
//   per-slice 2D          coeffs_s = A x_s A^T
//   full 3D               per-slice 2D followed by the depth basis
//   kronecker (T2 (x) T1) same machinery, mixed bases, e.g. haar2 + dct1
//
// Either matrix may be absent (identity). T^H T = I holds exactly up to
// floating point because the factors are orthonormal; user-supplied bases
// are checked for orthonormality on construction.
// ---------------------------------------------------------------------------

// Orthonormal DCT-II matrix of size n (any n >= 1).
std::vector<double> dct_matrix(int n);
// Orthonormal Haar matrix of size n (n must be a power of two).
std::vector<double> haar_matrix(int n);

class TransformOracle {
  public:
    // Identity transform (used by the TV prior, where the image itself is
    // the analysis variable).
    TransformOracle() = default;

    // Named configurations: "identity", "dct2", "haar2", "dct3",
    // "kron:<spatial>+<depth>" with spatial in {dct2, haar2, identity} and
    // depth in {dct1, haar1, identity}, e.g. "kron:haar2+dct1".
    static TransformOracle from_config(const std::string& name, int n, int depth);

    // User-supplied separable bases; empty vector means identity on that
    // axis. Matrices are row-major, spatial n x n, depth S x S, and must be
    // orthonormal to 1e-10.
    static TransformOracle custom(std::vector<double> spatial, int n,
                                  std::vector<double> depth_basis, int depth);

    RealStack apply(const RealStack& x) const;    // T x
    RealStack adjoint(const RealStack& c) const;  // T^H c

    bool is_identity() const { return spatial_.empty() && depth_.empty(); }
    int n() const { return n_; }
    int depth() const { return depth_n_; }

  private:
    std::vector<double> spatial_;  // n x n, row-major; empty = identity
    std::vector<double> depth_;    // S x S, row-major; empty = identity
    int n_ = 0;
    int depth_n_ = 0;
};

}  // namespace civs
