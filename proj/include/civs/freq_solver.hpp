#pragma once

#include "civs/forward_model.hpp"
#include "civs/tensor.hpp"

namespace civs {

// ---------------------------------------------------------------------------
// Frequency-domain normal equations
//
// After per-slice DFTs the data-term normal matrix c*I + beta*H^H H becomes
// an S x S grid of diagonal blocks; each block is stored as its n x n array
// of diagonal entries. Inverting the grid therefore needs only elementwise
// block algebra, done here by recursive 2 x 2 partitioning. The scalar c
// that was baked in at assembly time is recorded so solvers can verify they
// are using a system assembled for their problem.
// ---------------------------------------------------------------------------

class FreqBlockMatrix {
  public:
    FreqBlockMatrix() = default;
    FreqBlockMatrix(int S, int n, double c);

    int S() const { return S_; }
    int n() const { return n_; }
    double c() const { return c_; }
    bool inverted() const { return inverted_; }
    void mark_inverted() { inverted_ = true; }

    std::complex<double>* block(int i, int j) {
        return blocks_.data() + (static_cast<size_t>(i) * S_ + j) * bin_count();
    }
    const std::complex<double>* block(int i, int j) const {
        return blocks_.data() + (static_cast<size_t>(i) * S_ + j) * bin_count();
    }
    size_t bin_count() const { return static_cast<size_t>(n_) * n_; }

    // Y_i = sum_j block(i,j) .* W_j for a stack W of S spectra.
    ComplexStack apply(const ComplexStack& w) const;

  private:
    int S_ = 0;
    int n_ = 0;
    double c_ = 0.0;
    bool inverted_ = false;
    std::vector<std::complex<double>> blocks_;
};

// Psi(i,j) = c*delta_ij + beta * sum_k conj(Lambda_{k,i}) .* Lambda_{k,j},
// the frequency-domain image of c*I + beta*H^H H. Hermitian and positive
// definite for c > 0.
FreqBlockMatrix assemble_psi(const BlurBank& bank, double beta, double c);

// beta * Lambda^H F y: the measurement-dependent half of the image-update
// right-hand side, computed once per solve. S slices of n x n spectra.
ComplexStack assemble_rhs(const BlurBank& bank, const RealStack& y, double beta);

// Recursive block inversion. S is split ceil(S/2) / floor(S/2) at every
// level; scalar pivots with magnitude below 1e-14 raise SingularityError.
FreqBlockMatrix invert_psi(const FreqBlockMatrix& psi);

// Same result through dense S x S solves at every frequency bin. Slower,
// kept as an independently coded route for small S and for verification.
FreqBlockMatrix invert_psi_dense(const FreqBlockMatrix& psi);

// x = F^H PsiInv (rhs + rho * F v) with v = T^H(t - u) already composed in
// the image domain by the caller.
RealStack image_update_analysis(const FreqBlockMatrix& psi_inv,
                                const ComplexStack& rhs, const RealStack& v,
                                double rho);

// x = F^H PsiInv (rhs + F synth); synth is the aggregated dictionary
// synthesis image. The system must have been assembled with c == t_scale.
RealStack image_update_synthesis(const FreqBlockMatrix& psi_inv,
                                 const ComplexStack& rhs, const RealStack& synth,
                                 double t_scale);

}  // namespace civs
