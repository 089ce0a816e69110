#pragma once

#include "civs/tensor.hpp"

namespace civs {

// ---------------------------------------------------------------------------
// Unitary DFTs
//
// Every transform here is scaled by 1/sqrt(number of transformed samples),
// so forward and inverse are exact adjoints of each other and Parseval holds
// with no extra factors:
//
//   fft2        per-slice 2D DFT of an N x N slice, factor 1/N per slice
//   fft1_depth  1D DFT along the slice axis, factor 1/sqrt(S)
//   fft3        full 3D DFT, factor 1/(N*sqrt(S))
//
// With this convention the eigenvalues of a circular convolution operator
// are the *unnormalized* DFT of its kernel, i.e. sqrt(samples) times the
// unitary spectrum; the forward model and the dictionary code cache their
// operator spectra in that unnormalized form.
//
// 2D/3D transforms require square slices. Any sizes are supported (mixed
// radix); powers of two are merely faster.
// ---------------------------------------------------------------------------

ComplexStack fft2(const RealStack& x);
ComplexStack fft2(const ComplexStack& x);
ComplexStack ifft2(const ComplexStack& x);

ComplexStack fft1_depth(const RealStack& x);
ComplexStack fft1_depth(const ComplexStack& x);
ComplexStack ifft1_depth(const ComplexStack& x);

ComplexStack fft3(const RealStack& x);
ComplexStack fft3(const ComplexStack& x);
ComplexStack ifft3(const ComplexStack& x);

// Inverse transforms of spectra that are known to correspond to real
// signals. The imaginary residue must be negligible next to the real part
// (|imag|_max <= rel_tol * |real|_max + 1e-12); a larger residue means the
// caller's spectrum lost Hermitian symmetry and raises NumericError.
RealStack ifft2_real(const ComplexStack& x, double rel_tol = 1e-9);
RealStack ifft3_real(const ComplexStack& x, double rel_tol = 1e-9);

}  // namespace civs
