#include "civs/freq_solver.hpp"

#include <Eigen/Dense>

#include <cmath>

#include "civs/fft.hpp"

namespace civs {

namespace {

using Cplx = std::complex<double>;

// Rectangular grid of diagonal blocks; each block is its `bins`-long array
// of diagonal entries. All block algebra in the recursion is elementwise.
struct RGrid {
    int rows = 0, cols = 0;
    size_t bins = 0;
    std::vector<Cplx> v;

    RGrid() = default;
    RGrid(int r, int c, size_t b) : rows(r), cols(c), bins(b), v(size_t(r) * c * b) {}
    Cplx* at(int i, int j) { return v.data() + (size_t(i) * cols + j) * bins; }
    const Cplx* at(int i, int j) const {
        return v.data() + (size_t(i) * cols + j) * bins;
    }
};

RGrid view(const RGrid& g, int i0, int j0, int r, int c) {
    RGrid out(r, c, g.bins);
    for (int i = 0; i < r; ++i)
        for (int j = 0; j < c; ++j) {
            const Cplx* src = g.at(i0 + i, j0 + j);
            std::copy(src, src + g.bins, out.at(i, j));
        }
    return out;
}

// C = A * B with diagonal blocks: elementwise multiply-accumulate.
RGrid mul(const RGrid& a, const RGrid& b) {
    RGrid c(a.rows, b.cols, a.bins);
    for (int i = 0; i < a.rows; ++i)
        for (int j = 0; j < b.cols; ++j) {
            Cplx* out = c.at(i, j);
            for (int l = 0; l < a.cols; ++l) {
                const Cplx* x = a.at(i, l);
                const Cplx* y = b.at(l, j);
                for (size_t t = 0; t < a.bins; ++t) out[t] += x[t] * y[t];
            }
        }
    return c;
}

RGrid subtract(const RGrid& a, const RGrid& b) {
    RGrid c = a;
    for (size_t t = 0; t < c.v.size(); ++t) c.v[t] -= b.v[t];
    return c;
}

void negate(RGrid& a) {
    for (auto& z : a.v) z = -z;
}

// Recursive 2 x 2 block inversion with uneven ceil/floor partition.
RGrid invert_rgrid(const RGrid& p) {
    const int S = p.rows;
    if (S == 1) {
        RGrid inv(1, 1, p.bins);
        const Cplx* src = p.at(0, 0);
        Cplx* dst = inv.at(0, 0);
        for (size_t t = 0; t < p.bins; ++t) {
            if (std::abs(src[t]) < 1e-14)
                throw SingularityError(
                    "invert_psi: pivot magnitude below 1e-14; system is singular");
            dst[t] = 1.0 / src[t];
        }
        return inv;
    }

    const int s1 = (S + 1) / 2;  // ceil
    const int s2 = S - s1;       // floor

    RGrid p11 = view(p, 0, 0, s1, s1);
    RGrid p12 = view(p, 0, s1, s1, s2);
    RGrid p21 = view(p, s1, 0, s2, s1);
    RGrid p22 = view(p, s1, s1, s2, s2);

    RGrid i11 = invert_rgrid(p11);
    RGrid t12 = mul(i11, p12);              // Psi11^-1 Psi12
    RGrid schur = subtract(p22, mul(p21, t12));
    RGrid sinv = invert_rgrid(schur);       // -B
    RGrid b = sinv;
    negate(b);                              // B = -(Schur)^-1

    RGrid tr = mul(t12, b);                 // Psi11^-1 Psi12 B
    RGrid p21i11 = mul(p21, i11);
    RGrid bl = mul(b, p21i11);              // B Psi21 Psi11^-1
    RGrid a = subtract(i11, mul(t12, bl));  // Psi11^-1 - Psi11^-1 Psi12 B Psi21 Psi11^-1
    RGrid br = sinv;                        // -B

    RGrid out(S, S, p.bins);
    auto put = [&out](const RGrid& g, int i0, int j0) {
        for (int i = 0; i < g.rows; ++i)
            for (int j = 0; j < g.cols; ++j) {
                const Cplx* src = g.at(i, j);
                std::copy(src, src + g.bins, out.at(i0 + i, j0 + j));
            }
    };
    put(a, 0, 0);
    put(tr, 0, s1);
    put(bl, s1, 0);
    put(br, s1, s1);
    return out;
}

}  // namespace

FreqBlockMatrix::FreqBlockMatrix(int S, int n, double c)
    : S_(S), n_(n), c_(c), blocks_(size_t(S) * S * size_t(n) * n) {
    if (S < 1 || n < 1)
        throw DimensionError("FreqBlockMatrix: dimensions must be >= 1");
}

ComplexStack FreqBlockMatrix::apply(const ComplexStack& w) const {
    if (w.rows != n_ || w.cols != n_ || w.depth != S_)
        throw DimensionError("FreqBlockMatrix::apply: operand shape mismatch");
    ComplexStack out(n_, n_, S_);
    const size_t bins = bin_count();
    for (int i = 0; i < S_; ++i) {
        auto* dst = out.slice(i);
        for (int j = 0; j < S_; ++j) {
            const auto* blk = block(i, j);
            const auto* src = w.slice(j);
            for (size_t t = 0; t < bins; ++t) dst[t] += blk[t] * src[t];
        }
    }
    return out;
}

FreqBlockMatrix assemble_psi(const BlurBank& bank, double beta, double c) {
    if (beta < 0.0) throw InvalidArgument("assemble_psi: beta must be >= 0");
    FreqBlockMatrix psi(bank.S(), bank.n(), c);
    const size_t bins = psi.bin_count();
    for (int i = 0; i < bank.S(); ++i) {
        for (int j = i; j < bank.S(); ++j) {
            auto* dst = psi.block(i, j);
            for (int k = 0; k < bank.K(); ++k) {
                const auto* li = bank.spectrum(k, i).data();
                const auto* lj = bank.spectrum(k, j).data();
                for (size_t t = 0; t < bins; ++t)
                    dst[t] += beta * std::conj(li[t]) * lj[t];
            }
            if (i == j) {
                for (size_t t = 0; t < bins; ++t) dst[t] += c;
            } else {
                auto* mirror = psi.block(j, i);
                for (size_t t = 0; t < bins; ++t) mirror[t] = std::conj(dst[t]);
            }
        }
    }
    return psi;
}

ComplexStack assemble_rhs(const BlurBank& bank, const RealStack& y, double beta) {
    if (y.rows != bank.n() || y.cols != bank.n() || y.depth != bank.K())
        throw DimensionError("assemble_rhs: measurement stack does not match bank");
    ComplexStack yf = fft2(y);
    ComplexStack rhs(bank.n(), bank.n(), bank.S());
    const size_t bins = rhs.slice_size();
    for (int s = 0; s < bank.S(); ++s) {
        auto* dst = rhs.slice(s);
        for (int k = 0; k < bank.K(); ++k) {
            const auto* lam = bank.spectrum(k, s).data();
            const auto* src = yf.slice(k);
            for (size_t t = 0; t < bins; ++t)
                dst[t] += beta * std::conj(lam[t]) * src[t];
        }
    }
    return rhs;
}

FreqBlockMatrix invert_psi(const FreqBlockMatrix& psi) {
    RGrid g(psi.S(), psi.S(), psi.bin_count());
    for (int i = 0; i < psi.S(); ++i)
        for (int j = 0; j < psi.S(); ++j) {
            const auto* src = psi.block(i, j);
            std::copy(src, src + psi.bin_count(), g.at(i, j));
        }
    RGrid inv = invert_rgrid(g);
    FreqBlockMatrix out(psi.S(), psi.n(), psi.c());
    for (int i = 0; i < psi.S(); ++i)
        for (int j = 0; j < psi.S(); ++j) {
            const auto* src = inv.at(i, j);
            std::copy(src, src + psi.bin_count(), out.block(i, j));
        }
    out.mark_inverted();
    return out;
}

FreqBlockMatrix invert_psi_dense(const FreqBlockMatrix& psi) {
    const int S = psi.S();
    const size_t bins = psi.bin_count();
    FreqBlockMatrix out(S, psi.n(), psi.c());
    Eigen::MatrixXcd m(S, S);
    for (size_t t = 0; t < bins; ++t) {
        for (int i = 0; i < S; ++i)
            for (int j = 0; j < S; ++j) m(i, j) = psi.block(i, j)[t];
        Eigen::PartialPivLU<Eigen::MatrixXcd> lu(m);
        for (int i = 0; i < S; ++i)
            if (std::abs(lu.matrixLU()(i, i)) < 1e-14)
                throw SingularityError(
                    "invert_psi_dense: pivot magnitude below 1e-14");
        Eigen::MatrixXcd inv = lu.inverse();
        for (int i = 0; i < S; ++i)
            for (int j = 0; j < S; ++j) out.block(i, j)[t] = inv(i, j);
    }
    out.mark_inverted();
    return out;
}

RealStack image_update_analysis(const FreqBlockMatrix& psi_inv,
                                const ComplexStack& rhs, const RealStack& v,
                                double rho) {
    if (!psi_inv.inverted())
        throw ContractViolationError("image_update_analysis: system not inverted");
    ComplexStack w = fft2(v);
    require_same_shape(w, rhs, "image_update_analysis");
    for (size_t t = 0; t < w.size(); ++t) w.v[t] = rhs.v[t] + rho * w.v[t];
    return ifft2_real(psi_inv.apply(w));
}

RealStack image_update_synthesis(const FreqBlockMatrix& psi_inv,
                                 const ComplexStack& rhs, const RealStack& synth,
                                 double t_scale) {
    if (!psi_inv.inverted())
        throw ContractViolationError("image_update_synthesis: system not inverted");
    if (psi_inv.c() != t_scale)
        throw ContractViolationError(
            "image_update_synthesis: system assembled with c != t_scale");
    ComplexStack w = fft2(synth);
    require_same_shape(w, rhs, "image_update_synthesis");
    for (size_t t = 0; t < w.size(); ++t) w.v[t] += rhs.v[t];
    return ifft2_real(psi_inv.apply(w));
}

}  // namespace civs
