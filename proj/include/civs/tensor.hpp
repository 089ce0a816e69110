#pragma once

#include <complex>
#include <cstddef>
#include <vector>

#include "civs/errors.hpp"

namespace civs {

// ---------------------------------------------------------------------------
// Dense 3D arrays
//
// A "stack" is a contiguous 3D array of `depth` slices, each `rows` x `cols`,
// stored slice-major with row-major slices:  v[(s*rows + r)*cols + c].
// Image stacks are square (rows == cols == N); the generic shape is kept so
// the same container can hold kernels at native support, dictionary matrices
// and other rectangular payloads.
// ---------------------------------------------------------------------------

template <typename Scalar>
struct Stack {
    int rows = 0;
    int cols = 0;
    int depth = 0;
    std::vector<Scalar> v;

    Stack() = default;
    Stack(int rows_, int cols_, int depth_)
        : rows(rows_), cols(cols_), depth(depth_) {
        if (rows_ < 1 || cols_ < 1 || depth_ < 1)
            throw DimensionError("Stack: all dimensions must be >= 1");
        v.assign(static_cast<size_t>(rows_) * cols_ * depth_, Scalar(0));
    }

    static Stack zeros(int rows_, int cols_, int depth_) {
        return Stack(rows_, cols_, depth_);
    }

    size_t size() const { return v.size(); }
    size_t slice_size() const { return static_cast<size_t>(rows) * cols; }

    Scalar* data() { return v.data(); }
    const Scalar* data() const { return v.data(); }
    Scalar* slice(int s) { return v.data() + slice_size() * s; }
    const Scalar* slice(int s) const { return v.data() + slice_size() * s; }

    Scalar& at(int r, int c, int s) {
        return v[(static_cast<size_t>(s) * rows + r) * cols + c];
    }
    const Scalar& at(int r, int c, int s) const {
        return v[(static_cast<size_t>(s) * rows + r) * cols + c];
    }

    bool same_shape(const Stack& o) const {
        return rows == o.rows && cols == o.cols && depth == o.depth;
    }
    bool square() const { return rows == cols; }
};

using RealStack = Stack<double>;
using ComplexStack = Stack<std::complex<double>>;

// Throws DimensionError with `what` as context when shapes differ.
template <typename A, typename B>
void require_same_shape(const Stack<A>& a, const Stack<B>& b, const char* what) {
    if (a.rows != b.rows || a.cols != b.cols || a.depth != b.depth)
        throw DimensionError(std::string(what) + ": shape mismatch");
}

// --- small elementwise helpers used throughout the solvers -----------------

double dot(const RealStack& a, const RealStack& b);
double norm2(const RealStack& a);       // Euclidean norm over all entries
double norm2_sq(const RealStack& a);
double max_abs(const RealStack& a);

// r = a + alpha * b  (shapes must match)
RealStack add_scaled(const RealStack& a, double alpha, const RealStack& b);
void scale_inplace(RealStack& a, double alpha);
void add_scaled_inplace(RealStack& a, double alpha, const RealStack& b);

bool all_finite(const RealStack& a);

}  // namespace civs
