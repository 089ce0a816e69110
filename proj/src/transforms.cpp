#include "civs/transforms.hpp"

#include <cmath>
#include <cstring>

namespace civs {

namespace {

constexpr double kPi = 3.14159265358979323846264338327950288;

bool is_power_of_two(int n) { return n >= 1 && (n & (n - 1)) == 0; }

// ||M^T M - I||_max for a row-major square matrix.
double orthonormality_defect(const std::vector<double>& m, int n) {
    double worst = 0.0;
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
            double acc = 0.0;
            for (int k = 0; k < n; ++k) acc += m[k * n + i] * m[k * n + j];
            worst = std::max(worst, std::abs(acc - (i == j ? 1.0 : 0.0)));
        }
    return worst;
}

// out = M * in for column vectors packed with the given stride.
void apply_matrix(const std::vector<double>& m, int n, const double* in,
                  ptrdiff_t stride, double* out, ptrdiff_t out_stride) {
    for (int i = 0; i < n; ++i) {
        double acc = 0.0;
        const double* row = m.data() + size_t(i) * n;
        for (int k = 0; k < n; ++k) acc += row[k] * in[k * stride];
        out[i * out_stride] = acc;
    }
}

// out = M^T * in.
void apply_matrix_t(const std::vector<double>& m, int n, const double* in,
                    ptrdiff_t stride, double* out, ptrdiff_t out_stride) {
    for (int i = 0; i < n; ++i) {
        double acc = 0.0;
        for (int k = 0; k < n; ++k) acc += m[size_t(k) * n + i] * in[k * stride];
        out[i * out_stride] = acc;
    }
}

enum class Dir { Forward, Adjoint };

// Applies the basis separably to rows and columns of every slice, then
// (if present) along the depth axis.
RealStack run_transform(const RealStack& x, const std::vector<double>& spatial,
                        const std::vector<double>& depth, Dir dir) {
    RealStack out = x;
    const int n = x.rows;
    std::vector<double> tmp(n);

    if (!spatial.empty()) {
        for (int s = 0; s < x.depth; ++s) {
            double* sl = out.slice(s);
            for (int r = 0; r < n; ++r) {  // rows: transform each row vector
                if (dir == Dir::Forward)
                    apply_matrix(spatial, n, sl + size_t(r) * n, 1, tmp.data(), 1);
                else
                    apply_matrix_t(spatial, n, sl + size_t(r) * n, 1, tmp.data(), 1);
                std::memcpy(sl + size_t(r) * n, tmp.data(), n * sizeof(double));
            }
            for (int c = 0; c < n; ++c) {  // columns
                if (dir == Dir::Forward)
                    apply_matrix(spatial, n, sl + c, n, tmp.data(), 1);
                else
                    apply_matrix_t(spatial, n, sl + c, n, tmp.data(), 1);
                for (int r = 0; r < n; ++r) sl[size_t(r) * n + c] = tmp[r];
            }
        }
    }

    if (!depth.empty()) {
        const int S = x.depth;
        std::vector<double> dt(S);
        const ptrdiff_t stride = out.slice_size();
        for (size_t px = 0; px < out.slice_size(); ++px) {
            double* col = out.data() + px;
            if (dir == Dir::Forward)
                apply_matrix(depth, S, col, stride, dt.data(), 1);
            else
                apply_matrix_t(depth, S, col, stride, dt.data(), 1);
            for (int s = 0; s < S; ++s) col[s * stride] = dt[s];
        }
    }
    return out;
}

std::vector<double> basis_by_name(const std::string& name, int n,
                                  const char* axis) {
    if (name == "identity") return {};
    if (name == "dct1" || name == "dct2" || name == "dct3") return dct_matrix(n);
    if (name == "haar1" || name == "haar2") return haar_matrix(n);
    throw InvalidArgument(std::string("TransformOracle: unknown ") + axis +
                          " basis '" + name + "'");
}

}  // namespace

std::vector<double> dct_matrix(int n) {
    if (n < 1) throw InvalidArgument("dct_matrix: size must be >= 1");
    std::vector<double> m(size_t(n) * n);
    const double c0 = std::sqrt(1.0 / n);
    const double ck = std::sqrt(2.0 / n);
    for (int k = 0; k < n; ++k)
        for (int j = 0; j < n; ++j)
            m[size_t(k) * n + j] =
                (k == 0 ? c0 : ck) * std::cos(kPi * (2 * j + 1) * k / (2.0 * n));
    return m;
}

std::vector<double> haar_matrix(int n) {
    if (!is_power_of_two(n))
        throw InvalidArgument("haar_matrix: size must be a power of two");
    // Iterative Kronecker construction of the normalized Haar matrix:
    // H_{2m} = [ H_m (x) [1 1]/sqrt(2) ; I_m (x) [1 -1]/sqrt(2) ].
    std::vector<double> h = {1.0};
    int m = 1;
    const double inv_sqrt2 = 1.0 / std::sqrt(2.0);
    while (m < n) {
        std::vector<double> next(size_t(2 * m) * (2 * m), 0.0);
        for (int i = 0; i < m; ++i)
            for (int j = 0; j < m; ++j) {
                const double v = h[size_t(i) * m + j] * inv_sqrt2;
                next[size_t(i) * 2 * m + 2 * j] = v;
                next[size_t(i) * 2 * m + 2 * j + 1] = v;
            }
        for (int i = 0; i < m; ++i) {
            next[size_t(m + i) * 2 * m + 2 * i] = inv_sqrt2;
            next[size_t(m + i) * 2 * m + 2 * i + 1] = -inv_sqrt2;
        }
        h = std::move(next);
        m *= 2;
    }
    return h;
}

TransformOracle TransformOracle::from_config(const std::string& name, int n,
                                             int depth) {
    if (name == "identity") {
        TransformOracle t;
        t.n_ = n;
        t.depth_n_ = depth;
        return t;
    }
    std::string spatial_name, depth_name = "identity";
    if (name.rfind("kron:", 0) == 0) {
        const std::string body = name.substr(5);
        const auto plus = body.find('+');
        if (plus == std::string::npos)
            throw InvalidArgument(
                "TransformOracle: kron spec must look like kron:haar2+dct1");
        spatial_name = body.substr(0, plus);
        depth_name = body.substr(plus + 1);
    } else if (name == "dct2" || name == "haar2") {
        spatial_name = name;
    } else if (name == "dct3") {
        spatial_name = "dct2";
        depth_name = "dct1";
    } else {
        throw InvalidArgument("TransformOracle: unknown transform '" + name + "'");
    }
    TransformOracle t;
    t.spatial_ = basis_by_name(spatial_name, n, "spatial");
    t.depth_ = basis_by_name(depth_name, depth, "depth");
    t.n_ = n;
    t.depth_n_ = depth;
    return t;
}

TransformOracle TransformOracle::custom(std::vector<double> spatial, int n,
                                        std::vector<double> depth_basis,
                                        int depth) {
    TransformOracle t;
    if (!spatial.empty()) {
        if (static_cast<int>(spatial.size()) != n * n)
            throw DimensionError("TransformOracle: spatial basis size mismatch");
        if (orthonormality_defect(spatial, n) > 1e-10)
            throw InvalidArgument("TransformOracle: spatial basis not orthonormal");
    }
    if (!depth_basis.empty()) {
        if (static_cast<int>(depth_basis.size()) != depth * depth)
            throw DimensionError("TransformOracle: depth basis size mismatch");
        if (orthonormality_defect(depth_basis, depth) > 1e-10)
            throw InvalidArgument("TransformOracle: depth basis not orthonormal");
    }
    t.spatial_ = std::move(spatial);
    t.depth_ = std::move(depth_basis);
    t.n_ = n;
    t.depth_n_ = depth;
    return t;
}

RealStack TransformOracle::apply(const RealStack& x) const {
    if (!x.square()) throw DimensionError("TransformOracle: slices must be square");
    if (!spatial_.empty() && x.rows != n_)
        throw DimensionError("TransformOracle: stack size does not match basis");
    if (!depth_.empty() && x.depth != depth_n_)
        throw DimensionError("TransformOracle: stack depth does not match basis");
    if (is_identity()) return x;
    return run_transform(x, spatial_, depth_, Dir::Forward);
}

RealStack TransformOracle::adjoint(const RealStack& c) const {
    if (!c.square()) throw DimensionError("TransformOracle: slices must be square");
    if (!spatial_.empty() && c.rows != n_)
        throw DimensionError("TransformOracle: stack size does not match basis");
    if (!depth_.empty() && c.depth != depth_n_)
        throw DimensionError("TransformOracle: stack depth does not match basis");
    if (is_identity()) return c;
    return run_transform(c, spatial_, depth_, Dir::Adjoint);
}

}  // namespace civs
