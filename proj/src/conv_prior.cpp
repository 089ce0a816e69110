#include "civs/conv_prior.hpp"

#include <cmath>
#include <complex>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include "civs/admm.hpp"
#include "civs/container.hpp"
#include "civs/fft.hpp"
#include "civs/prox.hpp"
#include "civs/rng.hpp"

#include "json.hpp"

namespace civs {

namespace {

using Cplx = std::complex<double>;

constexpr double kTwoPi = 6.28318530717958647692528676655900577;

// Unitary -> unnormalized DFT factor for the given transform size.
double eigen_scale(int n, int s) { return std::sqrt(double(n) * n * s); }

ComplexStack operator_spectrum(const RealStack& embedded, ConvMode mode) {
    if (mode == ConvMode::Volumetric) {
        ComplexStack sp = fft3(embedded);
        const double f = eigen_scale(embedded.rows, embedded.depth);
        for (auto& z : sp.v) z *= f;
        return sp;
    }
    ComplexStack sp = fft2(embedded);
    const double f = std::sqrt(double(embedded.rows) * embedded.cols);
    for (auto& z : sp.v) z *= f;
    return sp;
}

void require_code_shape(const ConvCodeSet& c, int M, int n, int s,
                        const char* what) {
    if (static_cast<int>(c.z.size()) != M)
        throw DimensionError(std::string(what) + ": code count mismatch");
    for (const auto& zm : c.z)
        if (zm.rows != n || zm.cols != n || zm.depth != s)
            throw DimensionError(std::string(what) + ": code stack shape mismatch");
}

// Solves (sigma I + sum_p psi_p psi_p^H) v = b by folding in one rank-one
// update after another. psis holds P rows of length M; w and denom are the
// cached intermediate solves. With sigma > 0 every denominator is >= 1.
class IteratedSm {
  public:
    IteratedSm(double sigma, const std::vector<std::vector<Cplx>>& psis)
        : sigma_(sigma), psis_(psis) {
        const size_t P = psis.size();
        w_.resize(P);
        denom_.resize(P);
        for (size_t p = 0; p < P; ++p) {
            w_[p] = solve_upto(p, psis_[p]);
            Cplx acc = 0.0;
            for (size_t m = 0; m < w_[p].size(); ++m)
                acc += std::conj(psis_[p][m]) * w_[p][m];
            denom_[p] = 1.0 + acc;
        }
    }

    std::vector<Cplx> solve(const std::vector<Cplx>& b) const {
        return solve_upto(psis_.size(), b);
    }

  private:
    std::vector<Cplx> solve_upto(size_t count, const std::vector<Cplx>& b) const {
        std::vector<Cplx> x(b.size());
        for (size_t m = 0; m < b.size(); ++m) x[m] = b[m] / sigma_;
        for (size_t i = 0; i < count; ++i) {
            Cplx proj = 0.0;
            for (size_t m = 0; m < x.size(); ++m)
                proj += std::conj(psis_[i][m]) * x[m];
            const Cplx f = proj / denom_[i];
            for (size_t m = 0; m < x.size(); ++m) x[m] -= f * w_[i][m];
        }
        return x;
    }

    double sigma_;
    const std::vector<std::vector<Cplx>>& psis_;
    std::vector<std::vector<Cplx>> w_;
    std::vector<Cplx> denom_;
};

}  // namespace

RealStack embed_filter(const RealStack& filter, int n, int s) {
    if (filter.rows > n || filter.cols > n || filter.depth > s)
        throw DimensionError("embed_filter: filter support exceeds grid");
    RealStack out(n, n, s);
    for (int d = 0; d < filter.depth; ++d)
        for (int r = 0; r < filter.rows; ++r)
            for (int c = 0; c < filter.cols; ++c)
                out.at(r, c, d) = filter.at(r, c, d);
    return out;
}

RealStack crop_filter(const RealStack& full, int L, int R) {
    if (L > full.rows || L > full.cols || R > full.depth)
        throw DimensionError("crop_filter: support exceeds grid");
    RealStack out(L, L, R);
    for (int d = 0; d < R; ++d)
        for (int r = 0; r < L; ++r)
            for (int c = 0; c < L; ++c) out.at(r, c, d) = full.at(r, c, d);
    return out;
}

ConvDictionary ConvDictionary::create(std::vector<RealStack> filters,
                                      ConvMode mode, int n, int s) {
    if (filters.empty()) throw InvalidArgument("ConvDictionary: no filters");
    ConvDictionary dict;
    dict.M = static_cast<int>(filters.size());
    dict.L = filters[0].rows;
    dict.R = filters[0].depth;
    dict.mode = mode;
    dict.n = n;
    dict.s = s;
    if (mode == ConvMode::PerSlice && dict.R != 1)
        throw InvalidArgument("ConvDictionary: per-slice filters must have depth 1");
    for (const auto& f : filters) {
        if (f.rows != dict.L || f.cols != dict.L || f.depth != dict.R)
            throw DimensionError("ConvDictionary: filters must share support");
        if (f.rows > n || f.depth > s)
            throw DimensionError("ConvDictionary: filter support exceeds problem");
    }
    dict.filters = std::move(filters);
    dict.rebuild_spectra();
    return dict;
}

ConvDictionary ConvDictionary::random(int M, int L, int R, ConvMode mode, int n,
                                      int s, uint64_t seed) {
    if (M < 1 || L < 1 || R < 1)
        throw InvalidArgument("ConvDictionary::random: sizes must be >= 1");
    Rng rng(seed);
    std::vector<RealStack> filters;
    filters.reserve(M);
    for (int m = 0; m < M; ++m) {
        RealStack f(L, L, mode == ConvMode::PerSlice ? 1 : R);
        for (double& x : f.v) x = rng.gaussian();
        const double nrm = norm2(f);
        if (nrm > 0) scale_inplace(f, 1.0 / nrm);
        filters.push_back(std::move(f));
    }
    return create(std::move(filters), mode, n, s);
}

void ConvDictionary::rebuild_spectra() {
    spectra.clear();
    spectra.reserve(M);
    for (const auto& f : filters) {
        RealStack embedded = mode == ConvMode::Volumetric
                                 ? embed_filter(f, n, s)
                                 : embed_filter(f, n, 1);
        spectra.push_back(operator_spectrum(embedded, mode));
    }
}

ConvCodeSet ConvCodeSet::zeros(int M, int n, int s) {
    ConvCodeSet c;
    c.z.assign(M, RealStack(n, n, s));
    return c;
}

TikhonovSpec TikhonovSpec::make(double mu, ConvMode mode, int n, int s) {
    if (mu < 0.0) throw InvalidArgument("TikhonovSpec: mu must be >= 0");
    TikhonovSpec t;
    t.mu = mu;
    const int depth = mode == ConvMode::Volumetric ? s : 1;
    t.grad_spectra = RealStack(n, n, depth);
    // |1 - exp(-2 pi i k / n)|^2 = 2 - 2 cos(2 pi k / n) along each axis.
    auto line = [](int k, int len) {
        return len > 1 ? 2.0 - 2.0 * std::cos(kTwoPi * k / len) : 0.0;
    };
    for (int d = 0; d < depth; ++d)
        for (int r = 0; r < n; ++r)
            for (int c = 0; c < n; ++c)
                t.grad_spectra.at(r, c, d) =
                    line(r, n) + line(c, n) +
                    (mode == ConvMode::Volumetric ? line(d, s) : 0.0);
    return t;
}

ConvCodeSet csc_code_update(const ConvDictionary& dict, const RealStack& x,
                            const ConvCodeSet& t_aux, const ConvCodeSet& u_dual,
                            double rho, const TikhonovSpec& tik) {
    if (rho <= 0.0) throw InvalidArgument("csc_code_update: rho must be > 0");
    if (x.rows != dict.n || x.cols != dict.n || x.depth != dict.s)
        throw DimensionError("csc_code_update: image does not match dictionary dims");
    require_code_shape(t_aux, dict.M, dict.n, dict.s, "csc_code_update");
    require_code_shape(u_dual, dict.M, dict.n, dict.s, "csc_code_update");
    const int tik_depth = dict.mode == ConvMode::Volumetric ? dict.s : 1;
    if (tik.grad_spectra.rows != dict.n || tik.grad_spectra.cols != dict.n ||
        tik.grad_spectra.depth != tik_depth)
        throw DimensionError(
            "csc_code_update: Tikhonov spectra do not match dictionary dims");

    const int M = dict.M;
    const bool vol = dict.mode == ConvMode::Volumetric;

    // Spectra of the data and of t - u, per filter; unknown code spectra land
    // in vhat. In per-slice mode all three are per-slice 2D transforms.
    ComplexStack xhat = vol ? fft3(x) : fft2(x);
    std::vector<ComplexStack> tu_hat;
    tu_hat.reserve(M);
    for (int m = 0; m < M; ++m) {
        RealStack tu = add_scaled(t_aux.z[m], -1.0, u_dual.z[m]);
        tu_hat.push_back(vol ? fft3(tu) : fft2(tu));
    }
    std::vector<ComplexStack> vhat(M, ComplexStack(dict.n, dict.n, dict.s));

    const size_t bins2 = size_t(dict.n) * dict.n;
    const int slice_count = vol ? 1 : dict.s;
    const size_t bins = vol ? bins2 * dict.s : bins2;

    std::vector<Cplx> c(M), psi(M);
    for (int sl = 0; sl < slice_count; ++sl) {
        for (size_t b = 0; b < bins; ++b) {
            // Spectra of the dictionary and the Tikhonov weights are indexed
            // by the plain bin (they are 2D in per-slice mode); data arrays
            // by the slice-offset bin.
            const size_t off = vol ? b : size_t(sl) * bins2 + b;
            const size_t spec_off = b;
            const double e = rho + tik.mu * tik.grad_spectra.v[spec_off];

            Cplx psi_dot_c = 0.0;
            double psi_norm2 = 0.0;
            for (int m = 0; m < M; ++m) {
                const Cplx theta = dict.spectra[m].v[spec_off];
                psi[m] = std::conj(theta);
                c[m] = psi[m] * xhat.v[off] + rho * tu_hat[m].v[off];
                psi_dot_c += std::conj(psi[m]) * c[m];
                psi_norm2 += std::norm(psi[m]);
            }
            const Cplx f = psi_dot_c / (e + psi_norm2);
            for (int m = 0; m < M; ++m)
                vhat[m].v[off] = (c[m] - f * psi[m]) / e;
        }
    }

    ConvCodeSet out;
    out.z.reserve(M);
    for (int m = 0; m < M; ++m)
        out.z.push_back(vol ? ifft3_real(vhat[m]) : ifft2_real(vhat[m]));
    return out;
}

RealStack conv_synth(const ConvDictionary& dict, const ConvCodeSet& z) {
    require_code_shape(z, dict.M, dict.n, dict.s, "conv_synth");
    const bool vol = dict.mode == ConvMode::Volumetric;
    ComplexStack acc(dict.n, dict.n, dict.s);
    const size_t bins2 = size_t(dict.n) * dict.n;
    for (int m = 0; m < dict.M; ++m) {
        ComplexStack zf = vol ? fft3(z.z[m]) : fft2(z.z[m]);
        for (size_t i = 0; i < zf.size(); ++i) {
            const size_t spec_off = vol ? i : i % bins2;
            acc.v[i] += dict.spectra[m].v[spec_off] * zf.v[i];
        }
    }
    return vol ? ifft3_real(acc) : ifft2_real(acc);
}

ConvDictStep conv_dict_update(const ConvDictionary& dict,
                              const std::vector<ConvTrainPair>& pairs,
                              const std::vector<RealStack>& g_prev,
                              const std::vector<RealStack>& e_prev, double sigma) {
    if (sigma <= 0.0) throw InvalidArgument("conv_dict_update: sigma must be > 0");
    if (pairs.empty()) throw InvalidArgument("conv_dict_update: no training pairs");
    const int M = dict.M;
    const bool vol = dict.mode == ConvMode::Volumetric;
    const int n = dict.n;
    const int grid_depth = vol ? dict.s : 1;
    if (static_cast<int>(g_prev.size()) != M ||
        static_cast<int>(e_prev.size()) != M)
        throw DimensionError("conv_dict_update: dual state count mismatch");
    for (int m = 0; m < M; ++m) {
        if (g_prev[m].rows != n || g_prev[m].depth != grid_depth ||
            e_prev[m].rows != n || e_prev[m].depth != grid_depth)
            throw DimensionError("conv_dict_update: dual state shape mismatch");
    }

    // Per-pair spectra: codes as circulant eigenvalues, targets unitary.
    struct PairSpectra {
        std::vector<ComplexStack> gamma;  // M code spectra
        ComplexStack xhat;
    };
    std::vector<PairSpectra> ps;
    ps.reserve(pairs.size());
    for (const auto& pr : pairs) {
        if (!pr.z || !pr.x)
            throw InvalidArgument("conv_dict_update: null training pair");
        require_code_shape(*pr.z, M, n, dict.s, "conv_dict_update");
        if (pr.x->rows != n || pr.x->cols != n || pr.x->depth != dict.s)
            throw DimensionError("conv_dict_update: target shape mismatch");
        PairSpectra e;
        e.xhat = vol ? fft3(*pr.x) : fft2(*pr.x);
        const double f = vol ? eigen_scale(n, dict.s) : n;
        e.gamma.reserve(M);
        for (int m = 0; m < M; ++m) {
            ComplexStack gm = vol ? fft3(pr.z->z[m]) : fft2(pr.z->z[m]);
            for (auto& zc : gm.v) zc *= f;
            e.gamma.push_back(std::move(gm));
        }
        ps.push_back(std::move(e));
    }

    // g - e spectra (unitary) for the proximal part of the right-hand side.
    std::vector<ComplexStack> ge_hat;
    ge_hat.reserve(M);
    for (int m = 0; m < M; ++m) {
        RealStack ge = add_scaled(g_prev[m], -1.0, e_prev[m]);
        ge_hat.push_back(vol ? fft3(ge) : fft2(ge));
    }

    // Contributor list per bin: in volumetric mode one rank-one term per
    // pair; in per-slice mode one per (pair, slice).
    const size_t bins = size_t(n) * n * grid_depth;
    const size_t bins2 = size_t(n) * n;
    const int per_pair = vol ? 1 : dict.s;
    const size_t P = pairs.size() * per_pair;

    std::vector<ComplexStack> dhat(M, ComplexStack(n, n, grid_depth));
    std::vector<std::vector<Cplx>> psis(P, std::vector<Cplx>(M));
    std::vector<Cplx> rhs(M);

    for (size_t b = 0; b < bins; ++b) {
        for (int m = 0; m < M; ++m) rhs[m] = sigma * ge_hat[m].v[b];
        size_t p = 0;
        for (const auto& e : ps) {
            for (int sl = 0; sl < per_pair; ++sl, ++p) {
                const size_t off = vol ? b : size_t(sl) * bins2 + b;
                const Cplx xh = e.xhat.v[off];
                for (int m = 0; m < M; ++m) {
                    const Cplx gamma = e.gamma[m].v[off];
                    psis[p][m] = std::conj(gamma);
                    rhs[m] += std::conj(gamma) * xh;
                }
            }
        }
        IteratedSm solver(sigma, psis);
        const std::vector<Cplx> v = solver.solve(rhs);
        for (int m = 0; m < M; ++m) dhat[m].v[b] = v[m];
    }

    ConvDictStep step;
    step.d.reserve(M);
    step.g.reserve(M);
    step.e.reserve(M);
    for (int m = 0; m < M; ++m) {
        RealStack dm = vol ? ifft3_real(dhat[m]) : ifft2_real(dhat[m]);
        // Support projection + renormalization of d + e.
        RealStack de = add_scaled(dm, 1.0, e_prev[m]);
        RealStack cropped = crop_filter(de, dict.L, vol ? dict.R : 1);
        const double nrm = norm2(cropped);
        if (nrm < 1e-14)
            throw SingularityError(
                "conv_dict_update: filter vanished under support projection");
        scale_inplace(cropped, 1.0 / nrm);
        RealStack gm = embed_filter(cropped, n, grid_depth);
        RealStack em = e_prev[m];
        add_scaled_inplace(em, 1.0, dm);
        add_scaled_inplace(em, -1.0, gm);
        step.d.push_back(std::move(dm));
        step.g.push_back(std::move(gm));
        step.e.push_back(std::move(em));
    }
    return step;
}

ConvDictionary train_conv_dict(const std::vector<RealStack>& training,
                               const ConvTrainOptions& opts) {
    if (training.empty())
        throw InvalidArgument("train_conv_dict: no training stacks");
    if (opts.lambda < 0 || opts.rho0 <= 0 || opts.sigma0 <= 0 || opts.max_outer < 1)
        throw InvalidArgument("train_conv_dict: bad options");
    const int n = training[0].rows;
    const int s = training[0].depth;
    for (const auto& x : training)
        if (x.rows != n || x.cols != n || x.depth != s)
            throw DimensionError("train_conv_dict: training stacks differ in shape");

    ConvDictionary dict =
        ConvDictionary::random(opts.M, opts.L, opts.R, opts.mode, n, s, opts.seed);
    const TikhonovSpec tik = TikhonovSpec::make(opts.mu_tik, opts.mode, n, s);
    const int grid_depth = opts.mode == ConvMode::Volumetric ? s : 1;

    struct CodingState {
        ConvCodeSet z, t, u;
        double rho;
    };
    std::vector<CodingState> states;
    for (size_t i = 0; i < training.size(); ++i)
        states.push_back({ConvCodeSet::zeros(opts.M, n, s),
                          ConvCodeSet::zeros(opts.M, n, s),
                          ConvCodeSet::zeros(opts.M, n, s), opts.rho0});

    std::vector<RealStack> g_state, e_state;
    for (int m = 0; m < opts.M; ++m) {
        g_state.push_back(embed_filter(dict.filters[m], n, grid_depth));
        e_state.push_back(RealStack(n, n, grid_depth));
    }
    double sigma = opts.sigma0;

    for (int outer = 0; outer < opts.max_outer; ++outer) {
        // Sparse-coding rounds, one per training stack.
        for (size_t i = 0; i < training.size(); ++i) {
            auto& st = states[i];
            st.z = csc_code_update(dict, training[i], st.t, st.u, st.rho, tik);
            double r2 = 0.0, s2 = 0.0;
            for (int m = 0; m < opts.M; ++m) {
                RealStack zu = add_scaled(st.z.z[m], 1.0, st.u.z[m]);
                RealStack t_new = soft_threshold(zu, opts.lambda / st.rho);
                for (size_t k = 0; k < zu.size(); ++k) {
                    const double rr = st.z.z[m].v[k] - t_new.v[k];
                    const double ss = t_new.v[k] - st.t.z[m].v[k];
                    r2 += rr * rr;
                    s2 += ss * ss;
                    st.u.z[m].v[k] = zu.v[k] - t_new.v[k];
                }
                st.t.z[m] = std::move(t_new);
            }
            if (opts.adapt) {
                const double rho_new =
                    adapt_penalty(st.rho, std::sqrt(r2), st.rho * std::sqrt(s2));
                if (rho_new != st.rho) {
                    for (auto& um : st.u.z) scale_inplace(um, st.rho / rho_new);
                    st.rho = rho_new;
                }
            }
        }

        // One dictionary round over all stacks.
        std::vector<ConvTrainPair> pairs;
        pairs.reserve(training.size());
        for (size_t i = 0; i < training.size(); ++i)
            pairs.push_back({&states[i].z, &training[i]});
        std::vector<RealStack> g_old = g_state;
        ConvDictStep step = conv_dict_update(dict, pairs, g_state, e_state, sigma);
        g_state = step.g;
        e_state = step.e;

        double change2 = 0.0, base2 = 0.0;
        for (int m = 0; m < opts.M; ++m) {
            RealStack cropped = crop_filter(g_state[m], opts.L,
                                            opts.mode == ConvMode::Volumetric
                                                ? opts.R
                                                : 1);
            base2 += norm2_sq(dict.filters[m]);
            RealStack diff = add_scaled(cropped, -1.0, dict.filters[m]);
            change2 += norm2_sq(diff);
            dict.filters[m] = std::move(cropped);
        }
        dict.rebuild_spectra();

        if (opts.adapt) {
            double r2 = 0.0, s2 = 0.0;
            for (int m = 0; m < opts.M; ++m) {
                RealStack dg = add_scaled(step.d[m], -1.0, step.g[m]);
                r2 += norm2_sq(dg);
                RealStack gg = add_scaled(g_state[m], -1.0, g_old[m]);
                s2 += norm2_sq(gg);
            }
            const double sigma_new =
                adapt_penalty(sigma, std::sqrt(r2), sigma * std::sqrt(s2));
            if (sigma_new != sigma) {
                for (auto& em : e_state) scale_inplace(em, sigma / sigma_new);
                sigma = sigma_new;
            }
        }

        if (outer > 0 && std::sqrt(change2) < opts.tol * std::sqrt(std::max(base2, 1e-30)))
            break;
    }
    return dict;
}

void save_conv_dictionary(const ConvDictionary& dict, const std::string& dir) {
    namespace fs = std::filesystem;
    fs::create_directories(dir);
    nlohmann::json manifest;
    manifest["M"] = dict.M;
    manifest["L"] = dict.L;
    manifest["R"] = dict.R;
    manifest["mode"] = dict.mode == ConvMode::Volumetric ? "volumetric" : "per-slice";
    manifest["anchor"] = "corner";
    auto paths = nlohmann::json::array();
    for (int m = 0; m < dict.M; ++m) {
        char name[64];
        std::snprintf(name, sizeof name, "filter_%03d.civs", m);
        write_container((fs::path(dir) / name).string(), dict.filters[m]);
        paths.push_back(name);
    }
    manifest["filters"] = paths;
    std::ofstream f(fs::path(dir) / "manifest.json");
    if (!f) throw IoError("save_conv_dictionary: cannot write manifest in " + dir);
    f << manifest.dump(2) << "\n";
}

ConvDictionary load_conv_dictionary(const std::string& dir, int n, int s) {
    namespace fs = std::filesystem;
    std::ifstream f(fs::path(dir) / "manifest.json");
    if (!f) throw IoError("load_conv_dictionary: cannot open manifest in " + dir);
    nlohmann::json manifest;
    try {
        f >> manifest;
    } catch (const nlohmann::json::exception& e) {
        throw IoError("load_conv_dictionary: bad manifest JSON: " +
                      std::string(e.what()));
    }
    const std::string mode_str = manifest.at("mode").get<std::string>();
    const ConvMode mode =
        mode_str == "volumetric" ? ConvMode::Volumetric : ConvMode::PerSlice;
    std::vector<RealStack> filters;
    for (const auto& rel : manifest.at("filters"))
        filters.push_back(
            read_container((fs::path(dir) / rel.get<std::string>()).string()));
    return ConvDictionary::create(std::move(filters), mode, n, s);
}

}  // namespace civs
