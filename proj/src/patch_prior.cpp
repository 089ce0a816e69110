#include "civs/patch_prior.hpp"

#include <cmath>
#include <fstream>

#include "civs/admm.hpp"
#include "civs/container.hpp"
#include "civs/prox.hpp"
#include "civs/rng.hpp"

#include "json.hpp"

namespace civs {

PatchGeometry PatchGeometry::make(int q, int t, int stride, PatchMode mode,
                                  bool wrap, int n, int s) {
    if (mode == PatchMode::PerSlice && t != 1)
        throw InvalidArgument("PatchGeometry: per-slice mode requires t = 1");
    if (q < 1 || t < 1 || stride < 1)
        throw InvalidArgument("PatchGeometry: q, t, stride must be >= 1");
    if (q > n) throw DimensionError("PatchGeometry: patch side exceeds grid");
    if (t > s) throw DimensionError("PatchGeometry: patch depth exceeds stack");

    PatchGeometry g;
    g.q = q;
    g.t = t;
    g.stride = stride;
    g.mode = mode;
    g.wrap = wrap;
    g.n = n;
    g.s = s;

    const int d_hi = wrap ? s - 1 : s - t;
    const int rc_hi = wrap ? n - 1 : n - q;
    for (int d = 0; d <= d_hi; ++d)
        for (int r = 0; r <= rc_hi; r += stride)
            for (int c = 0; c <= rc_hi; c += stride)
                g.positions.push_back({r, c, d});
    g.J = static_cast<int>(g.positions.size());

    // Coverage count per voxel; a uniform count is the P^H P scale.
    std::vector<int> cover(size_t(n) * n * s, 0);
    for (const auto& pos : g.positions)
        for (int dz = 0; dz < t; ++dz)
            for (int dr = 0; dr < q; ++dr)
                for (int dc = 0; dc < q; ++dc) {
                    const int rr = (pos[0] + dr) % n;
                    const int cc = (pos[1] + dc) % n;
                    const int dd = (pos[2] + dz) % s;
                    ++cover[(size_t(dd) * n + rr) * n + cc];
                }
    const int first = cover[0];
    bool uniform = first > 0;
    for (int cval : cover)
        if (cval != first) {
            uniform = false;
            break;
        }
    g.t_scale = uniform ? double(first) : -1.0;
    return g;
}

namespace {

void require_bound(const RealStack& x, const PatchGeometry& g, const char* what) {
    if (x.rows != g.n || x.cols != g.n || x.depth != g.s)
        throw DimensionError(std::string(what) +
                             ": stack does not match patch geometry dims");
}

}  // namespace

Eigen::MatrixXd extract_patches(const RealStack& x, const PatchGeometry& g) {
    require_bound(x, g, "extract_patches");
    Eigen::MatrixXd p(g.patch_len(), g.J);
    for (int j = 0; j < g.J; ++j) {
        const auto& pos = g.positions[j];
        int row = 0;
        for (int dz = 0; dz < g.t; ++dz) {
            const int dd = (pos[2] + dz) % g.s;
            for (int dr = 0; dr < g.q; ++dr) {
                const int rr = (pos[0] + dr) % g.n;
                for (int dc = 0; dc < g.q; ++dc) {
                    const int cc = (pos[1] + dc) % g.n;
                    p(row++, j) = x.at(rr, cc, dd);
                }
            }
        }
    }
    return p;
}

RealStack aggregate_patches(const Eigen::MatrixXd& p, const PatchGeometry& g) {
    if (p.rows() != g.patch_len() || p.cols() != g.J)
        throw DimensionError("aggregate_patches: patch matrix shape mismatch");
    RealStack x(g.n, g.n, g.s);
    for (int j = 0; j < g.J; ++j) {
        const auto& pos = g.positions[j];
        int row = 0;
        for (int dz = 0; dz < g.t; ++dz) {
            const int dd = (pos[2] + dz) % g.s;
            for (int dr = 0; dr < g.q; ++dr) {
                const int rr = (pos[0] + dr) % g.n;
                for (int dc = 0; dc < g.q; ++dc) {
                    const int cc = (pos[1] + dc) % g.n;
                    x.at(rr, cc, dd) += p(row++, j);
                }
            }
        }
    }
    return x;
}

PatchDictionary random_patch_dictionary(int patch_len, int atoms, uint64_t seed) {
    if (patch_len < 1 || atoms < 1)
        throw InvalidArgument("random_patch_dictionary: sizes must be >= 1");
    Rng rng(seed);
    PatchDictionary dict;
    dict.D.resize(patch_len, atoms);
    for (int c = 0; c < atoms; ++c)
        for (int r = 0; r < patch_len; ++r) dict.D(r, c) = rng.gaussian();
    dict.D /= dict.D.norm();
    return dict;
}

Eigen::MatrixXd patch_code_update(const PatchDictionary& dict,
                                  const Eigen::MatrixXd& x_patches,
                                  const Eigen::MatrixXd& t_aux,
                                  const Eigen::MatrixXd& u_dual, double rho) {
    if (rho <= 0.0) throw InvalidArgument("patch_code_update: rho must be > 0");
    const auto atoms = dict.D.cols();
    if (x_patches.rows() != dict.D.rows())
        throw DimensionError("patch_code_update: patch length mismatch");
    if (t_aux.rows() != atoms || u_dual.rows() != atoms ||
        t_aux.cols() != x_patches.cols() || u_dual.cols() != x_patches.cols())
        throw DimensionError("patch_code_update: code shape mismatch");

    Eigen::MatrixXd gram = dict.D.transpose() * dict.D;
    gram.diagonal().array() += rho;
    Eigen::LLT<Eigen::MatrixXd> llt(gram);
    if (llt.info() != Eigen::Success)
        throw SingularityError("patch_code_update: Gram factorization failed");
    return llt.solve(dict.D.transpose() * x_patches + rho * (t_aux - u_dual));
}

PatchDictStep patch_dict_update(const Eigen::MatrixXd& x_patches,
                                const Eigen::MatrixXd& z,
                                const Eigen::MatrixXd& g_prev,
                                const Eigen::MatrixXd& e_prev, double sigma) {
    if (sigma <= 0.0) throw InvalidArgument("patch_dict_update: sigma must be > 0");
    if (x_patches.cols() != z.cols())
        throw DimensionError("patch_dict_update: patch/code count mismatch");
    if (g_prev.rows() != x_patches.rows() || g_prev.cols() != z.rows() ||
        e_prev.rows() != g_prev.rows() || e_prev.cols() != g_prev.cols())
        throw DimensionError("patch_dict_update: dictionary shape mismatch");

    Eigen::MatrixXd m = z * z.transpose();
    m.diagonal().array() += sigma;
    Eigen::LLT<Eigen::MatrixXd> llt(m);
    if (llt.info() != Eigen::Success)
        throw SingularityError("patch_dict_update: code Gram factorization failed");

    PatchDictStep step;
    const Eigen::MatrixXd rhs = x_patches * z.transpose() + sigma * (g_prev - e_prev);
    step.D = llt.solve(rhs.transpose()).transpose();  // D = rhs * m^{-1}

    Eigen::MatrixXd de = step.D + e_prev;
    const double nrm = de.norm();
    if (nrm < 1e-14)
        throw SingularityError("patch_dict_update: D + E vanished; cannot project");
    step.G = de / nrm;
    step.E = e_prev + step.D - step.G;
    return step;
}

RealStack dict_synth_term(const PatchDictionary& dict, const Eigen::MatrixXd& z,
                          const PatchGeometry& g) {
    if (z.rows() != dict.D.cols())
        throw DimensionError("dict_synth_term: code/atom count mismatch");
    return aggregate_patches(dict.D * z, g);
}

PatchDictionary train_patch_dict(const std::vector<RealStack>& training,
                                 const PatchGeometry& g,
                                 const PatchTrainOptions& opts) {
    if (training.empty())
        throw InvalidArgument("train_patch_dict: no training stacks");
    if (opts.lambda < 0 || opts.rho0 <= 0 || opts.sigma0 <= 0 || opts.max_outer < 1)
        throw InvalidArgument("train_patch_dict: bad options");

    // Gather training patches from all stacks into one matrix.
    Eigen::MatrixXd x(g.patch_len(), 0);
    for (const auto& stack : training) {
        Eigen::MatrixXd p = extract_patches(stack, g);
        const auto old = x.cols();
        x.conservativeResize(Eigen::NoChange, old + p.cols());
        x.rightCols(p.cols()) = p;
    }
    const auto J = x.cols();

    const int atoms = opts.atoms > 0 ? opts.atoms : g.patch_len();
    PatchDictionary dict = random_patch_dictionary(g.patch_len(), atoms, opts.seed);

    Eigen::MatrixXd t_aux = Eigen::MatrixXd::Zero(atoms, J);
    Eigen::MatrixXd u_dual = Eigen::MatrixXd::Zero(atoms, J);
    Eigen::MatrixXd g_state = dict.D;
    Eigen::MatrixXd e_state = Eigen::MatrixXd::Zero(g_state.rows(), g_state.cols());

    double rho = opts.rho0, sigma = opts.sigma0;
    for (int outer = 0; outer < opts.max_outer; ++outer) {
        // One sparse-coding ADMM round at fixed dictionary.
        Eigen::MatrixXd z = patch_code_update(dict, x, t_aux, u_dual, rho);
        Eigen::MatrixXd t_prev = t_aux;
        Eigen::MatrixXd zu = z + u_dual;
        t_aux = zu.unaryExpr(
            [tau = opts.lambda / rho](double v) { return soft_threshold(v, tau); });
        u_dual = zu - t_aux;

        if (opts.adapt) {
            const double r_norm = (z - t_aux).norm();
            const double s_norm = rho * (t_aux - t_prev).norm();
            const double rho_new = adapt_penalty(rho, r_norm, s_norm);
            if (rho_new != rho) {
                u_dual *= rho / rho_new;
                rho = rho_new;
            }
        }

        // One dictionary-ADMM round at fixed codes.
        Eigen::MatrixXd g_prev_state = g_state;
        PatchDictStep step = patch_dict_update(x, z, g_state, e_state, sigma);
        g_state = step.G;
        e_state = step.E;
        if (opts.adapt) {
            const double r_norm = (step.D - step.G).norm();
            const double s_norm = sigma * (g_state - g_prev_state).norm();
            const double sigma_new = adapt_penalty(sigma, r_norm, s_norm);
            if (sigma_new != sigma) {
                e_state *= sigma / sigma_new;
                sigma = sigma_new;
            }
        }

        const double change = (g_state - dict.D).norm() / std::max(dict.D.norm(), 1e-30);
        dict.D = g_state;  // the feasible iterate is the active dictionary
        if (change < opts.tol && outer > 0) break;
    }
    return dict;
}

void save_patch_dictionary(const PatchDictionary& dict, const PatchGeometry& g,
                           const std::string& base_path) {
    RealStack flat(static_cast<int>(dict.D.rows()), static_cast<int>(dict.D.cols()), 1);
    for (int r = 0; r < dict.D.rows(); ++r)
        for (int c = 0; c < dict.D.cols(); ++c) flat.at(r, c, 0) = dict.D(r, c);
    write_container(base_path + ".civs", flat);

    nlohmann::json side;
    side["q"] = g.q;
    side["t"] = g.t;
    side["stride"] = g.stride;
    side["mode"] = g.mode == PatchMode::Volumetric ? "volumetric" : "per-slice";
    side["wrap"] = g.wrap;
    side["atoms"] = static_cast<int>(dict.D.cols());
    std::ofstream f(base_path + ".json");
    if (!f) throw IoError("save_patch_dictionary: cannot write " + base_path + ".json");
    f << side.dump(2) << "\n";
}

PatchDictionary load_patch_dictionary(const std::string& base_path,
                                      PatchGeometry* geom_out, int n, int s) {
    RealStack flat = read_container(base_path + ".civs");
    if (flat.depth != 1)
        throw IoError("load_patch_dictionary: dictionary container must have depth 1");
    PatchDictionary dict;
    dict.D.resize(flat.rows, flat.cols);
    for (int r = 0; r < flat.rows; ++r)
        for (int c = 0; c < flat.cols; ++c) dict.D(r, c) = flat.at(r, c, 0);

    if (geom_out) {
        std::ifstream f(base_path + ".json");
        if (!f) throw IoError("load_patch_dictionary: cannot open " + base_path + ".json");
        nlohmann::json side;
        try {
            f >> side;
        } catch (const nlohmann::json::exception& e) {
            throw IoError("load_patch_dictionary: bad sidecar JSON: " +
                          std::string(e.what()));
        }
        const std::string mode = side.at("mode").get<std::string>();
        *geom_out = PatchGeometry::make(
            side.at("q").get<int>(), side.at("t").get<int>(),
            side.at("stride").get<int>(),
            mode == "per-slice" ? PatchMode::PerSlice : PatchMode::Volumetric,
            side.at("wrap").get<bool>(), n, s);
        if (geom_out->patch_len() != flat.rows)
            throw DimensionError(
                "load_patch_dictionary: geometry does not match dictionary rows");
    }
    return dict;
}

}  // namespace civs
