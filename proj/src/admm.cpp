#include "civs/admm.hpp"

#include <chrono>
#include <cmath>

#include "civs/fft.hpp"

#include "json.hpp"

namespace civs {

double adapt_penalty(double rho, double r_norm, double s_norm, double tau,
                     double mu_ratio) {
    if (rho <= 0.0) throw InvalidArgument("adapt_penalty: rho must be > 0");
    if (tau <= 1.0 || mu_ratio <= 1.0)
        throw InvalidArgument("adapt_penalty: tau and mu_ratio must exceed 1");
    if (r_norm > mu_ratio * s_norm) return rho * tau;
    if (s_norm > mu_ratio * r_norm) return rho / tau;
    return rho;
}

bool stopping_criterion(double diff_norm, double prev_norm, double tol) {
    if (prev_norm <= 0.0) return false;
    return diff_norm < tol * prev_norm;
}

std::string run_report_json(const RunReport& report, bool include_timings) {
    nlohmann::json j;
    j["iterations"] = report.iterations;
    j["converged"] = report.converged;
    j["final_primal_residual"] = report.final_primal;
    j["final_dual_residual"] = report.final_dual;
    j["psi_reinversions"] = report.psi_reinversions;
    j["rho_trajectory"] = report.rho_trajectory;
    if (!report.sigma_trajectory.empty())
        j["sigma_trajectory"] = report.sigma_trajectory;
    j["objective_trajectory"] = report.objective_trajectory;
    if (include_timings) j["iter_seconds"] = report.iter_seconds;
    return j.dump(2);
}

std::string run_report_csv(const RunReport& report) {
    std::string out = "iter,rho,objective\n";
    for (size_t i = 0; i < report.objective_trajectory.size(); ++i) {
        out += std::to_string(i) + "," +
               (i < report.rho_trajectory.size()
                    ? std::to_string(report.rho_trajectory[i])
                    : "") +
               "," + std::to_string(report.objective_trajectory[i]) + "\n";
    }
    return out;
}

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

double data_term(const BlurBank& bank, const RealStack& y, const RealStack& x,
                 double beta) {
    RealStack r = apply_forward(bank, x);
    add_scaled_inplace(r, -1.0, y);
    return 0.5 * beta * norm2_sq(r);
}

double l1_norm(const RealStack& a) {
    double acc = 0.0;
    for (double v : a.v) acc += std::abs(v);
    return acc;
}

void check_not_diverged(double diff, double prev_norm, double guard,
                        const char* what) {
    if (prev_norm > 0.0 && diff > guard * prev_norm)
        throw DivergenceError(std::string(what) +
                              ": iterate exploded past the divergence guard");
}

void validate_common(const SolverConfig& cfg) {
    if (cfg.beta <= 0.0) throw InvalidArgument("SolverConfig: beta must be > 0");
    if (cfg.lambda < 0.0) throw InvalidArgument("SolverConfig: lambda must be >= 0");
    if (cfg.rho0 <= 0.0) throw InvalidArgument("SolverConfig: rho0 must be > 0");
    if (cfg.sigma0 <= 0.0) throw InvalidArgument("SolverConfig: sigma0 must be > 0");
    if (cfg.max_iters < 0)
        throw InvalidArgument("SolverConfig: max_iters must be >= 0");
    if (cfg.stop_tol <= 0.0)
        throw InvalidArgument("SolverConfig: stop_tol must be > 0");
    if (cfg.mu_tik < 0.0) throw InvalidArgument("SolverConfig: mu_tik must be >= 0");
}

}  // namespace

AnalysisResult run_analysis(const RealStack& y, const BlurBank& bank,
                            const TransformOracle& transform, PriorKind prior,
                            const SolverConfig& cfg,
                            const IterationObserver& observer) {
    validate_common(cfg);
    if (prior != PriorKind::L1Transform && prior != PriorKind::Tv)
        throw InvalidArgument("run_analysis: prior must be l1-transform or tv");
    if (prior == PriorKind::Tv && !transform.is_identity())
        throw InvalidArgument("run_analysis: the TV prior requires the identity transform");
    if (y.rows != bank.n() || y.depth != bank.K())
        throw DimensionError("run_analysis: measurements do not match bank");

    const int n = bank.n(), S = bank.S();
    double rho = cfg.rho0;

    auto invert = [&](const FreqBlockMatrix& psi) {
        return cfg.dense_inversion ? invert_psi_dense(psi) : invert_psi(psi);
    };
    FreqBlockMatrix psi_inv = invert(assemble_psi(bank, cfg.beta, rho));
    const ComplexStack rhs = assemble_rhs(bank, y, cfg.beta);

    RealStack x(n, n, S);            // iterate l (starts at zero)
    RealStack t_aux(n, n, S), u_dual(n, n, S);

    AnalysisResult res{RealStack(n, n, S), RunReport{}};
    RunReport& rep = res.report;

    for (int l = 0; l < cfg.max_iters; ++l) {
        const auto t0 = Clock::now();

        RealStack v = transform.adjoint(add_scaled(t_aux, -1.0, u_dual));
        RealStack x_new = image_update_analysis(psi_inv, rhs, v, rho);

        RealStack tx = transform.apply(x_new);
        RealStack txu = add_scaled(tx, 1.0, u_dual);
        RealStack t_new = prior == PriorKind::Tv
                              ? tv_prox(txu, cfg.lambda / rho, cfg.tv)
                              : soft_threshold(txu, cfg.lambda / rho);
        RealStack u_new = add_scaled(txu, -1.0, t_new);

        const double primal = norm2(add_scaled(tx, -1.0, t_new));
        const double dual = rho * norm2(add_scaled(t_new, -1.0, t_aux));

        const double reg = prior == PriorKind::Tv ? tv_value(x_new) : l1_norm(tx);
        const double objective = data_term(bank, y, x_new, cfg.beta) + cfg.lambda * reg;

        const double diff = norm2(add_scaled(x_new, -1.0, x));
        const double prev_norm = norm2(x);
        check_not_diverged(diff, prev_norm, cfg.divergence_guard, "run_analysis");

        t_aux = std::move(t_new);
        u_dual = std::move(u_new);
        x = std::move(x_new);

        rep.iterations = l + 1;
        rep.rho_trajectory.push_back(rho);
        rep.objective_trajectory.push_back(objective);
        rep.final_primal = primal;
        rep.final_dual = dual;

        if (observer) {
            const double prox_val =
                prior == PriorKind::Tv ? tv_value(t_aux) : l1_norm(t_aux);
            RealStack gap = transform.apply(x);
            add_scaled_inplace(gap, -1.0, t_aux);
            add_scaled_inplace(gap, 1.0, u_dual);
            const double aug = data_term(bank, y, x, cfg.beta) + cfg.lambda * prox_val +
                               0.5 * rho * norm2_sq(gap) - 0.5 * rho * norm2_sq(u_dual);
            IterationInfo info;
            info.iter = l;
            info.rho = rho;
            info.primal = primal;
            info.dual = dual;
            info.objective = objective;
            info.aug_lagrangian = aug;
            info.x = &x;
            observer(info);
        }

        if (cfg.adapt.enabled) {
            const double rho_new =
                adapt_penalty(rho, primal, dual, cfg.adapt.tau, cfg.adapt.mu_ratio);
            if (rho_new != rho) {
                scale_inplace(u_dual, rho / rho_new);
                rho = rho_new;
                psi_inv = invert(assemble_psi(bank, cfg.beta, rho));
                ++rep.psi_reinversions;
            }
        }

        rep.iter_seconds.push_back(seconds_since(t0));
        if (l > 0 && stopping_criterion(diff, prev_norm, cfg.stop_tol)) {
            rep.converged = true;
            break;
        }
    }
    res.x = std::move(x);
    return res;
}

PatchSynthesisResult run_synthesis_patch(const RealStack& y, const BlurBank& bank,
                                         const PatchDictionary& dict_in,
                                         const PatchGeometry& geom,
                                         const SolverConfig& cfg,
                                         const IterationObserver& observer) {
    validate_common(cfg);
    if (y.rows != bank.n() || y.depth != bank.K())
        throw DimensionError("run_synthesis_patch: measurements do not match bank");
    if (geom.n != bank.n() || geom.s != bank.S())
        throw DimensionError("run_synthesis_patch: geometry does not match bank");
    if (!geom.wrap || !geom.uniform_coverage())
        throw InvalidArgument(
            "run_synthesis_patch: reconstruction requires wraparound patch "
            "geometry with uniform coverage");
    if (dict_in.D.rows() != geom.patch_len())
        throw DimensionError("run_synthesis_patch: dictionary patch length mismatch");

    PatchSynthesisResult res;
    res.dict = dict_in;
    const double entry_norm = res.dict.D.norm();
    if (entry_norm < 1e-14)
        throw InvalidArgument("run_synthesis_patch: zero dictionary");
    res.dict.D /= entry_norm;  // start from the feasible set ||D||_F = 1

    const int n = bank.n(), S = bank.S();
    const double c = geom.t_scale;
    double rho = cfg.rho0, sigma = cfg.sigma0;

    FreqBlockMatrix psi_inv =
        cfg.dense_inversion ? invert_psi_dense(assemble_psi(bank, cfg.beta, c))
                            : invert_psi(assemble_psi(bank, cfg.beta, c));
    const ComplexStack rhs = assemble_rhs(bank, y, cfg.beta);

    const auto atoms = res.dict.D.cols();
    Eigen::MatrixXd z = Eigen::MatrixXd::Zero(atoms, geom.J);
    Eigen::MatrixXd t_aux = z, u_dual = z;
    Eigen::MatrixXd g_state = res.dict.D;
    Eigen::MatrixXd e_state = Eigen::MatrixXd::Zero(g_state.rows(), g_state.cols());

    RealStack x(n, n, S);
    RunReport& rep = res.report;

    for (int l = 0; l < cfg.max_iters; ++l) {
        const auto t0 = Clock::now();

        RealStack synth = dict_synth_term(res.dict, z, geom);
        RealStack x_new = image_update_synthesis(psi_inv, rhs, synth, c);

        Eigen::MatrixXd patches = extract_patches(x_new, geom);
        z = patch_code_update(res.dict, patches, t_aux, u_dual, rho);

        Eigen::MatrixXd t_prev = t_aux;
        Eigen::MatrixXd zu = z + u_dual;
        t_aux = zu.unaryExpr(
            [tau = cfg.lambda / rho](double v) { return soft_threshold(v, tau); });
        u_dual = zu - t_aux;

        const double primal = (z - t_aux).norm();
        const double dual = rho * (t_aux - t_prev).norm();

        if (cfg.online_dict_update) {
            Eigen::MatrixXd g_old = g_state;
            PatchDictStep step = patch_dict_update(patches, z, g_state, e_state, sigma);
            g_state = step.G;
            e_state = step.E;
            res.dict.D = step.G;
            if (cfg.adapt.enabled) {
                const double rd = (step.D - step.G).norm();
                const double sd = sigma * (step.G - g_old).norm();
                const double sigma_new =
                    adapt_penalty(sigma, rd, sd, cfg.adapt.tau, cfg.adapt.mu_ratio);
                if (sigma_new != sigma) {
                    e_state *= sigma / sigma_new;
                    sigma = sigma_new;
                }
            }
        }

        const double objective =
            data_term(bank, y, x_new, cfg.beta) +
            0.5 * (res.dict.D * z - patches).squaredNorm() +
            cfg.lambda * z.cwiseAbs().sum();

        const double diff = norm2(add_scaled(x_new, -1.0, x));
        const double prev_norm = norm2(x);
        check_not_diverged(diff, prev_norm, cfg.divergence_guard,
                           "run_synthesis_patch");
        x = std::move(x_new);

        rep.iterations = l + 1;
        rep.rho_trajectory.push_back(rho);
        rep.sigma_trajectory.push_back(sigma);
        rep.objective_trajectory.push_back(objective);
        rep.final_primal = primal;
        rep.final_dual = dual;

        if (observer) {
            const double aug = objective - cfg.lambda * z.cwiseAbs().sum() +
                               cfg.lambda * t_aux.cwiseAbs().sum() +
                               0.5 * rho * (z - t_aux + u_dual).squaredNorm() -
                               0.5 * rho * u_dual.squaredNorm();
            IterationInfo info;
            info.iter = l;
            info.rho = rho;
            info.sigma = sigma;
            info.primal = primal;
            info.dual = dual;
            info.objective = objective;
            info.aug_lagrangian = aug;
            info.x = &x;
            info.patch_dict = &res.dict;
            observer(info);
        }

        if (cfg.adapt.enabled) {
            const double rho_new =
                adapt_penalty(rho, primal, dual, cfg.adapt.tau, cfg.adapt.mu_ratio);
            if (rho_new != rho) {
                u_dual *= rho / rho_new;
                rho = rho_new;  // z/t subproblems only; Psi is untouched
            }
        }

        rep.iter_seconds.push_back(seconds_since(t0));
        if (l > 0 && stopping_criterion(diff, prev_norm, cfg.stop_tol)) {
            rep.converged = true;
            break;
        }
    }
    res.x = std::move(x);
    return res;
}

ConvSynthesisResult run_synthesis_conv(const RealStack& y, const BlurBank& bank,
                                       const ConvDictionary& dict_in,
                                       const SolverConfig& cfg,
                                       const IterationObserver& observer) {
    validate_common(cfg);
    if (y.rows != bank.n() || y.depth != bank.K())
        throw DimensionError("run_synthesis_conv: measurements do not match bank");
    if (dict_in.n != bank.n() || dict_in.s != bank.S())
        throw DimensionError("run_synthesis_conv: dictionary bound to wrong dims");

    ConvSynthesisResult res;
    res.dict = dict_in;
    for (auto& f : res.dict.filters) {
        const double nf = norm2(f);
        if (nf < 1e-14)
            throw InvalidArgument("run_synthesis_conv: zero filter in dictionary");
        scale_inplace(f, 1.0 / nf);  // the model constrains filters to unit norm
    }
    res.dict.rebuild_spectra();

    const int n = bank.n(), S = bank.S(), M = res.dict.M;
    const int grid_depth = res.dict.mode == ConvMode::Volumetric ? S : 1;
    double rho = cfg.rho0, sigma = cfg.sigma0;

    const TikhonovSpec tik = TikhonovSpec::make(cfg.mu_tik, res.dict.mode, n, S);

    FreqBlockMatrix psi_inv =
        cfg.dense_inversion ? invert_psi_dense(assemble_psi(bank, cfg.beta, 1.0))
                            : invert_psi(assemble_psi(bank, cfg.beta, 1.0));
    const ComplexStack rhs = assemble_rhs(bank, y, cfg.beta);

    ConvCodeSet z = ConvCodeSet::zeros(M, n, S);
    ConvCodeSet t_aux = ConvCodeSet::zeros(M, n, S);
    ConvCodeSet u_dual = ConvCodeSet::zeros(M, n, S);
    std::vector<RealStack> g_state, e_state;
    for (int m = 0; m < M; ++m) {
        g_state.push_back(embed_filter(res.dict.filters[m], n, grid_depth));
        e_state.push_back(RealStack(n, n, grid_depth));
    }

    RealStack x(n, n, S);
    RunReport& rep = res.report;

    // mu/2 sum_m sum_bins grad|z_m_hat|^2 via Parseval.
    auto tik_energy = [&](const ConvCodeSet& codes) {
        if (tik.mu == 0.0) return 0.0;
        const bool vol = res.dict.mode == ConvMode::Volumetric;
        const size_t bins2 = size_t(n) * n;
        double acc = 0.0;
        for (const auto& zm : codes.z) {
            ComplexStack zf = vol ? fft3(zm) : fft2(zm);
            for (size_t i = 0; i < zf.size(); ++i)
                acc += tik.grad_spectra.v[vol ? i : i % bins2] * std::norm(zf.v[i]);
        }
        return 0.5 * tik.mu * acc;
    };
    auto code_l1 = [](const ConvCodeSet& codes) {
        double acc = 0.0;
        for (const auto& zm : codes.z)
            for (double v : zm.v) acc += std::abs(v);
        return acc;
    };

    for (int l = 0; l < cfg.max_iters; ++l) {
        const auto t0 = Clock::now();

        RealStack synth = conv_synth(res.dict, z);
        RealStack x_new = image_update_synthesis(psi_inv, rhs, synth, 1.0);

        z = csc_code_update(res.dict, x_new, t_aux, u_dual, rho, tik);

        double r2 = 0.0, s2 = 0.0;
        for (int m = 0; m < M; ++m) {
            RealStack zu = add_scaled(z.z[m], 1.0, u_dual.z[m]);
            RealStack t_new = soft_threshold(zu, cfg.lambda / rho);
            for (size_t i = 0; i < zu.size(); ++i) {
                const double rr = z.z[m].v[i] - t_new.v[i];
                const double ss = t_new.v[i] - t_aux.z[m].v[i];
                r2 += rr * rr;
                s2 += ss * ss;
                u_dual.z[m].v[i] = zu.v[i] - t_new.v[i];
            }
            t_aux.z[m] = std::move(t_new);
        }
        const double primal = std::sqrt(r2);
        const double dual = rho * std::sqrt(s2);

        if (cfg.online_dict_update) {
            std::vector<ConvTrainPair> pairs{{&z, &x_new}};
            std::vector<RealStack> g_old = g_state;
            ConvDictStep step = conv_dict_update(res.dict, pairs, g_state, e_state, sigma);
            g_state = step.g;
            e_state = step.e;
            for (int m = 0; m < M; ++m)
                res.dict.filters[m] = crop_filter(g_state[m], res.dict.L, res.dict.R);
            res.dict.rebuild_spectra();
            if (cfg.adapt.enabled) {
                double rd2 = 0.0, sd2 = 0.0;
                for (int m = 0; m < M; ++m) {
                    RealStack dg = add_scaled(step.d[m], -1.0, step.g[m]);
                    rd2 += norm2_sq(dg);
                    RealStack gg = add_scaled(step.g[m], -1.0, g_old[m]);
                    sd2 += norm2_sq(gg);
                }
                const double sigma_new = adapt_penalty(
                    sigma, std::sqrt(rd2), sigma * std::sqrt(sd2), cfg.adapt.tau,
                    cfg.adapt.mu_ratio);
                if (sigma_new != sigma) {
                    for (auto& em : e_state) scale_inplace(em, sigma / sigma_new);
                    sigma = sigma_new;
                }
            }
        }

        RealStack fit = conv_synth(res.dict, z);
        add_scaled_inplace(fit, -1.0, x_new);
        const double objective = data_term(bank, y, x_new, cfg.beta) +
                                 0.5 * norm2_sq(fit) + cfg.lambda * code_l1(z) +
                                 tik_energy(z);

        const double diff = norm2(add_scaled(x_new, -1.0, x));
        const double prev_norm = norm2(x);
        check_not_diverged(diff, prev_norm, cfg.divergence_guard,
                           "run_synthesis_conv");
        x = std::move(x_new);

        rep.iterations = l + 1;
        rep.rho_trajectory.push_back(rho);
        rep.sigma_trajectory.push_back(sigma);
        rep.objective_trajectory.push_back(objective);
        rep.final_primal = primal;
        rep.final_dual = dual;

        if (observer) {
            double aug = data_term(bank, y, x, cfg.beta) + 0.5 * norm2_sq(fit) +
                         cfg.lambda * code_l1(t_aux) + tik_energy(z);
            for (int m = 0; m < M; ++m) {
                RealStack gap = add_scaled(z.z[m], -1.0, t_aux.z[m]);
                add_scaled_inplace(gap, 1.0, u_dual.z[m]);
                aug += 0.5 * rho * norm2_sq(gap) - 0.5 * rho * norm2_sq(u_dual.z[m]);
            }
            IterationInfo info;
            info.iter = l;
            info.rho = rho;
            info.sigma = sigma;
            info.primal = primal;
            info.dual = dual;
            info.objective = objective;
            info.aug_lagrangian = aug;
            info.x = &x;
            info.conv_dict = &res.dict;
            observer(info);
        }

        if (cfg.adapt.enabled) {
            const double rho_new =
                adapt_penalty(rho, primal, dual, cfg.adapt.tau, cfg.adapt.mu_ratio);
            if (rho_new != rho) {
                for (auto& um : u_dual.z) scale_inplace(um, rho / rho_new);
                rho = rho_new;  // code subproblem only; Psi is untouched
            }
        }

        rep.iter_seconds.push_back(seconds_since(t0));
        if (l > 0 && stopping_criterion(diff, prev_norm, cfg.stop_tol)) {
            rep.converged = true;
            break;
        }
    }
    res.x = std::move(x);
    return res;
}

namespace {

int snr_bucket(double snr_db) {
    if (snr_db < 25.0) return 20;
    if (snr_db < 35.0) return 30;
    return 40;
}

}  // namespace

SolverConfig preset_2d(PriorKind prior, double snr_db) {
    const int b = snr_bucket(snr_db);
    SolverConfig cfg;
    switch (prior) {
        case PriorKind::Tv:
        case PriorKind::L1Transform:
            cfg.lambda = b == 20 ? 1e-2 : b == 30 ? 1e-3 : 1e-4;
            cfg.beta = 1.0;
            cfg.rho0 = 10.0 * cfg.lambda;
            break;
        case PriorKind::PatchDict:
            cfg.lambda = 0.05;
            cfg.beta = b == 20 ? 100.0 : b == 30 ? 500.0 : 3000.0;
            cfg.rho0 = 1.0;
            cfg.sigma0 = 1.0;
            break;
        case PriorKind::ConvDict:
            cfg.lambda = b == 20 ? 0.2 : 0.15;
            cfg.beta = b == 20 ? 2.0 : b == 30 ? 8.0 : 50.0;
            cfg.rho0 = 50.0 * cfg.lambda + 0.5;
            cfg.sigma0 = 10.0;
            cfg.mu_tik = 0.01;
            break;
    }
    return cfg;
}

SolverConfig preset_3d(PriorKind prior, double snr_db) {
    const int b = snr_bucket(snr_db);
    SolverConfig cfg;
    switch (prior) {
        case PriorKind::L1Transform:
        case PriorKind::Tv:
            cfg.lambda = b == 20 ? 0.5 : b == 30 ? 0.1 : 0.01;
            cfg.beta = 1.0;
            cfg.rho0 = 500.0 * cfg.lambda;
            break;
        case PriorKind::PatchDict:
            cfg.lambda = 1e-4;
            cfg.beta = b == 20 ? 0.1 : b == 30 ? 1.0 : 10.0;
            cfg.rho0 = 1000.0;
            cfg.sigma0 = 10.0;
            break;
        case PriorKind::ConvDict:
            cfg.lambda = 1e-3;
            cfg.beta = b == 20 ? 0.01 : b == 30 ? 0.1 : 0.2;
            cfg.rho0 = 1000.0;
            cfg.sigma0 = 10.0;
            cfg.mu_tik = 0.1;
            break;
    }
    return cfg;
}

}  // namespace civs
