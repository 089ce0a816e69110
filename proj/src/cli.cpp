#include "civs/cli.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>

#include "civs/admm.hpp"
#include "civs/container.hpp"
#include "civs/metrics.hpp"
#include "civs/phantom.hpp"
#include "civs/png_io.hpp"
#include "civs/threading.hpp"

#include "CLI11.hpp"
#include "json.hpp"

namespace fs = std::filesystem;

namespace civs {

namespace {

// Keeps the phantom draw decoupled from the noise draw when both derive
// from the one forward seed.
constexpr uint64_t kPhantomSalt = 0x9e3779b97f4a7c15ULL;

BlurBank build_bank(const ForwardConfig& fwd) {
    if (!fwd.bank_path.empty()) return load_bank(fwd.bank_path);
    if (fwd.psfs.empty())
        throw InvalidArgument(
            "forward section needs either \"psfs\" or \"bank_path\"");
    std::vector<std::vector<RealStack>> kernels(fwd.K);
    for (int k = 0; k < fwd.K; ++k) {
        kernels[k].reserve(fwd.S);
        for (int s = 0; s < fwd.S; ++s)
            kernels[k].push_back(make_psf(fwd.psfs[size_t(k) * fwd.S + s]));
    }
    return BlurBank(std::move(kernels), fwd.N);
}

void write_text(const std::string& path, const std::string& text) {
    std::ofstream f(path, std::ios::trunc);
    if (!f) throw IoError("cannot open " + path + " for writing");
    f << text;
    if (!text.empty() && text.back() != '\n') f << "\n";
}

nlohmann::json db_or_label(double v) {
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    return v;
}

IterationObserver make_observer(bool verbose) {
    if (!verbose) return {};
    return [](const IterationInfo& it) {
        std::fprintf(stderr,
                     "iter %4d  rho %.3e  primal %.3e  dual %.3e  obj %.6e\n",
                     it.iter, it.rho, it.primal, it.dual, it.objective);
    };
}

}  // namespace

int cmd_simulate(const RunConfig& cfg, const CliOverrides& ov) {
    if (!cfg.has_forward)
        throw InvalidArgument("simulate: config needs a \"forward\" section");
    if (!cfg.has_io)
        throw InvalidArgument("simulate: config needs an \"io\" section");

    ForwardConfig fwd = cfg.forward;
    if (ov.has_seed) fwd.noise.seed = ov.seed;

    BlurBank bank = build_bank(fwd);

    RealStack x_true(1, 1, 1);
    if (cfg.io.phantom || cfg.io.input.empty()) {
        x_true = make_phantom(bank.n(), bank.S(), fwd.noise.seed ^ kPhantomSalt);
    } else {
        x_true = read_container(cfg.io.input);
        if (x_true.rows != bank.n() || x_true.cols != bank.n() ||
            x_true.depth != bank.S())
            throw DimensionError(
                "simulate: input stack does not match the forward model dims");
    }

    const RealStack clean = apply_forward(bank, x_true);
    const SimulationResult sim = simulate_measurements(bank, x_true, fwd.noise);

    const std::string dir = cfg.io.output_dir;
    fs::create_directories(dir);

    const std::string hash = bank.content_hash();
    nlohmann::json meta;
    meta["bank_hash"] = hash;
    meta["seed"] = fwd.noise.seed;
    meta["snr_db"] = fwd.noise.noiseless() ? nlohmann::json("noiseless")
                                           : nlohmann::json(fwd.noise.snr_db);

    write_container(dir + "/ground_truth.civs", x_true);
    write_container(dir + "/measurements.civs", sim.y, meta.dump());
    save_bank(bank, dir + "/bank");

    nlohmann::json man;
    man["N"] = bank.n();
    man["K"] = bank.K();
    man["S"] = bank.S();
    man["seed"] = fwd.noise.seed;
    man["snr_db"] = fwd.noise.noiseless() ? nlohmann::json("noiseless")
                                          : nlohmann::json(fwd.noise.snr_db);
    man["noise_mode"] = fwd.noise.per_measurement ? "per-measurement" : "global";
    man["bank_hash"] = hash;
    man["sigma"] = sim.sigma;
    nlohmann::json realized = nlohmann::json::array();
    for (int k = 0; k < bank.K(); ++k) {
        double sig = 0.0, err = 0.0;
        const double* c = clean.slice(k);
        const double* y = sim.y.slice(k);
        for (size_t i = 0; i < clean.slice_size(); ++i) {
            sig += c[i] * c[i];
            const double d = y[i] - c[i];
            err += d * d;
        }
        realized.push_back(err == 0.0
                               ? nlohmann::json("inf")
                               : nlohmann::json(10.0 * std::log10(sig / err)));
    }
    man["realized_snr_db"] = realized;
    man["files"] = {{"ground_truth", "ground_truth.civs"},
                    {"measurements", "measurements.civs"},
                    {"bank", "bank"}};
    write_text(dir + "/manifest.json", man.dump(2));

    if (ov.verbose)
        std::fprintf(stderr, "simulated %dx%dx%d -> %d measurements in %s\n",
                     bank.n(), bank.n(), bank.S(), bank.K(), dir.c_str());
    return kExitOk;
}

int cmd_reconstruct(const RunConfig& cfg, const CliOverrides& ov) {
    if (!cfg.has_forward)
        throw InvalidArgument("reconstruct: config needs a \"forward\" section");
    if (!cfg.has_prior)
        throw InvalidArgument("reconstruct: config needs a \"prior\" section");
    if (!cfg.has_io || cfg.io.input.empty())
        throw InvalidArgument(
            "reconstruct: io.input must name the measurement container");

    BlurBank bank = build_bank(cfg.forward);
    const RealStack y = read_container(cfg.io.input);
    if (y.rows != bank.n() || y.cols != bank.n() || y.depth != bank.K())
        throw DimensionError(
            "reconstruct: measurement container does not match the bank "
            "(expected " + std::to_string(bank.n()) + "x" +
            std::to_string(bank.n()) + "x" + std::to_string(bank.K()) + ")");

    PriorConfig pc = cfg.prior;
    if (ov.has_seed) pc.seed = ov.seed;
    const IterationObserver obs = make_observer(ov.verbose);

    RealStack x(1, 1, 1);
    RunReport rep;
    switch (pc.kind) {
        case PriorKind::L1Transform:
        case PriorKind::Tv: {
            TransformOracle tr =
                TransformOracle::from_config(pc.transform, bank.n(), bank.S());
            AnalysisResult r = run_analysis(y, bank, tr, pc.kind, pc.solver, obs);
            x = std::move(r.x);
            rep = std::move(r.report);
            break;
        }
        case PriorKind::PatchDict: {
            const PatchMode mode =
                pc.patch.per_slice ? PatchMode::PerSlice : PatchMode::Volumetric;
            PatchGeometry geom;
            PatchDictionary dict;
            if (!pc.dict_path.empty()) {
                dict = load_patch_dictionary(pc.dict_path, &geom, bank.n(), bank.S());
            } else {
                geom = PatchGeometry::make(pc.patch.q, pc.patch.t, pc.patch.stride,
                                           mode, pc.patch.wrap, bank.n(), bank.S());
                const int atoms =
                    pc.patch.atoms > 0 ? pc.patch.atoms : geom.patch_len();
                dict = random_patch_dictionary(geom.patch_len(), atoms, pc.seed);
            }
            PatchSynthesisResult r =
                run_synthesis_patch(y, bank, dict, geom, pc.solver, obs);
            x = std::move(r.x);
            rep = std::move(r.report);
            break;
        }
        case PriorKind::ConvDict: {
            const ConvMode mode =
                pc.conv.per_slice ? ConvMode::PerSlice : ConvMode::Volumetric;
            ConvDictionary dict =
                pc.dict_path.empty()
                    ? ConvDictionary::random(pc.conv.M, pc.conv.L, pc.conv.R, mode,
                                             bank.n(), bank.S(), pc.seed)
                    : load_conv_dictionary(pc.dict_path, bank.n(), bank.S());
            ConvSynthesisResult r = run_synthesis_conv(y, bank, dict, pc.solver, obs);
            x = std::move(r.x);
            rep = std::move(r.report);
            break;
        }
    }

    const std::string dir = cfg.io.output_dir;
    fs::create_directories(dir);

    nlohmann::json meta;
    meta["prior"] = prior_kind_name(pc.kind);
    meta["iterations"] = rep.iterations;
    meta["converged"] = rep.converged;
    write_container(dir + "/recon.civs", x, meta.dump());

    if (cfg.report.json)
        write_text(dir + "/report.json", run_report_json(rep, cfg.report.timings));
    if (cfg.report.csv) write_text(dir + "/report.csv", run_report_csv(rep));
    if (cfg.report.png) export_png_stack(x, dir + "/recon");

    if (!cfg.io.ground_truth.empty()) {
        const RealStack truth = read_container(cfg.io.ground_truth);
        const MetricReport mr = score_stacks(truth, x);
        write_text(dir + "/metrics.json", metric_report_json(mr));
        if (ov.verbose)
            std::fprintf(stderr, "psnr %.2f dB  ssim %.4f  sam %.3f deg\n",
                         mr.psnr_db, mr.ssim_mean, mr.sam);
    }

    if (!rep.converged) {
        std::fprintf(stderr,
                     "warning: stopped after %d iterations without meeting the "
                     "convergence criterion\n",
                     rep.iterations);
        return kExitNotConverged;
    }
    return kExitOk;
}

int cmd_train_dict(const RunConfig& cfg, const CliOverrides& ov) {
    if (!cfg.has_io || cfg.io.input.empty())
        throw InvalidArgument(
            "train-dict: io.input must name the training container");

    TrainConfig tc = cfg.train;
    if (ov.has_seed) tc.seed = ov.seed;

    const RealStack sample = read_container(cfg.io.input);
    if (!sample.square())
        throw DimensionError("train-dict: training stacks must be square");

    const std::string dir = cfg.io.output_dir;
    fs::create_directories(dir);

    if (tc.kind == "patch") {
        const PatchMode mode =
            tc.patch.per_slice ? PatchMode::PerSlice : PatchMode::Volumetric;
        const PatchGeometry geom =
            PatchGeometry::make(tc.patch.q, tc.patch.t, tc.patch.stride, mode,
                                tc.patch.wrap, sample.rows, sample.depth);
        PatchTrainOptions opts;
        opts.lambda = tc.lambda;
        opts.rho0 = tc.rho0;
        opts.sigma0 = tc.sigma0;
        opts.adapt = tc.adapt;
        opts.max_outer = tc.max_outer;
        opts.tol = tc.tol;
        opts.seed = tc.seed;
        opts.atoms = tc.patch.atoms;
        const PatchDictionary dict = train_patch_dict({sample}, geom, opts);
        save_patch_dictionary(dict, geom, dir + "/patch_dict");
        if (ov.verbose)
            std::fprintf(stderr, "trained %ldx%ld patch dictionary -> %s\n",
                         long(dict.D.rows()), long(dict.D.cols()),
                         (dir + "/patch_dict.civs").c_str());
    } else {
        ConvTrainOptions opts;
        opts.M = tc.conv.M;
        opts.L = tc.conv.L;
        opts.R = tc.conv.R;
        opts.mode = tc.conv.per_slice ? ConvMode::PerSlice : ConvMode::Volumetric;
        opts.lambda = tc.lambda;
        opts.mu_tik = tc.mu_tik;
        opts.rho0 = tc.rho0;
        opts.sigma0 = tc.sigma0;
        opts.adapt = tc.adapt;
        opts.max_outer = tc.max_outer;
        opts.tol = tc.tol;
        opts.seed = tc.seed;
        const ConvDictionary dict = train_conv_dict({sample}, opts);
        save_conv_dictionary(dict, dir + "/conv_dict");
        if (ov.verbose)
            std::fprintf(stderr, "trained %d filters -> %s\n", dict.M,
                         (dir + "/conv_dict").c_str());
    }
    return kExitOk;
}

int cmd_score(const std::string& ref_path, const std::string& est_path,
              const std::string& out_path, double peak) {
    const RealStack ref = read_container(ref_path);
    const RealStack est = read_container(est_path);
    const MetricReport rep = score_stacks(ref, est, peak);
    const std::string text = metric_report_json(rep);
    std::cout << text << "\n";
    const std::string out =
        out_path.empty() ? est_path + ".metrics.json" : out_path;
    write_text(out, text);
    return kExitOk;
}

int cmd_export_png(const std::string& stack_path, const std::string& base) {
    const RealStack stack = read_container(stack_path);
    const std::vector<std::string> files = export_png_stack(stack, base);
    std::cout << files.size() << " slices -> " << base << "_sNN.png\n";
    return kExitOk;
}

int run_cli(int argc, const char* const* argv) {
    CLI::App app{
        "civs: simulate, reconstruct and score image stacks observed through "
        "superimposed 2D convolutions"};
    app.require_subcommand(1);

    std::string config_path;
    CliOverrides ov;
    uint64_t seed = 0;
    int threads = 0;
    app.add_option("--config", config_path, "JSON run configuration");
    CLI::Option* seed_opt =
        app.add_option("--seed", seed, "Override every seed in the config");
    app.add_option("--threads", threads, "Worker threads (0 keeps the default)");
    app.add_flag("--verbose", ov.verbose, "Per-iteration progress on stderr");

    CLI::App* sim = app.add_subcommand("simulate",
                                       "Forward-simulate measurements from a "
                                       "phantom or a supplied stack");
    CLI::App* rec = app.add_subcommand("reconstruct",
                                       "Reconstruct a stack from a measurement "
                                       "container");
    CLI::App* trn = app.add_subcommand("train-dict",
                                       "Train a patch or convolutional "
                                       "dictionary from a stack");

    CLI::App* sco =
        app.add_subcommand("score", "Compare two containers (PSNR/SSIM/SAM)");
    std::string ref_path, est_path, score_out;
    double score_peak = 0.0;
    sco->add_option("ref", ref_path, "Reference container")->required();
    sco->add_option("est", est_path, "Estimate container")->required();
    sco->add_option("--out", score_out, "Metric report path");
    sco->add_option("--peak", score_peak, "Peak value (default: max of ref)");

    CLI::App* exp = app.add_subcommand(
        "export-png", "Write one 8-bit PNG per slice plus a scale sidecar");
    std::string exp_in, exp_base;
    exp->add_option("stack", exp_in, "Container to export")->required();
    exp->add_option("base", exp_base, "Output path prefix")->required();

    for (CLI::App* sub : {sim, rec, trn, sco, exp}) sub->fallthrough();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kExitUsage;
    }

    if (threads > 0) set_num_threads(threads);
    ov.has_seed = seed_opt->count() > 0;
    ov.seed = seed;

    try {
        if (sco->parsed()) return cmd_score(ref_path, est_path, score_out, score_peak);
        if (exp->parsed()) return cmd_export_png(exp_in, exp_base);

        if (config_path.empty()) {
            std::cerr << "error: this command needs --config <file>\n";
            return kExitUsage;
        }
        const RunConfig cfg = load_run_config(config_path);
        if (sim->parsed()) return cmd_simulate(cfg, ov);
        if (rec->parsed()) return cmd_reconstruct(cfg, ov);
        if (trn->parsed()) return cmd_train_dict(cfg, ov);
        std::cerr << "error: no command selected\n";
        return kExitUsage;
    } catch (const NumericError& e) {
        std::cerr << "numeric failure: " << e.what() << "\n";
        return kExitNumeric;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitUsage;
    }
}

}  // namespace civs
