#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <cstring>

#include "civs/admm.hpp"
#include "civs/config.hpp"
#include "civs/container.hpp"
#include "civs/fft.hpp"
#include "civs/metrics.hpp"
#include "civs/phantom.hpp"
#include "civs/threading.hpp"

namespace py = pybind11;
using namespace civs;

namespace {

using DoubleArray = py::array_t<double, py::array::c_style | py::array::forcecast>;

// Stacks cross the boundary as C-order (depth, rows, cols) arrays; plain 2D
// arrays become single-slice stacks.
RealStack stack_from_array(const DoubleArray& arr) {
    if (arr.ndim() == 2) {
        RealStack x(int(arr.shape(0)), int(arr.shape(1)), 1);
        std::memcpy(x.v.data(), arr.data(), sizeof(double) * x.size());
        return x;
    }
    if (arr.ndim() == 3) {
        RealStack x(int(arr.shape(1)), int(arr.shape(2)), int(arr.shape(0)));
        std::memcpy(x.v.data(), arr.data(), sizeof(double) * x.size());
        return x;
    }
    throw InvalidArgument("expected a (rows, cols) or (depth, rows, cols) array");
}

py::array_t<double> array_from_stack(const RealStack& x) {
    py::array_t<double> arr({x.depth, x.rows, x.cols});
    std::memcpy(arr.mutable_data(), x.v.data(), sizeof(double) * x.size());
    return arr;
}

py::array_t<std::complex<double>> array_from_cstack(const ComplexStack& x) {
    py::array_t<std::complex<double>> arr({x.depth, x.rows, x.cols});
    std::memcpy(arr.mutable_data(), x.v.data(),
                sizeof(std::complex<double>) * x.size());
    return arr;
}

ComplexStack cstack_from_array(
    const py::array_t<std::complex<double>,
                      py::array::c_style | py::array::forcecast>& arr) {
    if (arr.ndim() == 2) {
        ComplexStack x(int(arr.shape(0)), int(arr.shape(1)), 1);
        std::memcpy(x.v.data(), arr.data(), sizeof(std::complex<double>) * x.size());
        return x;
    }
    if (arr.ndim() == 3) {
        ComplexStack x(int(arr.shape(1)), int(arr.shape(2)), int(arr.shape(0)));
        std::memcpy(x.v.data(), arr.data(), sizeof(std::complex<double>) * x.size());
        return x;
    }
    throw InvalidArgument("expected a (rows, cols) or (depth, rows, cols) array");
}

BlurBank bank_from_lists(const std::vector<std::vector<DoubleArray>>& kernels,
                         int n) {
    if (kernels.empty()) throw InvalidArgument("kernel grid must be non-empty");
    std::vector<std::vector<RealStack>> grid(kernels.size());
    for (size_t k = 0; k < kernels.size(); ++k)
        for (const auto& arr : kernels[k]) grid[k].push_back(stack_from_array(arr));
    return BlurBank(std::move(grid), n);
}

py::dict report_to_dict(const RunReport& rep) {
    py::dict d;
    d["iterations"] = rep.iterations;
    d["converged"] = rep.converged;
    d["final_primal"] = rep.final_primal;
    d["final_dual"] = rep.final_dual;
    d["psi_reinversions"] = rep.psi_reinversions;
    d["rho"] = rep.rho_trajectory;
    d["objective"] = rep.objective_trajectory;
    return d;
}

py::tuple reconstruct(const std::vector<std::vector<DoubleArray>>& kernels,
                      const DoubleArray& y_arr, const std::string& prior,
                      const std::string& transform, double beta, double lam,
                      double rho0, double sigma0, double mu_tik, bool adapt,
                      int max_iters, double stop_tol, bool online_dict,
                      uint64_t seed, int patch_q, int patch_stride, int conv_m,
                      int conv_l, bool dense) {
    RealStack y = stack_from_array(y_arr);
    BlurBank bank = bank_from_lists(kernels, y.rows);
    if (y.depth != bank.K())
        throw DimensionError("y must have one slice per measurement row");

    SolverConfig cfg;
    cfg.beta = beta;
    cfg.lambda = lam;
    cfg.rho0 = rho0;
    cfg.sigma0 = sigma0;
    cfg.mu_tik = mu_tik;
    cfg.adapt.enabled = adapt;
    cfg.max_iters = max_iters;
    cfg.stop_tol = stop_tol;
    cfg.online_dict_update = online_dict;
    cfg.dense_inversion = dense;

    bool tik = false;
    const PriorKind kind = prior_kind_from_string(prior, &tik);
    if (tik && cfg.mu_tik == 0.0) cfg.mu_tik = 0.01;

    switch (kind) {
        case PriorKind::L1Transform:
        case PriorKind::Tv: {
            TransformOracle tr =
                TransformOracle::from_config(transform, bank.n(), bank.S());
            AnalysisResult r = run_analysis(y, bank, tr, kind, cfg);
            return py::make_tuple(array_from_stack(r.x), report_to_dict(r.report));
        }
        case PriorKind::PatchDict: {
            PatchGeometry geom =
                PatchGeometry::make(patch_q, 1, patch_stride, PatchMode::PerSlice,
                                    true, bank.n(), bank.S());
            PatchDictionary dict = random_patch_dictionary(
                geom.patch_len(), geom.patch_len(), seed);
            PatchSynthesisResult r = run_synthesis_patch(y, bank, dict, geom, cfg);
            return py::make_tuple(array_from_stack(r.x), report_to_dict(r.report));
        }
        case PriorKind::ConvDict: {
            ConvDictionary dict = ConvDictionary::random(
                conv_m, conv_l, 1, ConvMode::PerSlice, bank.n(), bank.S(), seed);
            ConvSynthesisResult r = run_synthesis_conv(y, bank, dict, cfg);
            return py::make_tuple(array_from_stack(r.x), report_to_dict(r.report));
        }
    }
    throw InvalidArgument("unreachable prior kind");
}

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "Reconstruction of image stacks observed through superimposed "
              "2D convolutions";

    py::register_exception<Error>(m, "CivsError", PyExc_RuntimeError);

    m.def("set_num_threads", &set_num_threads, py::arg("n"));

    m.def(
        "make_phantom",
        [](int n, int s, uint64_t seed, int shapes) {
            return array_from_stack(make_phantom(n, s, seed, shapes));
        },
        py::arg("n"), py::arg("s"), py::arg("seed") = 0, py::arg("shapes") = 6);

    m.def(
        "fft2",
        [](const DoubleArray& arr) {
            return array_from_cstack(fft2(stack_from_array(arr)));
        },
        py::arg("x"), "Unitary per-slice 2D FFT");
    m.def(
        "ifft2",
        [](const py::array_t<std::complex<double>, py::array::c_style |
                                                       py::array::forcecast>& arr) {
            return array_from_cstack(ifft2(cstack_from_array(arr)));
        },
        py::arg("x"));

    m.def(
        "apply_forward",
        [](const std::vector<std::vector<DoubleArray>>& kernels,
           const DoubleArray& x_arr) {
            RealStack x = stack_from_array(x_arr);
            BlurBank bank = bank_from_lists(kernels, x.rows);
            return array_from_stack(apply_forward(bank, x));
        },
        py::arg("kernels"), py::arg("x"),
        "y[k] = sum_s kernels[k][s] (*) x[s] (circular)");
    m.def(
        "apply_adjoint",
        [](const std::vector<std::vector<DoubleArray>>& kernels,
           const DoubleArray& y_arr) {
            RealStack y = stack_from_array(y_arr);
            BlurBank bank = bank_from_lists(kernels, y.rows);
            if (y.depth != bank.K())
                throw DimensionError("y must have one slice per measurement row");
            return array_from_stack(apply_adjoint(bank, y));
        },
        py::arg("kernels"), py::arg("y"));

    m.def(
        "simulate",
        [](const std::vector<std::vector<DoubleArray>>& kernels,
           const DoubleArray& x_arr, double snr_db, uint64_t seed,
           bool per_measurement) {
            RealStack x = stack_from_array(x_arr);
            BlurBank bank = bank_from_lists(kernels, x.rows);
            NoiseSpec noise;
            noise.snr_db = snr_db;
            noise.seed = seed;
            noise.per_measurement = per_measurement;
            SimulationResult r = simulate_measurements(bank, x, noise);
            return py::make_tuple(array_from_stack(r.y), r.sigma);
        },
        py::arg("kernels"), py::arg("x"),
        py::arg("snr_db") = std::numeric_limits<double>::infinity(),
        py::arg("seed") = 0, py::arg("per_measurement") = true);

    m.def("reconstruct", &reconstruct, py::arg("kernels"), py::arg("y"),
          py::arg("prior") = "tv", py::arg("transform") = "identity",
          py::arg("beta") = 1.0, py::arg("lam") = 1e-3, py::arg("rho0") = 1e-2,
          py::arg("sigma0") = 1.0, py::arg("mu_tik") = 0.0,
          py::arg("adapt") = true, py::arg("max_iters") = 200,
          py::arg("stop_tol") = 1e-4, py::arg("online_dict") = false,
          py::arg("seed") = 0, py::arg("patch_q") = 8,
          py::arg("patch_stride") = 1, py::arg("conv_m") = 8,
          py::arg("conv_l") = 8, py::arg("dense") = false);

    m.def(
        "psnr",
        [](const DoubleArray& ref, const DoubleArray& est, double peak) {
            return psnr(stack_from_array(ref), stack_from_array(est), peak);
        },
        py::arg("ref"), py::arg("est"), py::arg("peak") = 0.0);
    m.def(
        "ssim",
        [](const DoubleArray& ref, const DoubleArray& est, double peak) {
            return ssim(stack_from_array(ref), stack_from_array(est), peak);
        },
        py::arg("ref"), py::arg("est"), py::arg("peak") = 0.0);
    m.def(
        "sam",
        [](const DoubleArray& ref, const DoubleArray& est) {
            return sam_degrees(stack_from_array(ref), stack_from_array(est));
        },
        py::arg("ref"), py::arg("est"));

    m.def(
        "read_container",
        [](const std::string& path) {
            std::string meta;
            RealStack x = read_container(path, &meta);
            return py::make_tuple(array_from_stack(x), meta);
        },
        py::arg("path"));
    m.def(
        "write_container",
        [](const std::string& path, const DoubleArray& arr,
           const std::string& metadata) {
            write_container(path, stack_from_array(arr), metadata);
        },
        py::arg("path"), py::arg("x"), py::arg("metadata") = "");
}
