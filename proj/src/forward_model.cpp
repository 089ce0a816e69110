#include "civs/forward_model.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include "civs/container.hpp"
#include "civs/fft.hpp"
#include "civs/rng.hpp"

#include "json.hpp"

namespace civs {

namespace {

RealStack normalized_unit_sum(RealStack k, double weight, const char* what) {
    double sum = 0.0;
    for (double x : k.v) sum += x;
    if (sum <= 0.0)
        throw InvalidArgument(std::string(what) + ": kernel mass is not positive");
    for (double& x : k.v) x *= weight / sum;
    return k;
}

}  // namespace

RealStack make_psf(const PsfSpec& spec) {
    if (spec.support < 1)
        throw InvalidArgument("make_psf: support must be >= 1");
    const int m = spec.support;
    const double cr = (m - 1) / 2.0;  // geometric center of the native grid

    switch (spec.kind) {
        case PsfSpec::Kind::Delta: {
            RealStack k(m, m, 1);
            k.at(m / 2, m / 2, 0) = spec.weight;
            return k;
        }
        case PsfSpec::Kind::Gaussian: {
            if (spec.sigma_px <= 0.0)
                throw InvalidArgument("make_psf: gaussian sigma must be positive");
            if (spec.sigma_px < 0.25) {  // narrower than a pixel: exact delta
                PsfSpec d = spec;
                d.kind = PsfSpec::Kind::Delta;
                return make_psf(d);
            }
            RealStack k(m, m, 1);
            const double inv = 1.0 / (2.0 * spec.sigma_px * spec.sigma_px);
            for (int r = 0; r < m; ++r)
                for (int c = 0; c < m; ++c) {
                    const double dr = r - cr, dc = c - cr;
                    k.at(r, c, 0) = std::exp(-(dr * dr + dc * dc) * inv);
                }
            return normalized_unit_sum(std::move(k), spec.weight, "make_psf");
        }
        case PsfSpec::Kind::DiskDefocus: {
            if (spec.radius_px <= 0.0)
                throw InvalidArgument("make_psf: disk radius must be positive");
            RealStack k(m, m, 1);
            for (int r = 0; r < m; ++r)
                for (int c = 0; c < m; ++c) {
                    const double dr = r - cr, dc = c - cr;
                    const double d = std::sqrt(dr * dr + dc * dc);
                    // Half-pixel linear roll-off softens the rim.
                    k.at(r, c, 0) = std::clamp(spec.radius_px + 0.5 - d, 0.0, 1.0);
                }
            return normalized_unit_sum(std::move(k), spec.weight, "make_psf");
        }
    }
    throw InvalidArgument("make_psf: unknown kind");
}

RealStack embed_kernel(const RealStack& kernel, int n) {
    if (kernel.depth != 1)
        throw DimensionError("embed_kernel: kernel must be a single slice");
    if (kernel.rows > n || kernel.cols > n)
        throw DimensionError("embed_kernel: kernel support exceeds grid");
    RealStack out(n, n, 1);
    const int cr = kernel.rows / 2, cc = kernel.cols / 2;
    for (int r = 0; r < kernel.rows; ++r)
        for (int c = 0; c < kernel.cols; ++c) {
            const int rr = ((r - cr) % n + n) % n;
            const int wc = ((c - cc) % n + n) % n;
            out.at(rr, wc, 0) += kernel.at(r, c, 0);
        }
    return out;
}

BlurBank::BlurBank(std::vector<std::vector<RealStack>> kernels, int n)
    : n_(n), kernels_(std::move(kernels)) {
    if (n < 1) throw DimensionError("BlurBank: grid size must be >= 1");
    num_measurements_ = static_cast<int>(kernels_.size());
    if (num_measurements_ == 0) throw DimensionError("BlurBank: empty kernel grid");
    num_sources_ = static_cast<int>(kernels_[0].size());
    if (num_sources_ == 0) throw DimensionError("BlurBank: empty kernel row");

    spectra_.resize(num_measurements_);
    const double to_eigenvalues = double(n);  // sqrt(n*n): unitary -> unnormalized
    for (int k = 0; k < num_measurements_; ++k) {
        if (static_cast<int>(kernels_[k].size()) != num_sources_)
            throw DimensionError("BlurBank: ragged kernel grid");
        spectra_[k].reserve(num_sources_);
        for (int s = 0; s < num_sources_; ++s) {
            ComplexStack spec = fft2(embed_kernel(kernels_[k][s], n));
            for (auto& z : spec.v) z *= to_eigenvalues;
            spectra_[k].push_back(std::move(spec));
        }
    }
}

std::string BlurBank::content_hash() const {
    uint64_t h = 1469598103934665603ull;  // FNV-1a 64
    auto mix = [&h](const void* p, size_t len) {
        const auto* b = static_cast<const unsigned char*>(p);
        for (size_t i = 0; i < len; ++i) {
            h ^= b[i];
            h *= 1099511628211ull;
        }
    };
    const int dims[3] = {num_measurements_, num_sources_, n_};
    mix(dims, sizeof dims);
    for (const auto& row : kernels_)
        for (const auto& k : row) {
            const int kd[2] = {k.rows, k.cols};
            mix(kd, sizeof kd);
            mix(k.v.data(), k.v.size() * sizeof(double));
        }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

RealStack apply_forward(const BlurBank& bank, const RealStack& x) {
    if (x.rows != bank.n() || x.cols != bank.n() || x.depth != bank.S())
        throw DimensionError("apply_forward: source stack does not match bank");
    ComplexStack xf = fft2(x);
    ComplexStack yf(bank.n(), bank.n(), bank.K());
    const size_t m = xf.slice_size();
    for (int k = 0; k < bank.K(); ++k) {
        auto* out = yf.slice(k);
        for (int s = 0; s < bank.S(); ++s) {
            const auto* lam = bank.spectrum(k, s).data();
            const auto* in = xf.slice(s);
            for (size_t i = 0; i < m; ++i) out[i] += lam[i] * in[i];
        }
    }
    return ifft2_real(yf);
}

RealStack apply_adjoint(const BlurBank& bank, const RealStack& y) {
    if (y.rows != bank.n() || y.cols != bank.n() || y.depth != bank.K())
        throw DimensionError("apply_adjoint: measurement stack does not match bank");
    ComplexStack yf = fft2(y);
    ComplexStack xf(bank.n(), bank.n(), bank.S());
    const size_t m = yf.slice_size();
    for (int s = 0; s < bank.S(); ++s) {
        auto* out = xf.slice(s);
        for (int k = 0; k < bank.K(); ++k) {
            const auto* lam = bank.spectrum(k, s).data();
            const auto* in = yf.slice(k);
            for (size_t i = 0; i < m; ++i) out[i] += std::conj(lam[i]) * in[i];
        }
    }
    return ifft2_real(xf);
}

SimulationResult simulate_measurements(const BlurBank& bank, const RealStack& x,
                                       const NoiseSpec& noise) {
    SimulationResult res;
    res.y = apply_forward(bank, x);
    res.sigma.assign(bank.K(), 0.0);
    if (noise.noiseless()) return res;  // exact forward image, RNG untouched

    const double n2 = double(bank.n()) * bank.n();
    const double snr_lin = std::pow(10.0, noise.snr_db / 10.0);

    if (noise.per_measurement) {
        for (int k = 0; k < bank.K(); ++k) {
            double energy = 0.0;
            const double* p = res.y.slice(k);
            for (size_t i = 0; i < res.y.slice_size(); ++i) energy += p[i] * p[i];
            if (energy <= 0.0)
                throw DegenerateSignalError(
                    "simulate_measurements: zero-energy measurement with finite SNR");
            res.sigma[k] = std::sqrt(energy / (n2 * snr_lin));
        }
    } else {
        const double energy = norm2_sq(res.y);
        if (energy <= 0.0)
            throw DegenerateSignalError(
                "simulate_measurements: zero-energy measurements with finite SNR");
        const double sigma = std::sqrt(energy / (bank.K() * n2 * snr_lin));
        for (double& s : res.sigma) s = sigma;
    }

    Rng rng(noise.seed);
    for (int k = 0; k < bank.K(); ++k) {
        double* p = res.y.slice(k);
        for (size_t i = 0; i < res.y.slice_size(); ++i)
            p[i] += res.sigma[k] * rng.gaussian();
    }
    return res;
}

void save_bank(const BlurBank& bank, const std::string& dir) {
    namespace fs = std::filesystem;
    fs::create_directories(dir);
    nlohmann::json manifest;
    manifest["K"] = bank.K();
    manifest["S"] = bank.S();
    manifest["n"] = bank.n();
    auto paths = nlohmann::json::array();
    auto weights = nlohmann::json::array();
    for (int k = 0; k < bank.K(); ++k) {
        auto prow = nlohmann::json::array();
        auto wrow = nlohmann::json::array();
        for (int s = 0; s < bank.S(); ++s) {
            char name[64];
            std::snprintf(name, sizeof name, "kernel_k%02d_s%02d.civs", k, s);
            write_container((fs::path(dir) / name).string(), bank.kernel(k, s));
            prow.push_back(name);
            wrow.push_back(1.0);
        }
        paths.push_back(prow);
        weights.push_back(wrow);
    }
    manifest["kernels"] = paths;
    manifest["weights"] = weights;
    std::ofstream f(fs::path(dir) / "manifest.json");
    if (!f) throw IoError("save_bank: cannot write manifest in " + dir);
    f << manifest.dump(2) << "\n";
}

BlurBank load_bank(const std::string& dir) {
    namespace fs = std::filesystem;
    const auto manifest_path = fs::path(dir) / "manifest.json";
    std::ifstream f(manifest_path);
    if (!f) throw IoError("load_bank: cannot open " + manifest_path.string());
    nlohmann::json manifest;
    try {
        f >> manifest;
    } catch (const nlohmann::json::exception& e) {
        throw IoError("load_bank: bad manifest JSON: " + std::string(e.what()));
    }
    const int K = manifest.at("K").get<int>();
    const int S = manifest.at("S").get<int>();
    const int n = manifest.at("n").get<int>();
    const auto& paths = manifest.at("kernels");
    const bool have_w = manifest.contains("weights");
    std::vector<std::vector<RealStack>> kernels(K);
    for (int k = 0; k < K; ++k) {
        for (int s = 0; s < S; ++s) {
            const std::string rel = paths.at(k).at(s).get<std::string>();
            RealStack kern = read_container((fs::path(dir) / rel).string());
            if (have_w) {
                const double w = manifest["weights"].at(k).at(s).get<double>();
                scale_inplace(kern, w);
            }
            kernels[k].push_back(std::move(kern));
        }
    }
    return BlurBank(std::move(kernels), n);
}

}  // namespace civs
