#include "civs/config.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <initializer_list>
#include <sstream>

#include "json.hpp"

namespace civs {

namespace {

using nlohmann::json;

// Best-effort line anchoring: the first occurrence of the quoted key in the
// raw text. Good enough for hand-written configs, where keys rarely repeat.
struct Ctx {
    const std::string* text = nullptr;
    const std::string* source = nullptr;

    int line_of(const std::string& key) const {
        const std::string needle = "\"" + key + "\"";
        const size_t pos = text->find(needle);
        if (pos == std::string::npos) return 0;
        return 1 + int(std::count(text->begin(), text->begin() + long(pos), '\n'));
    }

    [[noreturn]] void fail(const std::string& anchor_key,
                           const std::string& msg) const {
        const int ln = line_of(anchor_key);
        std::string where = *source;
        if (ln > 0) where += ":" + std::to_string(ln);
        throw InvalidArgument(where + ": " + msg);
    }
};

const json* find(const json& obj, const char* key) {
    auto it = obj.find(key);
    return it == obj.end() ? nullptr : &*it;
}

void check_keys(const Ctx& ctx, const json& obj, const char* section,
                std::initializer_list<const char*> allowed) {
    if (!obj.is_object())
        ctx.fail(section,
                 std::string("section \"") + section + "\" must be a JSON object");
    for (auto it = obj.begin(); it != obj.end(); ++it) {
        if (std::find_if(allowed.begin(), allowed.end(), [&](const char* a) {
                return it.key() == a;
            }) == allowed.end())
            ctx.fail(it.key(), "unknown key \"" + it.key() + "\" in section \"" +
                                   section + "\"");
    }
}

double get_double(const Ctx& ctx, const json& obj, const char* key, double def) {
    const json* v = find(obj, key);
    if (!v) return def;
    if (!v->is_number())
        ctx.fail(key, std::string("\"") + key + "\" must be a number");
    return v->get<double>();
}

int get_int(const Ctx& ctx, const json& obj, const char* key, int def) {
    const json* v = find(obj, key);
    if (!v) return def;
    if (!v->is_number_integer())
        ctx.fail(key, std::string("\"") + key + "\" must be an integer");
    return v->get<int>();
}

uint64_t get_u64(const Ctx& ctx, const json& obj, const char* key, uint64_t def) {
    const json* v = find(obj, key);
    if (!v) return def;
    if (!(v->is_number_unsigned() || (v->is_number_integer() && v->get<int64_t>() >= 0)))
        ctx.fail(key, std::string("\"") + key + "\" must be a non-negative integer");
    return v->get<uint64_t>();
}

bool get_bool(const Ctx& ctx, const json& obj, const char* key, bool def) {
    const json* v = find(obj, key);
    if (!v) return def;
    if (!v->is_boolean())
        ctx.fail(key, std::string("\"") + key + "\" must be true or false");
    return v->get<bool>();
}

std::string get_string(const Ctx& ctx, const json& obj, const char* key,
                       const std::string& def) {
    const json* v = find(obj, key);
    if (!v) return def;
    if (!v->is_string())
        ctx.fail(key, std::string("\"") + key + "\" must be a string");
    return v->get<std::string>();
}

PsfSpec parse_psf(const Ctx& ctx, const json& obj, int index) {
    check_keys(ctx, obj, "forward.psfs[]",
               {"kind", "sigma_px", "radius_px", "support", "weight"});
    PsfSpec spec;
    const std::string kind = get_string(ctx, obj, "kind", "");
    if (kind == "gaussian")
        spec.kind = PsfSpec::Kind::Gaussian;
    else if (kind == "disk")
        spec.kind = PsfSpec::Kind::DiskDefocus;
    else if (kind == "delta")
        spec.kind = PsfSpec::Kind::Delta;
    else
        ctx.fail("psfs", "psf " + std::to_string(index) +
                             ": kind must be \"gaussian\", \"disk\" or \"delta\"");
    spec.sigma_px = get_double(ctx, obj, "sigma_px", spec.sigma_px);
    spec.radius_px = get_double(ctx, obj, "radius_px", spec.radius_px);
    spec.weight = get_double(ctx, obj, "weight", spec.weight);
    int support = get_int(ctx, obj, "support", 0);
    if (support == 0) {  // reasonable default support per kind
        switch (spec.kind) {
            case PsfSpec::Kind::Gaussian:
                support = 2 * int(std::ceil(3.0 * spec.sigma_px)) + 1;
                break;
            case PsfSpec::Kind::DiskDefocus:
                support = 2 * int(std::ceil(spec.radius_px)) + 3;
                break;
            case PsfSpec::Kind::Delta:
                support = 1;
                break;
        }
    }
    spec.support = support;
    return spec;
}

void parse_forward(const Ctx& ctx, const json& obj, ForwardConfig& fwd) {
    check_keys(ctx, obj, "forward",
               {"K", "S", "N", "psfs", "bank_path", "snr_db", "noise_mode", "seed"});
    fwd.K = get_int(ctx, obj, "K", fwd.K);
    fwd.S = get_int(ctx, obj, "S", fwd.S);
    fwd.N = get_int(ctx, obj, "N", fwd.N);
    if (fwd.K < 1 || fwd.S < 1 || fwd.N < 2)
        ctx.fail("forward", "forward.K and forward.S must be >= 1, forward.N >= 2");
    fwd.bank_path = get_string(ctx, obj, "bank_path", "");

    if (const json* psfs = find(obj, "psfs")) {
        if (!fwd.bank_path.empty())
            ctx.fail("psfs", "give either forward.psfs or forward.bank_path, not both");
        if (!psfs->is_array())
            ctx.fail("psfs", "\"psfs\" must be an array of kernel specs");
        if (int(psfs->size()) != fwd.K * fwd.S)
            ctx.fail("psfs", "forward.psfs needs exactly K*S = " +
                                 std::to_string(fwd.K * fwd.S) + " entries, got " +
                                 std::to_string(psfs->size()));
        for (size_t i = 0; i < psfs->size(); ++i)
            fwd.psfs.push_back(parse_psf(ctx, (*psfs)[i], int(i)));
    }

    if (const json* snr = find(obj, "snr_db")) {
        if (snr->is_string()) {
            if (snr->get<std::string>() != "noiseless")
                ctx.fail("snr_db", "\"snr_db\" must be a number or \"noiseless\"");
        } else if (snr->is_number()) {
            fwd.noise.snr_db = snr->get<double>();
        } else {
            ctx.fail("snr_db", "\"snr_db\" must be a number or \"noiseless\"");
        }
    }
    const std::string mode = get_string(ctx, obj, "noise_mode", "per-measurement");
    if (mode == "per-measurement")
        fwd.noise.per_measurement = true;
    else if (mode == "global")
        fwd.noise.per_measurement = false;
    else
        ctx.fail("noise_mode",
                 "\"noise_mode\" must be \"per-measurement\" or \"global\"");
    fwd.noise.seed = get_u64(ctx, obj, "seed", fwd.noise.seed);
}

void parse_patch_params(const Ctx& ctx, const json& obj, const char* section,
                        PatchParams& p) {
    check_keys(ctx, obj, section, {"q", "t", "stride", "mode", "wrap", "atoms"});
    p.q = get_int(ctx, obj, "q", p.q);
    p.t = get_int(ctx, obj, "t", p.t);
    p.stride = get_int(ctx, obj, "stride", p.stride);
    p.atoms = get_int(ctx, obj, "atoms", p.atoms);
    p.wrap = get_bool(ctx, obj, "wrap", p.wrap);
    const std::string mode = get_string(ctx, obj, "mode",
                                        p.per_slice ? "per-slice" : "volumetric");
    if (mode == "per-slice")
        p.per_slice = true;
    else if (mode == "volumetric")
        p.per_slice = false;
    else
        ctx.fail("mode", "patch mode must be \"per-slice\" or \"volumetric\"");
}

void parse_conv_params(const Ctx& ctx, const json& obj, const char* section,
                       ConvParams& c) {
    check_keys(ctx, obj, section, {"M", "L", "R", "mode"});
    c.M = get_int(ctx, obj, "M", c.M);
    c.L = get_int(ctx, obj, "L", c.L);
    c.R = get_int(ctx, obj, "R", c.R);
    const std::string mode = get_string(ctx, obj, "mode",
                                        c.per_slice ? "per-slice" : "volumetric");
    if (mode == "per-slice")
        c.per_slice = true;
    else if (mode == "volumetric")
        c.per_slice = false;
    else
        ctx.fail("mode", "conv mode must be \"per-slice\" or \"volumetric\"");
}

void parse_prior(const Ctx& ctx, const json& obj, PriorConfig& prior,
                 const ForwardConfig& fwd) {
    check_keys(ctx, obj, "prior",
               {"kind", "transform", "beta", "lambda", "rho0", "sigma0", "mu_tik",
                "adapt", "tau", "mu_ratio", "max_iters", "stop_tol",
                "online_dict_update", "dense_solver", "dict_path", "patch",
                "conv", "preset", "seed", "tv_inner_iters", "tv_inner_tol",
                "tv_step", "divergence_guard"});

    const std::string kind = get_string(ctx, obj, "kind", "tv");
    bool tik = false;
    prior.kind = prior_kind_from_string(kind, &tik);
    prior.tikhonov = tik;

    // The preset fills the solver fields first; explicit keys then override.
    prior.preset = get_string(ctx, obj, "preset", "");
    if (prior.preset == "2d")
        prior.solver = preset_2d(prior.kind, fwd.noise.snr_db);
    else if (prior.preset == "3d")
        prior.solver = preset_3d(prior.kind, fwd.noise.snr_db);
    else if (!prior.preset.empty())
        ctx.fail("preset", "\"preset\" must be \"2d\" or \"3d\"");

    SolverConfig& s = prior.solver;
    s.beta = get_double(ctx, obj, "beta", s.beta);
    s.lambda = get_double(ctx, obj, "lambda", s.lambda);
    s.rho0 = get_double(ctx, obj, "rho0", s.rho0);
    s.sigma0 = get_double(ctx, obj, "sigma0", s.sigma0);
    s.mu_tik = get_double(ctx, obj, "mu_tik", s.mu_tik);
    s.adapt.enabled = get_bool(ctx, obj, "adapt", s.adapt.enabled);
    s.adapt.tau = get_double(ctx, obj, "tau", s.adapt.tau);
    s.adapt.mu_ratio = get_double(ctx, obj, "mu_ratio", s.adapt.mu_ratio);
    s.max_iters = get_int(ctx, obj, "max_iters", s.max_iters);
    s.stop_tol = get_double(ctx, obj, "stop_tol", s.stop_tol);
    s.online_dict_update =
        get_bool(ctx, obj, "online_dict_update", s.online_dict_update);
    s.dense_inversion = get_bool(ctx, obj, "dense_solver", s.dense_inversion);
    s.tv.inner_iters = get_int(ctx, obj, "tv_inner_iters", s.tv.inner_iters);
    s.tv.inner_tol = get_double(ctx, obj, "tv_inner_tol", s.tv.inner_tol);
    s.tv.step = get_double(ctx, obj, "tv_step", s.tv.step);
    s.divergence_guard =
        get_double(ctx, obj, "divergence_guard", s.divergence_guard);

    if (prior.tikhonov && s.mu_tik == 0.0) s.mu_tik = 0.01;

    prior.transform = get_string(ctx, obj, "transform", prior.transform);
    prior.dict_path = get_string(ctx, obj, "dict_path", "");
    prior.seed = get_u64(ctx, obj, "seed", prior.seed);
    if (const json* p = find(obj, "patch"))
        parse_patch_params(ctx, *p, "prior.patch", prior.patch);
    if (const json* c = find(obj, "conv"))
        parse_conv_params(ctx, *c, "prior.conv", prior.conv);
}

void parse_io(const Ctx& ctx, const json& obj, IoConfig& io) {
    check_keys(ctx, obj, "io", {"input", "ground_truth", "phantom", "output_dir"});
    io.input = get_string(ctx, obj, "input", io.input);
    io.ground_truth = get_string(ctx, obj, "ground_truth", io.ground_truth);
    io.phantom = get_bool(ctx, obj, "phantom", io.phantom);
    io.output_dir = get_string(ctx, obj, "output_dir", io.output_dir);
}

void parse_train(const Ctx& ctx, const json& obj, TrainConfig& train) {
    check_keys(ctx, obj, "train",
               {"kind", "patch", "conv", "lambda", "rho0", "sigma0", "mu_tik",
                "adapt", "max_outer", "tol", "seed"});
    train.kind = get_string(ctx, obj, "kind", train.kind);
    if (train.kind != "conv" && train.kind != "patch")
        ctx.fail("kind", "train.kind must be \"conv\" or \"patch\"");
    if (const json* p = find(obj, "patch"))
        parse_patch_params(ctx, *p, "train.patch", train.patch);
    if (const json* c = find(obj, "conv"))
        parse_conv_params(ctx, *c, "train.conv", train.conv);
    train.lambda = get_double(ctx, obj, "lambda", train.lambda);
    train.rho0 = get_double(ctx, obj, "rho0", train.rho0);
    train.sigma0 = get_double(ctx, obj, "sigma0", train.sigma0);
    train.mu_tik = get_double(ctx, obj, "mu_tik", train.mu_tik);
    train.adapt = get_bool(ctx, obj, "adapt", train.adapt);
    train.max_outer = get_int(ctx, obj, "max_outer", train.max_outer);
    train.tol = get_double(ctx, obj, "tol", train.tol);
    train.seed = get_u64(ctx, obj, "seed", train.seed);
}

void parse_report(const Ctx& ctx, const json& obj, ReportConfig& rep) {
    check_keys(ctx, obj, "report", {"json", "csv", "png", "timings"});
    rep.json = get_bool(ctx, obj, "json", rep.json);
    rep.csv = get_bool(ctx, obj, "csv", rep.csv);
    rep.png = get_bool(ctx, obj, "png", rep.png);
    rep.timings = get_bool(ctx, obj, "timings", rep.timings);
}

}  // namespace

PriorKind prior_kind_from_string(const std::string& name, bool* tikhonov) {
    if (tikhonov) *tikhonov = false;
    if (name == "l1-transform") return PriorKind::L1Transform;
    if (name == "tv") return PriorKind::Tv;
    if (name == "patch-dict") return PriorKind::PatchDict;
    if (name == "conv-dict") return PriorKind::ConvDict;
    if (name == "conv-dict-tikhonov") {
        if (tikhonov) *tikhonov = true;
        return PriorKind::ConvDict;
    }
    throw InvalidArgument(
        "prior kind must be one of \"l1-transform\", \"tv\", \"patch-dict\", "
        "\"conv-dict\", \"conv-dict-tikhonov\"; got \"" + name + "\"");
}

std::string prior_kind_name(PriorKind kind) {
    switch (kind) {
        case PriorKind::L1Transform: return "l1-transform";
        case PriorKind::Tv: return "tv";
        case PriorKind::PatchDict: return "patch-dict";
        case PriorKind::ConvDict: return "conv-dict";
    }
    return "unknown";
}

RunConfig parse_run_config(const std::string& text, const std::string& source) {
    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::parse_error& e) {
        const size_t byte = std::min(e.byte, text.size());
        const int line =
            1 + int(std::count(text.begin(), text.begin() + long(byte), '\n'));
        throw InvalidArgument(source + ":" + std::to_string(line) +
                              ": invalid JSON (" + e.what() + ")");
    }

    Ctx ctx{&text, &source};
    if (!doc.is_object())
        throw InvalidArgument(source + ": top level must be a JSON object");
    check_keys(ctx, doc, "top-level", {"forward", "prior", "io", "train", "report"});

    RunConfig cfg;
    if (const json* f = find(doc, "forward")) {
        parse_forward(ctx, *f, cfg.forward);
        cfg.has_forward = true;
    }
    if (const json* p = find(doc, "prior")) {
        parse_prior(ctx, *p, cfg.prior, cfg.forward);
        cfg.has_prior = true;
    }
    if (const json* i = find(doc, "io")) {
        parse_io(ctx, *i, cfg.io);
        cfg.has_io = true;
    }
    if (const json* t = find(doc, "train")) {
        parse_train(ctx, *t, cfg.train);
        cfg.has_train = true;
    }
    if (const json* r = find(doc, "report")) parse_report(ctx, *r, cfg.report);
    return cfg;
}

RunConfig load_run_config(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw IoError("cannot open config file " + path);
    std::ostringstream ss;
    ss << f.rdbuf();
    return parse_run_config(ss.str(), path);
}

}  // namespace civs
